"""Lagrangian plume simulator with species-dependent degradation.

The turbulent velocity is a surrogate: each particle carries an
Ornstein-Uhlenbeck velocity fluctuation, and the whole plume shares a slowly
varying crosswind meander velocity (an OU process in y and z). Every random
draw comes from a counter-based stream keyed by particle id and step, so the
particles can be updated in any order, and changing the degradation
probabilities leaves the trajectories of surviving particles untouched.

Per step the order is: release, meander + fluctuation update, advection,
degradation, domain culling, snapshot.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .core import Particle, SimParams, SurrogateParams, TxConfig, Vec3, ball_points
from .rng import CounterStream
from .trajio import TrajectorySnapshot

__all__ = ["ParticleState", "SurrogateParams", "SimStreams", "ou_update", "step_fluctuation",
           "advect", "apply_degradation", "release", "PlumeSimulator", "simulate", "iter_simulation"]


@dataclass(frozen=True)
class ParticleState:
    particle: Particle
    velocity_fluct: Vec3


class SimStreams:
    """The named counter streams one simulation draws from."""

    def __init__(self, seed: int):
        self.release = CounterStream(seed, "release")
        self.species = CounterStream(seed, "species")
        self.turbulence = CounterStream(seed, "turbulence")
        self.meander = CounterStream(seed, "meander")
        self.degradation = CounterStream(seed, "degradation")


def ou_update(v: np.ndarray, sigma: float, tau: float, dt: float, xi: np.ndarray) -> np.ndarray:
    """Euler-Maruyama OU step: v(1 - dt/tau) + sigma sqrt(2 dt/tau) xi."""
    h = dt / tau
    return v * (1.0 - h) + sigma * np.sqrt(2.0 * h) * xi


def step_fluctuation(velocity, meander, params: SurrogateParams, dt: float, xi):
    """Advance per-particle fluctuations and add the shared meander.

    ``velocity`` is the particle-attached OU state, shape (3,) or (n, 3), and
    ``xi`` standard normal draws of the same shape. Returns the new OU state
    and the total turbulent velocity (OU state + meander).
    """
    v = ou_update(np.asarray(velocity, dtype=float), params.sigma_u, params.tau_L, dt, np.asarray(xi))
    return v, v + np.asarray(meander, dtype=float)


def advect(positions, fluct, mean_wind: float, dt: float) -> np.ndarray:
    """Explicit Euler step of dx/dt = mean wind along +x + turbulent velocity."""
    out = np.array(positions, dtype=float) + dt * np.asarray(fluct, dtype=float)
    out[..., 0] += dt * mean_wind
    return out


def apply_degradation(species: np.ndarray, alive: np.ndarray, p_deg, u: np.ndarray) -> np.ndarray:
    """Alive mask after one step of first-order degradation.

    A live particle of species i dies when its uniform draw ``u`` falls below
    ``p_deg[i-1]``; dead particles stay dead.
    """
    p = np.asarray(p_deg, dtype=float)[np.asarray(species, dtype=np.int64) - 1]
    return np.asarray(alive, dtype=bool) & ~(np.asarray(u) < p)


@dataclass
class ReleaseBatch:
    ids: np.ndarray
    species: np.ndarray
    positions: np.ndarray
    release_step: int


def release(tx: TxConfig, step: int, first_id: int, streams: SimStreams) -> ReleaseBatch:
    """``tx.release_per_step`` new particles uniform in the source ball.

    Species 1 is drawn with probability ``tx.p1``, species 2 otherwise.
    """
    ids = np.arange(first_id, first_id + tx.release_per_step, dtype=np.uint64)
    species = np.where(streams.species.uniform(ids, 0) < tx.p1, 1, 2).astype(np.uint8)
    pos = ball_points(tx.position.as_array(), tx.radius,
                      streams.release.normal(ids, 0, 3), streams.release.uniform(ids, 0, lane=4))
    return ReleaseBatch(ids, species, pos, step)


class PlumeSimulator:
    """Stateful stepper; ``run`` yields one snapshot per step.

    Bookkeeping counters (``n_released``, ``n_degraded``, ``n_culled``)
    satisfy ``alive == n_released - n_degraded - n_culled`` after every step.
    """

    def __init__(self, tx: TxConfig, params: SimParams):
        self.tx = tx
        self.params = params
        self.streams = SimStreams(params.seed)
        self.step = 0
        self.ids = np.zeros(0, dtype=np.uint64)
        self.species = np.zeros(0, dtype=np.uint8)
        self.release_step = np.zeros(0, dtype=np.int64)
        self.pos = np.zeros((0, 3))
        self.vel = np.zeros((0, 3))
        s = params.surrogate
        self.meander = np.zeros(3)
        self.meander[1:] = s.meander_amp * self.streams.meander.normal(np.array([1]), 0, 2)[0]
        self.n_released = self.n_degraded = self.n_culled = 0
        self._lo = params.domain_min.as_array()
        self._hi = params.domain_max.as_array()
        self._p_deg = np.array(params.p_deg)

    def __len__(self) -> int:
        return self.ids.shape[0]

    def advance(self) -> TrajectorySnapshot:
        p, s, st, l = self.params, self.params.surrogate, self.streams, self.step

        batch = release(self.tx, l, self.n_released, st)
        # new particles start from the stationary fluctuation distribution
        v0 = s.sigma_u * st.release.normal(batch.ids, 0, 3, lane0=6)
        self.ids = np.concatenate([self.ids, batch.ids])
        self.species = np.concatenate([self.species, batch.species])
        self.release_step = np.concatenate([self.release_step, np.full(len(batch.ids), l, dtype=np.int64)])
        self.pos = np.concatenate([self.pos, batch.positions])
        self.vel = np.concatenate([self.vel, v0])
        self.n_released += len(batch.ids)

        xi_m = st.meander.normal(np.array([0]), l, 2)[0]
        self.meander[1:] = ou_update(self.meander[1:], s.meander_amp, s.meander_tau, p.dt, xi_m)
        self.vel, fluct = step_fluctuation(self.vel, self.meander, s, p.dt, st.turbulence.normal(self.ids, l, 3))
        self.pos = advect(self.pos, fluct, p.mean_wind, p.dt)

        alive = apply_degradation(self.species, np.ones(len(self.ids), bool), self._p_deg,
                                  st.degradation.uniform(self.ids, l))
        inside = np.all((self.pos >= self._lo) & (self.pos <= self._hi), axis=1)
        self.n_degraded += int((~alive).sum())
        self.n_culled += int((alive & ~inside).sum())
        keep = alive & inside
        if not keep.all():
            self.ids, self.species, self.release_step = self.ids[keep], self.species[keep], self.release_step[keep]
            self.pos, self.vel = self.pos[keep], self.vel[keep]

        self.step += 1
        return TrajectorySnapshot(l, self.species.copy(), self.release_step.copy(), self.pos.copy())

    def run(self, n_steps: int) -> Iterator[TrajectorySnapshot]:
        for _ in range(n_steps):
            yield self.advance()


def iter_simulation(tx: TxConfig, params: SimParams, n_steps: int) -> Iterator[TrajectorySnapshot]:
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    return PlumeSimulator(tx, params).run(n_steps)


def simulate(tx: TxConfig, params: SimParams, n_steps: int) -> list[TrajectorySnapshot]:
    """Run a full simulation and keep every snapshot in memory."""
    return list(iter_simulation(tx, params, n_steps))
