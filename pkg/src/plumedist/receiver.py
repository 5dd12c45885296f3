"""Transparent spherical receivers counting molecules per species."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .core import RxConfig, Vec3, distance
from .trajio import TrajectorySnapshot


@dataclass(frozen=True, eq=False)
class ObservationWindow:
    rx: RxConfig
    t0_step: int
    counts: np.ndarray  # (2, length) int64, row i-1 is species i
    true_distance: float

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != 2 or c.shape[1] < 1:
            raise ValueError("counts must have shape (2, length >= 1)")
        if (c < 0).any():
            raise ValueError("counts must be >= 0")
        object.__setattr__(self, "counts", c)

    @property
    def length(self) -> int:
        return self.counts.shape[1]

    @property
    def y1(self) -> np.ndarray:
        return self.counts[0]

    @property
    def y2(self) -> np.ndarray:
        return self.counts[1]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _inside(positions: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    d = positions - center
    return np.sqrt(np.einsum("ij,ij->i", d, d)) <= radius


def count_in_sphere(snapshot: TrajectorySnapshot, rx: RxConfig) -> np.ndarray:
    """Per-species counts ``[n1, n2]`` of particles with ||x - x_rx|| <= r_rx."""
    inside = _inside(snapshot.positions, rx.position.as_array(), rx.radius)
    sp = snapshot.species[inside]
    return np.array([(sp == 1).sum(), (sp == 2).sum()], dtype=np.int64)


def count_many(snapshot: TrajectorySnapshot, centers: np.ndarray, radius: float) -> np.ndarray:
    """Counts for many receivers of equal radius, shape (n_rx, 2).

    A k-d tree proposes candidates with a slightly inflated radius; each
    candidate is then tested with the same expression as ``count_in_sphere``
    so both paths agree on boundary cases.
    """
    centers = np.asarray(centers, dtype=float).reshape(-1, 3)
    out = np.zeros((centers.shape[0], 2), dtype=np.int64)
    if len(snapshot) == 0:
        return out
    tree = cKDTree(snapshot.positions)
    cand = tree.query_ball_point(centers, radius * (1 + 1e-9) + 1e-12)
    for j, idx in enumerate(cand):
        if not idx:
            continue
        idx = np.asarray(idx)
        hit = idx[_inside(snapshot.positions[idx], centers[j], radius)]
        sp = snapshot.species[hit]
        out[j, 0] = (sp == 1).sum()
        out[j, 1] = (sp == 2).sum()
    return out


def count_table(snapshots: Iterable[TrajectorySnapshot], receivers: Sequence[RxConfig]) -> tuple[np.ndarray, np.ndarray]:
    """Stream snapshots once and count every receiver at every step.

    Returns ``(steps, counts)`` with counts of shape (n_steps, n_rx, 2).
    Receivers sharing one radius use a single tree query per snapshot.
    """
    centers = np.array([rx.position.as_list() for rx in receivers]).reshape(-1, 3)
    radii = np.array([rx.radius for rx in receivers])
    steps, rows = [], []
    for snap in snapshots:
        if len(radii) and np.all(radii == radii[0]):
            rows.append(count_many(snap, centers, radii[0]))
        else:
            rows.append(np.array([count_in_sphere(snap, rx) for rx in receivers]).reshape(-1, 2))
        steps.append(snap.step)
    return np.array(steps, dtype=np.int64), np.array(rows, dtype=np.int64).reshape(len(rows), len(receivers), 2)


def sample_window(snapshots: Sequence[TrajectorySnapshot], rx: RxConfig, t0_step: int, length: int,
                  tx_position) -> ObservationWindow:
    """Count series at ``rx`` over steps ``t0_step .. t0_step + length - 1``."""
    if length < 1:
        raise ValueError("window length must be >= 1")
    by_step = {s.step: s for s in snapshots}
    need = range(t0_step, t0_step + length)
    missing = [k for k in need if k not in by_step]
    if missing:
        raise IndexError(f"window [{t0_step}, {t0_step + length}) not covered; missing step {missing[0]}")
    counts = np.stack([count_in_sphere(by_step[k], rx) for k in need], axis=1)
    return ObservationWindow(rx, t0_step, counts, distance(Vec3.of(tx_position), rx.position))
