"""Closed-form ratio-based distance estimator, its velocity calibration, and chi."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import ConfigError, Vec3
from .trajio import TrajectorySnapshot


class EstimationError(ValueError):
    pass


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class LcParams:
    v: float
    r0: float
    p_deg2: float
    d_max: float

    def __post_init__(self):
        if not (self.v > 0 and self.r0 > 0 and self.d_max > 0):
            raise ConfigError("v, r0 and d_max must be > 0")
        if not 0.0 < self.p_deg2 < 1.0:
            raise ConfigError("p_deg2 must lie strictly inside (0, 1)")

    @classmethod
    def from_mixture(cls, v: float, p1: float, p_deg2: float, d_max: float) -> "LcParams":
        if not 0.0 < p1 < 1.0:
            raise ConfigError("the ratio estimator needs both species released (0 < p1 < 1)")
        return cls(v, (1.0 - p1) / p1, p_deg2, d_max)


def lc_estimate(r_obs, params: LcParams):
    """Distance from the observed species-2/species-1 abundance ratio.

    Inverts r_obs = r0 (1 - p_deg2)^(d / v) and clamps to [0, d_max].
    Accepts a scalar or an array.
    """
    r = np.asarray(r_obs, dtype=float)
    if np.any(~(r > 0)):
        raise EstimationError("r_obs must be > 0")
    raw = params.v * (np.log(r) - math.log(params.r0)) / math.log1p(-params.p_deg2)
    d = np.clip(raw, 0.0, params.d_max)
    return float(d) if d.ndim == 0 else d


def fit_slope_through_origin(x, y) -> tuple[float, float]:
    """Least-squares slope of y = v x and its R^2 (against the mean of y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise EstimationError("need at least 2 points")
    acc = _SlopeAccumulator()
    acc.add(x, y)
    return acc.result()


class _SlopeAccumulator:
    def __init__(self):
        self.n = 0
        self.sxx = self.sxy = self.sy = self.syy = 0.0

    def add(self, x, y):
        self.n += x.size
        self.sxx += float(x @ x)
        self.sxy += float(x @ y)
        self.sy += float(y.sum())
        self.syy += float(y @ y)

    def result(self) -> tuple[float, float]:
        if self.n < 2 or self.sxx == 0:
            raise EstimationError(f"need at least 2 points with nonzero travel time, have {self.n}")
        v = self.sxy / self.sxx
        ss_res = self.syy - 2 * v * self.sxy + v * v * self.sxx
        ss_tot = self.syy - self.sy ** 2 / self.n
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
        return v, r2


@dataclass(frozen=True)
class VelocityFit:
    v: float
    r2: float
    n_points: int


def fit_velocity_scale(snapshots: Iterable[TrajectorySnapshot], source=(0.0, 0.0, 0.0),
                       species: int | None = 1, every: int = 1) -> VelocityFit:
    """Slope of distance-to-source against travel time, through the origin.

    Travel time counts the transport steps since release (1 on the release
    step). Only species-1 particles are pooled by default, since they do not
    degrade. ``every`` keeps one snapshot in ``every``.
    """
    src = Vec3.of(source).as_array()
    acc = _SlopeAccumulator()
    for k, snap in enumerate(snapshots):
        if k % every:
            continue
        sel = slice(None) if species is None else snap.species == species
        age = snap.age[sel].astype(float)
        d = np.linalg.norm(snap.positions[sel] - src, axis=1)
        acc.add(age, d)
    v, r2 = acc.result()
    if not v > 0:
        raise EstimationError(f"fitted velocity scale is not positive ({v})")
    return VelocityFit(v, r2, acc.n)


def chi_error(estimates, truths) -> float:
    """Squared error normalized by that of always guessing the mean truth."""
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truths, dtype=float)
    if est.shape != tru.shape or tru.size < 2:
        raise MetricError("need equal-length inputs with at least 2 samples")
    denom = float(((tru - tru.mean()) ** 2).sum())
    if denom == 0.0:
        raise MetricError("chi is undefined when all true distances are equal")
    return float(((est - tru) ** 2).sum()) / denom
