"""Domain types and geometry shared by the simulator, receivers and harness.

Lengths are in the normalized units of the turbulence dataset (multiples of
pi) and times in Kolmogorov times; no unit conversion happens anywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPECIES = (1, 2)


class ConfigError(ValueError):
    """Raised for invalid or inconsistent configuration values."""


def _finite(name, *values):
    for v in values:
        if not math.isfinite(v):
            raise ConfigError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        for k in ("x", "y", "z"):
            object.__setattr__(self, k, float(getattr(self, k)))
        _finite("Vec3", self.x, self.y, self.z)

    @classmethod
    def of(cls, v) -> "Vec3":
        if isinstance(v, Vec3):
            return v
        x, y, z = v
        return cls(x, y, z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.z]


def check_species(s: int) -> int:
    if s not in SPECIES:
        raise ConfigError(f"species must be 1 or 2, got {s!r}")
    return int(s)


@dataclass(frozen=True)
class Particle:
    species: int
    position: Vec3
    release_step: int
    alive: bool = True

    def __post_init__(self):
        check_species(self.species)
        if self.release_step < 0:
            raise ConfigError("release_step must be >= 0")


@dataclass(frozen=True)
class TxConfig:
    """Spherical source releasing ``release_per_step`` molecules each step."""

    position: Vec3 = field(default_factory=lambda: Vec3(0.0, 0.0, 0.0))
    radius: float = 0.05 * math.pi
    release_per_step: int = 100
    p1: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "position", Vec3.of(self.position))
        _finite("TxConfig", self.radius, self.p1)
        if self.radius <= 0:
            raise ConfigError("tx radius must be > 0")
        if int(self.release_per_step) != self.release_per_step or self.release_per_step < 1:
            raise ConfigError("release_per_step must be an integer >= 1")
        if not 0.0 <= self.p1 <= 1.0:
            raise ConfigError("p1 must lie in [0, 1]")

    @property
    def p2(self) -> float:
        return 1.0 - self.p1

    def to_dict(self) -> dict:
        return {"position": self.position.as_list(), "radius": self.radius,
                "release_per_step": int(self.release_per_step), "p1": self.p1}

    @classmethod
    def from_dict(cls, d: dict) -> "TxConfig":
        return cls(Vec3.of(d["position"]), float(d["radius"]),
                   int(d["release_per_step"]), float(d["p1"]))


@dataclass(frozen=True)
class RxConfig:
    position: Vec3
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "position", Vec3.of(self.position))
        _finite("RxConfig", self.radius)
        if self.radius <= 0:
            raise ConfigError("rx radius must be > 0")


@dataclass(frozen=True)
class SurrogateParams:
    """Turbulence surrogate: per-particle OU fluctuations plus shared meander.

    Correlation times share the time unit of ``dt``.
    """

    sigma_u: float
    tau_L: float
    meander_amp: float
    meander_tau: float

    def __post_init__(self):
        _finite("SurrogateParams", self.sigma_u, self.tau_L, self.meander_amp, self.meander_tau)
        if self.sigma_u < 0 or self.meander_amp < 0:
            raise ConfigError("sigma_u and meander_amp must be >= 0")
        if self.tau_L <= 0 or self.meander_tau <= 0:
            raise ConfigError("tau_L and meander_tau must be > 0")

    @classmethod
    def default_for(cls, mean_wind: float, dt: float = 1.0) -> "SurrogateParams":
        return cls(sigma_u=0.5 * mean_wind, tau_L=10.0 * dt,
                   meander_amp=0.3 * mean_wind, meander_tau=20.0 * dt)

    def to_dict(self) -> dict:
        return {"sigma_u": self.sigma_u, "tau_L": self.tau_L,
                "meander_amp": self.meander_amp, "meander_tau": self.meander_tau}


DEFAULT_DOMAIN_MIN = Vec3(-0.25 * math.pi, -1.5 * math.pi, -1.5 * math.pi)
DEFAULT_DOMAIN_MAX = Vec3(7.0 * math.pi, 1.5 * math.pi, 1.5 * math.pi)


@dataclass(frozen=True)
class SimParams:
    dt: float = 1.0
    mean_wind: float = 0.2
    domain_min: Vec3 = DEFAULT_DOMAIN_MIN
    domain_max: Vec3 = DEFAULT_DOMAIN_MAX
    p_deg: tuple[float, float] = (0.0, 0.03)
    surrogate: SurrogateParams | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "domain_min", Vec3.of(self.domain_min))
        object.__setattr__(self, "domain_max", Vec3.of(self.domain_max))
        object.__setattr__(self, "p_deg", tuple(float(p) for p in self.p_deg))
        _finite("SimParams", self.dt, self.mean_wind, *self.p_deg)
        if self.dt <= 0:
            raise ConfigError("dt must be > 0")
        if self.mean_wind < 0:
            raise ConfigError("mean_wind must be >= 0")
        if len(self.p_deg) != 2 or not all(0.0 <= p <= 1.0 for p in self.p_deg):
            raise ConfigError("p_deg needs two probabilities in [0, 1]")
        if self.surrogate is None:
            object.__setattr__(self, "surrogate", SurrogateParams.default_for(self.mean_wind, self.dt))
        if self.surrogate.tau_L < self.dt or self.surrogate.meander_tau < self.dt:
            raise ConfigError("surrogate correlation times must be >= dt")
        if not np.all(self.domain_min.as_array() < self.domain_max.as_array()):
            raise ConfigError("domain is degenerate: domain_min must be < domain_max componentwise")


def distance(a, b) -> float:
    """Euclidean distance between two points."""
    d = Vec3.of(a).as_array() - Vec3.of(b).as_array()
    return float(math.sqrt(d @ d))


def ball_points(center: np.ndarray, radius: float, normals: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Map standard normals (n, 3) and uniforms (n,) to points uniform in a ball."""
    norms = np.linalg.norm(normals, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    r = radius * np.cbrt(u)[:, None]
    return center + r * normals / norms


def sample_uniform_in_sphere(center, radius: float, rng: np.random.Generator, size: int | None = None):
    """Points uniformly distributed in the ball of ``radius`` around ``center``.

    Returns a ``Vec3`` when ``size`` is None, else an array of shape (size, 3).
    """
    if radius <= 0:
        raise ConfigError("radius must be > 0")
    c = Vec3.of(center).as_array()
    n = 1 if size is None else size
    pts = ball_points(c, radius, rng.standard_normal((n, 3)), rng.random(n))
    return Vec3.of(pts[0]) if size is None else pts
