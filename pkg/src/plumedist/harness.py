"""Experimental protocol: receivers, windows, splits, experiments, sweeps.

One long simulation per scenario feeds every observation window. The
simulation is streamed once; per-step receiver counts and the velocity-scale
fit are accumulated on the fly, so no snapshot sequence is held in memory.
"""
from __future__ import annotations

import csv
import dataclasses
import itertools
import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import yaml

from .core import ConfigError, RxConfig, SimParams, SurrogateParams, TxConfig, Vec3, distance
from .estimators import LcParams, _SlopeAccumulator, chi_error, lc_estimate
from .features import DEFAULT_EPS, feature_matrix, normalize_mask
from .mlp import TrainConfig, mlp_forward, train
from .plume import PlumeSimulator
from .receiver import ObservationWindow, count_many
from .rng import generator
from .trajio import TrajectorySnapshot

log = logging.getLogger(__name__)

PI = math.pi
Z_FEATURES = ("z1", "z2", "z3", "z4", "z5", "z6")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario2"
    p1: float = 0.34
    p_deg: tuple[float, float] = (0.0, 0.03)
    discard_empty: bool | None = None
    n_receivers: int = 1000
    rx_radius: float = 0.1 * PI
    rx_region_min: tuple[float, float, float] = (0.0, -1.5 * PI, -1.5 * PI)
    rx_region_max: tuple[float, float, float] = (7.0 * PI, 1.5 * PI, 1.5 * PI)
    window_length: int = 100
    t0_min: int = 100
    t0_max: int = 800
    n_windows: int = 10000
    split_ratio: tuple[int, int] = (3, 1)
    masks: tuple[tuple[str, ...], ...] = (("r_obs",),)
    estimators: tuple[str, ...] = ("mlp",)
    epsilon: float = DEFAULT_EPS
    seed: int = 0
    # simulator
    dt: float = 1.0
    mean_wind: float = 0.2
    release_per_step: int = 400
    tx_position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    tx_radius: float = 0.05 * PI
    domain_min: tuple[float, float, float] = (-0.25 * PI, -1.5 * PI, -1.5 * PI)
    domain_max: tuple[float, float, float] = (7.0 * PI, 1.5 * PI, 1.5 * PI)
    surrogate: dict | None = None
    calib_every: int = 10
    # learning
    train: dict = field(default_factory=dict)
    sweep_p_deg2: tuple[float, ...] = (0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 0.9)

    def __post_init__(self):
        for k in ("p_deg", "split_ratio", "rx_region_min", "rx_region_max", "tx_position",
                  "domain_min", "domain_max", "estimators", "sweep_p_deg2"):
            object.__setattr__(self, k, tuple(getattr(self, k)))
        object.__setattr__(self, "masks", tuple(normalize_mask(m) for m in self.masks))
        if not 0.0 <= self.p1 <= 1.0:
            raise ConfigError("p1 must lie in [0, 1]")
        if self.window_length < 1 or self.n_windows < 0 or self.n_receivers < 1:
            raise ConfigError("window_length, n_receivers must be >= 1 and n_windows >= 0")
        if not 0 <= self.t0_min <= self.t0_max:
            raise ConfigError("need 0 <= t0_min <= t0_max")
        if len(self.split_ratio) != 2 or min(self.split_ratio) <= 0:
            raise ConfigError("split_ratio needs two positive parts")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be > 0")
        bad = [e for e in self.estimators if e not in ("mlp", "lc", "mean")]
        if bad:
            raise ConfigError(f"unknown estimators {bad}")
        self.sim_params()
        self.tx_config()
        TrainConfig(**self.train_kwargs())

    @property
    def drop_empty(self) -> bool:
        """Zero-molecule windows are dropped by default only for single-species sources."""
        return self.p1 == 1.0 if self.discard_empty is None else self.discard_empty

    @property
    def n_sim_steps(self) -> int:
        return self.t0_max + self.window_length

    def tx_config(self) -> TxConfig:
        return TxConfig(Vec3.of(self.tx_position), self.tx_radius, self.release_per_step, self.p1)

    def sim_params(self) -> SimParams:
        sur = SurrogateParams(**self.surrogate) if self.surrogate else None
        return SimParams(self.dt, self.mean_wind, Vec3.of(self.domain_min), Vec3.of(self.domain_max),
                         self.p_deg, sur, self.seed)

    def train_kwargs(self) -> dict:
        return {"seed": self.seed, **self.train}

    def train_config(self) -> TrainConfig:
        return TrainConfig(**self.train_kwargs())

    def replace(self, **kw) -> "ScenarioConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return json.loads(json.dumps(d))

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "masks" in d:
            d["masks"] = tuple(tuple(m) if not isinstance(m, str) else m for m in d["masks"])
        try:
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None


def scenario1(**kw) -> ScenarioConfig:
    base = dict(name="scenario1", p1=1.0, p_deg=(0.0, 0.0), masks=(Z_FEATURES,))
    base.update(kw)
    return ScenarioConfig(**base)


def scenario2(**kw) -> ScenarioConfig:
    base = dict(name="scenario2", p1=0.34, p_deg=(0.0, 0.03), masks=(("r_obs",),))
    base.update(kw)
    return ScenarioConfig(**base)


def load_config(path, seed: int | None = None) -> ScenarioConfig:
    with open(path) as f:
        d = yaml.safe_load(f) or {}
    if not isinstance(d, dict):
        raise ConfigError("config file must be a key/value mapping")
    if seed is not None:
        d["seed"] = seed
    return ScenarioConfig.from_dict(d)


# ---------------------------------------------------------------- receivers

def place_receivers(config: ScenarioConfig, rng: np.random.Generator | None = None) -> list[RxConfig]:
    """Receivers uniform in the downwind cuboid."""
    rng = rng or generator(config.seed, "receivers")
    lo, hi = np.array(config.rx_region_min), np.array(config.rx_region_max)
    pts = lo + (hi - lo) * rng.random((config.n_receivers, 3))
    return [RxConfig(Vec3.of(p), config.rx_radius) for p in pts]


# --------------------------------------------------------------- simulation

@dataclass
class SimulationProducts:
    """Everything downstream needs from one simulation run."""

    steps: np.ndarray
    counts: np.ndarray  # (n_steps, n_rx, 2)
    receivers: list[RxConfig]
    velocity: float
    velocity_r2: float
    alive: np.ndarray  # particles alive after each step

    def window(self, rx_index: int, t0: int, length: int, tx_position) -> ObservationWindow:
        c = self.counts[t0:t0 + length, rx_index, :].T
        rx = self.receivers[rx_index]
        return ObservationWindow(rx, t0, c, distance(tx_position, rx.position))


def tabulate(snapshots: Iterable[TrajectorySnapshot], receivers: Sequence[RxConfig], source=(0, 0, 0),
             calib_every: int = 10) -> SimulationProducts:
    centers = np.array([r.position.as_list() for r in receivers]).reshape(-1, 3)
    radius = receivers[0].radius if receivers else 1.0
    if any(r.radius != radius for r in receivers):
        raise ConfigError("tabulate expects receivers of equal radius")
    src = Vec3.of(source).as_array()
    acc = _SlopeAccumulator()
    steps, rows, alive = [], [], []
    for k, snap in enumerate(snapshots):
        rows.append(count_many(snap, centers, radius))
        steps.append(snap.step)
        alive.append(len(snap))
        if k % calib_every == 0:
            sel = snap.species == 1
            acc.add(snap.age[sel].astype(float), np.linalg.norm(snap.positions[sel] - src, axis=1))
    try:
        v, r2 = acc.result()
    except ValueError:
        v, r2 = float("nan"), float("nan")
    if steps != list(range(len(steps))):
        raise ConfigError("snapshots must cover consecutive steps from 0")
    return SimulationProducts(np.array(steps), np.array(rows, dtype=np.int64).reshape(len(rows), len(receivers), 2),
                              list(receivers), v, r2, np.array(alive))


_CACHE: dict = {}


def simulate_products(config: ScenarioConfig, use_cache: bool = True) -> SimulationProducts:
    key = json.dumps({k: v for k, v in config.to_dict().items()
                      if k not in ("name", "masks", "estimators", "train", "n_windows", "split_ratio",
                                   "epsilon", "discard_empty", "sweep_p_deg2")}, sort_keys=True)
    if use_cache and key in _CACHE:
        return _CACHE[key]
    receivers = place_receivers(config)
    sim = PlumeSimulator(config.tx_config(), config.sim_params())
    prod = tabulate(sim.run(config.n_sim_steps), receivers, config.tx_position, config.calib_every)
    if use_cache:
        _CACHE.clear()
        _CACHE[key] = prod
    return prod


# ------------------------------------------------------------------ dataset

@dataclass
class Dataset:
    windows: list[ObservationWindow]
    n_drawn: int
    n_discarded: int
    draws: np.ndarray  # (n_drawn, 2): receiver index, t0

    @property
    def distances(self) -> np.ndarray:
        return np.array([w.true_distance for w in self.windows])


def draw_windows(config: ScenarioConfig, n_receivers: int, rng: np.random.Generator | None = None) -> np.ndarray:
    rng = rng or generator(config.seed, "dataset")
    rx = rng.integers(0, n_receivers, size=config.n_windows)
    t0 = rng.integers(config.t0_min, config.t0_max + 1, size=config.n_windows)
    return np.stack([rx, t0], axis=1)


def build_dataset(source, config: ScenarioConfig, receivers: Sequence[RxConfig] | None = None) -> Dataset:
    """Draw observation windows as (random receiver, random start step) pairs.

    ``source`` is either ``SimulationProducts`` or an iterable of snapshots
    starting at step 0. Zero-molecule windows are dropped (not redrawn) when
    ``config.drop_empty``.
    """
    if not isinstance(source, SimulationProducts):
        receivers = receivers if receivers is not None else place_receivers(config)
        source = tabulate(source, receivers, config.tx_position, config.calib_every)
    if len(source.steps) < config.n_sim_steps:
        raise ConfigError(f"snapshots cover {len(source.steps)} steps, need {config.n_sim_steps}")
    draws = draw_windows(config, len(source.receivers))
    windows, dropped = [], 0
    for rx, t0 in draws.tolist():
        w = source.window(rx, t0, config.window_length, config.tx_position)
        if config.drop_empty and w.total == 0:
            dropped += 1
            continue
        windows.append(w)
    if draws.shape[0] and not windows:
        log.warning("dataset is empty: all %d windows observed zero molecules", draws.shape[0])
    elif dropped:
        log.info("discarded %d of %d zero-molecule windows", dropped, draws.shape[0])
    return Dataset(windows, draws.shape[0], dropped, draws)


def split(items: Sequence, ratio=(3, 1), rng: np.random.Generator | None = None, seed: int = 0):
    """Seeded shuffle into disjoint (train, test) index arrays."""
    rng = rng or generator(seed, "split")
    n = len(items)
    perm = rng.permutation(n)
    n_train = int(round(n * ratio[0] / (ratio[0] + ratio[1])))
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


# -------------------------------------------------------------- experiments

@dataclass
class ExperimentReport:
    scenario: str
    estimator: str
    mask: tuple[str, ...]
    chi: float
    truths: np.ndarray
    estimates: np.ndarray
    seed: int
    p_deg2: float
    details: dict = field(default_factory=dict)
    runtime: float = 0.0

    def to_dict(self) -> dict:
        """JSON-ready view. Runtime is left out so reports are reproducible."""
        return {"scenario": self.scenario, "estimator": self.estimator, "mask": list(self.mask),
                "chi": self.chi, "seed": self.seed, "p_deg2": self.p_deg2,
                "n_test": int(self.truths.size), "details": self.details,
                "pairs": [[float(t), float(e)] for t, e in zip(self.truths, self.estimates)]}


def _estimate(kind: str, mask, config: ScenarioConfig, prod: SimulationProducts,
              train_w, test_w) -> tuple[np.ndarray, dict]:
    d_train = np.array([w.true_distance for w in train_w])
    if kind == "mean":
        return np.full(len(test_w), d_train.mean()), {}
    if kind == "lc":
        params = LcParams.from_mixture(prod.velocity, config.p1, config.p_deg[1], float(d_train.max()))
        r = feature_matrix(test_w, ("r_obs",), config.epsilon, log=False)[:, 0]
        return lc_estimate(r, params), {"v": params.v, "r0": params.r0, "d_max": params.d_max,
                                        "velocity_r2": prod.velocity_r2}
    if kind == "mlp":
        cfg = config.train_config()
        model = train(feature_matrix(train_w, mask, config.epsilon), d_train, mask, cfg)
        est = mlp_forward(model, feature_matrix(test_w, mask, config.epsilon))
        return est, {"epochs": len(model.train_log), "train_loss": model.final_loss}
    raise ConfigError(f"unknown estimator {kind!r}")


def run_experiment(config: ScenarioConfig, estimator: str = "mlp", mask=None,
                   products: SimulationProducts | None = None) -> ExperimentReport:
    """Simulate (or reuse) -> windows -> features -> fit -> chi on the test split."""
    t_start = time.perf_counter()
    mask = normalize_mask(mask if mask is not None else config.masks[0]) if estimator == "mlp" else (
        ("r_obs",) if estimator == "lc" else ())
    prod = products if products is not None else simulate_products(config)
    data = build_dataset(prod, config)
    tr, te = split(data.windows, config.split_ratio, seed=config.seed)
    train_w = [data.windows[i] for i in tr]
    test_w = [data.windows[i] for i in te]
    if len(train_w) < 2 or len(test_w) < 2:
        raise ConfigError(f"dataset too small after discards ({len(data.windows)} windows)")
    est, details = _estimate(estimator, mask, config, prod, train_w, test_w)
    truths = np.array([w.true_distance for w in test_w])
    details.update({"n_windows": len(data.windows), "n_discarded": data.n_discarded,
                    "n_train": len(train_w), "velocity": prod.velocity})
    return ExperimentReport(config.name, estimator, mask, chi_error(est, truths), truths, np.asarray(est, float),
                            config.seed, config.p_deg[1], details, time.perf_counter() - t_start)


def sweep_degradation(config: ScenarioConfig, p_values: Sequence[float] | None = None,
                      specs: Sequence[tuple[str, tuple]] = (("lc", ("r_obs",)),)) -> list[ExperimentReport]:
    """One experiment per (p_deg2, estimator). All seeds are shared, so
    trajectories, receivers and window draws are identical across the sweep."""
    p_values = config.sweep_p_deg2 if p_values is None else p_values
    reports = []
    for p in p_values:
        cfg = config.replace(p_deg=(config.p_deg[0], float(p)))
        prod = simulate_products(cfg)
        for kind, mask in specs:
            reports.append(run_experiment(cfg, kind, mask, prod))
    return reports


def study_masks(scenario: int) -> list[tuple[str, ...]]:
    """Feature sets mirroring the four feature-combination panels."""
    if scenario == 1:
        pairs = [tuple(sorted({a, b})) for a, b in itertools.combinations_with_replacement(Z_FEATURES, 2)]
        return pairs + [Z_FEATURES]
    return [("r_obs",)] + [("r_obs", z) for z in Z_FEATURES] + [("r_obs",) + Z_FEATURES]


def feature_combination_study(config: ScenarioConfig, masks: Sequence | None = None) -> list[ExperimentReport]:
    masks = masks if masks is not None else study_masks(1 if config.p1 == 1.0 else 2)
    prod = simulate_products(config)
    return [run_experiment(config, "mlp", m, prod) for m in masks]


# ----------------------------------------------------------------- outputs

def write_json(path, obj) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, sort_keys=True, indent=1)
        f.write("\n")


def write_scatter(path, reports: Sequence[ExperimentReport]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["scenario", "estimator", "mask", "true_distance", "estimated_distance"])
        for r in reports:
            m = "+".join(r.mask)
            for t, e in zip(r.truths, r.estimates):
                w.writerow([r.scenario, r.estimator, m, repr(float(t)), repr(float(e))])


def write_chi_grid(path, reports: Sequence[ExperimentReport]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["scenario", "feature_a", "feature_b", "mask", "chi"])
        for r in reports:
            a = r.mask[0] if r.mask else ""
            b = r.mask[1] if len(r.mask) == 2 else (r.mask[0] if len(r.mask) == 1 else "")
            w.writerow([r.scenario, a, b, "+".join(r.mask), repr(r.chi)])


def write_sweep(path, reports: Sequence[ExperimentReport]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["p_deg2", "estimator", "mask", "chi", "n_test"])
        for r in reports:
            w.writerow([repr(r.p_deg2), r.estimator, "+".join(r.mask), repr(r.chi), r.truths.size])


def write_windows(path, windows: Sequence[ObservationWindow]) -> None:
    """Two rows per window (one per species); counts space-separated."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["window", "rx_x", "rx_y", "rx_z", "rx_radius", "t0", "true_distance", "species", "counts"])
        for i, win in enumerate(windows):
            p = win.rx.position
            for s in (1, 2):
                w.writerow([i, repr(p.x), repr(p.y), repr(p.z), repr(win.rx.radius), win.t0_step,
                            repr(win.true_distance), s, " ".join(map(str, win.counts[s - 1].tolist()))])


def read_windows(path) -> list[ObservationWindow]:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    out = []
    for a, b in zip(rows[0::2], rows[1::2]):
        if a["window"] != b["window"] or (a["species"], b["species"]) != ("1", "2"):
            raise ValueError(f"malformed window rows for window {a['window']}")
        rx = RxConfig(Vec3(float(a["rx_x"]), float(a["rx_y"]), float(a["rx_z"])), float(a["rx_radius"]))
        counts = np.array([a["counts"].split(), b["counts"].split()], dtype=np.int64)
        out.append(ObservationWindow(rx, int(a["t0"]), counts, float(a["true_distance"])))
    return out
