"""Two-hidden-layer ReLU regressor trained with Adam, in plain numpy."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .features import FeatureVector, normalize_mask
from .rng import generator

MODEL_VERSION = 1


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    weight_decay: float = 1e-4
    batch_size: int = 200
    max_epochs: int = 1000
    patience: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    hidden: int = 64
    seed: int = 0

    def __post_init__(self):
        if not (self.lr > 0 and self.weight_decay >= 0 and self.batch_size > 0
                and self.max_epochs > 0 and self.patience > 0 and self.hidden > 0):
            raise ValueError("invalid training configuration")
        if self.patience >= self.max_epochs:
            raise ValueError("patience must be smaller than max_epochs")


@dataclass
class MlpModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    mask: tuple[str, ...]
    train_log: list[float] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    final_loss: float | None = None

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @classmethod
    def init(cls, n_features: int, mask, hidden: int = 64, seed: int = 0) -> "MlpModel":
        """Glorot-uniform weights, zero biases."""
        mask = normalize_mask(mask)
        if len(mask) != n_features:
            raise ValueError("mask size must equal the number of features")
        rng = generator(seed, "init")
        sizes = [n_features, hidden, hidden, 1]
        ws, bs = [], []
        for a, b in zip(sizes[:-1], sizes[1:]):
            lim = math.sqrt(6.0 / (a + b))
            ws.append(rng.uniform(-lim, lim, size=(a, b)))
            bs.append(np.zeros(b))
        return cls(ws, bs, mask)

    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "MlpModel":
        return MlpModel([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                        self.mask, list(self.train_log), dict(self.config), self.final_loss)

    def to_json(self) -> str:
        d = {"version": MODEL_VERSION, "sizes": self.sizes, "mask": list(self.mask),
             "weights": [w.tolist() for w in self.weights],
             "biases": [b.tolist() for b in self.biases],
             "train_log": self.train_log, "config": self.config, "final_loss": self.final_loss}
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, s: str) -> "MlpModel":
        d = json.loads(s)
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')}")
        ws = [np.array(w, dtype=float).reshape(a, b) for w, a, b in zip(d["weights"], d["sizes"][:-1], d["sizes"][1:])]
        bs = [np.array(b, dtype=float) for b in d["biases"]]
        return cls(ws, bs, tuple(d["mask"]), d["train_log"], d["config"], d["final_loss"])


def _forward(model: MlpModel, X: np.ndarray):
    acts = [X]
    h = X
    n = len(model.weights)
    for k, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w + b
        if k < n - 1:
            h = np.maximum(h, 0.0)
        acts.append(h)
    return acts


def mlp_forward(model: MlpModel, x):
    """Distance estimate(s). ``x`` is a FeatureVector, a vector or a batch."""
    if isinstance(x, FeatureVector):
        if x.mask != model.mask:
            raise ValueError(f"feature mask {x.mask} does not match model mask {model.mask}")
        x = x.values
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.weights[0].shape[0]:
        raise ValueError(f"expected {model.weights[0].shape[0]} features, got {X.shape[1]}")
    out = _forward(model, X)[-1][:, 0]
    return float(out[0]) if single else out


def mse_loss(model: MlpModel, X, y) -> float:
    pred = _forward(model, np.asarray(X, dtype=float))[-1][:, 0]
    return float(np.mean((pred - np.asarray(y, dtype=float)) ** 2))


def mlp_backward(model: MlpModel, X, y) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean squared error over the batch and its exact gradients.

    Returns ``(loss, dW, db)`` with one entry per layer.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    acts = _forward(model, X)
    err = acts[-1][:, 0] - y
    loss = float(np.mean(err ** 2))
    g = (2.0 / X.shape[0]) * err[:, None]
    n = len(model.weights)
    dW: list[np.ndarray] = [None] * n
    db: list[np.ndarray] = [None] * n
    for k in range(n - 1, -1, -1):
        dW[k] = acts[k].T @ g
        db[k] = g.sum(axis=0)
        if k:
            g = (g @ model.weights[k].T) * (acts[k] > 0)
    return loss, dW, db


class Adam:
    """Adam with decoupled weight decay applied to weight matrices only."""

    def __init__(self, model: MlpModel, cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        self.m = [np.zeros_like(p) for p in model.params()]
        self.v = [np.zeros_like(p) for p in model.params()]

    def step(self, model: MlpModel, dW, db):
        c = self.cfg
        self.t += 1
        decay = 1.0 - c.lr * c.weight_decay
        for w in model.weights:
            w *= decay
        grads = [g for pair in zip(dW, db) for g in pair]
        bc1 = 1.0 - c.beta1 ** self.t
        bc2 = 1.0 - c.beta2 ** self.t
        for p, g, m, v in zip(model.params(), grads, self.m, self.v):
            m *= c.beta1
            m += (1 - c.beta1) * g
            v *= c.beta2
            v += (1 - c.beta2) * g * g
            p -= c.lr * (m / bc1) / (np.sqrt(v / bc2) + c.adam_eps)


def train(X, y, mask, cfg: TrainConfig = TrainConfig()) -> MlpModel:
    """Fit an MLP to (log-feature, distance) pairs.

    Early stopping watches the full training-set loss after every epoch and
    returns the parameters of the best epoch.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[0] != y.shape[0]:
        raise ValueError("need a non-empty (n, F) feature matrix and n targets")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise TrainingError("non-finite training data")
    model = MlpModel.init(X.shape[1], mask, cfg.hidden, cfg.seed)
    opt = Adam(model, cfg)
    rng = generator(cfg.seed, "shuffle")
    n = X.shape[0]
    best, best_loss, since = model.copy(), math.inf, 0
    log: list[float] = []
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(n)
        for s in range(0, n, cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            loss, dW, db = mlp_backward(model, X[idx], y[idx])
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite batch loss at epoch {epoch}, offset {s}")
            opt.step(model, dW, db)
        loss = mse_loss(model, X, y)
        if not math.isfinite(loss):
            raise TrainingError(f"non-finite training loss after epoch {epoch}")
        log.append(loss)
        if loss < best_loss:
            best, best_loss, since = model.copy(), loss, 0
        else:
            since += 1
            if since >= cfg.patience:
                break
    best.train_log = log
    best.config = asdict(cfg)
    best.final_loss = best_loss
    return best
