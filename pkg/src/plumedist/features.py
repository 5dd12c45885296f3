"""Whiff/blank segmentation and the signal features used for ranging.

All temporal features are computed on the species-1 series. A sample is in
a whiff when its count is at least half the window mean; an all-zero window
is a single blank.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

FEATURES = ("r_obs", "z1", "z2", "z3", "z4", "z5", "z6")
LOG_EPS = 1e-6
DEFAULT_EPS = 1e-2


@dataclass(frozen=True)
class WhiffSegmentation:
    threshold: float
    runs: tuple[tuple[int, int, bool], ...]  # (start, length, is_whiff)
    mask: np.ndarray  # per-sample whiff indicator

    @property
    def n_whiffs(self) -> int:
        return sum(1 for r in self.runs if r[2])

    @property
    def n_blanks(self) -> int:
        return sum(1 for r in self.runs if not r[2])


def whiff_threshold(y) -> float:
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("empty series")
    return 0.5 * float(y.mean())


def segment(y) -> WhiffSegmentation:
    y = np.asarray(y, dtype=float)
    thr = whiff_threshold(y)
    mask = y >= thr if thr > 0 else np.zeros(y.size, dtype=bool)
    edges = np.flatnonzero(np.diff(mask.astype(np.int8))) + 1
    starts = np.concatenate([[0], edges])
    ends = np.concatenate([edges, [y.size]])
    runs = tuple((int(s), int(e - s), bool(mask[s])) for s, e in zip(starts, ends))
    return WhiffSegmentation(thr, runs, mask)


def feature_z1(y1) -> float:
    """Average intensity."""
    return float(np.mean(y1))


def feature_z2(y1, seg: WhiffSegmentation) -> float:
    """Average intensity over whiff samples."""
    y1 = np.asarray(y1, dtype=float)
    return float(y1[seg.mask].mean()) if seg.mask.any() else 0.0


def feature_z3(y1, seg: WhiffSegmentation) -> float:
    """Average |backward difference| over whiff samples after the first."""
    y1 = np.asarray(y1, dtype=float)
    sel = seg.mask[1:]
    if not sel.any():
        return 0.0
    return float(np.abs(np.diff(y1))[sel].mean())


def feature_z4(seg: WhiffSegmentation, window_len: int) -> float:
    """Whiff fraction of the window divided by the number of whiffs."""
    n = seg.n_whiffs
    return float(seg.mask.sum()) / window_len / n if n else 0.0


def feature_z5(seg: WhiffSegmentation, window_len: int) -> float:
    """Blank fraction of the window divided by the number of blanks."""
    n = seg.n_blanks
    return float((~seg.mask).sum()) / window_len / n if n else 0.0


def feature_z6(seg: WhiffSegmentation, window_len: int) -> float:
    """Intermittency factor."""
    return float(seg.mask.sum()) / window_len


def compute_r_obs(y1, y2, epsilon: float = DEFAULT_EPS) -> float:
    """(mean(y2) + eps) / (mean(y1) + eps)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    return (float(np.mean(y2)) + epsilon) / (float(np.mean(y1)) + epsilon)


def raw_features(y1, y2, epsilon: float = DEFAULT_EPS) -> dict[str, float]:
    """Every feature of one window, before the log transform."""
    seg = segment(y1)
    n = len(y1)
    return {"r_obs": compute_r_obs(y1, y2, epsilon), "z1": feature_z1(y1),
            "z2": feature_z2(y1, seg), "z3": feature_z3(y1, seg),
            "z4": feature_z4(seg, n), "z5": feature_z5(seg, n), "z6": feature_z6(seg, n)}


def normalize_mask(mask) -> tuple[str, ...]:
    if isinstance(mask, str):
        mask = [m.strip() for m in mask.split(",") if m.strip()]
    mask = tuple(mask)
    bad = [m for m in mask if m not in FEATURES]
    if not mask or bad:
        raise ValueError(f"feature mask must be a non-empty subset of {FEATURES}, got {mask}")
    # canonical order so equal sets give equal vectors
    return tuple(f for f in FEATURES if f in mask)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    mask: tuple[str, ...]
    log_applied: bool = True


def log_transform(x):
    return np.log(np.asarray(x, dtype=float) + LOG_EPS)


def build_feature_vector(window, mask, epsilon: float = DEFAULT_EPS, log: bool = True) -> FeatureVector:
    mask = normalize_mask(mask)
    raw = raw_features(window.y1, window.y2, epsilon)
    vals = np.array([raw[m] for m in mask])
    return FeatureVector(log_transform(vals) if log else vals, mask, log)


def feature_matrix(windows: Sequence, mask, epsilon: float = DEFAULT_EPS, log: bool = True) -> np.ndarray:
    mask = normalize_mask(mask)
    out = np.empty((len(windows), len(mask)))
    for i, w in enumerate(windows):
        out[i] = build_feature_vector(w, mask, epsilon, log).values
    return out


def write_feature_csv(path, X: np.ndarray, mask, distances=None, log: bool = True) -> None:
    """CSV with one column per feature (prefixed ``log_`` when transformed)."""
    mask = normalize_mask(mask)
    names = [("log_" if log else "") + m for m in mask]
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(names + (["distance"] if distances is not None else []))
        for i, row in enumerate(np.asarray(X)):
            vals = [repr(float(v)) for v in row]
            if distances is not None:
                vals.append(repr(float(distances[i])))
            w.writerow(vals)


def read_feature_csv(path) -> tuple[np.ndarray, tuple[str, ...], np.ndarray | None, bool]:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    head, body = rows[0], rows[1:]
    has_d = head[-1] == "distance"
    names = head[:-1] if has_d else head
    log = all(n.startswith("log_") for n in names)
    mask = normalize_mask([n[4:] if log else n for n in names])
    data = np.array(body, dtype=float).reshape(len(body), len(head))
    return data[:, :len(names)], mask, (data[:, -1] if has_d else None), log
