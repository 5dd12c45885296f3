"""Seedable random streams.

Two flavours are provided. ``generator`` returns an ordinary numpy
``Generator`` for a named stream, used wherever draws are consumed in a
fixed sequential order (receiver placement, window sampling, shuffling).
``CounterStream`` is a stateless counter-based generator: every draw is a
pure function of ``(seed, stream name, particle id, step, lane)``, so
per-particle updates give identical results in any evaluation order.
"""
from __future__ import annotations

import zlib

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

STREAMS = ("release", "species", "turbulence", "meander", "degradation",
           "receivers", "dataset", "split", "init", "shuffle")


def _mix_int(z: int) -> int:
    """splitmix64 finalizer on a python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def stream_key(seed: int, name: str) -> int:
    """64-bit key for the named stream derived from ``seed``."""
    return _mix_int(_mix_int(seed & MASK64) + _GOLDEN * zlib.crc32(name.encode()))


def generator(seed: int, name: str) -> np.random.Generator:
    """Independent sequential generator for one named stream."""
    ss = np.random.SeedSequence([seed & MASK64, zlib.crc32(name.encode())])
    return np.random.Generator(np.random.PCG64(ss))


class CounterStream:
    """Stateless generator keyed by (seed, name); draws indexed by counters."""

    def __init__(self, seed: int, name: str):
        self.seed = seed
        self.name = name
        self.key = stream_key(seed, name)

    def bits(self, ids, step: int, lane: int = 0) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.uint64)
        h = _mix(ids * np.uint64(_GOLDEN) + np.uint64(self.key))
        salt = _mix_int(_mix_int((step & MASK64) ^ 0xD1B54A32D192ED03) + lane * _GOLDEN)
        return _mix(h ^ np.uint64(salt))

    def uniform(self, ids, step: int, lane: int = 0) -> np.ndarray:
        """Uniform draws on the open interval (0, 1), one per id."""
        h = self.bits(ids, step, lane) >> np.uint64(11)
        return (h.astype(np.float64) + 0.5) * 2.0 ** -53

    def normal(self, ids, step: int, n: int = 1, lane0: int = 0) -> np.ndarray:
        """Standard normals of shape (len(ids), n) via Box-Muller.

        Consumes lanes ``lane0 .. lane0 + 2*ceil(n/2) - 1``.
        """
        ids = np.atleast_1d(ids)
        out = np.empty((ids.shape[0], n))
        for k in range(0, n, 2):
            u1 = self.uniform(ids, step, lane0 + k)
            u2 = self.uniform(ids, step, lane0 + k + 1)
            rad = np.sqrt(-2.0 * np.log(u1))
            out[:, k] = rad * np.cos(2.0 * np.pi * u2)
            if k + 1 < n:
                out[:, k + 1] = rad * np.sin(2.0 * np.pi * u2)
        return out
