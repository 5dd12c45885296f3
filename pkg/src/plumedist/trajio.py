"""Trajectory snapshots and the PLUM binary container.

Layout (all integers little-endian)::

    b"PLUM" | version u16 | header length u32 | header JSON (utf-8)
    per snapshot:  step u32 | count u32 | count x particle record
    particle record: species u8 | release_step u32 | x f64 | y f64 | z f64

The header JSON is canonical (sorted keys, no whitespace) so identical inputs
produce identical bytes.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Iterator

import numpy as np

from .core import SPECIES, ConfigError, TxConfig, Vec3

log = logging.getLogger(__name__)

MAGIC = b"PLUM"
VERSION = 1
RECORD = np.dtype([("species", "<u1"), ("release_step", "<u4"), ("pos", "<f8", (3,))])
_SNAP_HEAD = struct.Struct("<II")

assert RECORD.itemsize == 29


class TrajectoryFormatError(Exception):
    """Base class for problems with a PLUM stream."""


class BadMagicError(TrajectoryFormatError):
    pass


class UnsupportedVersionError(TrajectoryFormatError):
    pass


class TruncatedFileError(TrajectoryFormatError):
    pass


class InconsistentHeaderError(TrajectoryFormatError):
    pass


class CsvImportError(TrajectoryFormatError):
    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__(f"{len(errors)} malformed rows; first: {errors[0]}")


@dataclass(eq=False)
class TrajectorySnapshot:
    """Alive particles at one sampling instant, stored column-wise."""

    step: int
    species: np.ndarray
    release_step: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        self.species = np.asarray(self.species, dtype=np.uint8).reshape(-1)
        self.release_step = np.asarray(self.release_step, dtype=np.int64).reshape(-1)
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        n = self.species.shape[0]
        if self.step < 0:
            raise ValueError("snapshot step must be >= 0")
        if self.release_step.shape[0] != n or self.positions.shape[0] != n:
            raise ValueError("snapshot columns differ in length")

    def __len__(self) -> int:
        return self.species.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrajectorySnapshot):
            return NotImplemented
        return (self.step == other.step
                and np.array_equal(self.species, other.species)
                and np.array_equal(self.release_step, other.release_step)
                and np.array_equal(self.positions, other.positions))

    @property
    def age(self) -> np.ndarray:
        """Transport steps each particle has experienced (1 on its release step)."""
        return self.step - self.release_step + 1

    @classmethod
    def empty(cls, step: int) -> "TrajectorySnapshot":
        return cls(step, np.zeros(0), np.zeros(0), np.zeros((0, 3)))


@dataclass
class TrajectoryHeader:
    dt: float
    mean_wind: float
    domain_min: list[float]
    domain_max: list[float]
    tx: dict
    p_deg: list[float]
    seed: int
    n_steps: int
    surrogate: dict | None = None
    schema_version: int = VERSION
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_run(cls, tx: TxConfig, params, n_steps: int) -> "TrajectoryHeader":
        return cls(dt=params.dt, mean_wind=params.mean_wind,
                   domain_min=params.domain_min.as_list(), domain_max=params.domain_max.as_list(),
                   tx=tx.to_dict(), p_deg=list(params.p_deg), seed=int(params.seed),
                   n_steps=int(n_steps), surrogate=params.surrogate.to_dict())

    @property
    def tx_config(self) -> TxConfig:
        return TxConfig.from_dict(self.tx)

    @property
    def source_position(self) -> Vec3:
        return Vec3.of(self.tx["position"])

    def to_json(self) -> bytes:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        return json.dumps(d, sort_keys=True, separators=(",", ":")).encode()

    @classmethod
    def from_json(cls, raw: bytes) -> "TrajectoryHeader":
        d = json.loads(raw.decode())
        try:
            return cls(**d)
        except TypeError as exc:
            raise TrajectoryFormatError(f"bad header fields: {exc}") from None


def _open(target, mode):
    if isinstance(target, (str, os.PathLike)):
        return open(target, mode), True
    return target, False


def encode_snapshot(snap: TrajectorySnapshot) -> bytes:
    rec = np.empty(len(snap), dtype=RECORD)
    rec["species"] = snap.species
    rec["release_step"] = snap.release_step
    rec["pos"] = snap.positions
    return _SNAP_HEAD.pack(snap.step, len(snap)) + rec.tobytes()


def write_snapshots(header: TrajectoryHeader, snapshots: Iterable[TrajectorySnapshot], sink) -> int:
    """Write a PLUM stream; returns the number of bytes written.

    ``snapshots`` may be a lazy iterator. It must yield exactly
    ``header.n_steps`` snapshots with strictly increasing steps.
    """
    f, owned = _open(sink, "wb")
    try:
        hj = header.to_json()
        nbytes = f.write(MAGIC + struct.pack("<HI", header.schema_version, len(hj)) + hj)
        count, last = 0, -1
        for snap in snapshots:
            if snap.step <= last:
                raise InconsistentHeaderError(f"snapshot steps must increase ({snap.step} after {last})")
            if len(snap) and not np.isin(snap.species, SPECIES).all():
                raise InconsistentHeaderError(f"invalid species id in snapshot {snap.step}")
            last = snap.step
            nbytes += f.write(encode_snapshot(snap))
            count += 1
        if count != header.n_steps:
            raise InconsistentHeaderError(f"header declares {header.n_steps} snapshots, got {count}")
        return nbytes
    finally:
        if owned:
            f.close()


def _read_exact(f: BinaryIO, n: int, what: str) -> bytes:
    b = f.read(n)
    if len(b) != n:
        raise TruncatedFileError(f"truncated while reading {what}: wanted {n} bytes, got {len(b)}")
    return b


def _iter_body(f: BinaryIO, owned: bool) -> Iterator[TrajectorySnapshot]:
    try:
        while True:
            head = f.read(_SNAP_HEAD.size)
            if not head:
                return
            if len(head) != _SNAP_HEAD.size:
                raise TruncatedFileError("truncated snapshot header")
            step, count = _SNAP_HEAD.unpack(head)
            rec = np.frombuffer(_read_exact(f, count * RECORD.itemsize, f"snapshot {step}"), dtype=RECORD)
            yield TrajectorySnapshot(step, rec["species"].copy(), rec["release_step"].astype(np.int64),
                                     rec["pos"].copy())
    finally:
        if owned:
            f.close()


def read_snapshots(source) -> tuple[TrajectoryHeader, Iterator[TrajectorySnapshot]]:
    """Open a PLUM stream. Snapshots are decoded lazily, one at a time."""
    f, owned = _open(source, "rb")
    try:
        magic = f.read(4)
        if magic != MAGIC:
            raise BadMagicError(f"not a PLUM stream (magic {magic!r})")
        version, hlen = struct.unpack("<HI", _read_exact(f, 6, "preamble"))
        if version != VERSION:
            raise UnsupportedVersionError(f"unsupported PLUM version {version}")
        header = TrajectoryHeader.from_json(_read_exact(f, hlen, "header"))
    except BaseException:
        if owned:
            f.close()
        raise
    return header, _iter_body(f, owned)


def load_snapshots(source) -> tuple[TrajectoryHeader, list[TrajectorySnapshot]]:
    header, it = read_snapshots(source)
    return header, list(it)


def import_external(source, mapping: dict | None = None) -> tuple[TrajectoryHeader, list[TrajectorySnapshot]]:
    """Convert a CSV of particle positions into snapshots.

    Expected columns are ``step,particle,species,x,y,z`` (species optional,
    defaulting to 1). ``mapping`` may rename columns via ``columns``, give
    header metadata (``dt``, ``mean_wind``, ``tx``, ``domain_min``,
    ``domain_max``, ``p_deg``, ``seed``) and set ``max_errors``, the number
    of malformed rows tolerated before failing. A particle's release step is
    the first step it appears in.
    """
    mapping = dict(mapping or {})
    cols = {"step": "step", "particle": "particle", "species": "species",
            "x": "x", "y": "y", "z": "z"}
    cols.update(mapping.get("columns", {}))
    max_errors = int(mapping.get("max_errors", 0))

    owned = isinstance(source, (str, os.PathLike))
    f = open(source, newline="") if owned else source
    if isinstance(f, (io.BufferedIOBase, io.RawIOBase)):
        f = io.TextIOWrapper(f, newline="")
    try:
        reader = csv.DictReader(f)
        missing = [cols[k] for k in ("step", "particle", "x", "y", "z")
                   if cols[k] not in (reader.fieldnames or [])]
        if missing:
            raise CsvImportError([f"line 1: missing columns {missing}"])
        has_species = cols["species"] in reader.fieldnames
        errors: list[str] = []
        rows = []
        for row in reader:
            line = reader.line_num
            try:
                step = int(row[cols["step"]])
                pid = int(row[cols["particle"]])
                sp = int(row[cols["species"]]) if has_species and row[cols["species"]] not in (None, "") else 1
                pos = [float(row[cols[k]]) for k in "xyz"]
                if step < 0 or sp not in SPECIES or not np.all(np.isfinite(pos)):
                    raise ValueError("out-of-range value")
            except (TypeError, ValueError) as exc:
                errors.append(f"line {line}: {exc}")
                if len(errors) > max_errors:
                    raise CsvImportError(errors) from None
                continue
            rows.append((step, pid, sp, *pos))
    finally:
        if owned:
            f.close()
    for e in errors:
        log.warning("skipped malformed row, %s", e)

    arr = np.array(rows, dtype=np.float64).reshape(-1, 6)
    steps = arr[:, 0].astype(np.int64)
    pids = arr[:, 1].astype(np.int64)
    first_seen: dict[int, int] = {}
    for s, p in sorted(zip(steps.tolist(), pids.tolist())):
        first_seen.setdefault(p, s)
    rel = np.array([first_seen[p] for p in pids.tolist()], dtype=np.int64)

    snaps = []
    uniq = np.unique(steps)
    for s in uniq.tolist():
        sel = np.flatnonzero(steps == s)
        sel = sel[np.argsort(pids[sel], kind="stable")]
        snaps.append(TrajectorySnapshot(s, arr[sel, 2], rel[sel], arr[sel, 3:6]))

    pos = arr[:, 3:6]
    lo = mapping.get("domain_min", pos.min(axis=0).tolist() if len(pos) else [0.0, 0.0, 0.0])
    hi = mapping.get("domain_max", pos.max(axis=0).tolist() if len(pos) else [1.0, 1.0, 1.0])
    tx = mapping.get("tx", TxConfig().to_dict())
    try:
        TxConfig.from_dict(tx)
    except (KeyError, ConfigError) as exc:
        raise ConfigError(f"bad tx mapping: {exc}") from None
    header = TrajectoryHeader(dt=float(mapping.get("dt", 1.0)), mean_wind=float(mapping.get("mean_wind", 0.0)),
                              domain_min=list(lo), domain_max=list(hi), tx=tx,
                              p_deg=list(mapping.get("p_deg", [0.0, 0.0])),
                              seed=int(mapping.get("seed", 0)), n_steps=len(snaps),
                              extra={"source": "csv", "skipped_rows": len(errors)})
    return header, snaps
