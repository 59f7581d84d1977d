"""On-disk formats: binary snapshot files, CSV tables, kernel-table archives.

Snapshot file layout (little-endian)::

    magic        4s   b"MZK1"
    version      u16  1
    kind         u8   0 = real64, 1 = complex128
    layout       u8   0 = full state (width N), 1 = resolved only (width m)
    N            u32
    m            u32
    dt           f64
    n_snapshots  u32  snapshots at t_0 .. t_{n_snapshots - 1}
    seed         u64
    name_len     u16
    name         name_len bytes, UTF-8
    payload      n_snapshots * width scalars, row-major
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__

__all__ = [
    "SnapshotFile",
    "SnapshotFormatError",
    "metadata_line",
    "write_csv",
    "read_csv",
    "save_kernel_table",
    "load_kernel_table",
]

MAGIC = b"MZK1"
VERSION = 1
_HEAD = struct.Struct("<4sHBBIIdIQH")
_KINDS = {0: np.dtype("<f8"), 1: np.dtype("<c16")}
_LAYOUTS = ("full", "resolved")


class SnapshotFormatError(ValueError):
    pass


@dataclass
class SnapshotFile:
    model: str
    N: int
    m: int
    dt: float
    seed: int
    data: np.ndarray
    layout: str = "full"

    def __post_init__(self):
        if self.layout not in _LAYOUTS:
            raise ValueError(f"layout must be one of {_LAYOUTS}")
        width = self.N if self.layout == "full" else self.m
        self.data = np.asarray(self.data)
        if self.data.ndim != 2 or self.data.shape[1] != width:
            raise ValueError(f"data must have shape (n_snapshots, {width}), got {self.data.shape}")

    @property
    def kind(self):
        return 1 if np.iscomplexobj(self.data) else 0

    @property
    def n_snapshots(self):
        return self.data.shape[0]

    @property
    def n_steps(self):
        return self.n_snapshots - 1

    @property
    def times(self):
        return self.dt * np.arange(self.n_snapshots)

    def to_bytes(self):
        name = self.model.encode("utf-8")
        head = _HEAD.pack(MAGIC, VERSION, self.kind, _LAYOUTS.index(self.layout), self.N, self.m,
                          self.dt, self.n_snapshots, self.seed, len(name))
        payload = np.ascontiguousarray(self.data, dtype=_KINDS[self.kind]).tobytes()
        return head + name + payload

    @classmethod
    def from_bytes(cls, blob):
        if len(blob) < _HEAD.size:
            raise SnapshotFormatError("file too short for header")
        magic, version, kind, layout, n, m, dt, n_snap, seed, name_len = _HEAD.unpack_from(blob)
        if magic != MAGIC:
            raise SnapshotFormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise SnapshotFormatError(f"unsupported version {version}")
        if kind not in _KINDS or layout >= len(_LAYOUTS):
            raise SnapshotFormatError("bad scalar kind or layout")
        start = _HEAD.size + name_len
        name = blob[_HEAD.size : start].decode("utf-8")
        width = n if layout == 0 else m
        dtype = _KINDS[kind]
        expected = n_snap * width * dtype.itemsize
        if len(blob) - start != expected:
            raise SnapshotFormatError(f"payload is {len(blob) - start} bytes, expected {expected}")
        data = np.frombuffer(blob, dtype=dtype, offset=start).reshape(n_snap, width).copy()
        return cls(name, n, m, dt, seed, data, _LAYOUTS[layout])

    def write(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def read(cls, path):
        return cls.from_bytes(Path(path).read_bytes())


def metadata_line(config, **extra):
    """One ``#`` line carrying what is needed to rerun the experiment."""
    items = {
        "mzmem": __version__,
        "campaign": config.name or "-",
        "model": config.model,
        "N": config.N,
        "m": config.m,
        "dt": repr(config.dt),
        "t_f": repr(config.t_f),
        "seed": config.seed,
        "epsilon": repr(config.epsilon),
        "policy": config.policy,
        "scheme": config.scheme,
        "params": ";".join(f"{k}:{v!r}" for k, v in sorted(config.params.items())),
    }
    if config.scheme == "etdrk4":
        items["etd"] = f"cox-matthews/contour{config.etd_contour_points}"
    items.update(extra)
    return "# " + " ".join(f"{k}={v}" for k, v in items.items())


def _fmt(x):
    return format(float(x), ".17g")


def write_csv(path, meta, columns, data):
    """Write ``data`` (2-D, real) under a metadata line and a header row."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] != len(columns):
        raise ValueError(f"data shape {data.shape} does not match {len(columns)} columns")
    buf = io.StringIO()
    buf.write(meta + "\n")
    buf.write(",".join(columns) + "\n")
    for row in data:
        buf.write(",".join(_fmt(x) for x in row) + "\n")
    Path(path).write_text(buf.getvalue())


def read_csv(path):
    """Return ``(metadata_line, columns, data)``."""
    lines = Path(path).read_text().splitlines()
    meta = lines[0] if lines and lines[0].startswith("#") else ""
    body = lines[1:] if meta else lines
    columns = body[0].split(",")
    rows = [[float(x) for x in line.split(",")] for line in body[1:] if line]
    data = np.array(rows, dtype=float).reshape(len(rows), len(columns))
    return meta, columns, data


def save_kernel_table(path, table):
    arrays = {
        "dt": np.array(table.dt),
        "epsilon": np.array(table.epsilon),
        "policy": np.array(str(table.policy)),
        "n_lags": table.n_lags,
        "memory_sum": table.memory_sum,
        "abs_sum": table.abs_sum,
        "abs_count": table.abs_count,
        "failed_rows": np.array(sorted(table.failures), dtype=np.int64),
        "failed_steps": np.array([table.failures[k] for k in sorted(table.failures)], dtype=np.int64),
        "degenerate": np.array(table.degenerate, dtype=np.int64),
    }
    for idx, snap in table.snapshots.items():
        arrays[f"snapshot_{idx}"] = snap
    if table.rows is not None:
        arrays["rows"] = np.concatenate(table.rows, axis=0)
    np.savez_compressed(path, **arrays)


def load_kernel_table(path):
    from .kernel import HorizonPolicy, KernelTable

    with np.load(path) as z:
        n_lags = z["n_lags"]
        rows = None
        if "rows" in z:
            flat = z["rows"]
            bounds = np.cumsum(n_lags + 1)[:-1]
            rows = np.split(flat, bounds, axis=0)
        snapshots = {int(k.split("_")[1]): z[k] for k in z.files if k.startswith("snapshot_")}
        failures = dict(zip(z["failed_rows"].tolist(), z["failed_steps"].tolist()))
        return KernelTable(float(z["dt"]), float(z["epsilon"]), HorizonPolicy.parse(str(z["policy"])),
                           n_lags, z["memory_sum"], z["abs_sum"], z["abs_count"], rows=rows,
                           snapshots=snapshots, failures=failures, degenerate=z["degenerate"].tolist())
