"""PathSet and price-table serialisation.

CSV (schema ``paths/1``)::

    path_id,step,t,S,V,rd,rf

one row per path per time index, floats written with ``repr`` so a reload is
bit-exact.

Binary (``.vgp``), little-endian::

    magic     8 bytes  b"VGFXPATH"
    version   uint32   (currently 1)
    M, N      uint64   paths, steps
    t0, T     float64
    meta_len  uint32, then meta_len bytes of UTF-8 JSON (provenance)
    states    float64[M, N+1, 4]
    exit_step int64[M]
"""
from __future__ import annotations

import csv
import io
import json
import struct
from pathlib import Path

import numpy as np

from .engine.paths import PathSet, TimeGrid
from .errors import ParseError

PATHS_CSV_COLUMNS = ("path_id", "step", "t", "S", "V", "rd", "rf")
PRICES_CSV_COLUMNS = ("strike", "style", "right", "price", "std_error", "n_paths")
MAGIC = b"VGFXPATH"
BIN_VERSION = 1
_HEAD = struct.Struct("<8sIQQddI")


def paths_to_csv(paths: PathSet) -> str:
    buf = io.StringIO()
    buf.write(",".join(PATHS_CSV_COLUMNS) + "\n")
    times = paths.grid.times.tolist()
    for i in range(paths.n_paths):
        rows = paths.states[i].tolist()
        for j, (s, v, rd, rf) in enumerate(rows):
            buf.write(f"{i},{j},{times[j]!r},{s!r},{v!r},{rd!r},{rf!r}\n")
    return buf.getvalue()


def write_paths_csv(paths: PathSet, path) -> Path:
    path = Path(path)
    path.write_text(paths_to_csv(paths))
    return path


def read_paths_csv(path, t0: float | None = None, T: float | None = None) -> PathSet:
    """Reload a paths CSV. The exit-step vector is not stored in CSV and comes back as -1."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != PATHS_CSV_COLUMNS:
            raise ParseError(f"expected header {','.join(PATHS_CSV_COLUMNS)}", 1, path)
        rows = []
        for n, row in enumerate(reader, start=2):
            if len(row) != len(PATHS_CSV_COLUMNS):
                raise ParseError(f"expected {len(PATHS_CSV_COLUMNS)} columns", n, path)
            try:
                rows.append((int(row[0]), int(row[1]), *map(float, row[2:])))
            except ValueError as exc:
                raise ParseError(str(exc), n, path) from exc
    if not rows:
        raise ParseError("no path rows", 2, path)
    m = max(r[0] for r in rows) + 1
    n_steps = max(r[1] for r in rows)
    if len(rows) != m * (n_steps + 1):
        raise ParseError(f"expected {m * (n_steps + 1)} rows, found {len(rows)}", path=path)
    states = np.empty((m, n_steps + 1, 4))
    times = np.empty(n_steps + 1)
    for pid, j, t, *x in rows:
        states[pid, j] = x
        times[j] = t
    grid = TimeGrid(times[0] if t0 is None else t0, times[-1] if T is None else T, n_steps)
    return PathSet(grid, states, np.full(m, -1, dtype=np.int64), {})


def write_paths_bin(paths: PathSet, path) -> Path:
    path = Path(path)
    meta = json.dumps(paths.provenance, sort_keys=True).encode()
    m, n1, _ = paths.states.shape
    with path.open("wb") as fh:
        fh.write(_HEAD.pack(MAGIC, BIN_VERSION, m, n1 - 1, paths.grid.t0, paths.grid.T, len(meta)))
        fh.write(meta)
        fh.write(np.ascontiguousarray(paths.states, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(paths.exit_step, dtype="<i8").tobytes())
    return path


def read_paths_bin(path) -> PathSet:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEAD.size:
        raise ParseError("truncated header", path=path)
    magic, version, m, n, t0, T, meta_len = _HEAD.unpack_from(data)
    if magic != MAGIC:
        raise ParseError("not a path file (bad magic)", path=path)
    if version != BIN_VERSION:
        raise ParseError(f"unsupported path-file version {version}", path=path)
    off = _HEAD.size
    meta = json.loads(data[off:off + meta_len].decode())
    off += meta_len
    n_state = m * (n + 1) * 4
    expected = off + 8 * n_state + 8 * m
    if len(data) != expected:
        raise ParseError(f"file size {len(data)} does not match header ({expected})", path=path)
    states = np.frombuffer(data, dtype="<f8", count=n_state, offset=off).reshape(m, n + 1, 4).copy()
    exit_step = np.frombuffer(data, dtype="<i8", count=m, offset=off + 8 * n_state).copy()
    return PathSet(TimeGrid(t0, T, n), states, exit_step, meta)


def paths_to_json(paths: PathSet) -> str:
    doc = {
        "schema": "paths/1",
        "t0": paths.grid.t0,
        "T": paths.grid.T,
        "n_steps": paths.grid.n_steps,
        "provenance": paths.provenance,
        "exit_step": paths.exit_step.tolist(),
        "states": paths.states.tolist(),
    }
    return json.dumps(doc, sort_keys=True)


def prices_to_csv(results) -> str:
    buf = io.StringIO()
    buf.write(",".join(PRICES_CSV_COLUMNS) + "\n")
    for r in results:
        buf.write(f"{r.strike!r},{r.style},{r.right},{r.price!r},{r.std_error!r},{r.n_paths}\n")
    return buf.getvalue()


def rows_to_csv(columns, rows) -> str:
    """Generic CSV with ``repr`` floats; ``rows`` are mappings or sequences."""
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        vals = [row[c] for c in columns] if isinstance(row, dict) else list(row)
        buf.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in vals) + "\n")
    return buf.getvalue()
