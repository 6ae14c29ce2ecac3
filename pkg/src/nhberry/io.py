"""External matrix grids and result serialization.

Grid files are plain text::

    NHGRID v1 N axis1 n1 min1 max1 axis2 n2 min2 max2
    re im re im ...

followed by ``n1 * n2 * N * N`` real/imaginary pairs.  Points run with
``axis1`` slowest, each matrix is row-major, and both axes include their
endpoints.
"""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EvaluationFailure, FormatError, GridMismatch, NonSquare
from .models import HamiltonianField, ModelSpec

__all__ = [
    "GridHeader",
    "parse_nhgrid",
    "load_external_model",
    "format_nhgrid",
    "save_external_model",
    "ResultRecord",
    "config_hash",
    "encode_value",
    "to_json",
    "to_csv",
]

MAGIC = ("NHGRID", "v1")


@dataclass(frozen=True)
class GridHeader:
    dim: int
    axes: tuple
    sizes: tuple
    mins: tuple
    maxs: tuple


def _parse_header(line: str) -> GridHeader:
    tok = line.split()
    if len(tok) != 11 or tuple(tok[:2]) != MAGIC:
        raise FormatError("header must read 'NHGRID v1 N axis1 n1 min1 max1 axis2 n2 min2 max2'")
    try:
        dim = int(tok[2])
        n1, n2 = int(tok[4]), int(tok[8])
        lo1, hi1, lo2, hi2 = (float(tok[i]) for i in (5, 6, 9, 10))
    except ValueError as exc:
        raise FormatError(f"bad header field: {exc}") from exc
    if dim < 1:
        raise NonSquare(f"matrix dimension must be positive, got {dim}")
    if n1 < 2 or n2 < 2 or not hi1 > lo1 or not hi2 > lo2:
        raise GridMismatch("each axis needs at least 2 points and max > min")
    if tok[3] == tok[7]:
        raise GridMismatch("axis names must differ")
    return GridHeader(dim, (tok[3], tok[7]), (n1, n2), (lo1, lo2), (hi1, hi2))


def parse_nhgrid(text: str):
    """Parse grid-file text into ``(header, samples)`` with ``samples.shape == (n1, n2, N, N)``."""
    lines = text.split("\n", 1)
    if not lines[0].strip():
        raise FormatError("empty file")
    head = _parse_header(lines[0])
    body = lines[1] if len(lines) > 1 else ""
    try:
        nums = np.array(body.split(), dtype=float)
    except ValueError as exc:
        raise FormatError(f"non-numeric data: {exc}") from exc
    if nums.size % 2:
        raise FormatError("odd number of values; re/im pairs are incomplete")
    pairs = nums.size // 2
    n1, n2 = head.sizes
    expected = n1 * n2 * head.dim ** 2
    if pairs != expected:
        per_point, rem = divmod(pairs, n1 * n2)
        if pairs and rem == 0 and per_point != head.dim ** 2:
            raise NonSquare(f"{per_point} entries per point cannot form a {head.dim}x{head.dim} matrix")
        if pairs < expected:
            raise FormatError(f"truncated data: {pairs} of {expected} complex entries")
        raise GridMismatch(f"{pairs} complex entries for a grid expecting {expected}")
    if not np.all(np.isfinite(nums)):
        raise FormatError("non-finite values in data")
    z = nums[0::2] + 1j * nums[1::2]
    return head, z.reshape(n1, n2, head.dim, head.dim)


def _bilinear(samples, head: GridHeader):
    n1, n2 = head.sizes
    h1 = (head.maxs[0] - head.mins[0]) / (n1 - 1)
    h2 = (head.maxs[1] - head.mins[1]) / (n2 - 1)

    def H(p):
        p = np.asarray(p, dtype=float)
        u = (p[0] - head.mins[0]) / h1
        v = (p[1] - head.mins[1]) / h2
        eps = 1e-9
        if not (-eps <= u <= n1 - 1 + eps and -eps <= v <= n2 - 1 + eps):
            raise EvaluationFailure(f"point {p.tolist()} lies outside the sampled grid")
        i = min(max(int(np.floor(u)), 0), n1 - 2)
        j = min(max(int(np.floor(v)), 0), n2 - 2)
        a, b = u - i, v - j
        return ((1 - a) * (1 - b) * samples[i, j] + a * (1 - b) * samples[i + 1, j]
                + (1 - a) * b * samples[i, j + 1] + a * b * samples[i + 1, j + 1])

    return H, {head.axes[0]: h1, head.axes[1]: h2}


def load_external_model(path) -> HamiltonianField:
    """Hamiltonian field interpolated bilinearly from an ``NHGRID v1`` file."""
    path = Path(path)
    try:
        text = path.read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    head, samples = parse_nhgrid(text)
    H, steps = _bilinear(samples, head)
    spec = ModelSpec(f"external:{path.name}", head.axes, head.dim, {})
    return HamiltonianField(spec, H, preferred_step=steps)


def format_nhgrid(samples, axes, mins, maxs) -> str:
    """Inverse of :func:`parse_nhgrid`; floats are written with ``repr`` so they round-trip exactly."""
    samples = np.asarray(samples, dtype=complex)
    n1, n2, N, N2 = samples.shape
    if N != N2:
        raise NonSquare(f"samples hold {N}x{N2} matrices")
    head = f"NHGRID v1 {N} {axes[0]} {n1} {mins[0]!r} {maxs[0]!r} {axes[1]} {n2} {mins[1]!r} {maxs[1]!r}"
    flat = samples.reshape(-1)
    lines = [" ".join(f"{float(z.real)!r} {float(z.imag)!r}" for z in flat[k:k + N * N])
             for k in range(0, flat.size, N * N)]
    return head + "\n" + "\n".join(lines) + "\n"


def save_external_model(path, field, axes, mins, maxs, sizes) -> None:
    """Sample ``field`` on an endpoint-inclusive grid and write it as ``NHGRID v1``."""
    g1 = np.linspace(mins[0], maxs[0], sizes[0])
    g2 = np.linspace(mins[1], maxs[1], sizes[1])
    samples = np.array([[np.asarray(field(np.array([a, b]))) for b in g2] for a in g1])
    Path(path).write_text(format_nhgrid(samples, axes, [float(m) for m in mins], [float(m) for m in maxs]))


@dataclass
class ResultRecord:
    index: tuple
    point: dict
    quantities: dict
    diagnostics: dict = field(default_factory=dict)


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def encode_value(v):
    """JSON-friendly form: complex -> ``[re, im]``, matrix -> ``{shape, data}``."""
    if isinstance(v, dict):
        return {str(k): encode_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [encode_value(x) for x in v]
    if isinstance(v, np.ndarray):
        if v.ndim == 0:
            return encode_value(v.item())
        a = np.asarray(v)
        if np.iscomplexobj(a):
            data = [[float(z.real), float(z.imag)] for z in a.reshape(-1)]
        else:
            data = [float(x) for x in a.reshape(-1)]
        return {"shape": list(a.shape), "data": data}
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, (float, np.floating)):
        return float(v)
    return v


def to_json(records, cfg_hash: str, version: str, timestamp: str | None = None) -> str:
    doc = {"config_hash": cfg_hash, "version": version}
    if timestamp is not None:
        doc["timestamp"] = timestamp
    doc["records"] = [
        {"index": list(r.index), "point": encode_value(r.point), "quantities": encode_value(r.quantities),
         "diagnostics": encode_value(r.diagnostics), "config_hash": cfg_hash}
        for r in records
    ]
    return json.dumps(doc, indent=1) + "\n"


def _flatten(prefix, v, out):
    if isinstance(v, dict):
        for k, x in v.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), x, out)
        return
    a = np.asarray(v)
    if a.ndim == 2:
        for r in range(a.shape[0]):
            for c in range(a.shape[1]):
                _flatten(f"{prefix}.{r}.{c}", a[r, c], out)
        return
    if a.ndim == 1:
        for r in range(a.shape[0]):
            _flatten(f"{prefix}.{r}", a[r], out)
        return
    if np.iscomplexobj(a):
        out[f"{prefix}.re"] = repr(float(a.real))
        out[f"{prefix}.im"] = repr(float(a.imag))
    elif a.dtype == bool or isinstance(v, (int, np.integer)):
        out[prefix] = str(v if not isinstance(v, np.bool_) else bool(v))
    else:
        out[prefix] = repr(float(a))


def to_csv(records, cfg_hash: str) -> str:
    """One row per record; matrices become ``quantity.component.row.col`` columns (``.re`` / ``.im``)."""
    rows = []
    for r in records:
        row = {"config_hash": cfg_hash, "index": "/".join(str(i) for i in r.index)}
        for k, x in r.point.items():
            row[f"point.{k}"] = repr(float(x))
        _flatten("", r.quantities, row)
        rows.append(row)
    header = []
    for row in rows:
        for k in row:
            if k not in header:
                header.append(k)
    buf = _io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()
