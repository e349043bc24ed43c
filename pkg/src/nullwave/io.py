"""Text and binary formats for tensors, quasilinear forms, fields and checkpoints.

Tensor files list one nonzero entry per line as ``a b m n value``. Quasilinear
form files hold ``A: a0 a1 a2`` followed by the three rows of ``m``. Field
files start with a header line ``n L``; checkpoints with ``t n L`` and carry
``u`` then ``ut``. Binary payloads are little-endian float64, row-major.
"""
from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .grid import GridField, PeriodicGrid
from .nullform import NullFormTensor, QuasiNullForm
from .solver import WaveState

__all__ = [
    "FormatError",
    "read_tensor",
    "write_tensor",
    "read_quasi",
    "write_quasi",
    "read_field",
    "write_field",
    "read_checkpoint",
    "write_checkpoint",
]


class FormatError(ValueError):
    pass


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield lineno, line


def parse_tensor(text: str) -> NullFormTensor:
    c = np.zeros((3, 3, 3, 3))
    for lineno, line in _content_lines(text):
        parts = line.split()
        if len(parts) != 5:
            raise FormatError(f"line {lineno}: expected 'a b m n value', got {line!r}")
        try:
            idx = tuple(int(p) for p in parts[:4])
            val = float(parts[4])
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
        if any(i not in (0, 1, 2) for i in idx):
            raise FormatError(f"line {lineno}: indices must be 0, 1 or 2")
        if not np.isfinite(val):
            raise FormatError(f"line {lineno}: value must be finite")
        c[idx] += val
    return NullFormTensor(c)


def read_tensor(path) -> NullFormTensor:
    return parse_tensor(Path(path).read_text())


def format_tensor(n: NullFormTensor) -> str:
    lines = ["# a b m n value"]
    for idx in zip(*np.nonzero(n.coeffs)):
        lines.append(" ".join(str(int(i)) for i in idx) + f" {float(n.coeffs[idx])!r}")
    return "\n".join(lines) + "\n"


def write_tensor(n: NullFormTensor, path) -> None:
    Path(path).write_text(format_tensor(n))


def parse_quasi(text: str) -> QuasiNullForm:
    lines = list(_content_lines(text))
    if len(lines) != 4:
        raise FormatError(f"expected 'A: a0 a1 a2' and three matrix rows, found {len(lines)} lines")
    lineno, head = lines[0]
    if not head.startswith("A:"):
        raise FormatError(f"line {lineno}: first line must start with 'A:'")
    try:
        a = [float(x) for x in head[2:].split()]
        m = [[float(x) for x in line.split()] for _, line in lines[1:]]
    except ValueError as exc:
        raise FormatError(str(exc)) from None
    if len(a) != 3 or any(len(row) != 3 for row in m):
        raise FormatError("A needs 3 entries and each matrix row 3 entries")
    try:
        return QuasiNullForm(np.array(a), np.array(m))
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def read_quasi(path) -> QuasiNullForm:
    return parse_quasi(Path(path).read_text())


def write_quasi(q: QuasiNullForm, path) -> None:
    rows = "\n".join(" ".join(repr(float(x)) for x in row) for row in q.m)
    Path(path).write_text("A: " + " ".join(repr(float(x)) for x in q.a) + "\n" + rows + "\n")


def _write_arrays(path, header: str, arrays, fmt: str) -> None:
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write((header + "\n").encode("ascii"))
            for arr in arrays:
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    elif fmt == "csv":
        buf = io.StringIO()
        buf.write(header + "\n")
        for arr in arrays:
            np.savetxt(buf, arr, delimiter=",", fmt="%.17g")
        Path(path).write_text(buf.getvalue())
    else:
        raise ValueError(f"unknown format {fmt!r}")


def _read_arrays(path, header_len: int, count: int):
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise FormatError("missing header line")
    try:
        header = [float(x) for x in raw[:nl].decode("ascii").split()]
    except (UnicodeDecodeError, ValueError):
        raise FormatError("malformed header line") from None
    if len(header) != header_len:
        raise FormatError(f"header must have {header_len} entries")
    n = int(header[-2])
    body = raw[nl + 1:]
    if len(body) == 8 * n * n * count:
        data = np.frombuffer(body, dtype="<f8").reshape(count, n, n)
    else:
        try:
            data = np.loadtxt(io.StringIO(body.decode("ascii")), delimiter=",", ndmin=2)
        except (UnicodeDecodeError, ValueError):
            raise FormatError("body is neither binary float64 nor CSV of the right size") from None
        if data.shape != (count * n, n):
            raise FormatError(f"expected {count * n} rows of {n} values, got {data.shape}")
        data = data.reshape(count, n, n)
    return header, [np.array(d) for d in data]


def write_field(f: GridField, path, fmt: str = "csv") -> None:
    _write_arrays(path, f"{f.grid.n} {f.grid.half_width!r}", [f.values], fmt)


def read_field(path) -> GridField:
    (n, L), (values,) = _read_arrays(path, 2, 1)
    return GridField(PeriodicGrid(int(n), L), values)


def write_checkpoint(state: WaveState, path, fmt: str = "binary") -> None:
    g = state.grid
    _write_arrays(path, f"{state.t!r} {g.n} {g.half_width!r}", [state.u, state.ut], fmt)


def read_checkpoint(path) -> WaveState:
    (t, n, L), (u, ut) = _read_arrays(path, 3, 2)
    return WaveState(PeriodicGrid(int(n), L), t, u, ut)
