"""JSON encoding of matrices and states: ``{"rows", "cols", "re", "im"}``, row-major.

States carry an extra ``"dims"`` list. Rank-4 tensors use the matrix layout
(``d^2 x d^2``) tagged with ``"dims": [d, d, d, d]``.
"""

from __future__ import annotations

import numpy as np


class FormatError(ValueError):
    """Malformed matrix/state payload."""


def encode_array(a, dims=None) -> dict:
    a = np.asarray(a)
    if a.ndim == 1:
        rows, cols = a.size, 1
    elif a.ndim == 2:
        rows, cols = a.shape
    else:
        raise ValueError(f"cannot encode array of rank {a.ndim}")
    flat = np.asarray(a, dtype=np.complex128).reshape(-1)
    out = {"rows": int(rows), "cols": int(cols), "re": flat.real.tolist(), "im": flat.imag.tolist()}
    if dims is not None:
        out["dims"] = [int(d) for d in dims]
    return out


def decode_array(obj) -> np.ndarray:
    """Decode a matrix payload into a ``rows x cols`` complex array."""
    if not isinstance(obj, dict):
        raise FormatError("matrix payload must be an object")
    try:
        rows, cols = int(obj["rows"]), int(obj["cols"])
        re = np.asarray(obj["re"], dtype=float).reshape(-1)
        im = np.asarray(obj.get("im", [0.0] * re.size), dtype=float).reshape(-1)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed matrix payload: {exc}") from exc
    if rows < 1 or cols < 1 or re.size != rows * cols or im.size != rows * cols:
        raise FormatError(f"entry count does not match declared shape {rows}x{cols}")
    m = (re + 1j * im).reshape(rows, cols)
    if not np.all(np.isfinite(m)):
        raise FormatError("matrix payload has non-finite entries")
    return m


def encode_state(amplitudes, dims) -> dict:
    return encode_array(np.asarray(amplitudes).reshape(-1), dims=dims)


def decode_state(obj):
    """Return ``(amplitudes, dims)`` for a state payload."""
    m = decode_array(obj)
    if m.shape[1] != 1 and m.shape[0] != 1:
        raise FormatError(f"state payload must be a column, got {m.shape}")
    amps = m.reshape(-1)
    dims = obj.get("dims", [amps.size])
    if int(np.prod(dims)) != amps.size:
        raise FormatError(f"dims {dims} do not match {amps.size} amplitudes")
    return amps, [int(d) for d in dims]
