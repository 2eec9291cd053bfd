"""Binary ``HHF1`` format for reflector factors.

Layout (all integers and floats little-endian)::

    magic     4 bytes   b"HHF1"
    n         u32
    h         u32       number of stored reflectors
    kind      u8        0 = orthonormal product, 1 = factored symmetric
    signs     n bytes   0x01 for +1, 0xFF for -1
    spectrum  n f64     only when kind == 1
    vectors   h*n f64   reflector U_1 first

Full length-``n`` vectors are stored even though ``n - 1`` entries carry
the information; ``h`` and ``n`` in the header are enough to recover the
``h (n - 1) Q + n`` bit count of the compact representation.
"""
from __future__ import annotations

import struct
from typing import BinaryIO, Union

import numpy as np

from .reflectors import FactoredSymmetric, ReflectorProduct

__all__ = ["FactorFormatError", "to_bytes", "from_bytes", "serialize", "deserialize", "compact_bits"]

MAGIC = b"HHF1"
_HEADER = struct.Struct("<4sIIB")
KIND_ORTHONORMAL = 0
KIND_SYMMETRIC = 1
_LOAD_UNIT_TOL = 1e-9


class FactorFormatError(ValueError):
    """Raised when a byte stream is not a valid HHF1 factor."""


Factor = Union[ReflectorProduct, FactoredSymmetric]


def to_bytes(obj: Factor) -> bytes:
    if isinstance(obj, FactoredSymmetric):
        basis, spectrum, kind = obj.basis, obj.spectrum, KIND_SYMMETRIC
    elif isinstance(obj, ReflectorProduct):
        basis, spectrum, kind = obj, None, KIND_ORTHONORMAL
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    parts = [_HEADER.pack(MAGIC, basis.n, basis.h, kind)]
    parts.append(np.where(basis.signs > 0, 0x01, 0xFF).astype(np.uint8).tobytes())
    if spectrum is not None:
        parts.append(spectrum.astype("<f8").tobytes())
    parts.append(basis.vectors.astype("<f8").tobytes())
    return b"".join(parts)


def from_bytes(buf: bytes) -> Factor:
    buf = bytes(buf)
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise FactorFormatError("bad magic")
    if len(buf) < _HEADER.size:
        raise FactorFormatError("truncated stream")
    _, n, h, kind = _HEADER.unpack_from(buf, 0)
    if kind not in (KIND_ORTHONORMAL, KIND_SYMMETRIC):
        raise FactorFormatError(f"unknown kind {kind}")
    if n == 0:
        raise FactorFormatError("dimension must be positive")
    expected = _HEADER.size + n + 8 * n * h + (8 * n if kind == KIND_SYMMETRIC else 0)
    if len(buf) < expected:
        raise FactorFormatError("truncated stream")
    if len(buf) > expected:
        raise FactorFormatError("trailing bytes after factor")
    off = _HEADER.size
    raw_signs = np.frombuffer(buf, dtype=np.uint8, count=n, offset=off)
    if not np.all((raw_signs == 0x01) | (raw_signs == 0xFF)):
        raise FactorFormatError("invalid sign byte")
    signs = np.where(raw_signs == 0x01, 1.0, -1.0)
    off += n
    spectrum = None
    if kind == KIND_SYMMETRIC:
        spectrum = np.frombuffer(buf, dtype="<f8", count=n, offset=off).astype(np.float64)
        off += 8 * n
    vectors = np.frombuffer(buf, dtype="<f8", count=n * h, offset=off).astype(np.float64)
    vectors = vectors.reshape(h, n)
    if h and np.any(np.abs(np.linalg.norm(vectors, axis=1) - 1.0) > _LOAD_UNIT_TOL):
        raise FactorFormatError("non-unit reflector vector")
    try:
        basis = ReflectorProduct(vectors, signs, requested_h=h)
        if spectrum is None:
            return basis
        return FactoredSymmetric(basis, spectrum)
    except ValueError as exc:
        raise FactorFormatError(str(exc)) from exc


def serialize(obj: Factor, sink: BinaryIO) -> int:
    """Write ``obj`` to a binary sink; returns the number of bytes written."""
    data = to_bytes(obj)
    sink.write(data)
    return len(data)


def deserialize(source: BinaryIO) -> Factor:
    return from_bytes(source.read())


def compact_bits(n: int, h: int, float_bits: int = 64) -> int:
    """Bits needed by the compact representation: ``h (n - 1) Q + n``."""
    return h * (n - 1) * float_bits + n
