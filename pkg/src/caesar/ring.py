"""Fixed-point reals embedded in the ring Z_{2^l}.

A real ``x`` at decimal scale ``k`` is stored as ``floor(10^k * x) mod 2^l``;
values at or above ``2^(l-1)`` decode as negatives (two's complement).

Scalar helpers (:func:`encode`, :func:`decode`, :func:`ring_add`, ...) work on
:class:`RingElement`.  The array helpers on :class:`RingParams` are what the
protocols use: for ``l <= 64`` arrays are ``uint64`` and rely on numpy's
wrapping arithmetic, for ``l = 128`` they are object arrays of Python ints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction

import numpy as np

SUPPORTED_BITS = (32, 64, 128)


class RingError(ValueError):
    """Base class for fixed-point / ring errors."""


class EncodingOverflow(RingError):
    pass


class ScaleMismatch(RingError):
    pass


@dataclass(frozen=True)
class RingParams:
    l: int = 64

    def __post_init__(self):
        if self.l not in SUPPORTED_BITS:
            raise RingError(f"ring bit-width must be one of {SUPPORTED_BITS}, got {self.l}")

    @property
    def modulus(self) -> int:
        return 1 << self.l

    @property
    def half(self) -> int:
        return 1 << (self.l - 1)

    @property
    def dtype(self):
        return np.uint64 if self.l <= 64 else object

    @property
    def nbytes(self) -> int:
        return self.l // 8

    # -- array helpers -------------------------------------------------

    def reduce(self, values) -> np.ndarray:
        """Canonical representatives in [0, 2^l) of arbitrary integers."""
        arr = np.asarray(values)
        if self.l == 64 and arr.dtype == np.uint64:
            return arr.copy()
        if self.l <= 64 and arr.dtype.kind in "iu":
            out = arr.astype(np.int64, copy=False).astype(np.uint64)
            if self.l < 64:
                out &= np.uint64(self.modulus - 1)
            return out
        flat = [int(v) % self.modulus for v in arr.ravel()]
        return np.array(flat, dtype=self.dtype).reshape(arr.shape)

    def wrap(self, arr: np.ndarray) -> np.ndarray:
        """Re-reduce the result of native arithmetic on ring arrays."""
        if self.l == 64:
            return arr
        if self.l == 32:
            return arr & np.uint64(0xFFFFFFFF)
        return np.asarray(arr, dtype=object) % self.modulus

    def signed(self, arr: np.ndarray) -> np.ndarray:
        """Two's-complement interpretation; int64 for l <= 64, else object."""
        arr = np.asarray(arr)
        if self.l == 64:
            return arr.astype(np.uint64, copy=False).view(np.int64)
        if self.l == 32:
            v = arr.astype(np.int64)
            return np.where(v >= self.half, v - self.modulus, v)
        flat = [int(v) - self.modulus if int(v) >= self.half else int(v) for v in arr.ravel()]
        return np.array(flat, dtype=object).reshape(arr.shape)

    def signed_ints(self, arr: np.ndarray) -> list[int]:
        """Flat list of signed Python ints (for handing to the HE layer)."""
        return [int(v) for v in self.signed(arr).ravel()]

    def random(self, shape, rng) -> np.ndarray:
        """Uniform ring elements drawn from a ``random.Random``-like source."""
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        count = math.prod(shape)
        if count == 0:
            return np.zeros(shape, dtype=self.dtype)
        if self.l <= 64:
            raw = rng.getrandbits(64 * count).to_bytes(8 * count, "little")
            out = np.frombuffer(raw, dtype="<u8").astype(np.uint64).reshape(shape)
            return self.wrap(out)
        vals = [rng.getrandbits(self.l) for _ in range(count)]
        return np.array(vals, dtype=object).reshape(shape)

    def zeros(self, shape) -> np.ndarray:
        if self.l <= 64:
            return np.zeros(shape, dtype=np.uint64)
        return np.zeros(shape, dtype=object)

    def add(self, a, b):
        return self.wrap(np.asarray(a) + np.asarray(b))

    def sub(self, a, b):
        return self.wrap(np.asarray(a) - np.asarray(b))

    def neg(self, a):
        return self.sub(self.zeros(np.shape(a)), a)

    def mul(self, a, b):
        return self.wrap(np.asarray(a) * np.asarray(b))

    def matmul(self, a, b):
        return self.wrap(np.asarray(a) @ np.asarray(b))

    def scalar(self, value: int):
        """A public integer constant as a ring scalar usable in array ops."""
        v = int(value) % self.modulus
        return np.uint64(v) if self.l <= 64 else v

    def truncate(self, arr: np.ndarray, digits: int) -> np.ndarray:
        """Signed floor-division by ``10^digits`` of each entry, re-embedded.

        Applied independently to both shares of a value this is the standard
        local truncation: the result reconstructs to the true quotient within
        one unit, except for rare wraparound when a share sum crosses the
        signed boundary.
        """
        if digits < 0:
            raise ValueError("digits must be non-negative")
        if digits == 0:
            return np.array(arr, copy=True)
        div = 10**digits
        s = self.signed(arr)
        if self.l <= 64 and div < (1 << 63):
            return self.reduce(np.floor_divide(s, np.int64(div)))
        flat = [int(v) // div for v in s.ravel()]
        return self.reduce(np.array(flat, dtype=object).reshape(s.shape))

    def to_bytes(self, arr: np.ndarray) -> bytes:
        arr = np.asarray(arr)
        if self.l == 64:
            return arr.astype(">u8").tobytes()
        if self.l == 32:
            return arr.astype(">u4").tobytes()
        return b"".join(int(v).to_bytes(16, "big") for v in arr.ravel())

    def from_bytes(self, raw: bytes, shape) -> np.ndarray:
        if self.l == 64:
            return np.frombuffer(raw, dtype=">u8").astype(np.uint64).reshape(shape)
        if self.l == 32:
            return np.frombuffer(raw, dtype=">u4").astype(np.uint64).reshape(shape)
        vals = [int.from_bytes(raw[i : i + 16], "big") for i in range(0, len(raw), 16)]
        return np.array(vals, dtype=object).reshape(shape)


@dataclass(frozen=True)
class FixedPointParams:
    """Decimal precision ``c`` (scale factor ``10^c``)."""

    c: int = 4

    def check(self, ring: RingParams) -> None:
        if self.c < 0:
            raise RingError("precision must be non-negative")
        # headroom for the 4c-aligned sigmoid terms
        if 10 ** (4 * self.c) >= 1 << (ring.l - 8):
            raise RingError(f"10^(4c) with c={self.c} does not fit 2^(l-8) for l={ring.l}")


@dataclass(frozen=True)
class RingElement:
    value: int
    scale: int
    ring: RingParams = RingParams()

    def __post_init__(self):
        if not 0 <= self.value < self.ring.modulus:
            raise RingError(f"value {self.value} outside [0, 2^{self.ring.l})")
        if self.scale < 0:
            raise RingError("scale must be non-negative")


def _floor_scaled(x, c: int) -> int:
    if isinstance(x, (int, np.integer)):
        return int(x) * 10**c
    if isinstance(x, Fraction):
        return math.floor(x * 10**c)
    # repr gives the shortest decimal that round-trips, so 3.1415 stays 3.1415
    d = Decimal(repr(float(x))) if not isinstance(x, Decimal) else x
    if not d.is_finite():
        raise EncodingOverflow(f"cannot encode non-finite value {x!r}")
    return math.floor(d.scaleb(c))


def scaled_floor(x, c: int) -> int:
    """``floor(10^c x)`` as an exact signed integer."""
    return _floor_scaled(x, c)


def encode(x, c: int, params: RingParams = RingParams()) -> RingElement:
    """``floor(10^c x)``, plus ``2^l`` when negative."""
    v = _floor_scaled(x, c)
    if not -params.half <= v < params.half:
        raise EncodingOverflow(f"{x!r} at scale {c} overflows a {params.l}-bit ring")
    return RingElement(v % params.modulus, c, params)


def decode(r: RingElement) -> float:
    v = r.value - r.ring.modulus if r.value >= r.ring.half else r.value
    return float(Fraction(v, 10**r.scale))


def _binary(a: RingElement, b: RingElement, need_same_scale: bool):
    if a.ring != b.ring:
        raise RingError("elements belong to different rings")
    if need_same_scale and a.scale != b.scale:
        raise ScaleMismatch(f"scale {a.scale} != {b.scale}")


def ring_add(a: RingElement, b: RingElement) -> RingElement:
    _binary(a, b, True)
    return RingElement((a.value + b.value) % a.ring.modulus, a.scale, a.ring)


def ring_sub(a: RingElement, b: RingElement) -> RingElement:
    _binary(a, b, True)
    return RingElement((a.value - b.value) % a.ring.modulus, a.scale, a.ring)


def ring_mul(a: RingElement, b: RingElement) -> RingElement:
    _binary(a, b, False)
    return RingElement((a.value * b.value) % a.ring.modulus, a.scale + b.scale, a.ring)


def to_signed(r: RingElement) -> int:
    return r.value - r.ring.modulus if r.value >= r.ring.half else r.value


def truncate(r: RingElement, from_scale: int, to_scale: int) -> RingElement:
    if from_scale <= to_scale:
        raise RingError("truncation must lower the scale")
    if r.scale != from_scale:
        raise ScaleMismatch(f"element is at scale {r.scale}, not {from_scale}")
    q = to_signed(r) // 10 ** (from_scale - to_scale)
    return RingElement(q % r.ring.modulus, to_scale, r.ring)


# -- array encoding ---------------------------------------------------------


def encode_array(x, c: int, ring: RingParams = RingParams()) -> np.ndarray:
    """Vectorised :func:`encode`.

    Products that land within 1e-9 (relative) of an integer snap to it, so
    binary float noise like ``3.1415 * 1e4 = 31414.999...`` does not lose a unit.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise EncodingOverflow("cannot encode NaN or Inf")
    y = x * float(10**c)
    near = np.rint(y)
    snapped = np.where(np.abs(y - near) <= 1e-9 * np.maximum(1.0, np.abs(y)), near, np.floor(y))
    if snapped.size and np.max(np.abs(snapped)) >= min(ring.half, 2**62):
        raise EncodingOverflow(f"values at scale {c} overflow a {ring.l}-bit ring")
    return ring.reduce(snapped.astype(np.int64))


def decode_array(values: np.ndarray, scale: int, ring: RingParams = RingParams()) -> np.ndarray:
    s = ring.signed(values)
    return np.asarray(s, dtype=np.float64) / float(10**scale)
