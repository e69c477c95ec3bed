"""Extended-precision scalars and vector kernels.

A :class:`PrecisionContext` names a working precision.  ``bits=64`` is the
native IEEE double (53-bit mantissa) and is backed by numpy float64 arrays;
every wider setting is backed by MPFR through :mod:`gmpy2`, with ``bits``
mantissa bits and round-to-nearest-even.

Vectors are numpy arrays: ``float64`` for the native context and
``dtype=object`` arrays of :class:`gmpy2.mpfr` for extended contexts.  Each
extended operation (product, sum, quotient, square root) is rounded to the
context precision before the next one starts, and reductions accumulate
left to right, so results are reproducible bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Union

import gmpy2
import numpy as np

SUPPORTED_BITS = (64, 128, 256, 512, 1024)
NATIVE_BITS = 64
NATIVE_MANTISSA = 53

#: Scalar type of extended contexts.  Native contexts use plain floats.
ExtFloat = gmpy2.mpfr
Scalar = Union[float, gmpy2.mpfr]


class PrecisionError(ValueError):
    """Unsupported precision or mismatched operand shapes."""


@dataclass(frozen=True)
class PrecisionContext:
    """Working precision for the vector kernels.

    ``bits`` is the nominal width used on the command line and in reports.
    ``mantissa`` is the number of significand bits actually carried: 53 for
    the native 64-bit setting, ``bits`` otherwise.
    """

    bits: int

    @property
    def native(self) -> bool:
        return self.bits == NATIVE_BITS

    @property
    def mantissa(self) -> int:
        return NATIVE_MANTISSA if self.native else self.bits

    @property
    def eps(self) -> float:
        """Machine epsilon, ``2**(1 - mantissa)``."""
        return 2.0 ** (1 - self.mantissa)

    @property
    def unit_roundoff(self) -> float:
        return 2.0 ** (-self.mantissa)

    def mpfr_context(self):
        return gmpy2.context(precision=self.mantissa, round=gmpy2.RoundToNearest)

    def active(self):
        """Context manager that makes gmpy2 arithmetic round at this precision."""
        return self.mpfr_context()

    def __str__(self) -> str:
        return f"{self.bits}-bit"


def make_context(bits: int, allowed: Iterable[int] = SUPPORTED_BITS) -> PrecisionContext:
    allowed = tuple(allowed)
    if isinstance(bits, bool) or not isinstance(bits, (int, np.integer)):
        raise PrecisionError(f"precision must be an integer, got {bits!r}")
    bits = int(bits)
    if bits < NATIVE_MANTISSA:
        raise PrecisionError(f"{bits} bits is below the native double mantissa")
    if bits not in allowed:
        raise PrecisionError(f"unsupported precision {bits}; choose from {allowed}")
    return PrecisionContext(bits)


def widest(*ctxs: PrecisionContext) -> PrecisionContext:
    return max(ctxs, key=lambda c: c.mantissa)


def _to_mpfr(value) -> gmpy2.mpfr:
    # Called with the target context active, so the conversion itself rounds.
    if isinstance(value, Fraction):
        return gmpy2.mpfr(gmpy2.mpq(value.numerator, value.denominator))
    if isinstance(value, np.floating):
        value = float(value)
    elif isinstance(value, np.integer):
        value = int(value)
    return gmpy2.mpfr(value)


def scalar(value, ctx: PrecisionContext) -> Scalar:
    """Round ``value`` (int, float, Fraction, str or mpfr) to the context."""
    if ctx.native:
        if isinstance(value, str):
            return float(gmpy2.mpfr(value, NATIVE_MANTISSA))
        return float(value)
    with ctx.active():
        return _to_mpfr(value)


def vector(values, ctx: PrecisionContext) -> np.ndarray:
    """Build a context vector from any iterable of numbers."""
    if ctx.native:
        if isinstance(values, np.ndarray) and values.dtype != object:
            return np.array(values, dtype=np.float64)
        return np.array([scalar(v, ctx) for v in values], dtype=np.float64)
    with ctx.active():
        out = np.empty(len(values), dtype=object)
        for i, v in enumerate(values):
            out[i] = _to_mpfr(v)
    return out


def zeros(n: int, ctx: PrecisionContext) -> np.ndarray:
    if ctx.native:
        return np.zeros(n)
    with ctx.active():
        zero = gmpy2.mpfr(0)
    out = np.empty(n, dtype=object)
    out[:] = zero
    return out


def promote(values: np.ndarray, ctx: PrecisionContext) -> np.ndarray:
    """Convert an array (any shape) to ``ctx``; a no-op when already there."""
    values = np.asarray(values)
    if ctx.native:
        if values.dtype == object:
            return np.vectorize(float, otypes=[np.float64])(values)
        return values.astype(np.float64, copy=False)
    if values.dtype == object:
        first = next(iter(values.flat), None)
        if isinstance(first, gmpy2.mpfr) and first.precision == ctx.mantissa:
            return values
    with ctx.active():
        conv = np.vectorize(_to_mpfr, otypes=[object])
        return conv(values) if values.size else np.empty(values.shape, dtype=object)


def to_float(values) -> np.ndarray:
    """Round an array of any context to float64."""
    values = np.asarray(values)
    if values.dtype == object:
        if values.size == 0:
            return np.zeros(values.shape)
        return np.vectorize(float, otypes=[np.float64])(values)
    return values.astype(np.float64, copy=False)


def _check_lengths(u, v) -> None:
    if len(u) != len(v):
        raise PrecisionError(f"length mismatch: {len(u)} vs {len(v)}")


def dot(u: np.ndarray, v: np.ndarray, ctx: PrecisionContext) -> Scalar:
    """Inner product with left-to-right accumulation at context precision."""
    _check_lengths(u, v)
    if ctx.native:
        return float(np.dot(promote(u, ctx), promote(v, ctx)))
    if len(u) == 0:
        return scalar(0, ctx)
    u, v = promote(u, ctx), promote(v, ctx)
    with ctx.active():
        return np.dot(u, v)


def axpy(alpha, x: np.ndarray, y: np.ndarray, ctx: PrecisionContext) -> np.ndarray:
    """Return ``alpha*x + y``, each product and sum rounded separately."""
    _check_lengths(x, y)
    x, y = promote(x, ctx), promote(y, ctx)
    if ctx.native:
        # Separate multiply and add: numpy does not fuse these.
        return float(alpha) * x + y
    with ctx.active():
        a = _to_mpfr(alpha)
        return a * x + y


def scale(alpha, x: np.ndarray, ctx: PrecisionContext) -> np.ndarray:
    x = promote(x, ctx)
    if ctx.native:
        return float(alpha) * x
    with ctx.active():
        return _to_mpfr(alpha) * x


def norm2(u: np.ndarray, ctx: PrecisionContext) -> Scalar:
    s = dot(u, u, ctx)
    if ctx.native:
        return float(np.sqrt(s))
    with ctx.active():
        return gmpy2.sqrt(s)


def exact(value) -> Fraction:
    """Exact rational value of a float or mpfr (used by oracles and tests)."""
    if isinstance(value, gmpy2.mpfr):
        num, den = value.as_integer_ratio()
        return Fraction(int(num), int(den))
    return Fraction(value)
