"""Exact bookkeeping for asymptotic slack terms.

An :class:`ErrorTerm` is a non-negative combination

    c_const + c_log*log2(b) + c_log2*log2(b)**2 + c_sqrt*sqrt(b) + c_epsb*eps*b + c_lin*b

with rational coefficients.  Evaluation is conservative: irrational factors are
rounded *up* to a multiple of ``2**-ROUND_BITS`` (exact values are kept when
they are already rational), so an evaluated error never understates the term.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from fractions import Fraction
from math import isqrt
from numbers import Rational

import mpmath

ROUND_BITS = 16
_FIELDS = ("c_const", "c_log", "c_log2", "c_sqrt", "c_epsb", "c_lin")


def as_fraction(x) -> Fraction:
    """Coerce ints, Fractions, decimal strings and floats to a Fraction.

    Floats go through ``repr`` so ``0.01`` means one hundredth rather than the
    nearest binary double.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(str(x).strip())


def _exact_sqrt(x: Fraction) -> Fraction | None:
    n, d = x.numerator, x.denominator
    rn, rd = isqrt(n), isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


def sqrt_up(x, bits: int = ROUND_BITS) -> Fraction:
    """Smallest multiple of 2**-bits that is >= sqrt(x); exact for rational squares."""
    return _sqrt_up(as_fraction(x), bits)


@lru_cache(maxsize=4096)
def _sqrt_up(x: Fraction, bits: int) -> Fraction:
    if x < 0:
        raise ValueError(f"sqrt_up of negative value {x}")
    exact = _exact_sqrt(x)
    if exact is not None:
        return exact
    # ceil(sqrt(x) * 2**bits) = ceil(sqrt(n * 4**bits / d))
    scaled = Fraction(x.numerator << (2 * bits), x.denominator)
    t = isqrt(scaled.numerator // scaled.denominator)
    while t * t < scaled:
        t += 1
    return Fraction(t, 1 << bits)


def log2_up(x, bits: int = ROUND_BITS) -> Fraction:
    """Smallest multiple of 2**-bits that is >= log2(x), for x >= 1."""
    return _log2_up(as_fraction(x), bits)


@lru_cache(maxsize=4096)
def _log2_up(x: Fraction, bits: int) -> Fraction:
    if x < 1:
        raise ValueError(f"log2_up needs x >= 1, got {x}")
    n, d = x.numerator, x.denominator
    if d == 1 and n & (n - 1) == 0:
        return Fraction(n.bit_length() - 1)
    with mpmath.workprec(4 * bits + 2 * (n.bit_length() + d.bit_length()) + 64):
        t = int(mpmath.ceil(mpmath.log(mpmath.mpf(n) / d, 2) * (1 << bits)))
    # log2(x) * 2**bits is irrational for non-powers of two, so the ceiling at
    # this working precision is exact
    return Fraction(t, 1 << bits)


@dataclass(frozen=True)
class ErrorTerm:
    c_const: Fraction = Fraction(0)
    c_log: Fraction = Fraction(0)
    c_log2: Fraction = Fraction(0)
    c_sqrt: Fraction = Fraction(0)
    c_epsb: Fraction = Fraction(0)
    c_lin: Fraction = Fraction(0)

    def __post_init__(self):
        for f in _FIELDS:
            v = as_fraction(getattr(self, f))
            if v < 0:
                raise ValueError(f"ErrorTerm coefficient {f} must be non-negative, got {v}")
            object.__setattr__(self, f, v)

    def __add__(self, other: "ErrorTerm") -> "ErrorTerm":
        return et_add(self, other)

    def __mul__(self, k) -> "ErrorTerm":
        return et_scale(self, k)

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return all(getattr(self, f) == 0 for f in _FIELDS)

    def to_json(self) -> dict:
        return {f: [getattr(self, f).numerator, getattr(self, f).denominator] for f in _FIELDS}

    @classmethod
    def from_json(cls, obj: dict) -> "ErrorTerm":
        unknown = set(obj) - set(_FIELDS)
        if unknown:
            raise ValueError(f"unknown ErrorTerm fields: {sorted(unknown)}")
        return cls(**{k: Fraction(int(v[0]), int(v[1])) for k, v in obj.items()})


ZERO = ErrorTerm()


def _unchecked(vals) -> ErrorTerm:
    # combinations of valid terms stay valid; skip re-validation
    t = object.__new__(ErrorTerm)
    for f, v in zip(_FIELDS, vals):
        object.__setattr__(t, f, v)
    return t


def et_add(a: ErrorTerm, b: ErrorTerm) -> ErrorTerm:
    return _unchecked([getattr(a, f) + getattr(b, f) for f in _FIELDS])


def et_scale(a: ErrorTerm, k) -> ErrorTerm:
    k = as_fraction(k)
    if k < 0:
        raise ValueError(f"cannot scale an error term by negative factor {k}")
    return _unchecked([getattr(a, f) * k for f in _FIELDS])


def et_sum(terms) -> ErrorTerm:
    # ledgers repeat the same few terms; count them before doing any arithmetic
    seen: dict[int, list] = {}
    for t in terms:
        seen.setdefault(id(t), [t, 0])[1] += 1
    return _weighted_sum(tuple((t, k) for t, k in seen.values()))


@lru_cache(maxsize=4096)
def _weighted_sum(items) -> ErrorTerm:
    acc = [Fraction(0)] * len(_FIELDS)
    for t, k in items:
        acc = [v + getattr(t, f) * k for v, f in zip(acc, _FIELDS)]
    return _unchecked(acc)


def et_eval(a: ErrorTerm, b, eps=0, extra_log: bool = False) -> Fraction:
    """Conservative numeric value of ``a`` at precision ``b``.

    With ``extra_log`` the squared-log coefficient is charged one more factor
    of log2(b), i.e. it stands for a cubed-log term.
    """
    return _et_eval(a, as_fraction(b), as_fraction(eps), bool(extra_log))


@lru_cache(maxsize=65536)
def _et_eval(a: ErrorTerm, b: Fraction, eps: Fraction, extra_log: bool) -> Fraction:
    if b < 2:
        raise ValueError(f"error terms are evaluated at precision b >= 2, got {b}")
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps}")
    lg = log2_up(b)
    log2_factor = lg * lg * (lg if extra_log else 1)
    return (
        a.c_const
        + a.c_log * lg
        + a.c_log2 * log2_factor
        + a.c_sqrt * sqrt_up(b)
        + a.c_epsb * eps * b
        + a.c_lin * b
    )
