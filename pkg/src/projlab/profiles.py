"""Integer complexity profiles and the yellow/teal interval calculus.

A profile ``K[0..R]`` stands in for ``r -> K_r(x)``.  All identities here are
exact; logarithmic slack lives in :mod:`projlab.error_terms` and is added back
by the bound engine.

Every interval test reduces to the tilted profile ``f(s) = K[s] - sigma*s``:

* ``[a, b]`` is teal  iff  ``f(b) - min f <= slack``
* ``[a, b]`` is yellow iff ``f(a) - min f <= slack``

with the minimum over ``s in [a, b]``.  Comparisons are done on integers
after clearing the denominator of ``sigma``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple, Sequence

from .error_terms import as_fraction


@dataclass(frozen=True)
class ComplexityProfile:
    values: tuple[int, ...]
    ambient_dim: int = 2

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if not self.values:
            raise ValueError("a profile needs at least K[0]")
        if self.ambient_dim not in (1, 2):
            raise ValueError(f"ambient_dim must be 1 or 2, got {self.ambient_dim}")

    @property
    def horizon(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, r):
        return self.values[r]

    def __len__(self):
        return len(self.values)

    def to_json(self) -> dict:
        return {"ambient_dim": self.ambient_dim, "values": list(self.values)}

    @classmethod
    def from_json(cls, obj: dict) -> "ComplexityProfile":
        return cls(tuple(obj["values"]), int(obj.get("ambient_dim", 2)))

    @classmethod
    def from_increments(cls, incs: Sequence[int], ambient_dim: int = 2) -> "ComplexityProfile":
        vals = [0]
        for d in incs:
            vals.append(vals[-1] + int(d))
        return cls(tuple(vals), ambient_dim)


class Violation(NamedTuple):
    index: int
    rule: str
    detail: str


def validate_profile(p: ComplexityProfile) -> list[Violation]:
    """Report every broken invariant; never raises."""
    out = []
    K = p.values
    if K[0] != 0:
        out.append(Violation(0, "origin", f"K[0] = {K[0]} != 0"))
    for r, v in enumerate(K):
        if v < 0:
            out.append(Violation(r, "negative", f"K[{r}] = {v} < 0"))
    for r in range(1, len(K)):
        d = K[r] - K[r - 1]
        if d < 0:
            out.append(Violation(r, "monotone", f"K[{r}] - K[{r - 1}] = {d} < 0"))
        elif d > p.ambient_dim:
            out.append(Violation(r, "growth_cap", f"K[{r}] - K[{r - 1}] = {d} > {p.ambient_dim}"))
    return out


def is_valid(p: ComplexityProfile) -> bool:
    return not validate_profile(p)


def _check_interval(p: ComplexityProfile, a: int, b: int) -> None:
    if not (0 <= a <= b <= p.horizon):
        raise ValueError(f"interval [{a}, {b}] is not inside [0, {p.horizon}]")


def growth(p: ComplexityProfile, a: int, b: int) -> int:
    """K[b] - K[a]: the self-conditional growth on ``[a, b]``."""
    if a > b:
        raise ValueError(f"growth needs a <= b, got [{a}, {b}]")
    _check_interval(p, a, b)
    return p.values[b] - p.values[a]


def reduce_oracle(p: ComplexityProfile, cap: int) -> ComplexityProfile:
    """Pointwise ``min(cap, K[t])``: the profile after an oracle truncating complexity at ``cap``."""
    if cap < 0:
        raise ValueError(f"cap must be non-negative, got {cap}")
    return ComplexityProfile(tuple(min(cap, v) for v in p.values), p.ambient_dim)


# -- slack modes ---------------------------------------------------------------


@dataclass(frozen=True)
class Slack:
    """Allowed defect in an interval test.

    ``exact``: none.  ``log``: ``c * log2(b)``.  ``eps``: ``eps * b``.  Here
    ``b`` is the right endpoint of the interval under test.
    """

    mode: str = "exact"
    c: Fraction = Fraction(0)
    eps: Fraction = Fraction(0)

    def __post_init__(self):
        if self.mode not in ("exact", "log", "eps"):
            raise ValueError(f"unknown slack mode {self.mode!r}")
        object.__setattr__(self, "c", as_fraction(self.c))
        object.__setattr__(self, "eps", as_fraction(self.eps))
        if self.c < 0 or self.eps < 0:
            raise ValueError("slack parameters must be non-negative")

    def admits(self, excess: Fraction, b: int) -> bool:
        """True when ``excess <= slack(b)``, decided exactly."""
        if excess <= 0:
            return True
        if self.mode == "exact":
            return False
        if self.mode == "eps":
            return excess <= self.eps * b
        return _le_c_log2(excess, self.c, b)

    def to_json(self) -> dict:
        return {"mode": self.mode, "c": str(self.c), "eps": str(self.eps)}


EXACT = Slack()


def log_slack(c) -> Slack:
    return Slack("log", c=c)


def eps_slack(eps) -> Slack:
    return Slack("eps", eps=eps)


def _le_c_log2(x: Fraction, c: Fraction, b: int) -> bool:
    # x <= c*log2(b) for x > 0  <=>  2**(x/c) <= b  <=>  2**p <= b**q with x/c = p/q
    if c == 0 or b <= 1:
        return False
    y = x / c
    if y > b.bit_length():
        return False
    return (1 << y.numerator) <= b ** y.denominator


# -- classification ------------------------------------------------------------


@dataclass(frozen=True)
class IntervalLabel:
    a: int
    b: int
    sigma: Fraction
    slack: Slack
    teal_excess: Fraction
    yellow_deficit: Fraction
    is_teal: bool
    is_yellow: bool

    @property
    def kind(self) -> str:
        if self.is_teal and self.is_yellow:
            return "both"
        if self.is_teal:
            return "teal"
        if self.is_yellow:
            return "yellow"
        return "neither"


def _sigma(sigma) -> Fraction:
    sigma = as_fraction(sigma)
    if not 0 < sigma.numerator <= 2 * sigma.denominator:
        raise ValueError(f"sigma must lie in (0, 2], got {sigma}")
    return sigma


def _tilted(K: Sequence[int], a: int, b: int, sigma: Fraction) -> list[int]:
    # q * (K[s] - sigma*s) for s in a..b, as exact integers
    p, q = sigma.numerator, sigma.denominator
    return [q * K[s] - p * s for s in range(a, b + 1)]


def classify_interval(p: ComplexityProfile, a: int, b: int, sigma, slack: Slack = EXACT) -> IntervalLabel:
    """Classify ``[a, b]`` as teal, yellow, both or neither under ``slack``."""
    sigma = _sigma(sigma)
    _check_interval(p, a, b)
    g = _tilted(p.values, a, b, sigma)
    lo = min(g)
    q = sigma.denominator
    teal_excess = Fraction(g[-1] - lo, q)
    yellow_deficit = Fraction(g[0] - lo, q)
    return IntervalLabel(
        a, b, sigma, slack, teal_excess, yellow_deficit,
        slack.admits(teal_excess, b), slack.admits(yellow_deficit, b),
    )


class LabeledInterval(NamedTuple):
    a: int
    b: int
    label: str  # "teal" or "yellow"

    @property
    def length(self) -> int:
        return self.b - self.a


def _rightmost(K: Sequence[int], a: int, b: int, num: int, den: int) -> int:
    best, arg = None, a
    for s in range(a, b + 1):
        v = den * K[s] - num * s
        if best is None or v <= best:
            best, arg = v, s
    return arg


def rightmost_argmin(p: ComplexityProfile, a: int, b: int, sigma) -> int:
    sigma = _sigma(sigma)
    _check_interval(p, a, b)
    return _rightmost(p.values, a, b, sigma.numerator, sigma.denominator)


def split_teal_yellow(p: ComplexityProfile, a: int, b: int, sigma) -> tuple[int, list[LabeledInterval]]:
    """Split ``[a, b]`` at the rightmost minimiser ``m`` of ``K[s] - sigma*s``.

    ``[a, m]`` is then exactly teal and ``[m, b]`` exactly yellow.  Either
    piece may be degenerate.
    """
    _check_interval(p, a, b)
    m = rightmost_argmin(p, a, b, sigma)
    return m, [LabeledInterval(a, m, "teal"), LabeledInterval(m, b, "yellow")]


def partition(p: ComplexityProfile, a: int, b: int, sigma, max_len: int) -> list[LabeledInterval]:
    """Cover ``[a, b]`` by consecutive exact teal/yellow intervals of length <= ``max_len``.

    Blocks of length ``max_len`` are each split once, so at most
    ``2 * ceil((b - a) / max_len)`` intervals come back.  Degenerate pieces
    are dropped, except that an empty ``[a, a]`` yields one teal interval.
    """
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    _check_interval(p, a, b)
    sigma = _sigma(sigma)
    if a == b:
        return [LabeledInterval(a, a, "teal")]
    num, den = sigma.numerator, sigma.denominator
    out = []
    lo = a
    while lo < b:
        hi = min(lo + max_len, b)
        m = _rightmost(p.values, lo, hi, num, den)
        if lo < m:
            out.append(LabeledInterval(lo, m, "teal"))
        if m < hi:
            out.append(LabeledInterval(m, hi, "yellow"))
        lo = hi
    return out


def effective_dims(p: ComplexityProfile, window: int | None = None) -> tuple[Fraction, Fraction]:
    """Finite-horizon stand-ins for the lower and upper effective dimensions.

    Min and max of ``K[r]/r`` over ``r`` in ``[R - window, R]`` (``r >= 1``);
    the default window is the last quarter of the horizon.
    """
    R = p.horizon
    if window is None:
        window = max(1, R // 4)
    if window < 0 or R < window or R < 1:
        raise ValueError(f"horizon {R} is shorter than the tail window {window}")
    rates = [Fraction(p.values[r], r) for r in range(max(1, R - window), R + 1)]
    return min(rates), max(rates)


# -- text format ---------------------------------------------------------------


def format_profile(p: ComplexityProfile) -> str:
    body = " ".join(str(v) for v in p.values)
    return f"{p.horizon} {p.ambient_dim}\n{body}\n"


def parse_profile(text: str) -> ComplexityProfile:
    tokens = text.split()
    if len(tokens) < 2:
        raise ValueError("profile text needs a 'R ambient_dim' header")
    R, dim = int(tokens[0]), int(tokens[1])
    vals = [int(t) for t in tokens[2:]]
    if len(vals) != R + 1:
        raise ValueError(f"header declares R={R} but {len(vals)} values follow (expected {R + 1})")
    return ComplexityProfile(tuple(vals), dim)


def read_profile(path) -> ComplexityProfile:
    return parse_profile(Path(path).read_text())


def write_profile(p: ComplexityProfile, path) -> None:
    Path(path).write_text(format_profile(p))
