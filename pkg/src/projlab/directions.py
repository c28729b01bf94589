"""Digit-masked direction sets over a scale ladder.

Angles are ``theta = pi * 0.b1 b2 ... bR`` (binary), bit ``i`` carrying weight
``2**-i``.  A mask zeroes whole bit ranges ``(lo, hi]``; the masked angles form
the direction sets whose covering numbers and ideal complexity profiles are
computed exactly here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .error_terms import as_fraction
from .profiles import ComplexityProfile

PAPER_CAP = 1 << 20


class ScaleOverflowError(OverflowError):
    pass


@dataclass(frozen=True)
class ScaleSequence:
    values: tuple[int, ...]
    rule: str = "custom"

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if not vals:
            raise ValueError("scale sequence is empty")
        if vals[0] < 2:
            raise ValueError(f"r_1 must be >= 2, got {vals[0]}")
        for i in range(1, len(vals)):
            if vals[i] <= vals[i - 1]:
                raise ValueError(f"scale sequence not strictly increasing at index {i + 1}: {vals[i - 1]} -> {vals[i]}")
        if self.rule == "paper":
            for i in range(1, len(vals)):
                if vals[i] != 2 ** (2 ** vals[i - 1]):
                    raise ValueError(f"r_{i + 1} = {vals[i]} breaks r_(n+1) = 2^(2^r_n)")

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def largest_at_most(self, R: int) -> int | None:
        below = [r for r in self.values if r <= R]
        return below[-1] if below else None

    def bracket(self, R: int) -> tuple[int, int]:
        """``(n, r_n)`` with ``r_n`` the largest term below ``R`` (1-based ``n``).

        Falls back to ``n = 1`` when ``R <= r_1``.
        """
        n = 1
        for i, r in enumerate(self.values, start=1):
            if r < R:
                n = i
        return n, self.values[n - 1]


def scale_seq_paper(m: int, cap: int = PAPER_CAP) -> ScaleSequence:
    """First ``m`` terms of 2, 16, 2**65536, ...; refuses terms above ``cap``."""
    if m < 1:
        raise ValueError(f"need at least one term, got m={m}")
    vals = [2]
    while len(vals) < m:
        r = vals[-1]
        # 2**(2**r) > cap  <=>  2**r >= cap.bit_length()
        if r >= 64 or (1 << r) >= cap.bit_length():
            raise ScaleOverflowError(f"r_{len(vals) + 1} = 2^(2^{r}) exceeds cap {cap}")
        vals.append(1 << (1 << r))
    return ScaleSequence(tuple(vals), "paper")


def scale_seq_surrogate(rule: str, m: int, r1: int = 2, values: Sequence[int] | None = None,
                        kind: "MaskKind | None" = None) -> ScaleSequence:
    """Desk-scale ladder: ``geometric(k)``, ``square`` or ``custom``.

    When ``kind`` is given the sequence is also checked for disjoint masks.
    """
    if m < 1:
        raise ValueError(f"need at least one term, got m={m}")
    if rule.startswith("geometric"):
        k = int(rule[rule.index("(") + 1: rule.index(")")]) if "(" in rule else 2
        if k < 2:
            raise ValueError(f"geometric ratio must be >= 2, got {k}")
        vals = [r1 * k ** i for i in range(m)]
    elif rule == "square":
        vals = [r1]
        while len(vals) < m:
            vals.append(vals[-1] ** 2)
    elif rule == "custom":
        if values is None:
            raise ValueError("custom rule needs explicit values")
        vals = list(values)[:m] if m else list(values)
    else:
        raise ValueError(f"unknown growth rule {rule!r}")
    seq = ScaleSequence(tuple(vals), rule)
    if kind is not None:
        _raw_intervals(kind, seq)
    return seq


def parse_seq(spec: str, m: int = 8) -> ScaleSequence:
    """CLI form: ``paper``, ``geo:<k>``, ``square`` or ``list:<csv>``."""
    spec = spec.strip()
    if spec == "paper":
        return scale_seq_paper(min(m, 2))
    if spec.startswith("geo:"):
        return scale_seq_surrogate(f"geometric({int(spec[4:])})", m)
    if spec == "square":
        return scale_seq_surrogate("square", min(m, 5))
    if spec.startswith("list:"):
        vals = [int(v) for v in spec[5:].split(",") if v.strip()]
        return scale_seq_surrogate("custom", len(vals), values=vals)
    raise ValueError(f"unrecognised sequence spec {spec!r}")


# -- masks ---------------------------------------------------------------------


@dataclass(frozen=True)
class MaskKind:
    """``D0``, ``Ds`` (with ``s``) or ``DepsS`` (with ``eps`` and ``s``)."""

    name: str
    s: Fraction | None = None
    eps: Fraction | None = None

    def __post_init__(self):
        if self.name not in ("D0", "Ds", "DepsS"):
            raise ValueError(f"unknown mask kind {self.name!r}")
        if self.s is not None:
            object.__setattr__(self, "s", as_fraction(self.s))
        if self.eps is not None:
            object.__setattr__(self, "eps", as_fraction(self.eps))
        if self.name in ("Ds", "DepsS") and (self.s is None or not 0 < self.s < 1):
            raise ValueError(f"{self.name} needs s in (0, 1), got {self.s}")
        if self.name == "DepsS" and (self.eps is None or not 0 < self.eps < 1):
            raise ValueError(f"DepsS needs eps in (0, 1), got {self.eps}")

    def to_json(self) -> dict:
        out = {"name": self.name}
        if self.s is not None:
            out["s"] = str(self.s)
        if self.eps is not None:
            out["eps"] = str(self.eps)
        return out


D0 = MaskKind("D0")


def Ds(s) -> MaskKind:
    return MaskKind("Ds", s=s)


def DepsS(eps, s) -> MaskKind:
    return MaskKind("DepsS", s=s, eps=eps)


def _upper(kind: MaskKind, n: int, rn: int) -> int:
    if kind.name == "D0":
        return n * rn
    if kind.name == "Ds":
        return math.floor(rn / kind.s)
    return math.floor(rn / kind.eps)


def _raw_intervals(kind: MaskKind, seq: ScaleSequence, R: int | None = None) -> list[tuple[int, int]]:
    # only terms starting below R matter (and are checked for overlap)
    raw = [(rn, _upper(kind, n, rn)) for n, rn in enumerate(seq.values, start=1) if R is None or rn < R]
    live = [(lo, hi) for lo, hi in raw if hi > lo]
    for (lo1, hi1), (lo2, hi2) in zip(live, live[1:]):
        if hi1 > lo2:
            raise ValueError(
                f"mask intervals ({lo1}, {hi1}] and ({lo2}, {hi2}] overlap; "
                f"sequence grows too slowly for {kind.name}"
            )
    return live


@dataclass(frozen=True)
class MaskSpec:
    kind: MaskKind
    intervals: tuple[tuple[int, int], ...]
    horizon: int
    seq: ScaleSequence | None = None
    # DepsS: only positions divisible by keep_stride stay free
    keep_stride: int = 1

    def masked(self, pos: int) -> bool:
        if self.keep_stride > 1 and pos % self.keep_stride:
            return True
        return any(lo < pos <= hi for lo, hi in self.intervals)

    def free_mask(self) -> np.ndarray:
        """Boolean array over positions 1..R, True where the bit is free."""
        free = np.ones(self.horizon, dtype=bool)
        for lo, hi in self.intervals:
            free[lo:hi] = False
        if self.keep_stride > 1:
            pos = np.arange(1, self.horizon + 1)
            free &= pos % self.keep_stride == 0
        return free

    def free_count(self, k: int) -> int:
        """Number of free positions in 1..k."""
        return int(self.free_mask()[:k].sum())

    def to_json(self) -> dict:
        return {
            "kind": self.kind.to_json(),
            "horizon": self.horizon,
            "intervals": [list(iv) for iv in self.intervals],
            "keep_stride": self.keep_stride,
            "seq": list(self.seq.values) if self.seq else None,
        }


def empty_spec(R: int) -> MaskSpec:
    return MaskSpec(D0, (), R)


def mask_intervals(kind: MaskKind, seq: ScaleSequence, R: int) -> MaskSpec:
    """The defining zero ranges of ``kind`` over ``seq``, clipped to ``(0, R]``."""
    if R < seq[0]:
        raise ValueError(f"horizon {R} is below r_1 = {seq[0]}")
    clipped = tuple((lo, min(hi, R)) for lo, hi in _raw_intervals(kind, seq, R))
    stride = math.ceil(1 / kind.s) if kind.name == "DepsS" else 1
    return MaskSpec(kind, clipped, R, seq, stride)


def mask_bits(bits: Sequence[int], spec: MaskSpec) -> tuple[int, ...]:
    if len(bits) != spec.horizon:
        raise ValueError(f"bit string has length {len(bits)}, mask expects {spec.horizon}")
    free = spec.free_mask()
    return tuple(int(b) if f else 0 for b, f in zip(bits, free))


# -- samples -------------------------------------------------------------------


@dataclass(frozen=True)
class DirectionSample:
    bits: tuple[int, ...]
    angle: Fraction  # theta / pi, an exact dyadic in (0, 1)
    unit_vector: tuple[float, float]
    predicted: ComplexityProfile | None = None
    spec: MaskSpec | None = field(default=None, compare=False)

    @property
    def theta(self) -> float:
        return math.pi * float(self.angle)

    def bits_hex(self) -> str:
        return bits_to_hex(self.bits)


def bits_to_hex(bits: Sequence[int]) -> str:
    if not bits:
        return ""
    v = int("".join(str(int(b)) for b in bits), 2)
    width = (len(bits) + 3) // 4
    return format(v << (4 * width - len(bits)), f"0{width}x")


def hex_to_bits(h: str, R: int) -> tuple[int, ...]:
    width = len(h)
    v = int(h, 16) >> (4 * width - R) if h else 0
    return tuple(int(c) for c in format(v, f"0{R}b")) if R else ()


def bits_to_direction(bits: Sequence[int], R: int | None = None, spec: MaskSpec | None = None) -> DirectionSample:
    R = len(bits) if R is None else R
    if len(bits) != R:
        raise ValueError(f"expected {R} bits, got {len(bits)}")
    num = 0
    for b in bits:
        num = (num << 1) | (1 if b else 0)
    if num == 0:
        raise ValueError("all-zero bits give theta = 0, which is excluded")
    angle = Fraction(num, 1 << R)
    # cos/sin of pi*angle at double precision; exact zeros at the axes
    theta = math.pi * float(angle)
    if angle == Fraction(1, 2):
        vec = (0.0, 1.0)
    else:
        vec = (math.cos(theta), math.sin(theta))
    pred = predict_profile(spec) if spec is not None else None
    return DirectionSample(tuple(int(b) for b in bits), angle, vec, pred, spec)


def random_bits(R: int, seed: int, index: int = 0) -> tuple[int, ...]:
    """Seeded stand-in for a random angle: bit ``i`` of sample ``index``."""
    rng = np.random.default_rng([int(seed), int(index)])
    return tuple(int(b) for b in rng.integers(0, 2, size=R))


def sample_directions(spec: MaskSpec, count: int, seed: int) -> list[DirectionSample]:
    out = []
    for i in range(count):
        bits = mask_bits(random_bits(spec.horizon, seed, i), spec)
        j = 0
        while not any(bits):
            # masked down to zero; redraw deterministically
            j += 1
            bits = mask_bits(random_bits(spec.horizon, seed, i + j * (1 << 32)), spec)
        out.append(bits_to_direction(bits, spec.horizon, spec))
    return out


def predict_profile(spec: MaskSpec) -> ComplexityProfile:
    """Ideal profile of a maximally complex angle after masking: free bits up to r."""
    free = spec.free_mask().astype(np.int64)
    vals = np.concatenate([[0], np.cumsum(free)])
    return ComplexityProfile(tuple(int(v) for v in vals), 1)


def membership_check(spec: MaskSpec, c=0) -> list[tuple[int, str, Fraction, int]]:
    """Rows ``(r, condition, required, predicted)`` where the predicted profile
    breaks a membership lower bound with log-slack constant ``c``.

    Condition 1: ``K[r] >= r - c log2 r_n`` for ``r <= r_n``.  Condition 2
    (D0): ``K[r] >= r - (n-1) r_n - c log2 r`` for ``n r_n <= r <= r_(n+1)``;
    (Ds): the same with ``floor((1-s)/s) r_n`` on ``floor(r_n/s) <= r <= r_(n+1)``.
    """
    if spec.seq is None or spec.kind.name == "DepsS":
        return []
    from .error_terms import log2_up

    c = as_fraction(c)
    K = predict_profile(spec).values
    R = spec.horizon
    seq = spec.seq.values
    bad = []
    for n, rn in enumerate(seq, start=1):
        slack = c * log2_up(rn)
        for r in range(1, min(rn, R) + 1):
            need = r - slack
            if K[r] < need:
                bad.append((r, "short-scale", need, K[r]))
        if spec.kind.name == "D0":
            start, mass = n * rn, (n - 1) * rn
        else:
            s = spec.kind.s
            start, mass = math.floor(rn / s), math.floor((1 - s) / s) * rn
        stop = min(seq[n] if n < len(seq) else R, R)
        for r in range(max(start, 1), stop + 1):
            need = r - mass - c * log2_up(max(r, 1))
            if K[r] < need:
                bad.append((r, "post-mask", need, K[r]))
    return bad


@dataclass(frozen=True)
class CoveringRow:
    k: int
    n: int
    bound_log2: int  # covering bound 2**r_n at scale 2**-k
    exact_log2: int  # distinct k-bit prefixes of the masked set, log2
    exponent: Fraction  # bound_log2 / k

    @property
    def exact_exponent(self) -> Fraction:
        return Fraction(self.exact_log2, self.k)


def anchors(spec: MaskSpec) -> list[tuple[int, int, int]]:
    """``(n, r_n, k)`` for the anchor scales ``k`` inside the horizon."""
    out = []
    if spec.seq is None:
        return out
    for n, rn in enumerate(spec.seq.values, start=1):
        k = _upper(spec.kind, n, rn)
        if k <= spec.horizon and k > 0:
            out.append((n, rn, k))
    return out


def covering_exponents(spec: MaskSpec) -> list[CoveringRow]:
    """Covering counts at the anchor scales.

    At ``k = n r_n`` (D0) or ``k = floor(r_n/s)`` (Ds, DepsS) the bits in
    ``(r_n, k]`` are zero, so ``2**r_n`` intervals of length ``2**-k`` cover
    the set.  The exact prefix count ``2**(free bits <= k)`` is reported next
    to it; it can be smaller because earlier masks also remove bits.  With no
    mask every scale ``1..R`` is reported with exponent 1.
    """
    if not spec.intervals and spec.keep_stride == 1:
        return [CoveringRow(k, 0, k, k, Fraction(1)) for k in range(1, spec.horizon + 1)]
    rows = []
    free = spec.free_mask()
    for n, rn, k in anchors(spec):
        exact = int(free[:k].sum())
        bound = min(rn, k) if spec.keep_stride == 1 else exact
        rows.append(CoveringRow(k, n, bound, exact, Fraction(bound, k)))
    return rows


def prefix_count(samples: Iterable[DirectionSample], k: int) -> int:
    """Distinct k-bit angle prefixes among sampled directions."""
    return len({s.bits[:k] for s in samples})
