"""Dyadic fractals, their projections, and box counting.

Point sets are finite-precision stand-ins: a cell ``(x, y)`` at precision ``R``
is the square ``[x, x+1) x [y, y+1)`` scaled by ``2**-R``.  Generation and
counting are exact integer work; floats appear only in the projection (with
outward-safe cell marking) and in the regression.

Sets too large to enumerate (digit sets at ``R = 64``) go through
:class:`DigitSet`, which bounds projected box counts from below by a
collision-probability argument instead.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .error_terms import as_fraction

MAX_CELLS = 10**8
MAX_BITS = 62  # coordinates are stored as int64
UNIT_TOL = 2.0**-40


@dataclass(frozen=True, eq=False)
class DyadicPointSet:
    """Occupied dyadic cells, canonically sorted and deduplicated.

    ``cells`` has shape ``(n, dims)``.  Projected sets carry ``offset``: the
    stored 1-D index is the true cell index plus ``offset``.
    """

    R: int
    dims: int
    cells: np.ndarray
    offset: int = 0

    def __post_init__(self):
        if self.dims not in (1, 2):
            raise ValueError(f"dims must be 1 or 2, got {self.dims}")
        if not 0 <= self.R <= MAX_BITS - 2:
            raise ValueError(f"precision {self.R} outside [0, {MAX_BITS - 2}]")
        c = np.asarray(self.cells, dtype=np.int64).reshape(-1, self.dims)
        if len(c) > MAX_CELLS:
            raise ValueError(f"{len(c)} cells exceeds the cap {MAX_CELLS}")
        top = 1 << (self.R + (2 if self.offset else 0))
        if len(c) and (c.min() < 0 or c.max() >= top):
            raise ValueError(f"cell coordinates must lie in [0, {top})")
        c = np.unique(c, axis=0) if len(c) else c
        c.setflags(write=False)
        object.__setattr__(self, "cells", c)

    def __len__(self):
        return len(self.cells)

    def __eq__(self, other):
        return (isinstance(other, DyadicPointSet) and (self.R, self.dims, self.offset)
                == (other.R, other.dims, other.offset) and np.array_equal(self.cells, other.cells))

    def as_set(self) -> set:
        return {tuple(int(v) for v in row) for row in self.cells}


# -- generation ----------------------------------------------------------------


@dataclass(frozen=True)
class Similitude:
    ratio: Fraction
    translation: tuple[Fraction, Fraction]

    def __post_init__(self):
        object.__setattr__(self, "ratio", as_fraction(self.ratio))
        object.__setattr__(self, "translation", tuple(as_fraction(t) for t in self.translation))


def _dyadic_exponent(x: Fraction) -> int | None:
    d = x.denominator
    return d.bit_length() - 1 if d & (d - 1) == 0 else None


FOUR_CORNER = tuple(
    Similitude(Fraction(1, 4), (Fraction(tx), Fraction(ty)))
    for tx, ty in [(0, 0), (0, Fraction(3, 4)), (Fraction(3, 4), 0), (Fraction(3, 4), Fraction(3, 4))]
)

PRESETS = {"four-corner": FOUR_CORNER}


def gen_ifs(maps: Sequence[Similitude], depth: int) -> DyadicPointSet:
    """Image of the unit square under all ``depth``-fold compositions."""
    if not maps:
        raise ValueError("need at least one map")
    if depth < 0:
        raise ValueError(f"depth must be >= 0, got {depth}")
    ratios = {m.ratio for m in maps}
    if len(ratios) != 1:
        raise ValueError("all maps must share one contraction ratio")
    ratio = ratios.pop()
    j = _dyadic_exponent(ratio)
    if ratio.numerator != 1 or j is None or j == 0:
        raise ValueError(f"ratio {ratio} is not of the form 2^-j with j >= 1")
    shifts = []
    for m in maps:
        tt = [t * (1 << j) for t in m.translation]
        if any(t.denominator != 1 for t in tt):
            raise ValueError(f"translation {m.translation} is not on the 2^-{j} grid")
        if any(t < 0 or t + 1 > (1 << j) for t in tt):
            raise ValueError(f"map with translation {m.translation} leaves the unit square")
        shifts.append((int(tt[0]), int(tt[1])))
    if len(maps) ** depth > MAX_CELLS:
        raise ValueError(f"{len(maps)}^{depth} cells exceeds the cap {MAX_CELLS}")
    cells = np.zeros((1, 2), dtype=np.int64)
    T = np.array(shifts, dtype=np.int64)
    for d in range(depth):
        # f_i(S) at precision j*(d+1): shift_i << (j*d) plus the old cells
        cells = (T[:, None, :] << (j * d)) + cells[None, :, :]
        cells = cells.reshape(-1, 2)
    return DyadicPointSet(j * depth, 2, cells)


def _axis_values(free: Iterable[int], R: int) -> np.ndarray:
    vals = np.zeros(1, dtype=np.int64)
    for p in sorted(set(free)):
        if not 1 <= p <= R:
            raise ValueError(f"bit position {p} outside 1..{R}")
        vals = np.concatenate([vals, vals + (1 << (R - p))])
    return np.sort(vals)


def gen_digit_set(free_x: Iterable[int], free_y: Iterable[int], R: int) -> DyadicPointSet:
    """Points whose bits outside the free positions are zero (position 1 = most significant)."""
    free_x, free_y = set(free_x), set(free_y)
    if (1 << (len(free_x) + len(free_y))) > MAX_CELLS:
        raise ValueError("digit set too large to enumerate; use DigitSet")
    xs, ys = _axis_values(free_x, R), _axis_values(free_y, R)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return DyadicPointSet(R, 2, np.stack([gx.ravel(), gy.ravel()], axis=1))


def periodic_positions(R: int, period: int, residues: Iterable[int]) -> list[int]:
    """Positions ``p in 1..R`` with ``(p - 1) % period`` in ``residues``."""
    res = set(residues)
    return [p for p in range(1, R + 1) if (p - 1) % period in res]


# -- projection ----------------------------------------------------------------


def _check_unit(e) -> tuple[float, float]:
    e1, e2 = float(e[0]), float(e[1])
    if abs(math.hypot(e1, e2) - 1.0) > UNIT_TOL:
        raise ValueError(f"direction ({e1}, {e2}) is not a unit vector")
    return e1, e2


def _small_dyadic(v: float, bits: int = 16) -> int | None:
    s = v * (1 << bits)
    return int(s) if s == int(s) else None


def project(points: DyadicPointSet, e, R_out: int) -> DyadicPointSet:
    """Cells at precision ``R_out`` met by the projection of some occupied cell.

    Each source cell is projected as a whole square, and every output cell
    meeting the (half-open) image interval is marked.  Axis-like directions
    with short dyadic components are handled in exact integers; otherwise the
    float interval is widened by a rigorous rounding bound, which can only add
    cells.  Indices are shifted by ``offset`` (``2**R_out``, or twice that
    when both components are negative).
    """
    if points.dims != 2:
        raise ValueError("project needs a planar point set")
    if not 0 <= R_out <= 40:
        raise ValueError(f"R_out must lie in [0, 40], got {R_out}")
    e1, e2 = _check_unit(e)
    offset = 1 << (R_out + (1 if (e1 < 0 and e2 < 0) else 0))
    x = points.cells[:, 0]
    y = points.cells[:, 1]
    R = points.R
    p1, p2 = _small_dyadic(e1), _small_dyadic(e2)
    if p1 is not None and p2 is not None and R + 16 + R_out < 60:
        # exact: value = (p1 x + p2 y) / 2^(R+16), scaled by 2^R_out
        lo_num = p1 * x + p2 * y + min(p1, 0) + min(p2, 0)
        hi_num = lo_num + abs(p1) + abs(p2)
        lo_num, hi_num = lo_num << R_out, hi_num << R_out
        sh = R + 16
        first = lo_num >> sh
        last = -((-hi_num) >> sh) - 1
    else:
        w = 2.0 ** (R_out - R)
        xs, ys = x.astype(np.float64) * w, y.astype(np.float64) * w
        lo = e1 * xs + e2 * ys + w * (min(e1, 0.0) + min(e2, 0.0))
        hi = lo + w * (abs(e1) + abs(e2))
        err = 2.0**-48 * (np.abs(e1) * xs + np.abs(e2) * ys + 4.0 * w + 1.0)
        first = np.floor(lo - err).astype(np.int64)
        last = (np.ceil(hi + err) - 1).astype(np.int64)
    last = np.maximum(last, first)
    span = last - first + 1
    if int(span.sum()) > MAX_CELLS:
        raise ValueError("projection would mark more cells than the cap")
    starts = np.repeat(first, span)
    within = np.arange(len(starts), dtype=np.int64) - np.repeat(np.cumsum(span) - span, span)
    out = starts + within + offset
    lim = 1 << (R_out + 2)
    out = out[(out >= 0) & (out < lim)]
    return DyadicPointSet(R_out, 1, out.reshape(-1, 1), offset)


# -- counting ------------------------------------------------------------------


@dataclass(frozen=True)
class BoxCountReport:
    scales: tuple[int, ...]
    counts: tuple[int, ...]
    slope: float
    stderr: float
    lower_estimate: Fraction | float | None
    anchors: tuple[int, ...] = ()

    def to_json(self) -> dict:
        le = self.lower_estimate
        if isinstance(le, Fraction):
            le = [le.numerator, le.denominator]
        return {"scales": list(self.scales), "counts": list(self.counts), "slope": self.slope,
                "stderr": self.stderr, "lower_estimate": le, "anchors": list(self.anchors)}


def box_counts(points: DyadicPointSet, scales: Iterable[int]) -> dict[int, int]:
    """Number of distinct ``k``-bit prefixes among the cells, per scale."""
    out = {}
    for k in scales:
        if not 0 <= k <= points.R:
            raise ValueError(f"scale {k} outside [0, {points.R}]")
        pref = points.cells >> (points.R - k)
        out[k] = int(len(np.unique(pref, axis=0))) if len(pref) else 0
    return out


def dim_regress(pairs: Iterable[tuple[int, int]]) -> tuple[float, float]:
    """Least-squares slope (and its standard error) of ``log2 N`` against ``k``."""
    pts = sorted(set((int(k), float(n)) for k, n in pairs))
    ks = np.array([k for k, _ in pts], dtype=np.float64)
    if len(set(ks.tolist())) < 2:
        raise ValueError("need at least two distinct scales")
    ys = np.log2(np.array([n for _, n in pts], dtype=np.float64))
    A = np.stack([ks, np.ones_like(ks)], axis=1)
    coef, *_ = np.linalg.lstsq(A, ys, rcond=None)
    slope = float(coef[0])
    if len(ks) > 2:
        resid = ys - A @ coef
        s2 = float(resid @ resid) / (len(ks) - 2)
        stderr = math.sqrt(s2 / float(((ks - ks.mean()) ** 2).sum()))
    else:
        stderr = 0.0
    return slope, (0.0 if stderr < 1e-12 else stderr)


def _log2_ratio(n: int, k: int) -> Fraction | float:
    if n >= 1 and n & (n - 1) == 0:
        return Fraction(n.bit_length() - 1, k)
    return math.log2(n) / k


def lower_box_estimate(counts: dict[int, int], anchors: Iterable[int]) -> Fraction | float:
    """``min log2 N(k) / k`` over the anchors; exact when every count is a power of 2."""
    anchors = list(anchors)
    if not anchors:
        raise ValueError("need at least one anchor scale")
    vals = []
    for k in anchors:
        if k not in counts:
            raise ValueError(f"anchor {k} is not among the counted scales")
        if k <= 0:
            raise ValueError("anchors must be positive")
        vals.append(_log2_ratio(int(counts[k]), k))
    return min(vals)


def box_report(points: DyadicPointSet, scales: Sequence[int], anchors: Sequence[int] = ()) -> BoxCountReport:
    counts = box_counts(points, scales)
    ks = sorted(counts)
    slope, se = dim_regress((k, counts[k]) for k in ks) if len(ks) >= 2 else (float("nan"), 0.0)
    lower = lower_box_estimate(counts, anchors) if anchors else None
    return BoxCountReport(tuple(ks), tuple(counts[k] for k in ks), slope, se, lower, tuple(anchors))


# -- implicit digit sets -------------------------------------------------------


DIR_BITS = 56


@dataclass(frozen=True)
class DigitSet:
    """Digit set ``{x, y : bits outside free_x / free_y are zero}`` at precision ``R``, never enumerated."""

    free_x: frozenset
    free_y: frozenset
    R: int

    def __post_init__(self):
        object.__setattr__(self, "free_x", frozenset(self.free_x))
        object.__setattr__(self, "free_y", frozenset(self.free_y))
        for p in self.free_x | self.free_y:
            if not 1 <= p <= self.R:
                raise ValueError(f"bit position {p} outside 1..{self.R}")

    @property
    def log2_size(self) -> int:
        return len(self.free_x) + len(self.free_y)

    def materialize(self) -> DyadicPointSet:
        return gen_digit_set(self.free_x, self.free_y, self.R)

    @staticmethod
    def rounded_direction(e) -> tuple[int, int]:
        """``(C, S)`` with ``e ~ (C, S) / 2**56``; the bounds are for this exact direction."""
        e1, e2 = _check_unit(e)
        return round(e1 * (1 << DIR_BITS)), round(e2 * (1 << DIR_BITS))

    def collision_lower_bounds(self, e, scales: Iterable[int]) -> dict[int, float]:
        """Lower bounds on the number of ``2**-k`` intervals met by the projection.

        With ``Z, Z'`` independent uniform points of the projected set,
        ``N(k) >= 1 / P(|Z - Z'| < 2**-k)`` by Cauchy-Schwarz.  The difference
        is a sum of independent digit terms ``2**-p (C du + S dv)`` with
        ``du, dv`` in ``{-1, 0, 1}`` (weights 1/4, 1/2, 1/4 on free positions).
        Its law is propagated position by position in exact integers, pruning
        partial sums that cannot come back within ``2**-i`` of zero; the
        weight left inside the window at level ``k`` bounds the probability
        from above.
        """
        C, S = self.rounded_direction(e)
        scales = sorted(set(scales))
        if scales and not 1 <= scales[0] <= scales[-1] <= self.R:
            raise ValueError(f"scales must lie in 1..{self.R}")
        want = set(scales)
        # tail[i] = 2^i * 2^56 * sum_{p > i} 2^-p (|C|[p in Fx] + |S|[p in Fy]) in Y units, rounded up
        tail_num = [0] * (self.R + 1)
        acc = 0  # numerator over 2^R
        for i in range(self.R, -1, -1):
            tail_num[i] = acc
            if i >= 1:
                acc += (abs(C) * (i in self.free_x) + abs(S) * (i in self.free_y)) << (self.R - i)
        Y = np.zeros(1, dtype=np.int64)
        W = np.ones(1, dtype=np.float64)
        out = {}
        steps = [(-1, 0.25), (0, 0.5), (1, 0.25)]
        for i in range(1, self.R + 1):
            fx, fy = i in self.free_x, i in self.free_y
            du = steps if fx else [(0, 1.0)]
            dv = steps if fy else [(0, 1.0)]
            moves = {}
            for a, wa in du:
                for b, wb in dv:
                    d = C * a + S * b
                    moves[d] = moves.get(d, 0.0) + wa * wb
            order = sorted(moves)
            ds = np.array(order, dtype=np.int64)
            ws = np.array([moves[d] for d in order], dtype=np.float64)
            # one sorted run per move; a stable sort merges the runs cheaply
            cand = (2 * Y[None, :] + ds[:, None]).ravel()
            w = (ws[:, None] * W[None, :]).ravel()
            # window: |Y| <= 2^56 (1 + 2^i T_i)
            t = -((-tail_num[i] << i) >> self.R)  # ceil
            lim = (1 << DIR_BITS) + t
            keep = np.abs(cand) <= lim
            cand, w = cand[keep], w[keep]
            if len(cand):
                srt = np.argsort(cand, kind="stable")
                cand, w = cand[srt], w[srt]
                first = np.flatnonzero(np.concatenate([[True], cand[1:] != cand[:-1]]))
                Y, W = cand[first], np.add.reduceat(w, first)
            else:
                Y, W = cand, w
            if i in want:
                q = float(W.sum())
                out[i] = 1.0 / q if q > 0 else float("inf")
        return out


def collision_bounds_exact_check(ds: DigitSet, e, scales: Sequence[int]) -> dict[int, int]:
    """Brute-force projected box counts along the rounded direction (tests only; small sets)."""
    C, S = DigitSet.rounded_direction(e)
    pts = ds.materialize().cells
    zs = [C * int(x) + S * int(y) for x, y in pts]  # z = value / 2^(R + 56)
    sh = ds.R + DIR_BITS
    return {k: len({z >> (sh - k) for z in zs}) for k in scales}


# -- file formats --------------------------------------------------------------


def format_points(ps: DyadicPointSet) -> str:
    head = f"{ps.R} {ps.dims} {len(ps)}" + (f" {ps.offset}" if ps.offset else "")
    lines = [head] + [" ".join(str(int(v)) for v in row) for row in ps.cells]
    return "\n".join(lines) + "\n"


def parse_points(text: str) -> DyadicPointSet:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty point-set file")
    head = lines[0].split()
    if len(head) not in (3, 4):
        raise ValueError("point-set header must be 'R dims count [offset]'")
    R, dims, count = (int(t) for t in head[:3])
    offset = int(head[3]) if len(head) == 4 else 0
    rows = [[int(t) for t in ln.split()] for ln in lines[1:]]
    if len(rows) != count or any(len(r) != dims for r in rows):
        raise ValueError(f"expected {count} rows of {dims} integers")
    return DyadicPointSet(R, dims, np.array(rows, dtype=np.int64).reshape(-1, dims), offset)


_MAGIC = b"DPS1"


def write_points(ps: DyadicPointSet, path, binary: bool | None = None) -> None:
    path = Path(path)
    if binary is None:
        binary = path.suffix == ".dps"
    if binary:
        head = _MAGIC + struct.pack("<IIQQ", ps.R, ps.dims, len(ps), ps.offset)
        path.write_bytes(head + ps.cells.astype("<i8").tobytes())
    else:
        path.write_text(format_points(ps))


def read_points(path) -> DyadicPointSet:
    raw = Path(path).read_bytes()
    if raw[:4] == _MAGIC:
        R, dims, count, offset = struct.unpack("<IIQQ", raw[4:28])
        cells = np.frombuffer(raw[28:], dtype="<i8").astype(np.int64)
        if len(cells) != count * dims:
            raise ValueError("truncated DPS1 container")
        return DyadicPointSet(R, dims, cells.reshape(-1, dims), offset)
    return parse_points(raw.decode())
