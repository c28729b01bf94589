"""Profile corpora and independent checks of the interval calculus.

The checks restate the defining inequalities directly (no call back into
:mod:`projlab.profiles`), so they act as oracles for the library.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Iterator

import numpy as np

from .profiles import ComplexityProfile, LabeledInterval


def exhaustive_profiles(R: int, ambient_dim: int = 2) -> Iterator[ComplexityProfile]:
    """Every valid profile of horizon ``R`` (``(ambient_dim + 1) ** R`` of them)."""
    for incs in itertools.product(range(ambient_dim + 1), repeat=R):
        yield ComplexityProfile.from_increments(incs, ambient_dim)


def fuzz_profiles(count: int, R: int, seed: int, ambient_dim: int = 2) -> Iterator[ComplexityProfile]:
    """Piecewise-biased random walks: 1 to 8 segments, each with its own step law."""
    rng = np.random.default_rng([int(seed), int(R), int(ambient_dim)])
    steps = np.arange(ambient_dim + 1)
    for _ in range(count):
        nseg = int(rng.integers(1, 9))
        cuts = np.sort(rng.choice(np.arange(1, R), size=min(nseg - 1, R - 1), replace=False)) if R > 1 else []
        bounds = [0, *cuts.tolist(), R] if len(cuts) else [0, R]
        incs = []
        for lo, hi in zip(bounds, bounds[1:]):
            w = rng.dirichlet(np.full(ambient_dim + 1, 0.5))
            incs.extend(rng.choice(steps, size=hi - lo, p=w).tolist())
        yield ComplexityProfile.from_increments(incs, ambient_dim)


def teal_ok(K, a: int, b: int, sigma: Fraction) -> bool:
    """``K[b] - K[s] <= sigma (b - s)`` for all ``s`` in ``[a, b]``."""
    p, q = sigma.numerator, sigma.denominator
    return all(q * (K[b] - K[s]) <= p * (b - s) for s in range(a, b + 1))


def yellow_ok(K, a: int, b: int, sigma: Fraction) -> bool:
    """``K[s] - K[a] >= sigma (s - a)`` for all ``s`` in ``[a, b]``."""
    p, q = sigma.numerator, sigma.denominator
    return all(q * (K[s] - K[a]) >= p * (s - a) for s in range(a, b + 1))


def check_split(p: ComplexityProfile, a: int, b: int, sigma: Fraction, m: int,
                pieces: list[LabeledInterval]) -> list[str]:
    K = p.values
    errs = []
    if not a <= m <= b:
        errs.append(f"split point {m} outside [{a}, {b}]")
        return errs
    if [tuple(iv) for iv in pieces] != [(a, m, "teal"), (m, b, "yellow")]:
        errs.append(f"unexpected pieces {pieces}")
    if not teal_ok(K, a, m, sigma):
        errs.append(f"[{a}, {m}] is not teal")
    if not yellow_ok(K, m, b, sigma):
        errs.append(f"[{m}, {b}] is not yellow")
    return errs


def check_partition(p: ComplexityProfile, a: int, b: int, sigma: Fraction, max_len: int,
                    pieces: list[LabeledInterval]) -> list[str]:
    K = p.values
    errs = []
    if a == b:
        return [] if [tuple(iv) for iv in pieces] == [(a, a, "teal")] else [f"bad empty partition {pieces}"]
    cap = 2 * math.ceil((b - a) / max_len)
    if len(pieces) > cap:
        errs.append(f"{len(pieces)} pieces > {cap}")
    pos = a
    for iv in pieces:
        if iv.a != pos:
            errs.append(f"gap or overlap at {pos}: next piece {iv}")
        if not 0 < iv.b - iv.a <= max_len:
            errs.append(f"piece {iv} has bad length")
        ok = teal_ok(K, iv.a, iv.b, sigma) if iv.label == "teal" else yellow_ok(K, iv.a, iv.b, sigma)
        if iv.label not in ("teal", "yellow") or not ok:
            errs.append(f"piece {iv} fails its label")
        pos = iv.b
    if pos != b:
        errs.append(f"cover stops at {pos}, not {b}")
    return errs
