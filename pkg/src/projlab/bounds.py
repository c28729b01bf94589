"""Certified bound calculators over complexity profiles.

Each per-interval bound is an *upper* bound on how much of ``x`` is left
undetermined once its projection is known on ``[a, b]``; chaining them over a
partition and subtracting from ``K_x[R]`` gives a lower bound on the
projection's complexity.  Hidden constants are configuration
(:class:`EngineConfig`), every slack is an :class:`ErrorTerm`, and the final
rate subtracts the conservatively evaluated error.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from .directions import ScaleSequence
from .error_terms import ZERO, ErrorTerm, as_fraction, et_eval, et_sum, sqrt_up
from .profiles import (
    EXACT,
    ComplexityProfile,
    LabeledInterval,
    _le_c_log2,
    classify_interval,
    eps_slack,
    log_slack,
    partition,
    split_teal_yellow,
)


class PreconditionError(ValueError):
    """The cited statement does not apply to these inputs."""


@dataclass(frozen=True)
class EngineConfig:
    hidden_const: Fraction = Fraction(1)  # every O(.) constant
    slack_c: Fraction = Fraction(1)  # c in (sigma, c)-yellow/teal and in the direction hypothesis
    b_min: int = 16  # "b sufficiently large"

    def __post_init__(self):
        object.__setattr__(self, "hidden_const", as_fraction(self.hidden_const))
        object.__setattr__(self, "slack_c", as_fraction(self.slack_c))

    def to_json(self) -> dict:
        return {"hidden_const": str(self.hidden_const), "slack_c": str(self.slack_c), "b_min": self.b_min}


DEFAULT = EngineConfig()


@dataclass(frozen=True)
class Variant:
    """Which interval lemma is used: ``exact``/``log2`` (squared-log error),
    ``sqrt`` (square-root error), ``eps`` (almost-yellow/teal, ``4 eps b``)."""

    kind: str = "log2"
    eps: Fraction = Fraction(0)

    def __post_init__(self):
        if self.kind not in ("exact", "log2", "sqrt", "eps"):
            raise ValueError(f"unknown variant {self.kind!r}")
        object.__setattr__(self, "eps", as_fraction(self.eps))
        if self.eps < 0:
            raise ValueError("eps must be non-negative")

    @classmethod
    def parse(cls, text: str) -> "Variant":
        text = text.strip()
        if text.startswith("eps(") and text.endswith(")"):
            return cls("eps", as_fraction(text[4:-1]))
        return cls(text)

    def __str__(self):
        return f"eps({self.eps})" if self.kind == "eps" else self.kind

    def interval_slack(self, cfg: EngineConfig):
        if self.kind == "exact":
            return EXACT
        if self.kind == "eps":
            return eps_slack(self.eps)
        return log_slack(cfg.slack_c)

    def error(self, cfg: EngineConfig) -> ErrorTerm:
        if self.kind == "sqrt":
            return ErrorTerm(c_sqrt=cfg.hidden_const)
        if self.kind == "eps":
            return ErrorTerm(c_epsb=4)
        return ErrorTerm(c_log2=cfg.hidden_const)


# -- closed-form statements ----------------------------------------------------


def bound_thm31(dim_x, s, eps, r: int, log_const=None, cfg: EngineConfig = DEFAULT) -> Fraction:
    """Lower bound ``min(dim_x, s) r - 10 sqrt(eps) r - c log2 r``, floored at 0."""
    dim_x, s, eps = as_fraction(dim_x), as_fraction(s), as_fraction(eps)
    log_const = cfg.hidden_const if log_const is None else as_fraction(log_const)
    if not 0 < s <= 1:
        raise ValueError(f"s must lie in (0, 1], got {s}")
    if eps < 0 or dim_x < 0 or log_const < 0:
        raise ValueError("dim_x, eps and the log constant must be non-negative")
    if r < 2:
        raise ValueError(f"precision r must be >= 2, got {r}")
    val = min(dim_x, s) * r - 10 * sqrt_up(eps) * r - et_eval(ErrorTerm(c_log=log_const), r)
    return max(Fraction(0), val)


def bound_thm32(K: int, r: int, t: int, C: int, eps) -> Fraction:
    """Upper bound ``max(K - r, (K - t)/2, 0) + 10 C eps r`` on ``K_r(x | p_e x, e)``."""
    eps = as_fraction(eps)
    if C < 1:
        raise ValueError(f"C must be a positive integer, got {C}")
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps}")
    if t > r:
        raise ValueError(f"need t <= r, got t={t}, r={r}")
    if t * C < r:
        raise PreconditionError(f"t = {t} < r/C = {Fraction(r, C)}: the bound does not apply")
    return max(Fraction(K - r), Fraction(K - t, 2), Fraction(0)) + 10 * C * eps * r


# -- direction hypothesis ------------------------------------------------------


@dataclass(frozen=True)
class HypothesisResult:
    passed: bool
    first_fail: int | None = None

    def __bool__(self):
        return self.passed


def direction_hypothesis(p_e: ComplexityProfile, a: int, b: int, sigma, variant: Variant,
                         cfg: EngineConfig = DEFAULT, scale: int | None = None) -> HypothesisResult:
    """Check ``K_e[s] >= sigma s - slack`` for every ``s <= b - a``.

    ``p_e`` models the direction's profile relative to ``x``.  The slack is
    ``c log2(scale)`` (``log2``/``eps``), ``c sqrt(scale)`` (``sqrt``) or zero
    (``exact``), with ``scale`` defaulting to ``b``.
    """
    sigma = as_fraction(sigma)
    scale = b if scale is None else scale
    n = b - a
    if n > p_e.horizon:
        raise ValueError(f"direction profile horizon {p_e.horizon} is shorter than interval length {n}")
    c = cfg.slack_c
    num, den = sigma.numerator, sigma.denominator
    Ke = p_e.values
    for s in range(n + 1):
        d = num * s - den * Ke[s]
        if d <= 0:
            continue
        deficit = Fraction(d, den)
        if variant.kind == "exact":
            ok = False
        elif variant.kind == "sqrt":
            ok = deficit * deficit <= c * c * scale
        else:
            ok = _le_c_log2(deficit, c, scale)
        if not ok:
            return HypothesisResult(False, s)
    return HypothesisResult(True)


# -- interval bounds -----------------------------------------------------------


def _interval_pre(p_x, a, b, sigma, variant, cfg, want: str, direction):
    if b < cfg.b_min:
        raise PreconditionError(f"b = {b} is below the configured minimum precision {cfg.b_min}")
    lab = classify_interval(p_x, a, b, sigma, variant.interval_slack(cfg))
    if not (lab.is_yellow if want == "yellow" else lab.is_teal):
        raise PreconditionError(f"[{a}, {b}] is not {want} under {variant} slack (kind={lab.kind})")
    if direction is not None:
        hyp = direction_hypothesis(direction, a, b, sigma, variant, cfg)
        if not hyp:
            raise PreconditionError(f"direction hypothesis fails at s = {hyp.first_fail} on [{a}, {b}]")


def yellow_interval_bound(p_x: ComplexityProfile, a: int, b: int, sigma, variant: Variant,
                          cfg: EngineConfig = DEFAULT, direction: ComplexityProfile | None = None
                          ) -> tuple[int, ErrorTerm]:
    """``(ceil(K[b] - K[a] - sigma (b - a)), err)`` on a yellow interval."""
    sigma = as_fraction(sigma)
    _interval_pre(p_x, a, b, sigma, variant, cfg, "yellow", direction)
    value = math.ceil(Fraction(p_x.values[b] - p_x.values[a]) - sigma * (b - a))
    return value, variant.error(cfg)


def teal_interval_bound(p_x: ComplexityProfile, a: int, b: int, sigma, variant: Variant,
                        cfg: EngineConfig = DEFAULT, direction: ComplexityProfile | None = None
                        ) -> tuple[int, ErrorTerm]:
    """``(0, err)`` on a teal interval: nothing beyond the error is left."""
    _interval_pre(p_x, a, b, sigma, variant, cfg, "teal", direction)
    return 0, variant.error(cfg)


# -- certificates --------------------------------------------------------------


@dataclass
class LedgerEntry:
    a: int
    b: int
    label: str
    lemma: str
    value: int
    err: ErrorTerm

    def to_json(self) -> dict:
        return {"a": self.a, "b": self.b, "label": self.label, "lemma": self.lemma,
                "value": self.value, "err": self.err.to_json()}


def _q(x: Fraction) -> list[int]:
    return [x.numerator, x.denominator]


@dataclass
class BoundCertificate:
    statement_id: str
    horizon: int
    sigma: Fraction
    variant: str
    ledger: list[LedgerEntry]
    total_value: int
    total_err: ErrorTerm
    extra_log: bool
    bound: int  # raw lower bound on the projection's complexity, before error
    certified_rate: Fraction
    status: str = "certified"
    failing_interval: tuple[int, int] | None = None
    extras: dict = field(default_factory=dict)

    _evaluated: Fraction | None = field(default=None, repr=False, compare=False)

    @property
    def evaluated_error(self) -> Fraction:
        if self._evaluated is None:
            self._evaluated = et_eval(self.total_err, max(self.horizon, 2), self._eps(), self.extra_log)
        return self._evaluated

    def _eps(self) -> Fraction:
        return Variant.parse(self.variant).eps if self.variant.startswith("eps") else Fraction(0)

    @property
    def applicable(self) -> bool:
        return self.status == "certified"

    def to_json(self) -> dict:
        return {
            "statement_id": self.statement_id,
            "status": self.status,
            "horizon": self.horizon,
            "sigma": _q(self.sigma),
            "variant": self.variant,
            "ledger": [e.to_json() for e in self.ledger],
            "total_value": self.total_value,
            "bound": self.bound,
            "error": {**self.total_err.to_json(), "extra_log": self.extra_log},
            "certified_rate": _q(self.certified_rate),
            "failing_interval": list(self.failing_interval) if self.failing_interval else None,
            "extras": _jsonable(self.extras),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return _q(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def head_length(R: int, cfg: EngineConfig = DEFAULT) -> int:
    """Start of the partitioned range: ``max(ceil(log2 R), b_min)``, capped at R."""
    lg = (R - 1).bit_length() if R > 1 else 0
    return min(R, max(lg, cfg.b_min))


@lru_cache(maxsize=1024)
def _head_err(ambient_dim: int, a0: int) -> ErrorTerm:
    return ErrorTerm(c_const=ambient_dim * a0)


@lru_cache(maxsize=256)
def _piece_err(variant: Variant, cfg: EngineConfig) -> ErrorTerm:
    # lemma error plus one log for the telescoping sum
    return variant.error(cfg) + ErrorTerm(c_log=cfg.hidden_const)


def _head_entry(p_x: ComplexityProfile, a0: int) -> LedgerEntry:
    # K of x below a0 is charged as error: at most ambient_dim * a0
    return LedgerEntry(0, a0, "head", "growth-cap", 0, _head_err(p_x.ambient_dim, a0))


def _chain_pieces(p_x, a0, R, sigma, max_len, variant, cfg) -> list[LabeledInterval]:
    slack = variant.interval_slack(cfg)
    pieces = []
    lo = a0
    while lo < R:
        hi = min(lo + max_len, R)
        lab = classify_interval(p_x, lo, hi, sigma, slack)
        if lab.is_yellow:
            pieces.append(LabeledInterval(lo, hi, "yellow"))
        elif lab.is_teal:
            pieces.append(LabeledInterval(lo, hi, "teal"))
        else:
            _, two = split_teal_yellow(p_x, lo, hi, sigma)
            pieces.extend(iv for iv in two if iv.a < iv.b)
        lo = hi
    return pieces


def _finish(statement_id, p_x, sigma, variant_str, ledger, extra_log, bound_cap=None,
            eps=Fraction(0), extras=None, raw_bound=None) -> BoundCertificate:
    R = p_x.horizon
    total_value = sum(e.value for e in ledger)
    total_err = et_sum(e.err for e in ledger)
    bound = p_x.values[R] - total_value if raw_bound is None else raw_bound
    if bound_cap is not None:
        bound = min(bound, bound_cap)
    ev = et_eval(total_err, max(R, 2), eps, extra_log)
    rate = max(Fraction(0), (bound - ev) / R) if R > 0 else Fraction(0)
    rate = min(rate, Fraction(p_x.ambient_dim))
    return BoundCertificate(statement_id, R, sigma, variant_str, ledger, total_value, total_err,
                            extra_log, bound, rate, extras=extras or {}, _evaluated=ev)


def _inapplicable(cert: BoundCertificate, iv, s) -> BoundCertificate:
    cert.status = "inapplicable"
    cert.failing_interval = (iv.a, iv.b)
    cert.certified_rate = Fraction(0)
    cert.extras["first_failing_s"] = s
    return cert


def chain_certificate(p_x: ComplexityProfile, p_e: ComplexityProfile, seq: ScaleSequence, sigma,
                      variant: Variant = Variant("log2"), cfg: EngineConfig = DEFAULT) -> BoundCertificate:
    """Chained yellow/teal bound on ``[a0, R]`` with blocks of the largest ``r_n <= R``.

    A block that is yellow (or teal) under the variant's slack is used whole;
    otherwise it is split exactly at the tilted-profile minimum.  Each piece
    also pays one ``log2 R`` for the telescoping sum.  With the ``eps``
    variant the certificate additionally reports the ledger rate
    ``sigma - (4M + 1) eps`` and the blanket rate ``sigma - 25 eps``.
    """
    sigma = as_fraction(sigma)
    R = p_x.horizon
    if R < 2:
        raise ValueError(f"horizon must be >= 2, got {R}")
    max_len = seq.largest_at_most(R) or R
    a0 = head_length(R, cfg)
    ledger = [_head_entry(p_x, a0)]
    pieces = _chain_pieces(p_x, a0, R, sigma, max_len, variant, cfg)
    piece_err = _piece_err(variant, cfg)
    failed = None
    for iv in pieces:
        hyp = direction_hypothesis(p_e, iv.a, iv.b, sigma, variant, cfg)
        if not hyp:
            failed = (iv, hyp.first_fail)
            break
        if iv.label == "yellow":
            v, _ = yellow_interval_bound(p_x, iv.a, iv.b, sigma, variant, cfg)
        else:
            v, _ = teal_interval_bound(p_x, iv.a, iv.b, sigma, variant, cfg)
        ledger.append(LedgerEntry(iv.a, iv.b, iv.label, f"{iv.label}-{variant.kind}", v, piece_err))
    statement = "prop5.1" if variant.kind == "eps" else "prop5.4"
    M = len(pieces)
    extras = {"max_len": max_len, "a0": a0, "pieces": M}
    if variant.kind == "eps":
        extras["ledger_rate"] = max(Fraction(0), sigma - (4 * M + 1) * variant.eps)
        extras["blanket_rate"] = max(Fraction(0), sigma - 25 * variant.eps)
    cert = _finish(statement, p_x, sigma, str(variant), ledger, False, eps=variant.eps, extras=extras)
    if failed:
        return _inapplicable(cert, *failed)
    return cert


def bourgain_certificate(p_x: ComplexityProfile, p_e: ComplexityProfile, seq: ScaleSequence,
                         cfg: EngineConfig = DEFAULT) -> BoundCertificate:
    """Half-dimension ledger with ``sigma = 1``.

    Let ``(n, r_n)`` bracket ``R``.  If ``R <= 4 n^2 r_n^2`` the range
    ``[a0, R]`` is partitioned into exact teal/yellow pieces of length at most
    ``r_n`` (squared-log error per piece, charged as cubed log).  Otherwise a
    single teal-then-yellow split is used with square-root error and the
    direction hypothesis measured at scale ``R``.

    The raw bound is ``K[R] - sum_Y growth + L`` (``Y`` the yellow pieces,
    ``L`` their total length), capped at ``R``; it is never below
    ``ceil(K[R] / 2)`` because yellow growth is at most twice the length.
    """
    if p_x.ambient_dim != 2:
        raise ValueError("the half-dimension ledger needs a planar (ambient_dim = 2) profile")
    R = p_x.horizon
    if R < 2:
        raise ValueError(f"horizon must be >= 2, got {R}")
    n, rn = seq.bracket(R)
    a0 = head_length(R, cfg)
    if R <= 4 * n * n * rn * rn:
        case, variant, scale = "partition", Variant("log2"), None
        pieces = partition(p_x, a0, R, 1, rn) if a0 < R else []
    else:
        case, variant, scale = "split", Variant("sqrt"), R
        _, two = split_teal_yellow(p_x, a0, R, 1)
        pieces = [iv for iv in two if iv.a < iv.b]
    ledger = [_head_entry(p_x, a0)]
    piece_err = _piece_err(variant, cfg)
    failed = None
    for iv in pieces:
        hyp = direction_hypothesis(p_e, iv.a, iv.b, 1, variant, cfg, scale=scale)
        if not hyp:
            failed = (iv, hyp.first_fail)
            break
        g = p_x.values[iv.b] - p_x.values[iv.a]
        value = g - iv.length if iv.label == "yellow" else 0
        ledger.append(LedgerEntry(iv.a, iv.b, iv.label, f"{iv.label}-{variant.kind}", value, piece_err))
    yellow = [e for e in ledger if e.label == "yellow"]
    L = sum(e.b - e.a for e in yellow)
    sum_y = sum(p_x.values[e.b] - p_x.values[e.a] for e in yellow)
    raw = p_x.values[R] - sum_y + L
    extras = {"case": case, "n": n, "r_n": rn, "a0": a0, "yellow": [[e.a, e.b] for e in yellow],
              "L": L, "sum_yellow_growth": sum_y, "raw_bound": raw}
    cert = _finish("prop6.1", p_x, Fraction(1), str(variant), ledger, True, bound_cap=R,
                   extras=extras, raw_bound=raw)
    half = Fraction(-(-p_x.values[R] // 2))
    cert.extras["half_value"] = half
    cert.extras["corollary"] = half - cert.evaluated_error
    if failed:
        return _inapplicable(cert, *failed)
    return cert


def thm31_certificate(p_x: ComplexityProfile, p_e: ComplexityProfile, eps=0,
                      cfg: EngineConfig = DEFAULT) -> BoundCertificate:
    """Closed-form lower bound with ``dim_x`` and ``s`` read off the profiles' tails."""
    from .profiles import effective_dims

    R = p_x.horizon
    dim_x, _ = effective_dims(p_x)
    s, _ = effective_dims(p_e)
    s = min(max(s, Fraction(1, 1 << 16)), Fraction(1))
    lb = bound_thm31(dim_x, s, eps, R, cfg=cfg)
    cert = BoundCertificate("thm3.1", R, s, "closed-form", [], 0, ZERO, False,
                            math.floor(lb), Fraction(lb, R) if R else Fraction(0),
                            extras={"dim_x": dim_x, "s": s, "eps": as_fraction(eps), "lower_bound": lb})
    return cert


def thm32_certificate(p_x: ComplexityProfile, p_e: ComplexityProfile, C: int = 2, eps=0,
                      cfg: EngineConfig = DEFAULT) -> BoundCertificate:
    """Closed-form upper bound on ``K_R(x | p_e x, e)`` with ``t`` the longest prefix
    on which the direction profile satisfies ``K_e[s] >= s - eps R``."""
    R = p_x.horizon
    eps = as_fraction(eps)
    t = 0
    for s in range(1, min(R, p_e.horizon) + 1):
        if p_e.values[s] < s - eps * R:
            break
        t = s
    ub = bound_thm32(p_x.values[R], R, t, C, eps)
    lower = p_x.values[R] - ub
    rate = max(Fraction(0), lower / R) if R else Fraction(0)
    return BoundCertificate("thm3.2", R, Fraction(1), "closed-form", [], 0, ZERO, False,
                            math.floor(lower), min(rate, Fraction(p_x.ambient_dim)),
                            extras={"t": t, "C": C, "eps": eps, "upper_bound": ub})
