"""Experiment configs, runners E1..E5, persistence and plot-data emission.

Configs are INI files (one section per concern).  Every report value is a
``{"value", "provenance"}`` record with provenance ``measured``,
``certified`` or ``closed-form``.  Reports carry a hash of the validated
config (output directory excluded), contain no timestamps, and are written
atomically, so identical configs give byte-identical files.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Iterable

from . import bounds, corpus, directions, fractals
from .error_terms import as_fraction
from .profiles import ComplexityProfile, partition, split_teal_yellow


class ConfigError(ValueError):
    """Bad or infeasible configuration; raised before anything is written."""


# -- config --------------------------------------------------------------------


def _csv_ints(text: str) -> tuple[int, ...]:
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


@dataclass(frozen=True)
class ExperimentConfig:
    # [experiment]
    experiment: str
    seed: int = 0
    out: str = "runs"
    # [directions]
    seq: str = "geo:4"
    mask: str = "D0"
    s: Fraction = Fraction(1, 2)
    eps: Fraction = Fraction(1, 4)
    bits: int = 32
    count: int = 20
    # [fractal]
    preset: str = "four-corner"
    depths: tuple[int, ...] = (4, 5, 6, 7, 8)
    precision: int = 64
    period: int = 5
    residues: tuple[int, ...] = (0, 2)
    scales: tuple[int, ...] = tuple(range(16, 65))
    # [corpus]
    exhaustive_max_r: int = 8
    fuzz_count: int = 200
    fuzz_r: int = 64
    max_len: int = 8
    b_min: int = 2
    # [tolerance]
    slope_tol: Fraction = Fraction(3, 100)
    slope_min: Fraction = Fraction(95, 100)
    exponent_tol: Fraction = Fraction(5, 100)

    def canonical(self) -> dict:
        d = {}
        for f in fields(self):
            if f.name == "out":
                continue
            v = getattr(self, f.name)
            d[f.name] = str(v) if isinstance(v, Fraction) else (list(v) if isinstance(v, tuple) else v)
        return d

    @property
    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


SECTIONS: dict[str, dict[str, Callable[[str], Any]]] = {
    "experiment": {"id": str, "seed": int, "out": str},
    "directions": {"seq": str, "mask": str, "s": as_fraction, "eps": as_fraction, "bits": int, "count": int},
    "fractal": {"preset": str, "depths": _csv_ints, "precision": int, "period": int,
                "residues": _csv_ints, "scales": _csv_ints},
    "corpus": {"exhaustive_max_r": int, "fuzz_count": int, "fuzz_r": int, "max_len": int, "b_min": int},
    "tolerance": {"slope_tol": as_fraction, "slope_min": as_fraction, "exponent_tol": as_fraction},
}

EXPERIMENTS = ("E1", "E2", "E3", "E4", "E5")


def parse_config_text(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from exc
    unknown = []
    values: dict[str, Any] = {}
    for sec in cp.sections():
        if sec not in SECTIONS:
            unknown.append(f"[{sec}]")
            continue
        for key, raw in cp.items(sec):
            conv = SECTIONS[sec].get(key)
            if conv is None:
                unknown.append(f"{sec}.{key}")
                continue
            try:
                values["experiment" if (sec, key) == ("experiment", "id") else key] = conv(raw)
            except (ValueError, ZeroDivisionError) as exc:
                raise ConfigError(f"{sec}.{key} = {raw!r}: {exc}") from exc
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "experiment" not in values:
        raise ConfigError("missing required key experiment.id")
    cfg = ExperimentConfig(**values)
    validate(cfg)
    return cfg


def parse_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


def validate(cfg: ExperimentConfig) -> None:
    """Type and feasibility checks; runs before any computation."""
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment.id must be one of {EXPERIMENTS}, got {cfg.experiment!r}")
    if not 0 < cfg.s < 1:
        raise ConfigError(f"directions.s must lie in (0, 1), got {cfg.s}")
    if not 0 < cfg.eps < 1:
        raise ConfigError(f"directions.eps must lie in (0, 1), got {cfg.eps}")
    if cfg.mask not in ("D0", "Ds", "DepsS"):
        raise ConfigError(f"directions.mask must be D0, Ds or DepsS, got {cfg.mask!r}")
    if cfg.count < 1 or cfg.bits < 2:
        raise ConfigError("directions.count must be >= 1 and directions.bits >= 2")
    try:
        directions.parse_seq(cfg.seq)
    except (ValueError, OverflowError) as exc:
        raise ConfigError(f"directions.seq: {exc}") from exc
    if cfg.experiment == "E2":
        if cfg.preset not in fractals.PRESETS:
            raise ConfigError(f"fractal.preset must be one of {sorted(fractals.PRESETS)}")
        if not cfg.depths or min(cfg.depths) < 1 or len(set(cfg.depths)) < 2:
            raise ConfigError("fractal.depths needs at least two distinct positive depths")
        if 4 ** max(cfg.depths) > fractals.MAX_CELLS or 2 * max(cfg.depths) > 40:
            raise ConfigError(f"depth {max(cfg.depths)} exceeds the cell cap")
    if cfg.experiment == "E3":
        if not 2 <= cfg.precision <= 4096:
            raise ConfigError("fractal.precision must lie in [2, 4096]")
        if not cfg.scales or min(cfg.scales) < 1 or max(cfg.scales) > cfg.precision:
            raise ConfigError("fractal.scales must lie in 1..precision")
        if cfg.period < 1 or any(not 0 <= r < cfg.period for r in cfg.residues):
            raise ConfigError("fractal.residues must lie in [0, period)")
    if cfg.experiment in ("E4", "E5"):
        if not 0 <= cfg.exhaustive_max_r <= 14:
            raise ConfigError("corpus.exhaustive_max_r must lie in [0, 14]")
        if cfg.fuzz_count < 0 or cfg.fuzz_r < 2 or cfg.max_len < 1 or cfg.b_min < 1:
            raise ConfigError("corpus sizes must be positive")


# -- report --------------------------------------------------------------------


def val(x, provenance: str) -> dict:
    if provenance not in ("measured", "certified", "closed-form"):
        raise ValueError(f"unknown provenance {provenance!r}")
    if isinstance(x, Fraction):
        x = [x.numerator, x.denominator]
    elif isinstance(x, float):
        x = float(repr(round(x, 12)))
    return {"value": x, "provenance": provenance}


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def to_json(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass
class ExperimentReport:
    experiment: str
    config_hash: str
    config: dict
    trials: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> dict:
        return {
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "config": self.config,
            "summary": self.summary,
            "checks": [c.to_json() for c in self.checks],
            "passed": self.passed,
            "n_trials": len(self.trials),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1) + "\n"

    def trials_jsonl(self) -> str:
        return "".join(json.dumps(t, sort_keys=True, separators=(",", ":")) + "\n" for t in self.trials)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("LAB_THREADS", "1")))
    except ValueError:
        return 1


def _map_sorted(fn, items: list, key: Callable) -> list:
    """Map with up to LAB_THREADS workers; output sorted by trial key so thread count never shows."""
    n = _threads()
    if n == 1 or len(items) < 2:
        res = [fn(x) for x in items]
    else:
        with ThreadPoolExecutor(max_workers=n) as ex:
            res = list(ex.map(fn, items))
    return sorted(res, key=key)


# -- experiments ---------------------------------------------------------------


def _mask_kind(cfg: ExperimentConfig) -> directions.MaskKind:
    if cfg.mask == "D0":
        return directions.D0
    if cfg.mask == "Ds":
        return directions.Ds(cfg.s)
    return directions.DepsS(cfg.eps, cfg.s)


def _spec(cfg: ExperimentConfig, R: int) -> directions.MaskSpec:
    return directions.mask_intervals(_mask_kind(cfg), directions.parse_seq(cfg.seq), R)


def run_e1(cfg: ExperimentConfig) -> ExperimentReport:
    """Covering exponents of the masked direction set at the anchor scales."""
    spec = _spec(cfg, cfg.bits)
    rows = directions.covering_exponents(spec)
    samples = directions.sample_directions(spec, cfg.count, cfg.seed)
    rep = _report(cfg)
    for row in rows:
        rep.trials.append({
            "k": row.k, "n": row.n,
            "bound_exponent": val(row.exponent, "closed-form"),
            "exact_exponent": val(row.exact_exponent, "closed-form"),
            "sampled_prefixes": val(directions.prefix_count(samples, row.k), "measured"),
            "sample_ceiling": val(min(cfg.count, 1 << row.exact_log2), "closed-form"),
        })
    rep.summary = {"anchors": [r.k for r in rows], "mask": spec.to_json()}
    if cfg.mask == "D0":
        ok = all(r.exponent == Fraction(1, r.n) for r in rows)
        rep.checks.append(Check("D0 exponents equal r_n/(n r_n)", ok,
                                ", ".join(f"k={r.k}: {r.exponent}" for r in rows)))
    else:
        deep = rows[-2:]
        ok = bool(deep) and all(abs(r.exponent - cfg.s) <= cfg.exponent_tol for r in deep)
        rep.checks.append(Check(f"deepest anchors within {cfg.exponent_tol} of s", ok,
                                ", ".join(f"k={r.k}: {float(r.exponent):.4f}" for r in deep)))
    ok = all(t["sampled_prefixes"]["value"] <= t["sample_ceiling"]["value"] for t in rep.trials)
    rep.checks.append(Check("sampled prefix counts within the structural ceiling", ok))
    return rep


def _slope(counts: dict[int, int]) -> float:
    return fractals.dim_regress(counts.items())[0]


def run_e2(cfg: ExperimentConfig) -> ExperimentReport:
    """Four-corner preset: box dimension, axis projections, projections along D0 samples."""
    maps = fractals.PRESETS[cfg.preset]
    sets = {m: fractals.gen_ifs(maps, m) for m in cfg.depths}
    deep = sets[max(cfg.depths)]
    ks = [2 * m for m in cfg.depths]
    rep = _report(cfg)
    box = {2 * m: len(sets[m]) for m in cfg.depths}
    axis = {}
    for name, e in (("x-axis", (1.0, 0.0)), ("y-axis", (0.0, 1.0))):
        axis[name] = fractals.box_counts(fractals.project(deep, e, deep.R), ks)
    spec = _spec(cfg, cfg.bits)
    samples = directions.sample_directions(spec, cfg.count, cfg.seed)

    def trial(item):
        i, d = item
        proj = fractals.project(deep, d.unit_vector, deep.R)
        counts = fractals.box_counts(proj, ks)
        return {"index": i, "bits": d.bits_hex(), "angle": [d.angle.numerator, d.angle.denominator],
                "counts": {str(k): counts[k] for k in ks}, "slope": val(_slope(counts), "measured")}

    rep.trials = _map_sorted(trial, list(enumerate(samples)), key=lambda t: t["index"])
    box_slope = _slope(box)
    ax_slope = _slope(axis["x-axis"])
    slopes = [t["slope"]["value"] for t in rep.trials]
    rep.summary = {
        "box_counts": {str(k): val(v, "measured") for k, v in box.items()},
        "box_slope": val(box_slope, "measured"),
        "axis_counts": {n: {str(k): val(v, "measured") for k, v in c.items()} for n, c in axis.items()},
        "axis_oracle": {str(k): val(1 << (k // 2), "closed-form") for k in ks},
        "axis_slope": val(ax_slope, "measured"),
        "direction_slope_min": val(min(slopes), "measured"),
        "direction_slope_mean": val(sum(slopes) / len(slopes), "measured"),
    }
    tol = float(cfg.slope_tol)
    rep.checks += [
        Check("box counts equal 4^m", all(box[2 * m] == 4**m for m in cfg.depths)),
        Check(f"box slope 1 +/- {tol}", abs(box_slope - 1) <= tol, f"{box_slope:.4f}"),
        Check("axis counts equal 2^m", all(axis[n][k] == 1 << (k // 2) for n in axis for k in ks)),
        Check(f"axis slope 0.5 +/- {tol}", abs(ax_slope - 0.5) <= tol, f"{ax_slope:.4f}"),
        Check(f"every direction slope >= {float(cfg.slope_min)}", min(slopes) >= float(cfg.slope_min),
              f"min {min(slopes):.4f}"),
    ]
    return rep


def run_e3(cfg: ExperimentConfig) -> ExperimentReport:
    """Digit-density set along D_s samples, via collision lower bounds on projected counts."""
    R = cfg.precision
    free = fractals.periodic_positions(R, cfg.period, cfg.residues)
    ds = fractals.DigitSet(free, free, R)
    spec = _spec(cfg, R)
    samples = directions.sample_directions(spec, cfg.count, cfg.seed)
    scales = list(cfg.scales)

    def trial(item):
        i, d = item
        lb = ds.collision_lower_bounds(d.unit_vector, scales)
        return {"index": i, "bits": d.bits_hex(), "angle": [d.angle.numerator, d.angle.denominator],
                "log2_count_lower": {str(k): round(math.log2(lb[k]), 9) for k in scales},
                "slope": val(fractals.dim_regress((k, lb[k]) for k in scales)[0], "measured")}

    rep = _report(cfg)
    rep.trials = _map_sorted(trial, list(enumerate(samples)), key=lambda t: t["index"])
    axis = {k: sum(1 for p in free if p <= k) for k in scales}  # log2 of x-axis projection count
    ax_slope = fractals.dim_regress((k, 2 ** v) for k, v in axis.items())[0]
    slopes = [t["slope"]["value"] for t in rep.trials]
    alpha = Fraction(2 * len(free), R)
    rep.summary = {
        "alpha": val(alpha, "closed-form"),
        "axis_log2_counts": {str(k): val(v, "closed-form") for k, v in axis.items()},
        "axis_slope": val(ax_slope, "closed-form"),
        "direction_slope_min": val(min(slopes), "measured"),
        "direction_slope_mean": val(sum(slopes) / len(slopes), "measured"),
        "method": "collision lower bound N(k) >= 1/P(|Z - Z'| < 2^-k)",
    }
    rep.checks.append(Check(f"every direction slope >= {float(cfg.slope_min)}", min(slopes) >= float(cfg.slope_min),
                            f"min {min(slopes):.4f}"))
    return rep


def _corpus(cfg: ExperimentConfig) -> Iterable[tuple[str, ComplexityProfile]]:
    for R in range(1, cfg.exhaustive_max_r + 1):
        for p in corpus.exhaustive_profiles(R):
            yield f"exhaustive-{R}", p
    for p in corpus.fuzz_profiles(cfg.fuzz_count, cfg.fuzz_r, cfg.seed):
        yield f"fuzz-{cfg.fuzz_r}", p


def tight_profile(half: int) -> ComplexityProfile:
    """Flat on ``[0, half]``, slope 2 on ``[half, 2 half]``."""
    return ComplexityProfile.from_increments([0] * half + [2] * half)


def run_e4(cfg: ExperimentConfig) -> ExperimentReport:
    """Half-dimension ledger over the profile corpora and the tight family."""
    ecfg = bounds.EngineConfig(b_min=cfg.b_min)
    seq = directions.parse_seq(cfg.seq)
    ideal = {}
    stats: dict[str, dict] = {}
    for name, p in _corpus(cfg):
        R = p.horizon
        if R < 2:
            continue
        pe = ideal.setdefault(R, ComplexityProfile(tuple(range(R + 1)), 1))
        cert = bounds.bourgain_certificate(p, pe, seq, ecfg)
        half = -(-p.values[R] // 2)
        ev = cert.evaluated_error
        st = stats.setdefault(name, {"n": 0, "violations": 0, "over_R": 0, "inapplicable": 0, "min_margin": None})
        st["n"] += 1
        st["inapplicable"] += not cert.applicable
        st["violations"] += (cert.bound - ev) < (half - ev) or cert.extras["corollary"] != half - ev
        st["over_R"] += cert.bound > R
        margin = cert.bound - half
        st["min_margin"] = margin if st["min_margin"] is None else min(st["min_margin"], margin)
    rep = _report(cfg)
    for name in sorted(stats):
        st = stats[name]
        rep.trials.append({"corpus": name, "profiles": st["n"], "violations": val(st["violations"], "certified"),
                           "over_R": val(st["over_R"], "certified"), "inapplicable": st["inapplicable"],
                           "min_margin": val(st["min_margin"], "certified")})
    tight = []
    for half in (8, 16, 32, 64, 128):
        p = tight_profile(half)
        R = p.horizon
        cert = bounds.bourgain_certificate(p, ComplexityProfile(tuple(range(R + 1)), 1), seq, ecfg)
        raw = cert.extras["raw_bound"]
        tight.append({"R": R, "K": p.values[R], "raw_bound": val(raw, "certified"),
                      "half": val(Fraction(p.values[R], 2), "closed-form"), "case": cert.extras["case"],
                      "certificate": cert.to_json()})
    rep.summary = {"tight_family": tight}
    viol = sum(s["violations"] for s in stats.values())
    rep.checks += [
        Check("bound >= ceil(K/2) - err on every profile", viol == 0, f"{viol} violations"),
        Check("bound <= R on every profile", sum(s["over_R"] for s in stats.values()) == 0),
        Check("tight family: raw bound equals K/2", all(Fraction(t["raw_bound"]["value"]) == Fraction(t["K"], 2)
                                                       for t in tight)),
    ]
    return rep


def calculus_failures(p: ComplexityProfile, sigma: Fraction, max_len: int) -> list[str]:
    """Oracle checks of split and partition on ``[0, R]``."""
    R = p.horizon
    m, pieces = split_teal_yellow(p, 0, R, sigma)
    errs = corpus.check_split(p, 0, R, sigma, m, pieces)
    errs += corpus.check_partition(p, 0, R, sigma, max_len, partition(p, 0, R, sigma, max_len))
    return errs


def run_e5(cfg: ExperimentConfig) -> ExperimentReport:
    """Split/partition fuzz against the defining inequalities."""
    sigmas = [Fraction(1, 2), Fraction(1), Fraction(3, 2)]
    stats: dict[str, dict] = {}
    first: dict[str, str] = {}
    for name, p in _corpus(cfg):
        st = stats.setdefault(name, {"n": 0, "failures": 0})
        st["n"] += 1
        for sg in sigmas:
            errs = calculus_failures(p, sg, min(cfg.max_len, max(1, p.horizon)))
            if errs:
                st["failures"] += 1
                first.setdefault(name, f"{p.values} sigma={sg}: {errs[0]}")
    rep = _report(cfg)
    for name in sorted(stats):
        rep.trials.append({"corpus": name, "profiles": stats[name]["n"],
                           "failures": val(stats[name]["failures"], "measured"),
                           "first_failure": first.get(name)})
    total = sum(s["failures"] for s in stats.values())
    rep.summary = {"sigmas": [str(s) for s in sigmas], "max_len": cfg.max_len}
    rep.checks.append(Check("zero label violations", total == 0, f"{total} failures"))
    return rep


RUNNERS = {"E1": run_e1, "E2": run_e2, "E3": run_e3, "E4": run_e4, "E5": run_e5}


def _report(cfg: ExperimentConfig) -> ExperimentReport:
    return ExperimentReport(cfg.experiment, cfg.hash, cfg.canonical())


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ExperimentReport:
    """Run ``cfg`` and, when ``out_dir`` (or ``cfg.out``) is given, persist it."""
    validate(cfg)
    rep = RUNNERS[cfg.experiment](cfg)
    target = out_dir if out_dir is not None else cfg.out
    if target:
        write_report(rep, target)
    return rep


# -- persistence ---------------------------------------------------------------


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(rep: ExperimentReport, out_dir) -> Path:
    out = Path(out_dir)
    atomic_write(out / "report.json", rep.dumps())
    atomic_write(out / "trials.jsonl", rep.trials_jsonl())
    return out / "report.json"


def load_report(path) -> tuple[dict, list[dict]]:
    path = Path(path)
    if path.is_dir():
        path = path / "report.json"
    rep = json.loads(path.read_text())
    tj = path.parent / "trials.jsonl"
    trials = [json.loads(ln) for ln in tj.read_text().splitlines() if ln.strip()] if tj.exists() else []
    return rep, trials


# -- plot data -----------------------------------------------------------------


def _num(v):
    if isinstance(v, dict):
        v = v["value"]
    if isinstance(v, list):
        return v[0] / v[1]
    return v


def _plot_series(rep: dict, trials: list[dict]) -> list[tuple[str, str, str, str, list[tuple]]]:
    exp = rep.get("experiment")
    out = []
    if not trials:
        return out
    if exp == "E1":
        out.append(("exponent_vs_scale.dat", "k", "log2 N / k (covering bound)", "covering exponent",
                    [(t["k"], _num(t["bound_exponent"])) for t in trials]))
        out.append(("exact_exponent_vs_scale.dat", "k", "log2 N / k (exact prefixes)", "exact exponent",
                    [(t["k"], _num(t["exact_exponent"])) for t in trials]))
    elif exp in ("E2", "E3"):
        out.append(("direction_slopes.dat", "angle / pi", "box-count slope", "projection slope by direction",
                    [(t["angle"][0] / t["angle"][1], _num(t["slope"])) for t in trials]))
    elif exp == "E4":
        out.append(("ledger_margin.dat", "corpus index", "min(bound - ceil(K/2))", "ledger margin",
                    [(i, _num(t["min_margin"])) for i, t in enumerate(trials)]))
    elif exp == "E5":
        out.append(("failures.dat", "corpus index", "failures", "calculus failures",
                    [(i, _num(t["failures"])) for i, t in enumerate(trials)]))
    return out


def emit_plot_data(report_path, out_dir=None) -> Path:
    """Two-column ``.dat`` files plus ``manifest.json``; an empty report yields the manifest only."""
    rep, trials = load_report(report_path)
    src = Path(report_path)
    out = Path(out_dir) if out_dir else (src if src.is_dir() else src.parent) / "plots"
    manifest = {"experiment": rep.get("experiment"), "config_hash": rep.get("config_hash"), "figures": []}
    for name, xl, yl, title, rows in _plot_series(rep, trials):
        body = f"# {xl}\t{yl}\n" + "".join(f"{x!r}\t{y!r}\n" for x, y in rows)
        atomic_write(out / name, body)
        manifest["figures"].append({"file": name, "x": xl, "y": yl, "title": title, "rows": len(rows)})
    atomic_write(out / "manifest.json", json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return out / "manifest.json"
