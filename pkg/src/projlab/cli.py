"""``lab`` command line.  Exit codes: 0 pass, 1 tolerance failure or
inapplicable certificate, 2 config or input error."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import bounds, directions, fractals, harness
from .error_terms import as_fraction
from .profiles import read_profile, validate_profile

STATEMENTS = ("prop5.4", "prop5.1", "prop6.1", "thm3.1", "thm3.2")


class _Group(click.Group):
    # usage errors should share the config-error exit code
    def main(self, *args, **kwargs):
        kwargs.setdefault("standalone_mode", False)
        try:
            rv = super().main(*args, **kwargs)
        except click.exceptions.Abort:
            sys.exit(2)
        except click.ClickException as exc:
            exc.show()
            sys.exit(2)
        sys.exit(rv or 0)


def _fail(msg: str):
    click.echo(f"error: {msg}", err=True)
    return 2


@click.group(cls=_Group)
def main():
    """Universal projection directions: direction sets, certified bounds, box counts."""


@main.command()
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), help="Output directory (overrides experiment.out).")
def run(config, out):
    """Run the experiment described by CONFIG."""
    try:
        cfg = harness.parse_config(config)
        rep = harness.run_experiment(cfg, out_dir=out)
    except harness.ConfigError as exc:
        return _fail(str(exc))
    for c in rep.checks:
        click.echo(f"{'PASS' if c.passed else 'FAIL'}  {c.name}" + (f"  ({c.detail})" if c.detail else ""))
    click.echo(f"report: {Path(out or cfg.out) / 'report.json'}  hash {rep.config_hash[:12]}")
    return 0 if rep.passed else 1


@main.command()
@click.option("--profile", "profile_path", required=True, type=click.Path(dir_okay=False))
@click.option("--direction", "direction_path", required=True, type=click.Path(dir_okay=False),
              help="Profile file of the direction relative to x.")
@click.option("--statement", required=True, type=click.Choice(STATEMENTS))
@click.option("--seq", default="geo:4", show_default=True)
@click.option("--sigma", default="1", show_default=True)
@click.option("--variant", default="log2", show_default=True, help="exact | log2 | sqrt | eps(<e>)")
@click.option("--eps", default="0", show_default=True)
@click.option("--C", "C", default=2, show_default=True, type=int)
@click.option("--b-min", default=16, show_default=True, type=int)
@click.option("--out", type=click.Path(dir_okay=False), help="Write the certificate JSON here.")
def certify(profile_path, direction_path, statement, seq, sigma, variant, eps, C, b_min, out):
    """Compute a bound certificate for a profile pair."""
    try:
        px, pe = read_profile(profile_path), read_profile(direction_path)
        for name, p in (("--profile", px), ("--direction", pe)):
            bad = validate_profile(p)
            if bad:
                return _fail(f"{name} is not a valid profile: " + "; ".join(f"r={v.index}: {v.detail}" for v in bad))
        cfg = bounds.EngineConfig(b_min=b_min)
        if statement in ("prop5.4", "prop5.1"):
            var = bounds.Variant.parse(variant)
            if statement == "prop5.1" and var.kind != "eps":
                var = bounds.Variant("eps", as_fraction(eps))
            cert = bounds.chain_certificate(px, pe, directions.parse_seq(seq), as_fraction(sigma), var, cfg)
        elif statement == "prop6.1":
            cert = bounds.bourgain_certificate(px, pe, directions.parse_seq(seq), cfg)
        elif statement == "thm3.1":
            cert = bounds.thm31_certificate(px, pe, as_fraction(eps), cfg)
        else:
            cert = bounds.thm32_certificate(px, pe, C, as_fraction(eps), cfg)
    except (OSError, ValueError, OverflowError) as exc:
        return _fail(str(exc))
    text = cert.dumps()
    if out:
        harness.atomic_write(out, text + "\n")
    click.echo(text)
    return 0 if cert.applicable else 1


@main.command()
@click.argument("report", type=click.Path(exists=True))
@click.option("--out", type=click.Path(file_okay=False))
def plot(report, out):
    """Emit two-column plot data and a manifest for REPORT."""
    try:
        path = harness.emit_plot_data(report, out)
    except (OSError, ValueError, KeyError) as exc:
        return _fail(str(exc))
    click.echo(str(path))
    return 0


@main.command("gen-directions")
@click.option("--kind", default="d0", type=click.Choice(["d0", "ds", "deps-s", "none"]), show_default=True)
@click.option("--seq", default="geo:4", show_default=True, help="paper | geo:<k> | square | list:<csv>")
@click.option("--s", "s", default="1/2", show_default=True)
@click.option("--eps", default="1/4", show_default=True)
@click.option("--depth", "R", default=32, show_default=True, type=int, help="Bits per angle.")
@click.option("--count", default=20, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def gen_directions(kind, seq, s, eps, R, count, seed, out):
    """Sample masked directions; one JSON record per line."""
    try:
        if kind == "none":
            spec = directions.empty_spec(R)
        else:
            mk = {"d0": lambda: directions.D0, "ds": lambda: directions.Ds(as_fraction(s)),
                  "deps-s": lambda: directions.DepsS(as_fraction(eps), as_fraction(s))}[kind]()
            spec = directions.mask_intervals(mk, directions.parse_seq(seq), R)
        samples = directions.sample_directions(spec, count, seed)
    except (ValueError, OverflowError) as exc:
        return _fail(str(exc))
    lines = [json.dumps({"index": i, "seed": seed, "bits": d.bits_hex(), "R": R,
                         "angle": [d.angle.numerator, d.angle.denominator],
                         "unit_vector": list(d.unit_vector), "spec": spec.to_json()}, sort_keys=True)
             for i, d in enumerate(samples)]
    harness.atomic_write(out, "".join(ln + "\n" for ln in lines))
    click.echo(f"{len(samples)} directions -> {out}")
    return 0


@main.command("gen-fractal")
@click.option("--preset", type=click.Choice(sorted(fractals.PRESETS)))
@click.option("--depth", type=int, default=4, show_default=True)
@click.option("--free-x", default=None, help="Free bit positions for a digit set, e.g. 1,3,6")
@click.option("--free-y", default=None)
@click.option("--R", "R", type=int, default=None, help="Precision for a digit set.")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Text file, or .dps for binary.")
def gen_fractal(preset, depth, free_x, free_y, R, out):
    """Generate an IFS preset or a digit set."""
    try:
        if preset:
            ps = fractals.gen_ifs(fractals.PRESETS[preset], depth)
        elif R is not None:
            fx = harness._csv_ints(free_x or "")
            fy = harness._csv_ints(free_y or "")
            ps = fractals.gen_digit_set(fx, fy, R)
        else:
            return _fail("give --preset or --R with --free-x/--free-y")
        fractals.write_points(ps, out)
    except (ValueError, OSError) as exc:
        return _fail(str(exc))
    click.echo(f"{len(ps)} cells at precision {ps.R} -> {out}")
    return 0


def _direction_from_file(ref: str) -> tuple[float, float]:
    path, _, idx = ref.rpartition(":")
    if not path:
        raise ValueError("--from-direction expects <file>:<index>")
    for line in Path(path).read_text().splitlines():
        if line.strip():
            rec = json.loads(line)
            if rec["index"] == int(idx):
                return tuple(rec["unit_vector"])
    raise ValueError(f"no direction with index {idx} in {path}")


@main.command()
@click.option("--input", "inp", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--e", "e", default=None, help="Unit vector x,y")
@click.option("--from-direction", default=None, help="<directions.json>:<index>")
@click.option("--R-out", "R_out", type=int, default=None)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def project(inp, e, from_direction, R_out, out):
    """Project a planar point set onto a direction."""
    try:
        ps = fractals.read_points(inp)
        if (e is None) == (from_direction is None):
            return _fail("give exactly one of --e and --from-direction")
        vec = _direction_from_file(from_direction) if from_direction else tuple(float(v) for v in e.split(","))
        proj = fractals.project(ps, vec, ps.R if R_out is None else R_out)
        fractals.write_points(proj, out)
    except (ValueError, OSError, KeyError, IndexError) as exc:
        return _fail(str(exc))
    click.echo(f"{len(proj)} cells at precision {proj.R} (offset {proj.offset}) -> {out}")
    return 0


@main.command()
@click.option("--input", "inp", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--scales", required=True, help="csv or ranges, e.g. 2,4,6 or 4-12")
@click.option("--anchors", default="", help="Anchor scales for the lower-box estimate.")
def boxdim(inp, scales, anchors):
    """Box counts, regression slope and lower-box estimate."""
    try:
        ps = fractals.read_points(inp)
        rep = fractals.box_report(ps, harness._csv_ints(scales), harness._csv_ints(anchors))
    except (ValueError, OSError) as exc:
        return _fail(str(exc))
    click.echo(json.dumps(rep.to_json(), sort_keys=True))
    return 0


if __name__ == "__main__":  # pragma: no cover
    main()
