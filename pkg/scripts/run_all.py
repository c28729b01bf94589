"""Run every experiment config under configs/ and emit plot data.

    python scripts/run_all.py [--out runs] [config ...]

Exit status is 1 if any experiment check fails, 2 on a config error.
"""

import argparse
import sys
import time
from pathlib import Path

from projlab import harness

ROOT = Path(__file__).resolve().parent.parent


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("configs", nargs="*", type=Path)
    ap.add_argument("--out", type=Path, default=ROOT / "runs")
    args = ap.parse_args(argv)
    paths = args.configs or sorted((ROOT / "configs").glob("*.ini"))
    status = 0
    for path in paths:
        try:
            cfg = harness.parse_config(path)
        except harness.ConfigError as exc:
            print(f"{path.name}: {exc}", file=sys.stderr)
            return 2
        out = args.out / path.stem
        t = time.perf_counter()
        rep = harness.run_experiment(cfg, out)
        harness.emit_plot_data(out / "report.json")
        dt = time.perf_counter() - t
        print(f"{path.name:14s} {cfg.experiment}  {'pass' if rep.passed else 'FAIL'}  {dt:6.1f}s  -> {out}")
        for c in rep.checks:
            if not c.passed:
                print(f"    failed: {c.name} {c.detail}")
                status = 1
    return status


if __name__ == "__main__":
    sys.exit(main())
