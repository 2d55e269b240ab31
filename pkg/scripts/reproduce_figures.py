"""Run the six one-parameter CM sweeps and write a CSV table and SVG chart for each.

    python scripts/reproduce_figures.py --out figures --trials 20 --seed 0
"""

import argparse
import logging
import time
from pathlib import Path

from blconv.netgen import GenParams
from blconv.sweep import PARAMS, SweepSpec, emit_outputs, run_sweep, trend_verdict


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="figures", help="output directory")
    parser.add_argument("--trials", type=int, default=20, help="R, random networks per grid point")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--only", choices=PARAMS, action="append", help="restrict to these parameters")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    nominal = GenParams(R=args.trials, seed=args.seed)
    failures = 0
    for vary in args.only or PARAMS:
        t0 = time.perf_counter()
        spec = SweepSpec(vary, nominal=nominal, out_csv=out / f"sweep_{vary}.csv", out_svg=out / f"sweep_{vary}.svg")
        table = run_sweep(spec)
        emit_outputs(table, spec)
        verdict = trend_verdict(vary, table)
        failures += not verdict.ok
        status = "as reported" if verdict.ok else "NOT as reported"
        print(f"{vary:>6}: {status:<16} {verdict.detail}  ({time.perf_counter() - t0:.1f}s)")
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
