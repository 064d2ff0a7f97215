#!/usr/bin/env python3
"""Run the bundled experiment configs and summarize the results.

Each run lands in results/<name>/ with trace.csv, summary.json and, for the
stochastic run, aggregate.csv.  Afterwards the stored traces are replayed
through the bound checker.
"""

import json
import pathlib
import sys

from ifista.cli import main as cli

HERE = pathlib.Path(__file__).parent
RESULTS = HERE / "results"

RUNS = [
    ("boxqp_exact", "run"),
    ("lasso_inexact", "run"),
    ("lasso_weak_inexact", "run"),
    ("boxqp_stochastic", "run"),
    ("rate_sweep", "sweep"),
]


def main() -> int:
    worst = 0
    for name, command in RUNS:
        out = RESULTS / name
        code = cli([command, "--config", str(HERE / "configs" / f"{name}.json"),
                    "--out", str(out)])
        worst = max(worst, code)
        if command == "run" and code == 0:
            summary = json.loads((out / "summary.json").read_text())
            slope = summary["fitted_slope"]
            print(f"  {name}: final F_gap = {summary['final_F_gap']:.3e}, "
                  f"fitted slope = {slope if slope is None else round(slope, 3)}, "
                  f"max bound violation = {summary['max_bound_violation']}")
            code = cli(["verify", "bounds", "--trace", str(out / "trace.csv")])
            worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
