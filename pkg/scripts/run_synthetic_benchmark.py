"""Prepare, run and report the full grid on the bundled synthetic trace.

    python scripts/run_synthetic_benchmark.py [--max-trials 10] [--methods ses,tes]

Outputs land in runs/synthetic (see configs/synthetic.json).
"""

import argparse
import sys
from pathlib import Path

from dspforecast.cli import EXIT_FAILURES, EXIT_OK, main

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "synthetic.json"


def run():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", default=str(CONFIG))
    parser.add_argument("--max-trials", type=int)
    parser.add_argument("--methods")
    parser.add_argument("--rates")
    parser.add_argument("--parallelism", type=int, default=1)
    args = parser.parse_args()

    overrides = ["--parallelism", str(args.parallelism)]
    for flag, value in (("--max-trials", args.max_trials), ("--methods", args.methods),
                        ("--rates", args.rates)):
        if value is not None:
            overrides += [flag, str(value)]
    code = main(["prepare", "--config", args.config])
    if code != EXIT_OK:
        return code
    code = main(["run", "--config", args.config, *overrides])
    if code not in (EXIT_OK, EXIT_FAILURES):
        return code
    return main(["report", "--config", args.config]) or code


if __name__ == "__main__":
    sys.exit(run())
