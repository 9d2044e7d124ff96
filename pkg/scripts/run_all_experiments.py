"""Reproduce every experiment table in one run.

Invokes each CLI command with its canonical arguments and collects the CSV
artifacts under results/.  Exits nonzero on the first failing command so a
broken stage is visible in CI logs.
"""
from __future__ import annotations

import pathlib
import sys

from impasse import cli

RESULTS = pathlib.Path(__file__).resolve().parent.parent / "results"

RUNS = [
    ["polytrope", "--N", "3", "--n", "0"],
    ["polytrope", "--N", "3", "--n", "1"],
    ["polytrope", "--N", "3", "--n", "1.5"],
    ["polytrope", "--N", "3", "--n", "3"],
    ["polytrope", "--N", "2", "--n", "1"],
    ["le-bvp", "--N", "3", "--model", "power:1"],
    ["biocatalyst", "--phi2-grid", "0.1:50:17", "--K-grid", "0.1:50:17"],
    ["oxygen", "--set", "1"],
    ["oxygen", "--set", "2"],
    ["oxygen", "--set", "3"],
    ["oxygen", "--set", "4"],
    ["catalyst-system"],
    ["tf-slope", "--tol", "1e-10"],
    ["tf-series", "--terms", "100"],
    ["tf-solution"],
    ["tf-phase", "--count", "7"],
    ["tf-bvp", "--ion-a", "5"],
    ["tf-bvp", "--crystal-b", "5"],
    ["classify"],
]


def out_name(argv: list[str]) -> str:
    # polytrope --N 3 --n 0 -> polytrope_N_3_n_0.csv
    tokens = [argv[0]] + [t.lstrip("-").replace(":", "_") for t in argv[1:]]
    return "_".join(tokens) + ".csv"


def main() -> int:
    RESULTS.mkdir(exist_ok=True)
    for argv in RUNS:
        path = RESULTS / out_name(argv)
        print(f"$ impasse {' '.join(argv)}")
        code = cli.main(argv + ["--out", str(path)])
        if code != 0:
            print(f"command failed with exit code {code}", file=sys.stderr)
            return code
        print()
    print(f"all tables written under {RESULTS}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
