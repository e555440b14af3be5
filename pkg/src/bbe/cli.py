"""Command line front end for the traffic simulator.

    sim run --spec population.json --policy engine --rounds 100000 \
            --seed 7 --out report.csv [--plot lift.png]

The spec file is a JSON object mirroring PopulationSpec; --seed overrides
the seed inside it.  The per-round time series goes to --out (columns
documented in the README) and the summary report is printed to stdout as
JSON.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .scoring import EngineConfig
from .sim import ORACLE_MAX_BANNERS, ORACLE_MAX_FEATURES, PopulationSpec, run_simulation


def _load_spec(path: str, seed: int | None) -> PopulationSpec:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if seed is not None:
        raw["seed"] = seed
    return PopulationSpec.from_dict(raw)


def _maybe_plot(csv_path: str, plot_path: str) -> None:
    import csv as _csv

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rounds, ctrs = [], []
    with open(csv_path, "r", encoding="utf-8") as fh:
        for row in _csv.DictReader(fh):
            rounds.append(int(row["round"]))
            ctrs.append(float(row["cum_ctr"]))
    plt.figure(figsize=(8, 4))
    plt.plot(rounds, ctrs)
    plt.xlabel("round")
    plt.ylabel("cumulative CTR")
    plt.title("simulated CTR over time")
    plt.tight_layout()
    plt.savefig(plot_path)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="sim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a simulation and report CTR lift")
    run.add_argument("--spec", required=True, help="population spec JSON file")
    run.add_argument("--policy", choices=("engine", "random"), default="engine")
    run.add_argument("--rounds", type=int, default=10_000)
    run.add_argument("--seed", type=int, default=None, help="override the spec seed")
    run.add_argument("--out", default=None, help="write the per-round CSV time series here")
    run.add_argument("--plot", default=None, help="write a cumulative-CTR plot here (needs --out)")
    args = parser.parse_args(argv)

    spec = _load_spec(args.spec, args.seed)
    small = spec.num_features <= ORACLE_MAX_FEATURES and spec.num_banners <= ORACLE_MAX_BANNERS
    report = run_simulation(
        spec,
        EngineConfig(),
        policy=args.policy,
        rounds=args.rounds,
        csv_path=args.out,
        compute_agreement=small,
    )
    print(json.dumps(dataclasses.asdict(report), sort_keys=True))
    if args.plot:
        if not args.out:
            print("sim: --plot requires --out", file=sys.stderr)
            return 2
        _maybe_plot(args.out, args.plot)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
