"""Command line entry point: ``calab <task> --rule eca:90 [--config FILE] [--seed S] [--out DIR]``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import fields

from .core import GuardExceeded
from .experiment import (
    ConfigError,
    ExperimentConfig,
    corpus,
    expand_rules,
    load_config_file,
    run,
    write_report,
)

SUBCOMMANDS = ("surjectivity", "kurka", "gilman", "spectral", "full", "corpus")

_HELP = {
    "L": "balance-oracle word length",
    "kurka_max_len": "longest candidate blocking word",
    "kurka_T": "blocking-word certification horizon",
    "m": "trace window half-width",
    "n_grid": "cylinder half-widths, e.g. 2,4,8,16",
    "ratio_T": "horizon for trace-class ratios",
    "ratio_samples": "samples per ratio estimate",
    "points": "sampled points per ratio curve",
    "t_grid": "propagation distances, e.g. 0..16",
    "prop_T": "propagation horizon",
    "samples": "propagation samples",
    "gilman_threshold": "p_t cutoff for class C",
    "N": "period of sampled configurations in scans",
    "T": "Wiener-sum horizon",
    "orbits": "orbits per scan",
    "grid": "frequency grid points",
    "threshold": "atom-mass cutoff (0 = calibrated default)",
    "Q": "denominator bound for admissible rationals",
    "rules": "corpus rules, e.g. eca:0-255",
    "workers": "parallel worker processes for corpus runs",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="calab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--rule", help="rule file path or eca:<n>")
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        if name == "corpus":
            p.add_argument("--task", choices=SUBCOMMANDS[:-1], help="task run for each rule")
        for f in fields(ExperimentConfig):
            if f.name in _HELP:
                p.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, help=_HELP[f.name])
    return parser


def make_config(args: argparse.Namespace) -> ExperimentConfig:
    values = load_config_file(args.config) if args.config else {}
    for key in ExperimentConfig.keys():
        val = getattr(args, key, None)
        if val is not None:
            values[key] = val
    if args.command != "corpus":
        values["task"] = args.command
    else:
        values.setdefault("task", "surjectivity")
    return ExperimentConfig.from_mapping(values)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = make_config(args)
        if args.command == "corpus":
            rules = expand_rules(config.rules or config.rule)
            rows = corpus(rules, config)
            failed = [r for r in rows if r["error"]]
            print(f"{len(rows)} rules, {len(failed)} failed; summary in {config.out}/summary.csv")
            return 1 if failed else 0
        report = run(config)
        path = write_report(report, config.out)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GuardExceeded as exc:
        print(f"error: size guard exceeded: {exc}", file=sys.stderr)
        return 1
    _print_summary(report.results)
    print(f"report written to {path}")
    return 0


def _print_summary(res: dict) -> None:
    print(f"rule {res['rule']['id']} (k={res['rule']['k']}, r={res['rule']['r']})")
    if "surjectivity" in res:
        s = res["surjectivity"]
        extra = "" if s["surjective"] else f", orphan word {s['witness']}"
        print(f"  surjective: {s['surjective']}{extra}")
    if "kurka" in res:
        print(f"  blocking words: {res['kurka']['verdict']}")
    if "gilman" in res:
        g = res["gilman"]
        print(f"  Gilman class: {g['class']}" + (f" ({g['direction']})" if g["direction"] else ""))
    if "spectral" in res:
        sc, rv = res["spectral"]["scan"], res["spectral"]["rationality"]
        atoms = ", ".join(a["match"] or f"{a['alpha']}?" for a in rv["atoms"]) or "none"
        print(f"  spectral atoms: {atoms}; rationality {rv['verdict']}; cycle guard {sc['guard']:.3f}")
    if "consistency" in res:
        c = res["consistency"]
        print(f"  almost expansive => no irrational eigenvalue: "
              f"{c['almost_expansive_no_irrational_eigenvalue']}")


if __name__ == "__main__":
    raise SystemExit(main())
