"""Command-line front end: experiments, ablations, the theory suite, W-infinity distances, data generation.

Exit codes: 0 success, 1 verification failure, 2 inconclusive, 64 usage
error, 65 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import experiment, theory
from .distributions import DataError, DiscreteDistribution, read_weighted_csv, write_csv
from .selftrain import ConfigurationError
from .shiftgen import CounterexampleSpec, gen_counterexample
from .wasserstein import PrecisionError, class_distances, winf_discrete

EXIT_OK, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 64, 65


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    except json.JSONDecodeError as e:
        raise DataError(f"{path}:{e.lineno}:{e.colno}: invalid JSON ({e.msg})") from None


def _write(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text + "\n")


def _write_summary(path, report: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "seed", "accuracy"])
        for m, block in report["methods"].items():
            for s, acc in zip(report["seeds"], block["accuracies"]):
                w.writerow([m, s, repr(acc)])


def cmd_run(args) -> int:
    cfg = experiment.parse_config(_load_json(args.config))
    report = experiment.run_experiment(cfg)
    _write(args.out, experiment.report_to_json(report))
    if args.csv:
        _write_summary(args.csv, report)
    for m, block in report["methods"].items():
        ci = "n/a" if block["ci90"] is None else f"{block['ci90']:.2f}"
        print(f"{m:12s} mean {block['mean']:6.2f}  ci90 +/- {ci}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    if args.ablation not in experiment.ABLATIONS:
        raise UsageError(f"unknown ablation {args.ablation!r}; choose from {', '.join(experiment.ABLATIONS)}")
    cfg = experiment.parse_config(_load_json(args.config))
    report = experiment.run_ablation(cfg, args.ablation)
    _write(args.out, experiment.report_to_json(report))
    for m, deltas in report["deltas"].items():
        print(f"{m:12s} base - ablated: {np.mean(deltas):+.2f}")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = theory.run_suite(args.suite, sabotage=args.sabotage or (), workers=args.workers)
    if args.out:
        _write(args.out, json.dumps([r.to_dict() for r in results], indent=2, sort_keys=True))
    print(theory.format_table(results))
    return theory.suite_exit_status(results)


def _distribution(path, need_labels: bool) -> DiscreteDistribution:
    x, y, m = read_weighted_csv(path)
    if need_labels and y is None:
        raise UsageError(f"{path}: --conditional needs a labeled file with a y column")
    if m is not None and abs(m.sum() - 1.0) > 1e-9:
        raise DataError(f"{path}: masses sum to {m.sum()!r}; a probability distribution needs total mass 1")
    labels = y if y is not None else np.ones(x.shape[0], int)
    return DiscreteDistribution(x, labels, m)


def cmd_wdist(args) -> int:
    P = _distribution(args.p, args.conditional)
    Q = _distribution(args.q, args.conditional)
    if args.conditional:
        d = class_distances(P, Q, no_label_shift=False)
        out = {"rho": max(d.values()), "winf_pos": d[1], "winf_neg": d[-1]}
    else:
        out = {"winf": winf_discrete(P, Q)}
    print(json.dumps(out))
    return EXIT_OK


def _gen_counterexample(spec: dict, out: Path) -> None:
    allowed = {"kind", "construction", "alpha0", "T", "alpha", "eps"}
    extra = sorted(set(spec) - allowed)
    if extra:
        raise ConfigurationError(f"spec: unknown key(s) {', '.join(extra)}")
    try:
        ce = gen_counterexample(CounterexampleSpec(
            spec.get("construction", ""), spec.get("alpha0"), spec.get("T"), spec.get("alpha"), spec.get("eps")))
    except ValueError as e:
        raise ConfigurationError(f"spec: {e}") from None
    out.mkdir(parents=True, exist_ok=True)
    for i, P in enumerate(ce.distributions):
        write_csv(out / f"dist_{i:02d}.csv", P.points, P.labels, P.masses)
    meta = {"spec": spec, "theta0": ce.theta0.to_dict(), "R": ce.R,
            "expected": {k: (v.to_dict() if hasattr(v, "to_dict") else v) for k, v in ce.expected.items()}}
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def cmd_gen(args) -> int:
    spec = _load_json(args.spec)
    out = Path(args.out_dir)
    if spec.get("kind") == "counterexample":
        _gen_counterexample(spec, out)
        return EXIT_OK
    cfg = experiment.parse_config({"dataset": spec, "seeds": [int(spec.get("seed") or 0)]})
    if cfg.dataset["kind"] == "import":
        raise ConfigurationError("spec.kind: 'import' reads data; nothing to generate")
    seq = experiment.build_sequence(cfg.dataset, cfg.seeds[0])
    seq.save(out)
    print(f"wrote {len(seq.intermediate)} intermediate file(s) to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gradual-st", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run an experiment configuration")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--csv", help="optional method,seed,accuracy summary")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("ablate", help="run a configuration and one ablation of it on shared seeds")
    a.add_argument("--config", required=True)
    a.add_argument("--ablation", required=True)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_ablate)

    v = sub.add_parser("verify", help="run the theory verification suite")
    v.add_argument("--suite", required=True, choices=sorted(theory.SUITES))
    v.add_argument("--out")
    v.add_argument("--workers", type=int, default=None, help="parallel claims (default: GDA_THREADS or core count)")
    v.add_argument("--sabotage", action="append", help=argparse.SUPPRESS)
    v.set_defaults(func=cmd_verify)

    w = sub.add_parser("wdist", help="W-infinity distance between two CSV point sets")
    w.add_argument("--p", required=True)
    w.add_argument("--q", required=True)
    w.add_argument("--conditional", action="store_true", help="per-class distances and their maximum")
    w.set_defaults(func=cmd_wdist)

    g = sub.add_parser("gen", help="generate a domain sequence or a counterexample from a JSON spec")
    g.add_argument("--spec", required=True)
    g.add_argument("--out-dir", required=True)
    g.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ConfigurationError, PrecisionError, ValueError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
