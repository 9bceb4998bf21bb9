"""Command-line interface: ``votebound {compute,verify,minimize,gen}``.

Exit codes: 0 success, 1 error (or verification violations), 2 when the run
completed but some applicable bound is undefined or minimisation is infeasible.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import io as vio
from . import oracle
from .bounds import ReportSettings, full_report
from .errors import BoundUndefined, VoteBoundError
from .minimizer import MinimizeConfig, minimize

_LOGGER = logging.getLogger("votebound")

EXIT_OK, EXIT_ERROR, EXIT_DEGRADED = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _default_seed():
    value = os.environ.get("VOTEBOUND_SEED")
    if value is None:
        return 0
    try:
        return int(value)
    except ValueError:
        raise SystemExit(f"votebound: error: VOTEBOUND_SEED must be an integer, got {value!r}")


def _q_range(text):
    try:
        lo, hi = (int(part) for part in text.split(".."))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a..b, got {text!r}") from None
    if not 2 <= lo <= hi:
        raise argparse.ArgumentTypeError(f"need 2 <= a <= b, got {text!r}")
    return lo, hi


def _emit(text, out):
    if out:
        vio.write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _load_pair(dataset_path, ensemble_path):
    space = vio.peek_label_space(ensemble_path)
    dataset = vio.load_dataset(dataset_path, space)
    ensemble = vio.load_ensemble(ensemble_path, dataset)
    return dataset, ensemble


def cmd_compute(args):
    dataset, ensemble = _load_pair(args.dataset, args.ensemble)
    report = full_report(dataset, ensemble, ReportSettings(omega=args.omega, seed=args.seed))
    if args.format == "csv":
        text = vio.report_to_csv(report)
    else:
        text = vio.dumps(vio.report_to_dict(report))
    _emit(text, args.out)
    if report.degraded:
        undefined = [k for k in report.applicable if report.bounds[k] is None]
        _LOGGER.warning("undefined bounds: %s", ", ".join(undefined))
        return EXIT_DEGRADED
    return EXIT_OK


def cmd_verify(args):
    names = oracle.PROPERTIES if args.property == "all" else (args.property,)
    results = []
    for name in names:
        specs = oracle.campaign_specs(name, args.trials, args.seed, args.q_range)
        result = oracle.verify(name, specs, inject_bug=args.inject_bug)
        results.append(result)
        status = "PASS" if result.passed else "FAIL"
        print(f"{status} {name}: {result.evaluated}/{result.trials} evaluated, "
              f"{len(result.violations)} violations", file=sys.stderr)
    doc = {
        "tool": vio.TOOL,
        "version": vio.__version__,
        "seed": args.seed,
        "trials": args.trials,
        "qRange": list(args.q_range),
        "passed": all(r.passed for r in results),
        "results": [r.to_dict() for r in results],
    }
    _emit(vio.dumps(doc), args.out)
    return EXIT_OK if doc["passed"] else EXIT_ERROR


def cmd_minimize(args):
    dataset, ensemble = _load_pair(args.dataset, args.ensemble)
    config = MinimizeConfig(
        omega=args.omega,
        grid_size=args.grid,
        tolerance=args.tol,
        max_iterations=args.max_iters,
        seed=args.seed,
    )
    try:
        result = minimize(dataset, ensemble.voters, config)
    except BoundUndefined as exc:
        print(f"votebound: infeasible: {exc}", file=sys.stderr)
        return EXIT_DEGRADED
    learned = ensemble.with_posterior(result.posterior)
    report = full_report(dataset, learned, ReportSettings(omega=args.omega, seed=args.seed))
    result_text = vio.dumps(vio.minimize_result_to_dict(result, config))
    report_text = vio.dumps(vio.report_to_dict(report))
    if args.out:
        vio.write_atomic(args.out, result_text)
        vio.write_atomic(args.report_out or _report_path(args.out), report_text)
        if args.ensemble_out:
            vio.write_atomic(args.ensemble_out, vio.dumps(vio.ensemble_to_dict(learned)))
    else:
        sys.stdout.write(result_text)
    if not result.converged:
        _LOGGER.warning("solver hit the iteration cap before converging")
    return EXIT_OK


def _report_path(path):
    root, ext = os.path.splitext(path)
    return f"{root}.report{ext or '.json'}"


def cmd_gen(args):
    q = 2 if args.kind == "binary" else args.q
    spec = oracle.InstanceSpec(
        label_kind=args.kind,
        n_classes=q,
        n_voters=args.voters,
        n_examples=args.examples,
        seed=args.seed,
        voter_accuracy=args.accuracy,
        random_weights=args.random_weights,
    )
    dataset, ensemble = oracle.generate(spec)
    vio.write_atomic(f"{args.out_prefix}.csv", vio.format_dataset(dataset))
    vio.write_atomic(f"{args.out_prefix}.json", vio.dumps(vio.ensemble_to_dict(ensemble)))
    return EXIT_OK


def build_parser():
    seed = _default_seed()
    parser = _Parser(prog="votebound", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compute", help="evaluate every applicable bound for a dataset/ensemble pair")
    p.add_argument("dataset")
    p.add_argument("ensemble")
    p.add_argument("--omega", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("verify", help="brute-force verification campaign")
    p.add_argument("--property", choices=("all",) + oracle.PROPERTIES, default="all")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--q-range", type=_q_range, default=(2, 5))
    p.add_argument("--out")
    p.add_argument("--inject-bug", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("minimize", help="learn a posterior minimising the omega-margin C-bound")
    p.add_argument("dataset")
    p.add_argument("ensemble")
    p.add_argument("--omega", type=float, default=2.0)
    p.add_argument("--grid", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iters", type=int, default=10000)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--out")
    p.add_argument("--report-out")
    p.add_argument("--ensemble-out")
    p.set_defaults(func=cmd_minimize)

    p = sub.add_parser("gen", help="write a random dataset/ensemble pair")
    p.add_argument("--kind", choices=("multiclass", "multilabel", "binary"), default="multiclass")
    p.add_argument("--q", type=int, default=3)
    p.add_argument("--voters", type=int, default=5)
    p.add_argument("--examples", type=int, default=20)
    p.add_argument("--accuracy", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--random-weights", action="store_true")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if getattr(args, "trials", 1) < 1:
        print("votebound: error: --trials must be positive", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except (VoteBoundError, OSError) as exc:
        print(f"votebound: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
