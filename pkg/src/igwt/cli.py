"""Command-line front end.

Exit status: 0 success, 1 usage error, 2 unreadable or malformed input,
3 infeasible moments or parameters, 4 fit did not converge.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .check import check, sample_summary
from .errors import (
    CorpusFormatError,
    FinitenessError,
    IGWTError,
    InfeasibleMomentsError,
    InvalidParameterError,
    SimulationGuardError,
    TruncationError,
)
from .estimate import FitOptions, fit, profile_feasibility
from .moments import DEFAULT_MASS_TOL, DEFAULT_TOL, moment_report
from .offspring import Family, GeometricZeroParams, MomentPair, PoissonZeroParams, from_moments, to_moments
from .simulate import INFEASIBLE_POLICIES, SimConfig, sample_ensemble
from .structures import ModelSpec, grid_model
from .tree import read_corpus, serialize_corpus, summarize, tally

log = logging.getLogger("igwt")

EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_NO_CONVERGENCE = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(value) -> str:
    """Four significant digits, keeping trailing zeros (2.260, not 2.26)."""
    text = f"{value:#.4g}"
    if "e" in text:
        mant, exp = text.split("e")
        return mant.rstrip(".") + "e" + exp
    return text.rstrip(".")


def _write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        _write_atomic(out, text)


def _load_model(args) -> ModelSpec:
    if args.paper_model:
        return grid_model()
    if args.model is None:
        raise _UsageError("either --model or --paper-model is required")
    try:
        return ModelSpec.from_json(Path(args.model).read_text(encoding="utf-8"))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise CorpusFormatError(f"malformed model file {args.model}: {exc}") from exc


def _seed(args) -> int:
    if args.seed is None:
        args.seed = 0
        print(f"igwt: no --seed given; using seed {args.seed}", file=sys.stderr)
        log.info("default seed %d", args.seed)
    return args.seed


class _UsageError(Exception):
    pass


def cmd_simulate(args) -> int:
    model = _load_model(args)
    config = SimConfig(seed=_seed(args), max_vertices=args.max_vertices,
                       max_generations=args.max_generations, infeasible=args.infeasible)
    trees = sample_ensemble(model, args.count, config)
    _emit(serialize_corpus(trees), args.out)
    return 0


def cmd_fit(args) -> int:
    trees = read_corpus(args.corpus)
    template = ModelSpec.from_json(Path(args.template).read_text(encoding="utf-8")) \
        if args.template else grid_model()
    stats = tally(trees)
    for entry in profile_feasibility(template, stats):
        if not entry.feasible:
            log.warning("generation %d: empirical (%.4g, %.4g) outside the %s region",
                        entry.generation, entry.mean, entry.variance, entry.family.value)
    result = fit(stats, template, FitOptions(n_starts=args.starts, seed=_seed(args)))
    _emit(result.to_json(), args.out)
    theta = ", ".join(_fmt(v) for v in result.model.theta)
    print(f"log-likelihood {result.log_likelihood:.10g}; theta = ({theta}); "
          f"converged={result.converged}", file=sys.stderr)
    return 0 if result.converged else EXIT_NO_CONVERGENCE


def cmd_moments(args) -> int:
    report = moment_report(_load_model(args), tol=args.tol, mass_tol=args.mass_tol)
    if args.out_dir:
        out = Path(args.out_dir)
        _write_atomic(out / "moments.csv", report.generations_csv())
        _write_atomic(out / "summary.csv", report.summary_csv())
    s = report.summary()
    print(f"m = {_fmt(s['total_mean'])}")
    print(f"s2 = {_fmt(s['total_var'])}")
    print(f"E(N_max) = {_fmt(s['height_mean'])}")
    print(f"Var(N_max) = {_fmt(s['height_var'])}")
    print(f"leaf m = {_fmt(s['leaf_total_mean'])}")
    print(f"leaf s2 = {_fmt(s['leaf_total_var'])}")
    if report.infeasible_generation is not None:
        print(f"# leaf/height sums stop at infeasible generation {report.infeasible_generation}"
              f" (neglected mass <= {report.neglected_mass:.3g})")
    return 0


def cmd_check(args) -> int:
    model = _load_model(args)
    data = read_corpus(args.corpus)
    report = check(model, data, replicates=args.replicates, seed=_seed(args), tol=args.tol,
                   infeasible=args.infeasible)
    if args.out_dir:
        out = Path(args.out_dir)
        _write_atomic(out / "report.json", report.to_json())
        for name, text in report.csv_files().items():
            _write_atomic(out / name, text)
    print("statistic  data(mean, var)  simulation(mean, var)  analytical(mean, var)")
    for row in report.table:
        cells = ["(" + ", ".join(_fmt(v) for v in pair) + ")"
                 for pair in (row.data, row.simulation, row.analytical)]
        print(row.statistic, *cells)
    return 0


def cmd_transform(args) -> int:
    family = Family.parse(args.family)
    if args.native is not None:
        p, second = args.native
        native = PoissonZeroParams(p, second) if family is Family.POISSON_ZERO \
            else GeometricZeroParams(p, second)
        m = to_moments(family, native)
        print(f"mean={_fmt(m.mean)} variance={_fmt(m.variance)}")
        return 0
    if args.mean is None or args.variance is None:
        raise _UsageError("transform needs --mean and --variance, or --native")
    native = from_moments(family, MomentPair(args.mean, args.variance))
    if family is Family.POISSON_ZERO:
        print(f"p={_fmt(native.p)} lambda={_fmt(native.lam)}")
    else:
        print(f"p={_fmt(native.p)} q={_fmt(native.q)}")
    return 0


def cmd_summarize(args) -> int:
    trees = read_corpus(args.corpus)
    lines = ["tree,total_vertices,height,leaves,per_generation_counts"]
    if not trees:
        raise CorpusFormatError("corpus contains no trees")
    columns = {"total_vertices": [], "height": [], "leaves": []}
    for i, tree in enumerate(trees):
        s = summarize(tree)
        columns["total_vertices"].append(s.total_vertices)
        columns["height"].append(s.height)
        columns["leaves"].append(s.leaves)
        lines.append(f"{i},{s.total_vertices},{s.height},{s.leaves},"
                     + " ".join(map(str, s.per_generation_counts)))
    # aggregate rows: sample mean and variance of each column
    stats = {k: sample_summary(v) for k, v in columns.items()}
    for label, idx in (("mean", 0), ("variance", 1)):
        lines.append(label + "," + ",".join(repr(stats[k][idx]) for k in columns) + ",")
    _emit("\n".join(lines) + "\n", args.out)
    for k, (mean, var, _, _) in stats.items():
        print(f"{k}: mean {_fmt(mean)} variance {_fmt(var)}", file=sys.stderr)
    print(f"{len(trees)} trees", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="igwt", description="Inhomogeneous Galton-Watson tree toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def model_args(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--model", help="ModelSpec JSON file")
        g.add_argument("--paper-model", action="store_true",
                       help="use the published fitted grid model")

    p = sub.add_parser("simulate", help="simulate a tree corpus")
    model_args(p)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-vertices", type=int, default=1_000_000)
    p.add_argument("--max-generations", type=int, default=10_000)
    p.add_argument("--infeasible", choices=INFEASIBLE_POLICIES, default="raise")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="maximum-likelihood fit of a template model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--template", help="ModelSpec JSON fixing families and kinds "
                                      "(default: the published model's layout)")
    p.add_argument("--starts", type=int, default=16)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("moments", help="analytical moments of a model")
    model_args(p)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--mass-tol", type=float, default=DEFAULT_MASS_TOL)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("check", help="compare a corpus with a model")
    model_args(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--replicates", type=int, default=10_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--infeasible", choices=INFEASIBLE_POLICIES, default="raise")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("transform", help="convert between moments and native parameters")
    p.add_argument("--family", required=True, choices=[f.value for f in Family])
    p.add_argument("--mean", type=float)
    p.add_argument("--variance", type=float)
    p.add_argument("--native", type=float, nargs=2, metavar=("P", "LAMBDA_OR_Q"))
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("summarize", help="per-tree summaries of a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_summarize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors, --help and --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"igwt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CorpusFormatError, OSError) as exc:
        print(f"igwt: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InfeasibleMomentsError, InvalidParameterError, FinitenessError) as exc:
        print(f"igwt: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (TruncationError, SimulationGuardError) as exc:
        print(f"igwt: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except IGWTError as exc:  # pragma: no cover - every subclass is mapped above
        print(f"igwt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
