"""Benchmark harness: ``sfgm {solve,compare,certify,bounds}``.

Exit codes: 0 success, 2 bad flags or configuration, 3 dataset parse error,
4 solver stall, 5 hard certification violation.  Tables go to standard
output, logs and error messages to standard error.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    DiagonalSpectrum,
    GaussianLeastSquares,
    SparseBinaryClassification,
    SyntheticSpec,
    gen_diagonal_quadratic,
    gen_gaussian_logistic,
    gen_gaussian_ls,
    gen_sparse_binary,
    least_squares_from,
    load_libsvm,
    logistic_from,
    starting_point,
)
from .diagnostics import EstimatingTracker, audit_trace, certify_run, iteration_lower_bounds
from .errors import ConfigError, LibsvmParseError, SFGMError, SolverStall, TraceError, ValidityDomainError
from .oracle import ground_truth
from .solvers import (
    DIST_TO_OPT,
    FIRST_TERM,
    GRAD_NORM,
    LAST_TERM,
    MAX_ITERS,
    ZERO,
    Method,
    SolverConfig,
    StoppingRule,
    run,
    window,
)
from .svg import Axes, Series, emit_svg
from .traces import fmt, read_json, read_trace, write_certificate, write_json, write_trace

logger = logging.getLogger("sfgm")

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_STALL, EXIT_CERT = 0, 2, 3, 4, 5
OUT_ENV = "SFGM_OUT"
METHOD_CHOICES = SolverConfig.PRESETS + ("sfgm",)
REFERENCE = "fgm-css3"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# --------------------------------------------------------------------------
# problem and method construction


@dataclass
class Problem:
    oracle: object
    truth: object
    x0: np.ndarray
    meta: dict


def build_problem(args) -> Problem:
    seed = args.seed
    meta = {"problem": args.problem, "loss": args.loss, "seed": seed}
    if args.problem == "diag":
        if args.loss != "quadratic":
            raise ConfigError("the diagonal family only has a quadratic loss")
        spec = SyntheticSpec(DiagonalSpectrum(args.xi, args.m), seed)
        oracle, truth = gen_diagonal_quadratic(spec)
        meta.update(xi=args.xi, m=args.m)
    else:
        if args.tau < 0:
            raise ConfigError("--tau must be nonnegative")
        if args.problem == "gaussian":
            spec = SyntheticSpec(GaussianLeastSquares(args.m, args.n), seed)
            oracle = (gen_gaussian_ls(spec, args.tau) if args.loss == "quadratic"
                      else gen_gaussian_logistic(spec, args.tau))
            meta.update(m=args.m, n=args.n)
        else:
            if args.problem == "sparse-binary":
                ds = gen_sparse_binary(SyntheticSpec(SparseBinaryClassification(args.m, args.n), seed))
            else:
                if not args.data:
                    raise ConfigError("--problem libsvm needs --data PATH")
                ds = load_libsvm(args.data, n_features=args.n_features)
            meta.update(m=ds.n_samples, n=ds.n_features, source=ds.source)
            oracle = least_squares_from(ds, args.tau) if args.loss == "quadratic" else logistic_from(ds, args.tau)
        meta["tau"] = args.tau
        truth = ground_truth(oracle)
    x0 = starting_point(seed, oracle.dim)
    meta.update(L=oracle.lipschitz, mu=oracle.strong_convexity, dim=oracle.dim,
                f_star=truth.f_star, truth_method=truth.method, R0=truth.dist(x0))
    return Problem(oracle, truth, x0, meta)


def parse_beta(text: str):
    table = {"zero": ZERO, "first": FIRST_TERM, "last": LAST_TERM}
    if text in table:
        return table[text]
    if text.startswith("window:"):
        try:
            return window(int(text.split(":", 1)[1]))
        except ValueError:
            pass
    raise ConfigError(f"bad --beta {text!r}; use zero, first, last or window:W")


def parse_gamma0(text: str, oracle) -> float:
    if text == "mu":
        return oracle.strong_convexity
    if text == "L":
        return oracle.lipschitz
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"bad --gamma0 {text!r}; use a number, 'mu' or 'L'") from None


def stopping_rule(args) -> StoppingRule:
    if args.tol_grad is not None and args.tol_dist is not None:
        raise ConfigError("give at most one of --tol-grad and --tol-dist")
    if args.tol_grad is not None:
        return StoppingRule(GRAD_NORM, args.tol_grad)
    if args.tol_dist is not None:
        return StoppingRule(DIST_TO_OPT, args.tol_dist)
    return StoppingRule(MAX_ITERS)


def build_config(label: str, oracle, args) -> SolverConfig:
    common = dict(stop=stopping_rule(args), max_iters=args.max_iters)
    if label == "sfgm":
        return SolverConfig(Method.SFGM, beta=parse_beta(args.beta),
                            gamma0=parse_gamma0(args.gamma0, oracle), label="sfgm", **common)
    return SolverConfig.preset(label, oracle, **common)


def method_list(text: str):
    labels = [s.strip() for s in text.split(",") if s.strip()]
    if not labels:
        raise ConfigError("--methods is empty")
    bad = [s for s in labels if s not in METHOD_CHOICES]
    if bad:
        raise ConfigError(f"unknown method(s) {', '.join(bad)}; choose from {', '.join(METHOD_CHOICES)}")
    if len(set(labels)) != len(labels):
        raise ConfigError("--methods lists a method twice")
    return labels


def output_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or "sfgm-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def iterations_to_threshold(records, stop: StoppingRule, R0: float):
    """First ``k`` where the stopping quantity is at or below its threshold."""
    for r in records:
        if stop.kind is GRAD_NORM and r.grad_norm <= stop.threshold:
            return r.k
        if stop.kind is DIST_TO_OPT and r.dist_to_opt <= stop.threshold * R0:
            return r.k
    return None


# --------------------------------------------------------------------------
# subcommands


def cmd_solve(args) -> int:
    problem = build_problem(args)
    config = build_config(args.method, problem.oracle, args)
    out = output_dir(args)
    tracker = EstimatingTracker(problem.oracle, config, problem.x0) if args.certify else None
    _, records = run(problem.oracle, config, problem.x0, problem.truth,
                     observer=tracker.observe if tracker else None)
    write_trace(records, out / "trace.csv")
    meta = {**problem.meta, "method": config.name, "gamma0": config.gamma0,
            "beta": config.beta.kind.value, "max_iters": config.max_iters,
            "stop": config.stop.kind.value, "threshold": config.stop.threshold,
            "iterations": len(records)}
    write_json(meta, out / "meta.json")
    logger.info("%s: %d iterations, traces in %s", config.name, len(records), out)
    if tracker is not None and records:
        cert = certify_run(records, tracker, problem.truth)
        write_certificate(cert.reports, out / "certificate.csv")
        write_json(cert.summary(), out / "certification.json")
        _print_summary(config.name, cert.summary())
        if cert.hard_violations:
            return EXIT_CERT
    return EXIT_OK


SUMMARY_COLUMNS = ("method", "iterations", "reached", "final_f", "final_gap", "final_grad_norm",
                   "final_dist_to_opt", "ratio_vs_" + REFERENCE, "wall_ns")


def cmd_compare(args) -> int:
    problem = build_problem(args)
    labels = method_list(args.methods)
    configs = [build_config(label, problem.oracle, args) for label in labels]
    out = output_dir(args)
    R0 = problem.meta["R0"]

    results = {}
    for config in configs:
        _, records = run(problem.oracle, config, problem.x0.copy(), problem.truth)
        results[config.name] = records
        write_trace(records, out / f"trace-{config.name}.csv")

    stop = configs[0].stop
    counts = {name: iterations_to_threshold(recs, stop, R0) for name, recs in results.items()}
    ref = counts.get(REFERENCE)
    rows = []
    for name, recs in results.items():
        last = recs[-1] if recs else None
        n = counts[name]
        ratio = n / ref if (n is not None and ref) else math.nan
        rows.append((
            name, len(recs) if n is None else n, n is not None,
            last.f if last else math.nan, last.gap if last else math.nan,
            last.grad_norm if last else math.nan, last.dist_to_opt if last else math.nan,
            ratio, last.wall_ns if last else 0,
        ))

    text = ",".join(SUMMARY_COLUMNS) + "\n" + "".join(",".join(fmt(v) if not isinstance(v, str) else v
                                                                for v in row) + "\n" for row in rows)
    (out / "summary.csv").write_text(text, encoding="utf-8", newline="")
    write_json({**problem.meta, "methods": labels, "stop": stop.kind.value,
                "threshold": stop.threshold, "max_iters": args.max_iters}, out / "meta.json")

    header = f"{'method':<14}{'iters':>8}{'reached':>9}{'final gap':>14}{'grad norm':>14}{'ratio':>9}"
    print(header)
    for name, iters, reached, _, gap, gnorm, _, ratio, _ in rows:
        print(f"{name:<14}{iters:>8}{'yes' if reached else 'no':>9}{gap:>14.4e}{gnorm:>14.4e}"
              f"{'-' if math.isnan(ratio) else format(ratio, '.3f'):>9}")

    field, ylabel = _plot_quantity(stop, problem.truth is not None)
    series = [Series(name, [r.k for r in recs], [getattr(r, field) for r in recs])
              for name, recs in results.items()]
    try:
        svg = emit_svg(series, Axes(ylabel=ylabel, title=f"{args.problem} ({args.loss})"))
    except ValueError as exc:
        logger.warning("no plot written: %s", exc)
    else:
        (out / "plot.svg").write_text(svg, encoding="utf-8", newline="")
    return EXIT_OK


def _plot_quantity(stop: StoppingRule, has_truth: bool):
    if stop.kind is GRAD_NORM or not has_truth:
        return "grad_norm", "||grad f(y)||"
    if stop.kind is DIST_TO_OPT:
        return "dist_to_opt", "||x - x*||"
    return "gap", "f(x) - f*"


def _print_summary(name, summary: dict):
    print(f"[{name}]")
    for key, value in summary.items():
        print(f"  {key:<26}{value}")


def cmd_certify(args) -> int:
    if args.trace_dir:
        return _certify_directory(Path(args.trace_dir))
    problem = build_problem(args)
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    hard = 0
    for label in method_list(args.methods):
        config = build_config(label, problem.oracle, args)
        tracker = EstimatingTracker(problem.oracle, config, problem.x0)
        _, records = run(problem.oracle, config, problem.x0.copy(), problem.truth, observer=tracker.observe)
        if not records:
            _print_summary(config.name, {"iterations": 0})
            continue
        cert = certify_run(records, tracker, problem.truth)
        _print_summary(config.name, cert.summary())
        hard += cert.hard_violations
        if out is not None:
            write_certificate(cert.reports, out / f"certificate-{config.name}.csv")
    return EXIT_CERT if hard else EXIT_OK


def _certify_directory(path: Path) -> int:
    meta = read_json(path / "meta.json")
    records = read_trace(path / "trace.csv")
    audit = audit_trace(records, meta["L"], meta["mu"], float(meta.get("gamma0", 0.0)))
    _print_summary(meta.get("method", str(path)), {
        "rows": audit.rows, "lambda_violations": audit.lambda_violations,
        "gamma_violations": audit.gamma_violations,
        "feasibility_violations": audit.feasibility_violations,
        "hard_violations": audit.hard_violations,
    })
    return EXIT_CERT if audit.hard_violations else EXIT_OK


def cmd_bounds(args) -> int:
    S = args.mu if args.S is None else args.S
    b = iteration_lower_bounds(args.L, args.mu, S, args.r0, args.eps)
    print(f"k_sfgm             {b.k_sfgm!r}")
    print(f"k_sfgm_asymptotic  {b.k_sfgm_asymptotic!r}")
    print(f"k_fgm              {b.k_fgm!r}")
    print(f"k_lower            {b.k_lower!r}")
    print(f"fgm/sfgm_asym      {b.fgm_over_sfgm!r}")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def _add_problem_flags(p, *, single_method: bool):
    p.add_argument("--problem", choices=("diag", "gaussian", "sparse-binary", "libsvm"), default="diag")
    p.add_argument("--loss", choices=("quadratic", "logistic"), default="quadratic")
    p.add_argument("--data", help="LIBSVM file for --problem libsvm")
    p.add_argument("--n-features", type=int, default=None,
                   help="declared feature count for LIBSVM data (default: largest index seen)")
    p.add_argument("--xi", type=int, default=3, help="diag family: mu = 10^-xi")
    p.add_argument("--m", type=int, default=1000, help="samples (diag: dimension)")
    p.add_argument("--n", type=int, default=100, help="features for synthetic designs")
    p.add_argument("--tau", type=float, default=1e-5, help="ridge weight; also the strong convexity")
    if single_method:
        p.add_argument("--method", choices=METHOD_CHOICES, default="sfgm-last")
    else:
        p.add_argument("--methods", default=",".join(SolverConfig.PRESETS))
    p.add_argument("--beta", default="last", help="memory schedule for --method sfgm")
    p.add_argument("--gamma0", default="0", help="gamma_0 for --method sfgm: number, 'mu' or 'L'")
    p.add_argument("--max-iters", type=int, default=10_000)
    p.add_argument("--tol-grad", type=float, default=None)
    p.add_argument("--tol-dist", type=float, default=None, help="relative to ||x0 - x*||")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help=f"output directory (default: ${OUT_ENV} or ./sfgm-out)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sfgm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="run one method and write its trace")
    _add_problem_flags(p, single_method=True)
    p.add_argument("--certify", action="store_true", help="also write a certification report")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="run several methods from the same starting point")
    _add_problem_flags(p, single_method=False)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("certify", help="check the method's identities and bounds")
    _add_problem_flags(p, single_method=False)
    p.add_argument("--trace-dir", help="audit a directory written by 'solve' instead of re-running")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("bounds", help="print analytic iteration estimates")
    p.add_argument("--L", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--r0", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--S", type=float, default=None, help="memory mass (default: mu, the limit value)")
    p.set_defaults(func=cmd_bounds)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"sfgm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except LibsvmParseError as exc:
        print(f"sfgm: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SolverStall as exc:
        print(f"sfgm: solver stalled: {exc}", file=sys.stderr)
        return EXIT_STALL
    except (ConfigError, ValidityDomainError, TraceError, ValueError, OSError, KeyError) as exc:
        print(f"sfgm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SFGMError as exc:
        print(f"sfgm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
