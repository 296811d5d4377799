"""Command-line entry point: ``stressrelease {simulate,moments,validate,bench}``.

Exit codes: 0 success, 1 validation outside its acceptance bands,
2 invalid usage, parameters or I/O.
"""
import argparse
import json
import logging
import sys
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from . import __version__
from .config import RunConfig, load_run_config
from .core_model import EventLog
from .errors import StressReleaseError
from .exact_sim import simulate_batch, simulate_path, simulate_path_inverse
from .metrics import RunMetrics
from .moments import theory_curve
from .montecarlo import compare_estimators, fastest_of
from .serialization import write_event_log_csv, write_event_log_json, write_moment_curves_csv
from .thinning_sim import grid_search_delta, simulate_path_thinning

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
# window width used when thinning is asked for without one
DEFAULT_DELTA = 1.86
GRID_SEARCH_PATHS = 10

_NOT_OPTIONS = {"command", "config", "verbose", "handler"}


def _model_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("model")
    group.add_argument("--lambda0", type=float)
    group.add_argument("--beta", type=float)
    group.add_argument("--rho", type=float)
    group.add_argument("--jump-self", help="exp:<rate> or const:<x0>")
    group.add_argument("--jump-ext", help="exp:<rate> or const:<x0>")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON file of option values; flags override it")
    common.add_argument("--verbose", "-v", action="store_true")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    _model_flags(common)

    parser = argparse.ArgumentParser(prog="stressrelease", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", parents=[common], help="simulate one path")
    simulate.add_argument("--end-time", type=float)
    simulate.add_argument("--method", choices=["composition", "thinning", "inverse", "vectorized"])
    simulate.add_argument("--delta", type=float, help="thinning window width")
    simulate.add_argument("--out", help="output file (stdout when omitted)")
    simulate.add_argument("--format", choices=["csv", "json"])
    simulate.set_defaults(handler=cmd_simulate)

    moments = sub.add_parser("moments", parents=[common], help="theory curves theta_1..theta_K")
    moments.add_argument("--order", type=int)
    moments.add_argument("--grid", help="start:stop:step or comma list")
    moments.add_argument("--out")
    moments.set_defaults(handler=cmd_moments)

    validate = sub.add_parser("validate", parents=[common], help="Monte Carlo against theory")
    validate.add_argument("--n-paths", type=int)
    validate.add_argument("--grid")
    validate.add_argument("--delta", type=float, help="thinning window (grid-searched when omitted)")
    validate.add_argument("--deltas", help="grid-search candidates")
    validate.add_argument("--theory-beta", type=float, help="beta used for the theory values only")
    validate.add_argument("--out", help="JSON report file (stdout when omitted)")
    validate.add_argument("--metrics-out")
    validate.add_argument("--pushgateway")
    validate.set_defaults(handler=cmd_validate)

    bench = sub.add_parser("bench", parents=[common], help="runtime of composition against thinning")
    bench.add_argument("--end-time", type=float)
    bench.add_argument("--sizes", help="comma list of path counts")
    bench.add_argument("--delta", type=float, help="skip the grid search and use this window")
    bench.add_argument("--deltas", help="grid-search candidates")
    bench.add_argument("--trials", type=int)
    bench.add_argument("--out", help="CSV table file")
    bench.add_argument("--metrics-out")
    bench.add_argument("--pushgateway")
    bench.set_defaults(handler=cmd_bench)
    return parser


def _sample(cfg: RunConfig) -> EventLog:
    params = cfg.model_params()
    if cfg.method == "thinning":
        return simulate_path_thinning(params, cfg.end_time, cfg.delta or DEFAULT_DELTA, cfg.seed)
    if cfg.method == "inverse":
        return simulate_path_inverse(params, cfg.end_time, cfg.seed)
    if cfg.method == "vectorized":
        return simulate_batch(params, cfg.end_time, 1, cfg.seed).event_log(0)
    return simulate_path(params, cfg.end_time, cfg.seed)


def cmd_simulate(cfg: RunConfig) -> int:
    log = _sample(cfg)
    logger.info(f"simulated {log.n_self} self and {log.n_external} external arrivals up to {cfg.end_time}")
    if cfg.format == "json":
        write_event_log_json(log, cfg.out, cfg.model_params(), cfg.seed, cfg.method)
    else:
        write_event_log_csv(log, cfg.out)
    return EXIT_OK


def cmd_moments(cfg: RunConfig) -> int:
    params = cfg.model_params()
    grid = cfg.time_grid()
    curves = [theory_curve(params, k, grid) for k in range(1, cfg.order + 1)]
    write_moment_curves_csv(curves, cfg.out)
    return EXIT_OK


def _search_delta(cfg: RunConfig, end_time: float) -> float:
    if cfg.delta is not None:
        return cfg.delta
    return grid_search_delta(
        cfg.model_params(), end_time, cfg.candidate_deltas(), cfg.trials, GRID_SEARCH_PATHS, cfg.seed
    )


def _emit_metrics(cfg: RunConfig, metrics: RunMetrics) -> None:
    if cfg.metrics_out:
        metrics.write(cfg.metrics_out)
    metrics.push(cfg.pushgateway)


def cmd_validate(cfg: RunConfig) -> int:
    params = cfg.model_params()
    theory_params = cfg.model_params(beta=cfg.theory_beta) if cfg.theory_beta is not None else None
    grid = cfg.time_grid()
    delta = _search_delta(cfg, max(grid[-1], 1.0))
    report = compare_estimators(
        params, grid, cfg.n_paths, delta, cfg.seed, workers=cfg.workers, theory_params=theory_params
    )
    text = json.dumps(report.to_dict(), indent=2) + "\n"
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    metrics = RunMetrics()
    metrics.record_delta(delta)
    metrics.record_validation(report.passed, report.paths_per_second())
    _emit_metrics(cfg, metrics)
    if not report.passed:
        logger.error("validation failed: Monte Carlo estimates fall outside the acceptance bands")
        return EXIT_FAILED
    return EXIT_OK


def cmd_bench(cfg: RunConfig) -> int:
    params = cfg.model_params()
    sizes = cfg.bench_sizes()
    delta = _search_delta(cfg, cfg.end_time)
    end_time, seed = cfg.end_time, cfg.seed
    runners = {
        "composition": lambda n: simulate_batch(params, end_time, n, seed),
        "composition-loop": lambda n: [simulate_path(params, end_time, seed, i) for i in range(n)],
        "thinning": lambda n: [simulate_path_thinning(params, end_time, delta, seed, i) for i in range(n)],
    }
    metrics = RunMetrics()
    metrics.record_delta(delta)
    rows = []
    for n in sizes:
        for method, run in runners.items():
            seconds = fastest_of(lambda: run(n))
            rows.append((method, n, seconds))
            metrics.record_bench(method, n, seconds)
            logger.info(f"{method} n={n}: {seconds:.4f}s")

    print(f"# stressrelease {__version__} seed={seed} end_time={end_time:g} delta={delta:g}")
    print(f"# params {json.dumps(params.to_dict())}")
    print(f"{'method':<18}{'n':>8}{'seconds':>12}")
    for method, n, seconds in rows:
        print(f"{method:<18}{n:>8}{seconds:>12.4f}")
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write("method,n,seconds\n")
            fh.writelines(f"{m},{n},{s!r}\n" for m, n, s in rows)
    _emit_metrics(cfg, metrics)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    overrides = {k: v for k, v in vars(args).items() if k not in _NOT_OPTIONS}
    try:
        cfg = load_run_config(args.config, overrides)
        return args.handler(cfg)
    except (StressReleaseError, ValidationError, OSError) as exc:
        logger.error(f"{args.command} failed: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
