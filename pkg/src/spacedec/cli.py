"""``spacedec`` command-line harness: run, certify, geomtest, sweep."""
import argparse
import concurrent.futures
import contextlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import geomtest
from . import io as sio
from . import problems as P
from .errors import InfeasiblePoint, InvalidConfig, InvalidInput, SpacedecError
from .solvers import SOLVERS
from .variational import stationarity_report

log = logging.getLogger("spacedec")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2, 3
FD_GATE_TOL = 1e-5


def thread_limit():
    """``SPACEDEC_THREADS`` as a positive int, or None when unset."""
    raw = os.environ.get("SPACEDEC_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise InvalidConfig(f"SPACEDEC_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise InvalidConfig("SPACEDEC_THREADS must be positive")
    return n


def limited_threads():
    n = thread_limit()
    if n is None:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


# -- experiments ------------------------------------------------------------------------

class Experiment:
    """Objective, starting point and task-specific quality metrics built from a config."""

    def __init__(self, cfg, base_dir="."):
        self.cfg = cfg
        self.extra = lambda point: {}
        builder = getattr(self, f"_build_{cfg.task}")
        builder(Path(base_dir))

    def _build_fitting(self, base):
        c = self.cfg
        data, self.objective = P.make_fitting(c.m, c.n, c.r_star, c.oversampling, c.seed, r=c.r)
        self.start = P.fitting_start(data, c.r, c.omega, c.seed + 1)
        self.extra = lambda point: {"test_error": data.test_error(point.X)}

    def _build_graphsim(self, base):
        c = self.cfg
        if c.graph == "files":
            A = P.read_edge_list(base / c.graph_a, c.m)
            B = P.read_edge_list(base / c.graph_b, c.n)
        else:
            rng = np.random.default_rng(c.seed)
            A = P.cycle_graph(c.m) if c.graph == "cycle_binomial" else \
                P.binomial_graph(c.m, c.edge_prob, rng)
            B = P.binomial_graph(c.n, c.edge_prob, rng)
        G = P.GraphPair(A, B)
        self.objective = P.make_graph_similarity(G, c.r)
        self.start = P.graph_start(G, c.r, c.omega, c.seed + 1)

        def extra(point):
            X, ref = point.X, P.blondel_similarity(G)
            err = min(np.linalg.norm(X - ref), np.linalg.norm(X + ref)) / np.linalg.norm(ref)
            return {"relative_error_vs_power_iteration": float(err)}
        self.extra = extra

    def _build_sync(self, base):
        c = self.cfg
        self.objective, data = P.make_synchronization(c.cameras, c.noise, seed=c.seed,
                                                      n_edges=c.n_edges)
        self.start = P.sync_start(self.objective, c.omega, c.seed + 1)

        def extra(point):
            R = P.rotations_from_point(point.H)
            e = P.edge_errors(R, data)
            return {"max_edge_error": float(e.max()), "median_edge_error": float(np.median(e)),
                    "min_block_det": float(np.linalg.det(R).min())}
        self.extra = extra

    def _build_markov(self, base):
        c = self.cfg
        self.objective, data = P.make_markov(c.m, c.r_star, c.samples or None, c.seed)
        self.objective.r = c.r
        self.start = P.markov_start(self.objective, c.omega, c.r)
        f_truth = self.objective.value(data.Y)
        self.extra = lambda point: {"f_truth": f_truth,
                                    "f_ratio": self.objective.value(point.X) / f_truth}

    def quality(self, point):
        return self.extra(point)


def _fd_gate(objective, seed):
    g_err, h_err = objective.fd_check(np.random.default_rng(seed), probes=20)
    if g_err > FD_GATE_TOL or (objective.ehess is not None and h_err > FD_GATE_TOL):
        raise InvalidConfig(f"objective failed the derivative check "
                            f"(gradient {g_err:.2e}, Hessian {h_err:.2e})")
    return g_err, h_err


def _resolve_output(cfg, config_path):
    out = Path(cfg.output)
    return out if out.is_absolute() else Path(config_path).parent / out


def execute(cfg, config_text, config_path, verbose=False):
    """Run one validated config and write every output file. Returns the summary."""
    out = _resolve_output(cfg, config_path)
    summary = {"version": __version__, "config_hash": sio.config_hash(config_text),
               "task": cfg.task}
    if cfg.task == "geomtest":
        checks = geomtest.run_suite(cfg.kind, cfg.m, cfg.n, cfg.r, cfg.omega, cfg.seed)
        summary["checks"] = [{"name": c.name, "value": c.value, "bound": c.bound,
                              "passed": c.passed, "skipped": c.skipped, "note": c.note}
                             for c in checks]
        summary["passed"] = geomtest.suite_passed(checks)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(json.dumps(summary, indent=2, default=float))
        return summary

    exp = Experiment(cfg, Path(config_path).parent)
    if cfg.fd_gate:
        g_err, h_err = _fd_gate(exp.objective, cfg.seed)
        summary["fd_check"] = {"gradient": g_err, "hessian": h_err}
    solver_cfg = cfg.solver_config()

    def progress(k, f, gn):
        if verbose:
            print(f"  iter {k:5d}  f = {f: .12e}  |grad| = {gn:.3e}", file=sys.stderr)

    t0 = time.perf_counter()
    report = SOLVERS[cfg.solver](exp.objective, exp.start, solver_cfg, callback=progress)
    elapsed = time.perf_counter() - t0
    x = report.final_point
    egrad = exp.objective.egrad(x.X)
    summary.update({
        "solver": cfg.solver,
        "termination": report.termination.value,
        "iterations": report.iterations,
        "f": report.f,
        "grad_norm": report.grad_norm,
        "wall_seconds": elapsed,
        "max_constraint_residual": max(r.constraint_residual for r in report.records),
        "final_stationarity": report.final_stationarity,
    })
    summary.update(exp.quality(x))

    out.mkdir(parents=True, exist_ok=True)
    plot = out / "plotdata"
    plot.mkdir(exist_ok=True)
    sio.write_metrics(out / "metrics.csv", report.records)
    its = [r.iteration for r in report.records]
    sio.write_dat(plot / "f_vs_iter.dat", its, [r.f for r in report.records])
    sio.write_dat(plot / "grad_norm_vs_iter.dat", its, [r.grad_norm for r in report.records])
    sio.write_dat(plot / "grad_norm_vs_time.dat", [r.wall_time for r in report.records],
                  [r.grad_norm for r in report.records])
    sio.write_matrix(out / "X.mtx", x.X)
    sio.write_matrix(out / "grad.mtx", egrad)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=float))
    return summary


# -- subcommands --------------------------------------------------------------------------

def cmd_run(args):
    try:
        cfg, text = sio.load_config(args.config)
    except InvalidConfig as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        with limited_threads():
            summary = execute(cfg, text, args.config, verbose=args.verbose)
    except InvalidConfig as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SpacedecError, ArithmeticError, ValueError, RuntimeError) as exc:
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(json.dumps(summary, indent=2, default=float))
    if cfg.task == "geomtest" and not summary["passed"]:
        return EXIT_FAIL
    return EXIT_OK


def cmd_certify(args):
    try:
        X = sio.read_matrix(args.X)
        grad = sio.read_matrix(args.grad)
    except (OSError, ValueError) as exc:
        print(f"cannot read input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if X.shape != grad.shape:
        print(f"shape mismatch: X {X.shape}, grad {grad.shape}", file=sys.stderr)
        return EXIT_USAGE
    try:
        report = stationarity_report(X, grad, args.rank, args.kind)
    except InfeasiblePoint as exc:
        print(f"infeasible point: constraint residual {exc.residual:.3e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InvalidInput, InvalidConfig) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    ok = report["measure_detected"] <= args.tol
    rows = [("detected rank", str(report["detected_rank"])),
            ("measure at detected rank", f"{report['measure_detected']:.6e}"),
            (f"measure at rank {args.rank}", f"{report['measure_forced']:.6e}"),
            ("tolerance", f"{args.tol:.1e}"),
            ("verdict", "stationary" if ok else "not stationary")]
    for label, value in rows:
        print(f"{label:<26} {value}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_geomtest(args):
    try:
        with limited_threads():
            checks = geomtest.run_suite(args.kind, args.m, args.n, args.r, args.omega, args.seed)
    except (InvalidInput, InvalidConfig, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"geomtest kind={args.kind} m={args.m} n={args.n} r={args.r} "
          f"omega={args.omega} seed={args.seed}")
    for c in checks:
        print("  " + c.line())
    ok = geomtest.suite_passed(checks)
    print("all checks passed" if ok else "some checks failed")
    return EXIT_OK if ok else EXIT_FAIL


def _sweep_one(path):
    return str(path), main(["run", str(path)], quiet=True)


def cmd_sweep(args):
    configs = sorted(Path(args.dir).glob("*.ini"))
    if not configs:
        print(f"no *.ini configs in {args.dir}", file=sys.stderr)
        return EXIT_USAGE
    limit = thread_limit()
    workers = args.workers or limit or 1
    if limit is not None:
        workers = min(workers, limit)
    if workers == 1:
        results = [_sweep_one(p) for p in configs]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, configs))
    worst = EXIT_OK
    for path, code in results:
        print(f"{'ok  ' if code == 0 else 'FAIL'}  exit {code}  {path}")
        worst = max(worst, code)
    return worst


def build_parser():
    parser = argparse.ArgumentParser(prog="spacedec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment config")
    run.add_argument("config")
    run.add_argument("-v", "--verbose", action="store_true", help="print every iteration")
    run.set_defaults(func=cmd_run)

    cert = sub.add_parser("certify", help="stationarity measure of a saved solution")
    cert.add_argument("--X", required=True, help="MatrixMarket file with the point")
    cert.add_argument("--grad", required=True, help="MatrixMarket file with the gradient")
    cert.add_argument("--rank", type=int, required=True)
    cert.add_argument("--kind", required=True)
    cert.add_argument("--tol", type=float, default=1e-6)
    cert.set_defaults(func=cmd_certify)

    geo = sub.add_parser("geomtest", help="numerical property checks of the geometry")
    geo.add_argument("--m", type=int, default=8)
    geo.add_argument("--n", type=int, default=7)
    geo.add_argument("--r", type=int, default=3)
    geo.add_argument("--kind", default="euclidean")
    geo.add_argument("--omega", type=float, default=0.5)
    geo.add_argument("--seed", type=int, default=0)
    geo.set_defaults(func=cmd_geomtest)

    sw = sub.add_parser("sweep", help="run every *.ini in a directory")
    sw.add_argument("dir")
    sw.add_argument("--workers", type=int, default=None)
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None, quiet=False):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    try:
        thread_limit()
    except InvalidConfig as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if quiet:
        with open(os.devnull, "w") as devnull, contextlib.redirect_stdout(devnull):
            return args.func(args)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
