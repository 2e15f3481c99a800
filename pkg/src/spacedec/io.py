"""File formats: MatrixMarket matrices, INI experiment configs, CSV metrics."""
import configparser
import csv
import dataclasses
import hashlib
import math
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import InvalidConfig


def read_matrix(path):
    """Dense ndarray from a MatrixMarket file (coordinate or array)."""
    M = scipy.io.mmread(str(path))
    if sp.issparse(M):
        M = M.toarray()
    return np.asarray(M, dtype=float)


def write_matrix(path, A, comment=""):
    scipy.io.mmwrite(str(path), np.asarray(A, dtype=float), comment=comment, precision=17)


def _num(v):
    """Shortest round-trip text for a number (plain int or float, never a numpy repr)."""
    return str(int(v)) if isinstance(v, (int, np.integer)) else repr(float(v))


def write_metrics(path, records):
    """One row per iteration; the standard csv module handles quoting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "f", "grad_norm", "step", "wall_ms", "accepted"])
        for r in records:
            w.writerow([r.iteration, _num(r.f), _num(r.grad_norm), _num(r.step),
                        f"{1e3 * r.wall_time:.3f}", int(r.accepted)])


def write_dat(path, xs, ys):
    with open(path, "w") as fh:
        for x, y in zip(xs, ys):
            fh.write(f"{_num(x)} {_num(y)}\n")


# -- experiment configs ---------------------------------------------------------------

TASKS = ("fitting", "graphsim", "sync", "markov", "geomtest")


@dataclasses.dataclass
class ExperimentConfig:
    task: str
    solver: str = "rgd"
    m: int = 0
    n: int = 0
    r: int = 0
    r_star: int = 0
    kind: str = ""
    omega: float = 0.5
    seed: int = 0
    oversampling: float = 5.0
    # graph similarity
    graph: str = "cycle_binomial"     # cycle_binomial | binomial | files
    edge_prob: float = 0.0
    graph_a: str = ""                 # edge-list files when graph = files
    graph_b: str = ""
    # synchronization
    cameras: int = 0
    n_edges: int = 0
    noise: float = 0.0
    # markov
    samples: int = 10000
    output: str = "out"
    fd_gate: bool = True
    # solver section
    max_iters: int = 500
    grad_tol: float = 1e-10
    time_budget: float = math.inf
    retraction: str = ""
    stiefel_rule: str = "polar"
    transport: str = "projection"
    initial_step: float = 1.0
    backtrack_factor: float = 0.5
    sufficient_decrease: float = 1e-4
    max_backtracks: int = 50
    initial_radius: float = 0.0
    max_radius: float = 0.0
    eta_accept: float = 0.1
    tcg_max_iters: int = 0
    tcg_kappa: float = 0.1
    tcg_theta: float = 1.0

    def solver_config(self):
        from .solvers import ArmijoConfig, SolverConfig, TrustRegionConfig
        cfg = SolverConfig(
            max_iters=self.max_iters, grad_tol=self.grad_tol, time_budget=self.time_budget,
            armijo=ArmijoConfig(self.initial_step, self.backtrack_factor,
                                self.sufficient_decrease, self.max_backtracks),
            tr=TrustRegionConfig(self.initial_radius or None, self.max_radius or None,
                                 self.eta_accept, self.tcg_max_iters or None,
                                 self.tcg_kappa, self.tcg_theta),
            retraction=self.retraction or None, stiefel_rule=self.stiefel_rule,
            transport=self.transport)
        return cfg.validate()


# Keys allowed in each section of the config file.
_SECTIONS = {
    "experiment": ("task", "solver", "m", "n", "r", "r_star", "kind", "omega", "seed",
                   "oversampling", "graph", "edge_prob", "graph_a", "graph_b", "cameras",
                   "n_edges", "noise", "samples", "output", "fd_gate"),
    "solver": ("max_iters", "grad_tol", "time_budget", "retraction", "stiefel_rule",
               "transport"),
    "armijo": ("initial_step", "backtrack_factor", "sufficient_decrease", "max_backtracks"),
    "tr": ("initial_radius", "max_radius", "eta_accept", "tcg_max_iters", "tcg_kappa",
           "tcg_theta"),
}
_REQUIRED = {
    "fitting": ("m", "n", "r", "r_star"),
    "graphsim": ("m", "n", "r"),
    "sync": ("cameras", "n_edges"),
    "markov": ("m", "r", "r_star"),
    "geomtest": ("m", "n", "r", "kind"),
}


def _convert(field, raw, where):
    typ = field.type if isinstance(field.type, type) else eval(field.type)
    try:
        if typ is bool:
            return {"true": True, "yes": True, "1": True, "false": False, "no": False,
                    "0": False}[raw.strip().lower()]
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
    except (ValueError, KeyError):
        raise InvalidConfig(f"{where}: cannot read {raw!r} as {typ.__name__}") from None
    return raw.strip()


def _line_of(text, section, key):
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            if key is None and current == section:
                return no
        elif current == section and s.split("=", 1)[0].split(":", 1)[0].strip() == key:
            return no
    return "?"


def parse_config(text, source="<config>"):
    """Parse and validate an INI experiment config.

    Every key must belong to its section; unknown sections or keys and missing
    required fields raise InvalidConfig naming the line and field.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise InvalidConfig(f"{source}: {exc}") from None
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    values = {}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise InvalidConfig(f"{source}:{_line_of(text, section, None)}: "
                                f"unknown section [{section}]")
        for key, raw in cp.items(section):
            where = f"{source}:{_line_of(text, section, key)}: [{section}] {key}"
            if key not in _SECTIONS[section]:
                raise InvalidConfig(f"{where}: unknown key")
            values[key] = _convert(fields[key], raw, where)
    if "task" not in values:
        raise InvalidConfig(f"{source}: [experiment] task is required")
    cfg = ExperimentConfig(**values)
    _validate(cfg, source)
    return cfg


def _validate(cfg, source):
    def bad(msg):
        raise InvalidConfig(f"{source}: {msg}")
    if cfg.task not in TASKS:
        bad(f"task must be one of {', '.join(TASKS)}")
    if cfg.solver not in ("rgd", "rtr"):
        bad("solver must be rgd or rtr")
    for key in _REQUIRED[cfg.task]:
        value = getattr(cfg, key)
        if (not value) if isinstance(value, str) else value <= 0:
            bad(f"{key} is required for task {cfg.task} and must be positive")
    if cfg.omega <= 0:
        bad("omega must be positive")
    if cfg.task == "graphsim":
        if cfg.graph not in ("cycle_binomial", "binomial", "files"):
            bad("graph must be cycle_binomial, binomial or files")
        if cfg.graph == "files" and not (cfg.graph_a and cfg.graph_b):
            bad("graph = files needs graph_a and graph_b")
        if cfg.graph != "files" and not 0 < cfg.edge_prob <= 1:
            bad("edge_prob must lie in (0, 1]")
    if cfg.task == "geomtest":
        from .constraints import ConstraintManifold
        try:
            ConstraintManifold.from_key(cfg.kind, cfg.m)
        except Exception as exc:
            bad(f"kind: {exc}")
    try:
        cfg.solver_config()
    except InvalidConfig as exc:
        bad(str(exc))


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidConfig(f"{path}: {exc}") from None
    return parse_config(text, str(path)), text


def config_hash(text):
    return hashlib.sha256(text.encode()).hexdigest()
