import csv
import math

import numpy as np
import pytest

from spacedec import io as sio
from spacedec.errors import InvalidConfig
from spacedec.solvers import IterRecord


def test_matrix_round_trip(tmp_path, rng):
    A = rng.standard_normal((4, 3))
    sio.write_matrix(tmp_path / "A.mtx", A)
    assert np.array_equal(sio.read_matrix(tmp_path / "A.mtx"), A)


def test_reads_coordinate_format(tmp_path):
    (tmp_path / "c.mtx").write_text(
        "%%MatrixMarket matrix coordinate real general\n2 3 2\n1 1 1.5\n2 3 -2\n")
    assert np.array_equal(sio.read_matrix(tmp_path / "c.mtx"), [[1.5, 0, 0], [0, 0, -2]])


def test_metrics_csv(tmp_path):
    recs = [IterRecord(0, np.float64(1.25), 0.5, 0.1, 0.0),
            IterRecord(1, 1.0, 1e-17, 0.2, 0.0012, False)]
    sio.write_metrics(tmp_path / "m.csv", recs)
    with open(tmp_path / "m.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iteration", "f", "grad_norm", "step", "wall_ms", "accepted"]
    assert rows[1][:4] == ["0", "1.25", "0.5", "0.1"]
    assert rows[2] == ["1", "1.0", "1e-17", "0.2", "1.200", "0"]


def test_dat_two_columns(tmp_path):
    sio.write_dat(tmp_path / "d.dat", [0, 1, np.int64(2)], [np.float64(0.5), 0.25, 1 / 3])
    lines = (tmp_path / "d.dat").read_text().splitlines()
    assert lines == ["0 0.5", "1 0.25", "2 0.3333333333333333"]


BASE = "[experiment]\ntask = geomtest\nm = 6\nn = 5\nr = 2\nkind = oblique\n"


def test_parse_defaults_and_types():
    cfg = sio.parse_config(BASE + "fd_gate = no\n[solver]\ntime_budget = inf\n"
                           "[tr]\ninitial_radius = 0.5  # comment\n")
    assert cfg.m == 6 and cfg.kind == "oblique" and cfg.fd_gate is False
    assert math.isinf(cfg.time_budget)
    assert cfg.solver_config().tr.initial_radius == 0.5
    assert cfg.solver_config().tr.max_radius is None


@pytest.mark.parametrize("extra,match", [
    ("[solver]\nomega = 1\n", r"cfg:8: \[solver\] omega: unknown key"),
    ("[armijo]\nmax_backtracks = 2.5\n", "cannot read '2.5' as int"),
    ("[armijo]\nbacktrack_factor = 2\n", "backtrack_factor"),
    ("[tr]\neta_accept = 0.5\n", "eta_accept"),
    ("[extra]\n", r"cfg:7: unknown section \[extra\]"),
])
def test_parse_errors(extra, match):
    with pytest.raises(InvalidConfig, match=match):
        sio.parse_config(BASE + extra, "cfg")


@pytest.mark.parametrize("text", [
    "[experiment]\nm = 3\n",
    BASE.replace("oblique", "stiefel:4x2"),
    BASE.replace("m = 6", "m = 0"),
    BASE.replace("task = geomtest", "task = graphsim") + "edge_prob = 2\n",
    BASE.replace("task = geomtest", "task = graphsim") + "graph = files\n",
    BASE + "omega = 0\n",
    BASE + "solver = newton\n",
])
def test_validation_errors(text):
    with pytest.raises(InvalidConfig):
        sio.parse_config(text)


def test_config_hash_is_content_hash():
    assert sio.config_hash(BASE) == sio.config_hash(str(BASE))
    assert sio.config_hash(BASE) != sio.config_hash(BASE + "\n")
    assert len(sio.config_hash(BASE)) == 64
