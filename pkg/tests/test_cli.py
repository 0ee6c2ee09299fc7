import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lnksopt import cli
from lnksopt.accuracy import observed_rate, run_accuracy_study
from lnksopt.config import METHODS, ConfigError, RunConfig
from lnksopt.verification import Check, run_suite

SMALL = "nx = 16\nny = 4\nn_design = 6\n"


# -- configuration -----------------------------------------------------------------------
@settings(max_examples=40, deadline=None)
@given(st.sampled_from(METHODS), st.integers(1, 3), st.integers(2, 64), st.integers(1, 16),
       st.integers(1, 30).map(lambda k: 2 * k), st.floats(1e-14, 1e-2), st.integers(0, 2 ** 31))
def test_config_text_round_trip(method, p, nx, ny, n, tol, seed):
    cfg = RunConfig(method=method, p=p, nx=nx, ny=ny, n_design=n, flow_tol=tol, seed=seed)
    assert RunConfig.from_text(cfg.to_text()) == cfg


def test_config_comments_overrides_and_errors():
    cfg = RunConfig.from_text("# c\nmethod = full-p2  # trailing\np = 2\n", p=3)
    assert cfg.method == "full-p2" and cfg.p == 3
    assert RunConfig(nx=32, ny=8, p=1).state_size == 4096
    for bad in ("bogus = 1", "p = 7", "n_design = 5", "method = x", "p: 1", "p = one", "target = x"):
        with pytest.raises(ConfigError):
            RunConfig.from_text(bad)


# -- accuracy -----------------------------------------------------------------------------
def test_observed_rate():
    assert observed_rate(4.0, 1.0) == pytest.approx(2.0)
    assert math.isnan(observed_rate(0.0, 1.0))


def test_accuracy_constant_state_has_zero_error():
    rows = run_accuracy_study([1, 2], [16, 64], constant_state=True)
    assert [r.cells for r in rows] == [16, 64, 16, 64]
    assert all(r.error < 1e-14 and r.converged for r in rows)
    assert rows[1].dofs == 64 * 4 and rows[3].dofs == 64 * 9


def test_accuracy_rejects_unknown_grid():
    with pytest.raises(ValueError):
        run_accuracy_study([1], [100])


# -- verification suites -------------------------------------------------------------------
def test_check_line_format():
    assert Check("x", 1e-3, 1e-2, True).line().startswith("PASS  x: 1.000e-03")


@pytest.mark.parametrize("suite", ["cost-tables", "flux"])
def test_fast_suites_pass(suite):
    checks = run_suite(suite)
    assert checks and all(c.passed for c in checks)


def test_unknown_suite():
    with pytest.raises(ValueError):
        run_suite("nope")


# -- command line ----------------------------------------------------------------------------
def test_cli_verify_exit_codes(capsys):
    assert cli.main(["verify", "--suite", "cost-tables"]) == 0
    out = capsys.readouterr().out
    assert "cost-tables: 13/13 checks passed" in out
    assert cli.main(["verify", "--suite", "precond", "--seeds", "2"]) == 0


def test_cli_usage_errors(tmp_path, capsys):
    assert cli.main(["optimize", "--method", "nope"]) == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 1\n")
    assert cli.main(["optimize", "--config", str(bad)]) == 1
    assert cli.main(["optimize", "--config", str(tmp_path / "missing.cfg")]) == 1


def test_cli_mesh(tmp_path):
    out = tmp_path / "mesh.json"
    assert cli.main(["mesh", "--nx", "32", "--ny", "8", "--p", "1", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["cells"] == 256 and data["state_size"] == 4096
    assert len(data["nodes"]) == 33 * 9  # bilinear geometry at p = 1


def test_cli_accuracy_csv(tmp_path):
    out = tmp_path / "acc.csv"
    assert cli.main(["accuracy", "--p", "1", "--cells", "16,64", "--constant-state", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "p,cells,dofs,entropy_error,rate,converged" and len(lines) == 3


def test_cli_optimize_is_deterministic_and_writes_outputs(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(SMALL + "method = full-p2\n")
    texts = []
    for k in range(2):
        csv_path, json_path = tmp_path / f"c{k}.csv", tmp_path / f"g{k}.json"
        assert cli.main(["optimize", "--config", str(cfg), "--csv", str(csv_path), "--json", str(json_path)]) == 0
        texts.append(csv_path.read_text())
    assert texts[0] == texts[1]
    lines = texts[0].splitlines()
    assert lines[0].startswith("# schema=1 method=full-p2 state_size=1024")
    assert lines[1].startswith("cycle,grad_norm,objective")
    geo = json.loads((tmp_path / "g0.json").read_text())
    assert geo["converged"] and geo["state_size"] == 1024 and len(geo["z"]) == 6
    assert len(geo["wall_x"]) == len(geo["wall_y"])
    assert np.asarray(geo["ffd"]["lattice"]).shape == (5, 3, 2)


def test_cli_optimize_failure_exit_code(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(SMALL + "method = reduced-newton\nmax_cycles = 1\n")
    assert cli.main(["optimize", "--config", str(cfg), "--csv", str(tmp_path / "c.csv")]) == 3


def test_cli_target_cache_round_trip(tmp_path):
    trace = tmp_path / "target.json"
    assert cli.main(["target", "--nx", "16", "--ny", "4", "--n-design", "6", "--out", str(trace)]) == 0
    cfg = RunConfig.from_text(SMALL + f"target_file = {trace}\n")
    prob = cli.build_problem(cfg)
    ref = cli.build_problem(RunConfig.from_text(SMALL))
    np.testing.assert_allclose(prob.target.coeffs, ref.target.coeffs, rtol=1e-13)
