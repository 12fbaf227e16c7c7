import copy
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from degenpar.cli import main
from degenpar.config import load_config, parse_config
from degenpar.errors import ParameterError

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"

HEAT = {
    "geometry": {"kind": "circle", "n": 1, "domain": [0.0, 6.283185307179586], "grid_points": 64},
    "equation": {"preset": "heat"},
    "initial": {"kind": "heat_mode", "params": {"A": 2.0, "B": 1.0, "mu": 1.0}},
    "solver": {"dt": 0.01, "horizon": 0.2, "bc": "periodic"},
}

CONSTANT = {
    "geometry": {"kind": "radial_euclidean", "n": 3, "domain": [0.5, 4.5], "grid_points": 41},
    "equation": {"preset": "power", "p": 0.5, "alpha": 0.0},
    "initial": {"kind": "constant", "params": {"c": 1.25}},
    "solver": {"dt": 0.1, "horizon": 1.0, "bc": "neumann_zero"},
    "analysis": {
        "reports": ["fde", "thm11", "residual"],
        "windows": [{"x0": 2.5, "t0": 1.0, "R": 1.0, "T": 0.5}, {"x0": 2.5, "t0": 1.0, "R": 2.0, "T": 1.0}],
    },
}


def write(tmp_path, cfg, name="s.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


def run(tmp_path, cfg, command, *extra, out="out"):
    path = write(tmp_path, cfg)
    code = main(["--config", str(path), "--out", str(tmp_path / out), command, *extra])
    doc_path = tmp_path / out / f"{command}.json"
    doc = json.loads(doc_path.read_text()) if doc_path.exists() else None
    return code, doc


# -- config ----------------------------------------------------------------------


def test_unknown_keys_rejected():
    bad = copy.deepcopy(HEAT)
    bad["solver"]["cfl"] = 0.5
    with pytest.raises(ParameterError, match="cfl"):
        parse_config(bad)
    bad = copy.deepcopy(HEAT)
    bad["extra_block"] = {}
    with pytest.raises(ParameterError):
        parse_config(bad)
    bad = copy.deepcopy(HEAT)
    bad["initial"]["params"]["sigma"] = 1.0
    with pytest.raises(ParameterError, match="sigma"):
        parse_config(bad)


@pytest.mark.parametrize("mutate", [
    lambda c: c["geometry"].update(grid_points=3),
    lambda c: c["geometry"].update(kind="radial_euclidean"),  # n=1 radial
    lambda c: c["equation"].update(preset="power"),  # no p
    lambda c: c["initial"].update(params={"A": 1.0, "B": 2.0}),
    lambda c: c["initial"].update(tabulated={"r": [0, 1], "u": [1, 1]}),  # two sources
    lambda c: c["solver"].update(dt=-1.0),
    lambda c: c["solver"].update(bc="robin"),
])
def test_invalid_configs_fail_before_running(mutate):
    cfg = copy.deepcopy(HEAT)
    mutate(cfg)
    with pytest.raises(ParameterError):
        parse_config(cfg)


def test_digest_tracks_content():
    a = parse_config(HEAT)
    b = parse_config(copy.deepcopy(HEAT))
    assert a.digest() == b.digest()
    changed = copy.deepcopy(HEAT)
    changed["solver"]["dt"] = 0.02
    assert parse_config(changed).digest() != a.digest()
    text = json.dumps(a.resolved(), sort_keys=True, separators=(",", ":"))
    assert a.digest() == hashlib.sha256(text.encode()).hexdigest()


def test_tabulated_initial_data():
    cfg = copy.deepcopy(HEAT)
    cfg["geometry"]["grid_points"] = 5
    cfg["initial"] = {"tabulated": {"r": [0, 1, 2, 3, 4], "u": [1, 2, 3, 2, 1]}}
    sc = parse_config(cfg)
    f = sc.initial_field()
    assert f.values.min() > 0 and f.values.size == 5


def test_shipped_scenarios_parse():
    paths = sorted(SCENARIOS.glob("*.yaml"))
    assert len(paths) >= 6
    for path in paths:
        load_config(path)


# -- check -------------------------------------------------------------------------


def test_check_heat(tmp_path):
    code, doc = run(tmp_path, HEAT, "check")
    assert code == 0 and doc["passed"]
    cond = doc["result"]["conditions"]
    assert cond["K"] == 1.0 and cond["gamma_2_10"] == 2.0
    assert doc["config_sha256"] == parse_config(HEAT).digest()
    assert doc["config"]["geometry"]["grid_points"] == 64


def test_check_fde_out_of_range(tmp_path):
    code = main(["--config", str(SCENARIOS / "fde_out_of_range.yaml"), "--out", str(tmp_path), "check"])
    doc = json.loads((tmp_path / "check.json").read_text())
    assert code == 2 and not doc["passed"]
    assert doc["result"]["fde"]["range"] == [1 / 3, 1.0]
    assert "lower bound" in doc["result"]["fde"]["reason"]


@pytest.mark.parametrize("M,code", [(8.0, 0), (9.0, 2)])
def test_check_pinch(tmp_path, M, code):
    cfg = yaml.safe_load((SCENARIOS / "pme_pinch.yaml").read_text())
    cfg["analysis"]["value_range"]["M"] = M
    got, doc = run(tmp_path, cfg, "check")
    assert got == code
    assert doc["result"]["operative"] == "pinch"
    assert doc["result"]["pinch"]["threshold"] == pytest.approx(9 / 1.1)


# -- lemma -------------------------------------------------------------------------


@pytest.mark.parametrize("a,b,n,bound", [(1, 0, 3, 1), (0, 1, 3, 3), (2, -1, 2, 2)])
def test_lemma_documents(tmp_path, a, b, n, bound):
    code = main(["--out", str(tmp_path), "--seed", "3", "lemma", "--a", str(a), "--b", str(b), "--n", str(n),
                 "--samples", "20000"])
    doc = json.loads((tmp_path / "lemma.json").read_text())
    assert code == 0
    res = doc["result"]
    assert res["supremum_bound"] == bound
    assert res["bruteforce_sup"] <= bound + 1e-9
    assert res["witness"]["value_sq"] == pytest.approx(bound, rel=1e-12)
    assert doc["seed"] == 3


def test_lemma_flags_after_subcommand(tmp_path):
    code = main(["lemma", "--samples", "1000", "--out", str(tmp_path), "--seed", "5"])
    assert code == 0
    first = (tmp_path / "lemma.json").read_bytes()
    main(["lemma", "--samples", "1000", "--out", str(tmp_path), "--seed", "5"])
    assert (tmp_path / "lemma.json").read_bytes() == first


# -- solve --------------------------------------------------------------------------


def test_solve_constant_flat_csvs(tmp_path):
    code, doc = run(tmp_path, CONSTANT, "solve")
    assert code == 0
    traj_dir = tmp_path / "out" / "trajectory"
    manifest = json.loads((traj_dir / "manifest.json").read_text())
    assert manifest["config_sha256"] == doc["config_sha256"]
    for name in manifest["files"]:
        vals = np.loadtxt(traj_dir / name, delimiter=",", skiprows=1)[:, 1]
        assert np.all(vals == 1.25)
    assert doc["result"]["residual_max"] == 0
    assert doc["result"]["error_vs_exact"] == 0


def test_solve_heat(tmp_path):
    code, doc = run(tmp_path, HEAT, "solve")
    assert code == 0
    assert doc["result"]["error_vs_exact"] < 1e-2
    assert doc["result"]["mass_drift"] < 1e-8
    assert len(list((tmp_path / "out" / "trajectory").glob("snap_*.csv"))) == doc["result"]["snapshots"]


def test_solve_failure_exit_code(tmp_path):
    cfg = copy.deepcopy(HEAT)
    cfg["equation"] = {"preset": "power", "p": 3.0}
    cfg["solver"].update(dt=0.5, newton_max_iter=1, newton_tol=1e-15, max_halvings=0)
    code, doc = run(tmp_path, cfg, "solve")
    assert code == 1 and doc is None


def test_missing_config_is_error(tmp_path, capsys):
    assert main(["--out", str(tmp_path), "check"]) == 1
    assert main(["--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path), "check"]) == 1
    (tmp_path / "bad.yaml").write_text("geometry: [unclosed")
    assert main(["--config", str(tmp_path / "bad.yaml"), "--out", str(tmp_path), "check"]) == 1
    assert "error" in capsys.readouterr().err


# -- verify -------------------------------------------------------------------------


def test_verify_constant_all_zero(tmp_path):
    code, doc = run(tmp_path, CONSTANT, "verify")
    assert code == 0
    assert doc["result"]["inequality_residual"]["min_residual"] == 0
    assert len(doc["result"]["windows"]) == 4
    assert all(w["ratio"] == 0 for w in doc["result"]["windows"])
    assert (tmp_path / "out" / "verify_w00_fde.csv").exists()


def test_verify_fde_barenblatt_stable(tmp_path):
    code = main(["--config", str(SCENARIOS / "fde_barenblatt.yaml"), "--out", str(tmp_path), "verify"])
    doc = json.loads((tmp_path / "verify.json").read_text())
    assert code == 0
    ratios = [w["ratio"] for w in doc["result"]["windows"]]
    assert max(ratios) / min(ratios) < 10 and max(ratios) < 50


def test_verify_pinch_refusal(tmp_path):
    cfg = {
        "geometry": {"kind": "radial_euclidean", "n": 2, "domain": [1.0, 3.0], "grid_points": 41},
        "equation": {"preset": "power", "p": 2.0, "delta": 0.1},
        "initial": {"tabulated": {"r": [1.0, 3.0], "u": [1.0, 9.0]}},
        "solver": {"dt": 1e-4, "horizon": 2e-4, "bc": "neumann_zero"},
        "analysis": {"reports": ["pme_n2"], "windows": [{"x0": 2.0, "t0": 2e-4, "R": 1.0, "T": 1e-4}]},
    }
    code, doc = run(tmp_path, cfg, "verify")
    assert code == 0
    w = doc["result"]["windows"][0]
    assert w["refused"] and w["condition"] == "pinch"
    assert w["details"]["threshold"] == pytest.approx(9 / 1.1)
    assert "threshold" in w["reason"]


def test_verify_deterministic_across_jobs(tmp_path):
    a = run(tmp_path, HEAT | {"analysis": {"reports": ["heat_sz", "thm11", "residual"], "windows": [
        {"x0": 1.5, "t0": 0.2, "R": r, "T": 0.1} for r in (0.5, 1.0, 2.0)]}}, "verify", out="a")
    path = tmp_path / "s.yaml"
    main(["--config", str(path), "--out", str(tmp_path / "b"), "--jobs", "3", "verify"])
    assert a[0] == 0
    for name in ("verify.json", "verify_w02_heat_sz.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


# -- sweep ---------------------------------------------------------------------------


@pytest.mark.parametrize("name,flag", [("constant_sweep", 1), ("barenblatt_sweep", 1), ("pme_linear_growth", 0)])
def test_sweep_scenarios(tmp_path, name, flag):
    code = main(["--config", str(SCENARIOS / f"{name}.yaml"), "--out", str(tmp_path), "--jobs", "2", "sweep"])
    assert code == 0
    rows = (tmp_path / "sweep.csv").read_text().splitlines()
    assert rows[0] == "R,M_double,rhs,lhs_at_center,decreasing_flag"
    assert all(r.endswith(f",{flag}") for r in rows[1:])
    if name == "constant_sweep":
        assert all(float(r.split(",")[3]) == 0 for r in rows[1:])


def test_sweep_expectation_failure_exit_code(tmp_path):
    cfg = yaml.safe_load((SCENARIOS / "pme_linear_growth.yaml").read_text())
    cfg["analysis"]["sweep"]["expect"] = "decreasing"
    code, doc = run(tmp_path, cfg, "sweep")
    assert code == 2 and not doc["passed"]


def test_sweep_solver_source(tmp_path):
    cfg = yaml.safe_load((SCENARIOS / "barenblatt_sweep.yaml").read_text())
    cfg["analysis"]["source"] = "solver"
    cfg["analysis"]["sweep"].update(points=201, snapshots=81)
    code, doc = run(tmp_path, cfg, "sweep")
    assert code == 0 and doc["result"]["decreasing"]


def test_sweep_needs_block(tmp_path):
    code, _ = run(tmp_path, HEAT, "sweep")
    assert code == 1
