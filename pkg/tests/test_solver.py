import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degenpar.errors import ParameterError, PositivityError, StepFailure, WindowError
from degenpar.exact import ExactSolution
from degenpar.geometry import Field, ModelGeometry
from degenpar.nonlinearity import Nonlinearity
from degenpar.solver import (
    SolverConfig,
    Trajectory,
    convergence_study,
    residual,
    solution_error,
    solve,
    step,
)

from oracles import BARENBLATT, HEAT_MODE, TWO_PI, heat_geometry, solved_barenblatt, solved_heat


def test_config_validation():
    with pytest.raises(ParameterError):
        SolverConfig(dt=0.0)
    with pytest.raises(ParameterError):
        SolverConfig(dt=0.1, newton_tol=0)
    with pytest.raises(ParameterError):
        SolverConfig(dt=0.1, bc="robin")
    with pytest.raises(ParameterError):
        SolverConfig(dt=0.1, stride=0)


def test_boundary_condition_must_fit_geometry():
    line = ModelGeometry("line", 1, 0, 1, 21)
    u0 = Field(line, np.ones(21))
    with pytest.raises(ParameterError):
        solve(u0, Nonlinearity.heat(), 0.1, SolverConfig(dt=0.01, bc="periodic"))
    circ = heat_geometry(32)
    with pytest.raises(ParameterError):
        solve(Field(circ, np.ones(32)), Nonlinearity.heat(), 0.1, SolverConfig(dt=0.01, bc="neumann_zero"))
    with pytest.raises(ParameterError):
        solve(u0, Nonlinearity.heat(), 0.1, SolverConfig(dt=0.01, bc="dirichlet_exact"))


@pytest.mark.parametrize("nl", [Nonlinearity.heat(), Nonlinearity.power(0.5), Nonlinearity.power(3.0)],
                         ids=lambda nl: nl.label)
def test_constant_is_fixed_point(nl):
    g = ModelGeometry("radial_hyperbolic", 3, 0.2, 2.0, 41)
    u0 = Field(g, np.full(41, 1.7))
    out = step(u0, nl, SolverConfig(dt=0.1, bc="neumann_zero"))
    assert np.all(out.values == 1.7)
    traj = solve(u0, nl, 1.0, SolverConfig(dt=0.1, bc="neumann_zero"))
    assert np.all(traj.values == 1.7)
    assert np.all(residual(traj) == 0)


def test_heat_single_step_error():
    errs = []
    for N in (64, 128):
        g = heat_geometry(N)
        dt = g.h**2
        u0 = Field(g, HEAT_MODE.sample(g, 0.0), 0.0)
        out = step(u0, Nonlinearity.heat(), SolverConfig(dt=dt))
        exact = HEAT_MODE.sample(g, dt)
        errs.append(np.abs(out.values - exact).max())
        assert out.timestamp == dt
        assert errs[-1] < 5 * dt * (dt + g.h**2)
    assert errs[0] > errs[1]


def test_heat_accuracy_mass_and_positivity():
    traj = solved_heat(N=512, horizon=0.5, stride=500)
    assert solution_error(traj, HEAT_MODE) < 1e-3
    mass = traj.mass()
    assert np.abs(mass / mass[0] - 1).max() < 1e-8
    assert traj.values.min() >= 1e-12


def test_heat_error_scales_with_dt_plus_h2():
    errs, scales = [], []
    for N in (32, 64, 128):
        g = heat_geometry(N)
        traj = solved_heat(N=N, horizon=0.5, stride=10**6)
        errs.append(solution_error(traj, HEAT_MODE))
        scales.append(g.h**2 + g.h**2)
    c = np.array(errs) / np.array(scales)
    assert c.max() / c.min() < 1.5


def test_barenblatt_error_shrinks_under_refinement():
    errs = [solution_error(solved_barenblatt(N, stride=10**6), BARENBLATT) for N in (100, 200, 400)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.01
    assert errs[0] / errs[1] == pytest.approx(2, rel=0.2)


def test_convergence_study_heat_orders():
    res = convergence_study(HEAT_MODE, heat_geometry, [32, 64, 128], 0.0, 0.5, "periodic",
                            temporal_points=256, temporal_dts=[0.05, 0.025, 0.0125, 0.00625])
    assert res.spatial_order == pytest.approx(2.0, abs=0.3)
    assert res.temporal_order == pytest.approx(1.0, abs=0.3)
    assert not res.exact


def test_convergence_study_constant_is_exact():
    c = ExactSolution("constant", c=2.0)
    res = convergence_study(c, heat_geometry, [16, 32, 64], 0.0, 0.2, "periodic")
    assert res.exact and np.isnan(res.spatial_order)
    assert res.spatial_errors == (0.0, 0.0, 0.0)
    with pytest.raises(ParameterError):
        convergence_study(c, heat_geometry, [16, 32], 0.0, 0.2, "periodic")


def _ordered_pair(rng, N):
    base = 0.2 + rng.random(N)
    bump = rng.random(N) * 0.5
    return base, base + bump


@pytest.mark.parametrize("p", [0.5, 1.0, 2.0])
def test_comparison_principle_on_ten_pairs(p):
    nl = Nonlinearity.power(p)
    rng = np.random.default_rng(int(p * 10))
    g = heat_geometry(64)
    cfg = SolverConfig(dt=0.01, stride=5)
    for _ in range(10):
        u0, v0 = _ordered_pair(rng, 64)
        tu = solve(Field(g, u0), nl, 0.2, cfg)
        tv = solve(Field(g, v0), nl, 0.2, cfg)
        assert np.all(tu.values <= tv.values + 1e-12)
        assert tu.values.min() > 0


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31), p=st.sampled_from([0.5, 1.0, 3.0]))
def test_periodic_mass_conservation(seed, p):
    rng = np.random.default_rng(seed)
    g = heat_geometry(48)
    u0 = 0.3 + rng.random(48)
    traj = solve(Field(g, u0), Nonlinearity.power(p), 0.1, SolverConfig(dt=0.01))
    m = traj.mass()
    assert np.abs(m / m[0] - 1).max() < 1e-8


def test_neumann_conserves_cell_mass():
    g = ModelGeometry("radial_euclidean", 3, 0.5, 2.0, 61)
    u0 = 1 + 0.5 * np.cos(3 * g.r)
    traj = solve(Field(g, u0), Nonlinearity.power(2.0), 0.2, SolverConfig(dt=0.01, bc="neumann_zero"))
    cell = g.s.copy()
    cell[[0, -1]] /= 2
    m = traj.values @ cell
    assert np.abs(m / m[0] - 1).max() < 1e-8


def test_deterministic():
    a = solved_heat(N=64, horizon=0.1)
    b = solved_heat(N=64, horizon=0.1)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.times, b.times)


def test_step_failure_carries_residual():
    g = heat_geometry(64)
    u0 = Field(g, HEAT_MODE.sample(g, 0.0))
    cfg = SolverConfig(dt=0.5, newton_tol=1e-15, newton_max_iter=1)
    with pytest.raises(StepFailure) as info:
        step(u0, Nonlinearity.power(3.0), cfg)
    assert info.value.residual is not None and info.value.residual > 0


def test_solve_halves_dt_then_gives_up():
    g = heat_geometry(64)
    u0 = Field(g, HEAT_MODE.sample(g, 0.0))
    cfg = SolverConfig(dt=0.5, newton_tol=1e-15, newton_max_iter=1, max_halvings=2)
    with pytest.raises(StepFailure):
        solve(u0, Nonlinearity.power(3.0), 0.5, cfg)


def test_halving_rescues_hard_step():
    g = heat_geometry(64)
    u0 = Field(g, 1 + 0.9 * np.cos(g.r))
    cfg = SolverConfig(dt=0.5, newton_max_iter=4)
    traj = solve(u0, Nonlinearity.power(4.0), 1.0, cfg)
    assert traj.meta["max_halvings_used"] >= 1
    assert traj.times[-1] == pytest.approx(1.0)


def test_nonpositive_input_rejected():
    g = heat_geometry(16)
    with pytest.raises(PositivityError):
        step(Field(g, np.zeros(16)), Nonlinearity.heat(), SolverConfig(dt=0.1))
    with pytest.raises(PositivityError):
        solve(Field(g, -np.ones(16)), Nonlinearity.heat(), 0.1, SolverConfig(dt=0.1))


def test_trajectory_validation_and_residual_window():
    g = heat_geometry(16)
    with pytest.raises(ParameterError):
        Trajectory(g, Nonlinearity.heat(), [0.0, 0.0], np.ones((2, 16)))
    with pytest.raises(ParameterError):
        Trajectory(g, Nonlinearity.heat(), [0.0, 1.0], np.ones((2, 15)))
    with pytest.raises(WindowError):
        residual(Trajectory(g, Nonlinearity.heat(), [0.0, 1.0], np.ones((2, 16))))


def test_stride_and_snapshot_times():
    traj = solved_heat(N=32, horizon=0.3, dt=0.01, stride=7)
    np.testing.assert_allclose(traj.times, [0, 0.07, 0.14, 0.21, 0.28, 0.3])


def test_export(tmp_path):
    traj = solved_heat(N=16, horizon=0.05, dt=0.01)
    manifest = traj.export(tmp_path / "run", extra={"tag": "x"})
    data = json.loads(manifest.read_text())
    assert data["files"] == [f"snap_{k:05d}.csv" for k in range(len(traj))]
    assert data["tag"] == "x"
    text = (tmp_path / "run" / "snap_00003.csv").read_text()
    assert text.splitlines()[0] == "r,u"
    back = Field.from_csv(text, traj.geometry)
    np.testing.assert_array_equal(back.values, traj.values[3])
