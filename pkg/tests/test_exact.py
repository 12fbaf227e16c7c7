import numpy as np
import pytest

from degenpar.errors import ParameterError
from degenpar.exact import ExactSolution
from degenpar.solver import residual

from oracles import CASES, sampled


def test_validation():
    with pytest.raises(ParameterError):
        ExactSolution("gaussian")
    with pytest.raises(ParameterError):
        ExactSolution("constant", c=0.0)
    with pytest.raises(ParameterError):
        ExactSolution("heat_mode", A=1.0, B=1.0)
    with pytest.raises(ParameterError):
        ExactSolution("fde_barenblatt", p=0.3, n=3)  # n(p-1)+2 < 0
    with pytest.raises(ParameterError):
        ExactSolution("fde_barenblatt", p=1.5, n=3)
    with pytest.raises(ParameterError):
        ExactSolution("pme_quadratic_pressure", p=0.5)
    with pytest.raises(ParameterError):
        ExactSolution("pme_quadratic_pressure", p=2.0)(1.0, 1.0)
    with pytest.raises(ParameterError):
        ExactSolution("fde_barenblatt", p=0.5, n=3)(1.0, 0.0)


def test_barenblatt_constants():
    e = ExactSolution("fde_barenblatt", p=0.5, n=3)
    assert e.beta == 2.0
    assert e.kappa == 1.0
    assert e(0.0, 1.0) == 1.0
    assert e(1.0, 1.0) == pytest.approx(0.25)


def test_pme_pressure_one_dimensional_form():
    e = ExactSolution("pme_quadratic_pressure", p=3.0, n=1, T_blow=2.0)
    r, t = 1.3, 0.4
    v = r**2 / (2 * (3 + 1) * (2.0 - t))
    assert e(r, t) == pytest.approx((2 * v / 3) ** 0.5, rel=1e-15)


def test_positive_offset_keeps_origin_positive():
    e = ExactSolution("pme_quadratic_pressure", p=3.0, n=1, T_blow=5.0, offset=1.0)
    assert e(0.0, 0.0) > 0 and e(0.0, -50.0) > 0


def test_constant_residual_exactly_zero():
    from degenpar.geometry import ModelGeometry
    from degenpar.solver import Trajectory

    g = ModelGeometry("radial_hyperbolic", 3, 0.2, 2.0, 50)
    traj = Trajectory.from_exact(ExactSolution("constant", c=2.5), g, np.linspace(0, 1, 5),
                                 nl=ExactSolution("fde_barenblatt").nonlinearity())
    assert np.all(residual(traj) == 0)


@pytest.mark.parametrize("name", sorted(CASES))
def test_oracle_certified_at_second_order(name):
    res = np.array([residual(sampled(name, N)).max() for N in (64, 128, 256, 512)])
    ratios = res[:-1] / res[1:]
    assert np.all(np.abs(ratios - 4) <= 1), ratios


def test_pme_offset_variant_second_order():
    from degenpar.geometry import ModelGeometry
    from degenpar.solver import Trajectory

    e = ExactSolution("pme_quadratic_pressure", p=3.0, n=1, T_blow=2.0, offset=1.0)
    res = []
    for N in (64, 128, 256):
        g = ModelGeometry("line", 1, -2.0, 2.0, N + 1)
        times = np.arange(0, 0.5 + 1e-12, 0.25 * g.h)
        res.append(residual(Trajectory.from_exact(e, g, times)).max())
    assert res[0] / res[1] == pytest.approx(4, abs=1)
    assert res[1] / res[2] == pytest.approx(4, abs=1)


def test_radial_pme_with_offset_second_order():
    from degenpar.geometry import ModelGeometry
    from degenpar.solver import Trajectory

    e = ExactSolution("pme_quadratic_pressure", p=2.0, n=3, T_blow=2.0, offset=0.5)
    res = []
    for N in (64, 128, 256):
        g = ModelGeometry("radial_euclidean", 3, 0.3, 2.0, N + 1)
        times = np.arange(0, 0.5 + 1e-12, 0.25 * g.h)
        res.append(residual(Trajectory.from_exact(e, g, times)).max())
    assert res[0] / res[1] == pytest.approx(4, abs=1)
    assert res[1] / res[2] == pytest.approx(4, abs=1)
