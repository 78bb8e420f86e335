import math

import numpy as np
import pytest
from scipy.special import jn_zeros

from stefankpp import fb1d, fbradial as fr
from stefankpp.errors import BadInitialData, ConfigError, HoleClosed
from stefankpp.model import ModelParams, Reaction

P = ModelParams()


def test_eigenvalues_and_critical_radius():
    j01 = jn_zeros(0, 1)[0]
    assert fr.first_eigenvalue(2) == pytest.approx(j01 ** 2, rel=1e-14)
    assert fr.first_eigenvalue(3) == pytest.approx(math.pi ** 2, rel=1e-15)
    assert fr.critical_radius(P, 2) == pytest.approx(j01, rel=1e-14)
    assert fr.critical_radius(P.with_(d=4.0), 2) == pytest.approx(2 * j01, rel=1e-14)
    with pytest.raises(ConfigError):
        fr.first_eigenvalue(4)


def test_interior_spreads_above_threshold():
    r0 = 2 * fr.critical_radius(P, 2)
    tr = fr.run_interior(P, 2, r0, T=30.0, grid=fr.RadialGrid(h=0.05, h_max=0.1))
    assert np.all(np.diff(tr.fronts) > 0)
    assert tr.fronts[-1] > r0 + 5.0
    assert tr.sup_values[-1] > 0.9


def test_interior_vanishing_branch():
    r0 = 0.5 * fr.critical_radius(P, 2)
    v0 = fr.default_interior_data(P, r0, amplitude=1e-3)
    tr = fr.run_interior(P, 2, r0, v0, T=40.0, grid=fr.RadialGrid(h=0.02))
    assert tr.fronts[-1] - tr.fronts[len(tr.fronts) // 2] < 1e-4
    assert tr.sup_values[-1] < 0.1 * tr.sup_values[0]


def test_interior_grid_refinement_is_second_order():
    r0 = 2 * fr.critical_radius(P, 2)
    ks = [fr.run_interior(P, 2, r0, T=10.0, grid=fr.RadialGrid(h=h, h_max=2 * h)).fronts[-1]
          for h in (0.2, 0.1, 0.05, 0.025)]
    changes = np.abs(np.diff(ks))
    ratios = changes[:-1] / changes[1:]
    assert np.all((ratios > 3.0) & (ratios < 5.0))


def test_interior_large_ball_approaches_1d_speed():
    grid = fr.RadialGrid(h=0.1, h_max=0.2)
    tr = fr.run_interior(P, 2, 60.0, fr.default_interior_data(P, 60.0, amplitude=1.0), T=40.0,
                         grid=grid)
    radial = fb1d.estimate_speed(fb1d.FrontTrajectory(tr.times, tr.fronts, np.empty(0)),
                                 (20.0, 40.0))[0]
    flat = fb1d.run_front1d(fb1d.Front1DConfig(params=P, h=0.1, T=40.0))
    one_d = -fb1d.estimate_speed(flat, (20.0, 40.0))[0]
    assert abs(radial - one_d) / one_d < 0.05


def test_interior_input_errors():
    with pytest.raises(BadInitialData):
        fr.run_interior(P, 2, -1.0)
    with pytest.raises(ConfigError):
        fr.run_interior(P, 1, 5.0)
    with pytest.raises(BadInitialData):
        fr.run_interior(P, 2, 5.0, lambda r: np.ones_like(r), T=1.0)
    odd = Reaction(lambda x, u: u, 1.0)
    with pytest.raises(ConfigError):
        fr.run_interior(P, 2, 5.0, T=1.0, reaction=odd)


def test_exterior_certificate():
    tr, cert = fr.run_exterior(P, 2, 50.0, T=1.0, grid=fr.RadialGrid(output_dt=0.1))
    assert cert.bound_ok and cert.h_T >= 25.0
    C3, M, C4 = fr.certificate_constants(P, 2, 1.0, 1.0, 1.0)
    assert C3 == pytest.approx(math.e)
    assert M == pytest.approx(1 + math.sqrt(0.5 + 1))
    assert cert.C4 == pytest.approx(2 * M * C3)
    assert cert.speed_ok
    # a-priori bound v <= C1 exp(K t)
    assert np.all(tr.sup_values <= np.exp(P.K * tr.times) + 1e-12)
    assert "hT=" in cert.to_text()


def test_exterior_front_recedes():
    tr, _ = fr.run_exterior(P, 2, 20.0, v0=lambda s: 0.05 * (1 - np.exp(-10 * np.asarray(s))),
                            T=2.0, grid=fr.RadialGrid(h=0.02, L=20.0, output_dt=0.1))
    assert np.all(np.diff(tr.fronts) < 0)


def test_exterior_errors():
    with pytest.raises(BadInitialData):
        fr.run_exterior(P, 2, 1.0)
    with pytest.raises(BadInitialData):
        fr.run_exterior(P, 2, 10.0, v0=lambda s: 2 * (1 - np.exp(-np.asarray(s))), C1=1.0)
    with pytest.raises(HoleClosed):
        fr.run_exterior(P, 2, 1.5, v0=lambda s: 0.9 * (1 - np.exp(-5 * np.asarray(s))), T=5.0,
                        grid=fr.RadialGrid(h=0.02, L=20.0))


def test_trajectory_csv(tmp_path):
    tr, _ = fr.run_exterior(P, 2, 10.0, T=0.5, grid=fr.RadialGrid(h=0.05, L=20.0, output_dt=0.1))
    path = tr.to_csv(tmp_path / "t.csv")
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 1], tr.fronts)
