import math
from dataclasses import replace

import numpy as np
import pytest

from stefankpp import enthalpy as en
from stefankpp import verify as v
from stefankpp.errors import HypothesisViolated, OutOfTabulatedRange, SpecInvariantViolated
from stefankpp.fb1d import Front1DConfig
from stefankpp.model import ModelParams

P = ModelParams()
SMALL = v.SamplePlan(per_stratum=2000)


@pytest.fixture(scope="module")
def spec():
    return v.make_supersolution(P, 0.1)


def test_supersolution_passes(spec):
    assert spec.R == pytest.approx(2 * spec.R_min())
    rep = v.check_supersolution(spec, SMALL)
    assert rep.ok and not rep.near_zero_margin
    assert rep.fd_error < rep.tolerance
    assert "ok=true" in rep.to_text()


def test_radius_below_minimum_rejected(spec):
    with pytest.raises(SpecInvariantViolated):
        v.make_supersolution(P, 0.1, R=0.5 * spec.R_min())
    with pytest.raises(SpecInvariantViolated):
        v.check_supersolution(replace(spec, R=0.5 * spec.R_min()), SMALL)
    with pytest.raises(SpecInvariantViolated):
        v.make_supersolution(P, 0.1, phi=math.pi / 4)
    with pytest.raises(SpecInvariantViolated):
        v.make_supersolution(P, 1.5)


def test_zero_delta_is_flagged():
    rep = v.check_supersolution(v.make_supersolution(P, 0.0), SMALL)
    assert rep.near_zero_margin


def test_eval_supersolution_values(spec):
    t = 2.0
    xi = float(spec.xi_R(t))
    assert v.eval_supersolution(spec, t, [0.0, xi - 5.0]) == 0.0  # below the vertex
    # a point on the flat part of the boundary
    th = spec.theta
    tau = spec.R / math.tan(th) + 30.0
    z = np.array([tau * math.sin(th), spec.R / math.sin(th) - tau * math.cos(th)])
    on = z + np.array([0.0, xi])
    assert abs(float(v.eval_supersolution(spec, t, on))) < 1e-12
    deep = np.array([0.0, xi + spec.R + 30.0])  # depth 30 diffusion lengths
    expect = (1 - 0.1) ** -2 * (1 + 0.1) / (1 - 0.1)
    assert float(v.eval_supersolution(spec, t, deep)) == pytest.approx(expect, rel=1e-6)
    with pytest.raises(OutOfTabulatedRange):
        v.eval_supersolution(spec, t, [0.0, xi + spec.R + 2 * spec.profile.r_max])


def test_boundary_slack_time_invariant(spec):
    a = v.check_supersolution(spec, replace(SMALL, t=1.0))
    b = v.check_supersolution(spec, replace(SMALL, t=7.5))
    assert abs(a.min_boundary_slack - b.min_boundary_slack) <= 1e-12


def test_fd_error_is_second_order(spec):
    e1 = v.check_supersolution(spec, replace(SMALL, h_fd=4e-3)).fd_error
    e2 = v.check_supersolution(spec, replace(SMALL, h_fd=2e-3)).fd_error
    assert 3.2 <= e1 / e2 <= 4.8


def test_subsolution_1d():
    rep = v.check_subsolution_1d(P, 0.1, SMALL)
    assert rep.ok
    assert rep.extra["stefan_law_gap"] < 1e-6
    assert rep.extra["w_at_front"] == 0.0
    with pytest.raises(SpecInvariantViolated):
        v.check_subsolution_1d(P, 1.0)


def _small_cases():
    return v.default_battery(h=0.5, T=1.0, half_width=6.0)


def test_battery_small():
    rep = v.comparison_battery(_small_cases())
    assert rep.ok
    identical = [r for r in rep.results if r.name == "identical"][0]
    assert identical.max_violation == 0.0
    assert "ok=true" in rep.to_text()


def test_battery_rejects_unordered_pairs():
    cases = _small_cases()
    swapped = v.OrderingCase("swapped", cases[3].upper, cases[3].lower)
    with pytest.raises(HypothesisViolated):
        v.run_ordering_case(swapped)
    mu = v.OrderingCase("mu", cases[2].upper, cases[2].lower)
    with pytest.raises(HypothesisViolated):
        v.run_ordering_case(mu)


def test_larger_mu_front_ahead():
    lo = en.Scenario(shape="ball", center=(0.0,), radius=2.0, box=(-15, 15), h=0.1, T=4.0,
                     snap_every=0.5)
    hi = replace(lo, params=P.with_(mu=2.0))
    a, b = en.run_scenario(lo), en.run_scenario(hi)
    for fa, fb in zip(a.fronts, b.fronts):
        assert fb[:, 0].max() >= fa[:, 0].max() and fb[:, 0].min() <= fa[:, 0].min()


def test_compare_front1d():
    base = Front1DConfig(params=P, L=40.0, h=0.1, T=4.0, orientation="eqlow")
    lower = replace(base, w0=lambda xi: 0.5 * (1 - np.exp(-xi)))
    upper = replace(base, w0=lambda xi: 0.9 * (1 - np.exp(-xi)), rho0=-0.5)
    res = v.compare_front1d(lower, upper, [1.0, 2.0, 4.0])
    assert res.rho_violation == 0.0 and res.value_violation == 0.0
