import math

import numpy as np
import pytest

from conftest import CSTAR_ORACLE, SLOPE0_ORACLE
from stefankpp.errors import DeltaTooLarge, OutOfTabulatedRange, SpeedOutOfRange
from stefankpp.model import ModelParams
from stefankpp.semiwave import (ShootingOptions, compute_cstar, perturbed_speeds, shooting_slope,
                                solve_profile)

P = ModelParams()


def test_k_zero_slope_matches_first_integral():
    s, _ = shooting_slope(P, 0.0)
    assert abs(s - 1 / math.sqrt(3)) < 1e-9
    assert abs(s - SLOPE0_ORACLE) < 1e-9


def test_slope_decreases_in_k():
    ks = [0.0, 0.3, 0.8, 1.3, 1.9]
    slopes = [shooting_slope(P, k)[0] for k in ks]
    assert all(x > y for x, y in zip(slopes, slopes[1:]))


def test_plateau_near_cmax():
    prof = solve_profile(P, 1.99)
    assert abs(prof.Z[-1] - 1.0) <= 1e-3


def test_profile_invariants_and_residual():
    prof = solve_profile(P, 0.5)
    assert prof.Z[0] == 0.0
    eta = 1.0 - prof.Z
    # consecutive values differ by about eta*|nu|*h, which must exceed one ulp
    resolved = eta > 1e-10
    assert np.all(prof.Z[1:] > 0) and np.all(prof.Z < 1.0 + 1e-15)
    # strictly increasing wherever 1 - Z is representable
    assert np.all(np.diff(prof.Z)[resolved[1:]] > 0)
    assert prof.Z[-1] >= (1 - 1e-3)
    # second-order residual of the ODE on the table
    assert np.max(np.abs(prof.ode_residual())) < 10 * prof.h ** 2
    assert prof.manifold_slope == pytest.approx(prof.slope0, abs=1e-8)


def test_profile_evaluate_and_range():
    prof = solve_profile(P, 0.5)
    z, z1, z2 = prof.derivatives(np.array([0.0, 1.0]))
    assert z[0] == 0.0
    assert z1[0] == pytest.approx(prof.slope0, abs=1e-8)
    resid = -z2 + 0.5 * z1 - z + z * z
    assert np.max(np.abs(resid)) < 1e-6
    with pytest.raises(OutOfTabulatedRange):
        prof.evaluate(prof.r_max + 1.0)


def test_speed_out_of_range():
    with pytest.raises(SpeedOutOfRange):
        solve_profile(P, 2.0)
    with pytest.raises(SpeedOutOfRange):
        shooting_slope(P, -0.1)


def test_cstar_matches_oracle():
    res = compute_cstar(P)
    assert abs(res.c_star - CSTAR_ORACLE) < 1e-6
    assert abs(res.c_star - CSTAR_ORACLE) < 1e-9
    assert res.residual < 1e-8


def test_cstar_small_mu():
    prm = P.with_(mu=1e-3)
    assert compute_cstar(prm).c_star / 1e-3 == pytest.approx(1 / math.sqrt(3), rel=0.02)


def test_cstar_monotone_and_bounded():
    cs = [compute_cstar(P.with_(mu=m)).c_star for m in (0.1, 0.3, 1, 3, 10)]
    assert all(x < y for x, y in zip(cs, cs[1:]))
    assert all(0 < c < 2 for c in cs)


@pytest.mark.parametrize("lam", [0.5, 2.0, 10.0])
def test_scaling_identity(lam):
    c1 = compute_cstar(P).c_star
    c2 = compute_cstar(P.with_(mu=lam, b=lam)).c_star
    assert abs(c1 - c2) <= 1e-8


def test_perturbed_speeds():
    lo, hi = perturbed_speeds(P, 0.0)
    c = compute_cstar(P).c_star
    assert lo == pytest.approx(c, abs=1e-12) and hi == pytest.approx(c, abs=1e-12)
    gaps = []
    for delta in (0.1, 0.05, 0.01):
        lo, hi = perturbed_speeds(P, delta)
        assert lo < c < hi
        gaps.append(abs((1 - delta) ** 2 * lo - c))
    assert gaps[0] > gaps[1] > gaps[2]
    up_gap = [abs((1 - d) ** -2 * perturbed_speeds(P, d)[1] - c) for d in (0.1, 0.01)]
    assert up_gap[1] < up_gap[0]
    with pytest.raises(DeltaTooLarge):
        perturbed_speeds(P, 1.0)


def test_csv_round_trip(tmp_path):
    prof = solve_profile(P, 0.3, ShootingOptions(r_max=10.0))
    path = prof.to_csv(tmp_path / "z.csv")
    head = path.read_text().splitlines()[:2]
    assert head[0].startswith("# k=0.3 ") and head[1] == "r,Z"
    data = np.loadtxt(path, delimiter=",", skiprows=2)
    assert np.array_equal(data[:, 1], prof.Z)
