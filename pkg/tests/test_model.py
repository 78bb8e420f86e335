import math

import numpy as np
import pytest

from stefankpp.errors import NonPositiveParameter
from stefankpp.model import ModelParams, logistic_reaction, validate, zero_reaction


@pytest.mark.parametrize("a,b,u,expected", [(1, 1, 1.0, 0.0), (1, 1, 0.0, 0.0), (2, 1, 1.0, 1.0)])
def test_logistic_values(a, b, u, expected):
    g = logistic_reaction(ModelParams(a=a, b=b))
    assert g(None, np.array([u]))[0] == expected


def test_capacity_is_exact_zero():
    for a, b in [(1.0, 3.0), (0.7, 0.3), (5.0, 2.0)]:
        prm = ModelParams(a=a, b=b)
        assert logistic_reaction(prm)(None, np.array([prm.capacity]))[0] == 0.0


def test_c_max_squared():
    for a, d in [(1.0, 1.0), (0.3, 2.5), (4.0, 0.01)]:
        prm = ModelParams(a=a, d=d)
        assert prm.c_max ** 2 == pytest.approx(4 * a * d, rel=1e-15)


def test_validate_ok_and_failures():
    assert validate(ModelParams()) == ModelParams()
    with pytest.raises(NonPositiveParameter) as err:
        validate(ModelParams(d=0.0))
    assert err.value.name == "d"
    with pytest.raises(NonPositiveParameter) as err:
        validate(ModelParams(mu=-1.0))
    assert err.value.name == "mu"
    with pytest.raises(NonPositiveParameter):
        validate(ModelParams(a=math.nan))


def test_derived_quantities():
    prm = ModelParams(d=2.0, a=0.5, b=0.25, mu=4.0)
    assert prm.latent_heat == 0.5
    assert prm.capacity == 2.0
    assert prm.length_scale == 2.0
    assert prm.with_(mu=1.0).latent_heat == 2.0


def test_zero_reaction():
    z = zero_reaction()
    assert np.all(z(None, np.array([0.0, 0.5, 3.0])) == 0.0)
    assert z.logistic == (0.0, 0.0)
