import math
import warnings

import numpy as np
import pytest

from horncrit.classify import (DomainSpec, classify_positive_recurrence, classify_transience,
                               critical_gamma, hitting_prob_1d, scale_function, sphere_area)
from horncrit.profile import make_profile

from conftest import domain


def test_domain_validation():
    p = make_profile("constant", a=1.0)
    with pytest.raises(ValueError):
        DomainSpec(1, 1, p)
    with pytest.raises(ValueError):
        DomainSpec(0, 3, p)
    with pytest.raises(ValueError):
        DomainSpec(1.5, 2, p)


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


def test_critical_gamma():
    assert critical_gamma(domain(1, 2, "power", gamma=0.1)) == 0.5
    assert critical_gamma(domain(3, 2, "power", gamma=0.1)) == -0.5
    assert critical_gamma(domain(2, 1, "logpower", gamma=0.1)) == 1.0
    assert critical_gamma(domain(1, 2, "logpower", gamma=0.1)) is None


def test_cylinders():
    # a cylinder with one unbounded direction is recurrent; two or more are transient
    assert classify_transience(domain(1, 2, "constant", a=1.0)).verdict == "recurrent"
    assert classify_transience(domain(2, 1, "constant", a=1.0)).verdict == "recurrent"
    assert classify_transience(domain(3, 1, "constant", a=1.0)).verdict == "transient"


def test_critical_flag():
    res = classify_transience(domain(1, 2, "power", gamma=0.5))
    assert res.verdict == "recurrent" and res.critical
    assert not classify_transience(domain(1, 2, "power", gamma=0.4)).critical


def test_transient_total_matches_closed_form():
    # l=1, m=2, gamma=0.75: int_10^inf (1+s)^-1.5 ds = 2/sqrt(11)
    res = classify_transience(domain(1, 2, "power", gamma=0.75))
    assert res.verdict == "transient"
    assert res.total == pytest.approx(2 / math.sqrt(11), rel=1e-6)


def test_volume():
    vol = classify_positive_recurrence(domain(1, 2, "power", gamma=-1.0))
    assert vol.verdict == "positive-recurrent"
    # tail volume constant: |S^0| |S^1| / 2 = 2 pi
    assert vol.volume_constant == pytest.approx(2 * math.pi)
    assert vol.integral.value == pytest.approx(1 / 11, rel=1e-6)
    assert classify_positive_recurrence(domain(1, 2, "power", gamma=-0.4)).verdict == \
        "not-positive-recurrent"
    assert classify_positive_recurrence(domain(1, 2, "constant", a=1.0)).verdict == \
        "not-positive-recurrent"


def test_scale_function_closed_forms():
    cyl = domain(1, 2, "constant", a=2.0)
    assert scale_function(cyl, 1.0, 5.0) == pytest.approx(4.0 / 4.0, rel=1e-12)
    horn = domain(1, 2, "power", gamma=0.5)
    assert scale_function(horn, 1.0, 31.0) == pytest.approx(math.log(16.0), rel=1e-12)
    assert scale_function(horn, 1.0, math.inf) == math.inf
    horn3 = domain(1, 2, "power", gamma=0.75)
    assert scale_function(horn3, 3.0, math.inf) == pytest.approx(1.0, rel=1e-6)
    with pytest.raises(ValueError):
        scale_function(horn, 2.0, 1.0)
    with pytest.raises(ValueError):
        scale_function(horn, 0.0, 1.0)


def test_hitting_prob_cylinder_is_linear():
    assert hitting_prob_1d(domain(1, 2, "constant", a=1.0), 1.0, 2.0, 5.0) == pytest.approx(0.75)


def test_hitting_prob_horn_oracle():
    # S(rho) = log((1+rho)/2) from rho0 = 1
    horn = domain(1, 2, "power", gamma=0.5)
    exact = (math.log(33) - math.log(3)) / (math.log(33) - math.log(2))
    assert hitting_prob_1d(horn, 1.0, 2.0, 32.0) == pytest.approx(exact, rel=1e-12)


def test_hitting_prob_at_infinity():
    horn = domain(1, 2, "power", gamma=0.5)
    with pytest.warns(UserWarning):
        assert hitting_prob_1d(horn, 1.0, 2.0, math.inf) == 1.0
    t = domain(1, 2, "power", gamma=0.75)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        p = hitting_prob_1d(t, 1.0, 2.0, math.inf)
    # S(rho) = 2 (2^-1/2 - (1+rho)^-1/2)
    s1 = 2 * (2**-0.5 - 3**-0.5)
    assert p == pytest.approx(1 - s1 / (2 * 2**-0.5), rel=1e-6)


def test_hitting_prob_argument_checks():
    horn = domain(1, 2, "power", gamma=0.5)
    assert hitting_prob_1d(horn, 1.0, 1.0, 4.0) == 1.0
    with pytest.raises(ValueError):
        hitting_prob_1d(horn, 2.0, 1.0, 4.0)
    with pytest.raises(ValueError):
        hitting_prob_1d(horn, 1.0, 4.0, 4.0)


@pytest.mark.parametrize("l, m", [(l, m) for l in (1, 2, 3) for m in (1, 2, 3) if l + m >= 3])
def test_power_threshold_grid(l, m):
    gc = (2.0 - l) / m
    for g, want in ((gc - 0.15, "recurrent"), (gc, "recurrent"), (gc + 0.15, "transient")):
        assert classify_transience(domain(l, m, "power", gamma=g)).verdict == want


def test_logpower_slabs():
    for g, want in ((0.5, "recurrent"), (1.0, "recurrent"), (1.5, "transient")):
        assert classify_transience(domain(2, 1, "logpower", gamma=g)).verdict == want
