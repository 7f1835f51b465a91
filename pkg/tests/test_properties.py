"""Randomised invariants, 100 examples per property."""
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from horncrit import lyapunov as L
from horncrit.capacity import assemble, minimize
from horncrit.classify import DomainSpec, classify_transience, hitting_prob_1d, scale_function
from horncrit.experiments import mean_stderr
from horncrit.io import dump_config, format_value, parse_config
from horncrit.profile import check_derivatives, make_profile
from horncrit.simulate import (run_until, start_state, step_full, step_reduced)

def gammas(lo, hi):
    # exponents so small that gamma**2 underflows are outside the working range
    return st.floats(lo, hi).filter(lambda g: g == 0.0 or abs(g) >= 1e-100)


dims = st.sampled_from([(l, m) for l in (1, 2, 3) for m in (1, 2, 3) if l + m >= 3])


@st.composite
def domains(draw, decaying=False):
    l, m = draw(dims)
    fam = draw(st.sampled_from(["power", "logpower", "constant"]))
    if fam == "power":
        g = draw(gammas(-1.0, 0.9))
        prof = make_profile("power", gamma=g)
    elif fam == "logpower":
        prof = make_profile("logpower", gamma=draw(gammas(0.0, 2.5)))
    else:
        prof = make_profile("constant", a=draw(st.floats(0.3, 3.0)))
    return DomainSpec(l, m, prof)


@st.composite
def inside_points(draw, dom):
    rho = draw(st.floats(0.0, 50.0))
    frac = draw(st.floats(0.0, 1.0))
    return rho, frac * float(dom.profile(rho))


@given(dom=domains(), data=st.data(), h=st.floats(1e-4, 0.2),
       mode=st.sampled_from(["full", "reduced"]), scheme=st.sampled_from(["exact", "euler"]))
def test_steps_stay_in_domain(dom, data, h, mode, scheme):
    rho, r = data.draw(inside_points(dom))
    noise = np.asarray(data.draw(st.lists(st.floats(-6, 6), min_size=dom.d, max_size=dom.d)))
    s = start_state(dom, mode, rho, r)
    if mode == "full":
        out = step_full(dom, s, h, None, noise)
        assert np.linalg.norm(out.z) <= dom.profile(np.linalg.norm(out.x)) * (1 + 1e-12) + 1e-14
    else:
        out = step_reduced(dom, s, h, None, noise, scheme)
    assert out.rho >= 0 and out.r >= 0
    assert out.r <= float(dom.profile(out.rho)) * (1 + 1e-12) + 1e-14
    assert out.L >= s.L and out.steps == 1


@given(dom=domains(), seed=st.integers(0, 2**32 - 1), pid=st.integers(0, 10**6),
       mode=st.sampled_from(["full", "reduced"]))
def test_replay_is_bit_identical(dom, seed, pid, mode):
    start = start_state(dom, mode, 2.0, 0.0)
    a = run_until(dom, start, 1e-2, seed, inner=1.0, T=0.5, path_id=pid)
    b = run_until(dom, start, 1e-2, seed, inner=1.0, T=0.5, path_id=pid)
    assert (a.cause, a.t, a.L, a.steps, a.state.rho, a.state.r) == \
        (b.cause, b.t, b.L, b.steps, b.state.rho, b.state.r)
    if a.cause == "hit_inner":
        assert a.state.rho <= 1.0
    else:
        assert a.steps == 50


@given(gamma=gammas(-0.8, 0.8), l=st.sampled_from([1, 2]), m=st.sampled_from([1, 2]),
       n=st.sampled_from([3.0, 4.0, 6.0]))
def test_capacity_maximum_principle(gamma, l, m, n):
    assume(l + m >= 3)
    dom = DomainSpec(l, m, make_profile("power", gamma=gamma))
    hmin = float(np.min(dom.profile(np.linspace(0, n, 200))))
    h = 2.0 ** -math.ceil(math.log2(8 / hmin))
    mesh, form = assemble(dom, n, h)
    u, ell, _ = minimize(form)
    assert np.nanmin(u) >= -1e-9 and np.nanmax(u) <= 1 + 1e-9
    assert ell > 0


@given(dom=domains(), logs=st.floats(0.5, 9.0))
def test_endpoint_extremum(dom, logs):
    try:
        s0 = L.admissible_s0(dom)
    except L.AdmissibilityError:
        assume(False)
    s = max(10.0**logs, s0)
    assert L.endpoint_extremum_violation(dom, [s]) == 0.0


@given(dom=domains(), logs=st.floats(0.7, 7.0))
def test_antiderivatives_frozen_r(dom, logs):
    s0 = L.admissible_s0(dom)
    s = max(10.0**logs, 2 * s0)
    errs = L.antiderivative_check(dom, [s])
    assert max(errs[("frozen", k)] for k in "EFG") < 1e-6


@given(dom=domains(), seed=st.integers(0, 2**31))
def test_ratio_decomposition(dom, seed):
    res = L.identity_check(dom, 50, seed)
    assert res["terms"] < 1e-10 and res["B_closed"] < 1e-10


@given(dom=domains(), logs=st.floats(0.5, 9.0), frac=st.floats(0.0, 1.0))
def test_gamma_envelopes_bracket_ratio(dom, logs, frac):
    s0 = L.admissible_s0(dom)
    s = max(10.0**logs, s0)
    C0, C1 = L.remainder_constants(dom, s0, 1e10, n_s=100)
    gp, gm = L.gamma_bounds(dom, np.array([s]), C0, C1, check_endpoints=False)
    ratio = L.eval_ABC(dom, frac * float(dom.profile(s)), s, s0).ratio
    tol = 1e-12 * (abs(ratio) + 1e-300)
    assert gm[0] - tol <= ratio <= gp[0] + tol


@given(seed=st.integers(0, 2**31), scale=st.floats(0.1, 10.0),
       dist=st.sampled_from(["normal", "exponential", "bernoulli"]))
def test_stderr_scaling(seed, scale, dist):
    rng = np.random.default_rng(seed)
    draw = {"normal": lambda n: rng.normal(0, scale, n),
            "exponential": lambda n: rng.exponential(scale, n),
            "bernoulli": lambda n: (rng.random(n) < 0.3) * scale}[dist]
    _, se1 = mean_stderr(draw(2000))
    _, se4 = mean_stderr(draw(8000))
    # four times the samples halve the standard error
    assert abs(se4 / se1 - 0.5) <= 0.1


@given(gamma=gammas(-1.5, 0.95), kind=st.sampled_from(["power", "logpower"]))
def test_supplied_derivatives(gamma, kind):
    p = make_profile(kind, gamma=abs(gamma) if kind == "logpower" else gamma)
    assert check_derivatives(p, np.geomspace(0.5, 1e6, 8)) <= 1.0


@given(dom=domains(), rho1=st.floats(1.1, 3.0), R=st.floats(3.5, 60.0), f=st.floats(1.1, 4.0))
def test_hitting_probability_monotone(dom, rho1, R, f):
    p = hitting_prob_1d(dom, 1.0, rho1, R)
    assert 0.0 < p < 1.0
    assert hitting_prob_1d(dom, 1.0, rho1, R * f) >= p - 1e-12
    assert hitting_prob_1d(dom, 1.0, min(rho1 * 1.1, R * 0.99), R) <= p + 1e-12


@given(dom=domains(), a=st.floats(1.0, 20.0), b=st.floats(1.0, 20.0), c=st.floats(1.0, 20.0))
def test_scale_function_additive(dom, a, b, c):
    a, b, c = sorted((a, b, c))
    total = scale_function(dom, a, c)
    assert total == pytest.approx(scale_function(dom, a, b) + scale_function(dom, b, c),
                                  rel=1e-9, abs=1e-12)


@given(l=st.sampled_from([1, 2, 3]), m=st.sampled_from([1, 2, 3]), off=st.floats(0.05, 0.6),
       below=st.booleans())
def test_power_threshold(l, m, off, below):
    assume(l + m >= 3)
    gc = (2.0 - l) / m
    g = gc - off if below else gc + off
    assume(g < 1.0)
    dom = DomainSpec(l, m, make_profile("power", gamma=g))
    assert classify_transience(dom).verdict == ("recurrent" if below else "transient")


_HORN = DomainSpec(1, 2, make_profile("power", gamma=0.5))
_HORN_F = L.build_f(_HORN, "plus")


@given(logs=st.floats(0.1, 9.5), frac=st.floats(0.0, 1.0))
def test_level_inversion(logs, frac):
    s = 10.0**logs
    r = frac * float(_HORN.profile(s))
    rho = L.forward_map(_HORN.profile, s, r)
    assert float(L.level_s(_HORN_F, rho, r)) == pytest.approx(s, rel=1e-11)


@given(logs=st.floats(0.5, 9.0), a=st.floats(1.0, 9.0), b=st.floats(1.0, 9.0))
def test_f_monotone_and_convex_pieces(logs, a, b):
    lo, hi = sorted((10.0**(a), 10.0**(b)))
    assume(hi > lo)
    f_lo, fp_lo, _ = _HORN_F.evaluate(lo)
    f_hi, fp_hi, _ = _HORN_F.evaluate(hi)
    assert f_hi >= f_lo and fp_lo > 0 and fp_hi > 0
    assert fp_hi <= fp_lo * (1 + 1e-12)   # Gamma > 0 here, f' decreasing


@given(x=st.floats(allow_nan=False, allow_infinity=False))
def test_csv_float_round_trip(x):
    assert float(format_value(x)) == x


keys = st.text("abcdefghijklmnopqrstuvwxyz_", min_size=1, max_size=8)
vals = st.one_of(st.integers(-10**6, 10**6), st.floats(allow_nan=False, allow_infinity=False),
                 st.text("abcXYZ0123456789._-", max_size=10))


@given(cfg=st.dictionaries(keys, vals, max_size=8))
def test_config_round_trip(cfg):
    back = parse_config(dump_config(cfg))
    assert set(back) == set(cfg)
    for k, v in cfg.items():
        if isinstance(v, float):
            assert float(back[k]) == v
        else:
            assert back[k] == str(v).strip()
