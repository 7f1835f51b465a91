import numpy as np
import pytest

from horncrit.integrals import dyadic_blocks, improper_integral, tail_verdict


def test_dyadic_edges():
    np.testing.assert_array_equal(dyadic_blocks(10.0, 6), [10.0, 16.0, 32.0, 64.0])
    np.testing.assert_array_equal(dyadic_blocks(8.0, 5), [8.0, 16.0, 32.0])


@pytest.mark.parametrize("p, s0", [(2.0, 1.0), (1.5, 10.0), (3.0, 2.0)])
def test_power_tails_converge_to_closed_form(p, s0):
    res = improper_integral(lambda s: s**-p, s0)
    assert res.status == "convergent"
    exact = s0 ** (1 - p) / (p - 1)
    assert res.value == pytest.approx(exact, rel=1e-6)
    assert res.exponent == pytest.approx(p, abs=1e-6)


@pytest.mark.parametrize("p", [1.0, 0.5, 0.0])
def test_non_integrable_powers_diverge(p):
    assert improper_integral(lambda s: s**-p, 10.0).status == "divergent"


def test_log_divergent():
    # 1/(s log s) diverges like log log s
    res = improper_integral(lambda s: 1.0 / (s * np.log(s)), 10.0)
    assert res.status in ("divergent", "inconclusive")


def test_log_convergent():
    # 1/(s log^2 s): integral from e^2 is 1/2
    res = improper_integral(lambda s: 1.0 / (s * np.log(s) ** 2), np.e**2)
    assert res.status == "convergent"
    assert res.value == pytest.approx(0.5, rel=2e-2)


def test_near_critical_log_is_inconclusive():
    res = improper_integral(lambda s: 1.0 / (s * np.log(s) ** 1.05), 10.0)
    assert res.status == "inconclusive"


def test_zero_tail():
    status, tail, *_ = tail_verdict(np.zeros(6), np.arange(6))
    assert status == "convergent" and tail == 0.0


def test_tail_verdict_needs_window():
    with pytest.raises(ValueError):
        tail_verdict(np.ones(3), np.arange(3))


def test_evidence_rows():
    res = improper_integral(lambda s: s**-2.0, 16.0, k_max=10)
    rows = res.evidence_rows()
    assert rows[0][0] == 4.0
    assert rows[1][2] == pytest.approx(0.5, rel=1e-10)
