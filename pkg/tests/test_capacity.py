import math

import numpy as np
import pytest

from horncrit.capacity import (ConvergenceError, assemble, auto_mesh_h, capacity_sequence,
                               default_rho_in, fit_models, minimize, radial_test_energy)

from conftest import domain


def test_defaults():
    assert default_rho_in(domain(1, 2, "constant", a=1.0)) == 1.0
    assert default_rho_in(domain(1, 2, "constant", a=0.5)) == pytest.approx(0.45)
    assert auto_mesh_h(domain(1, 2, "constant", a=1.0), 8) == 0.125
    assert auto_mesh_h(domain(1, 2, "constant", a=0.5), 8) == 0.0625


def test_band_weights_keep_column_volume(horn_half):
    # each column carries rho^(l-1) h H(rho)^m / m exactly
    mesh, _ = assemble(horn_half, 4.0, 0.125)
    cols = mesh.weight.sum(axis=1)
    expect = 0.125 * horn_half.profile(mesh.rho) ** 2 / 2
    np.testing.assert_allclose(cols, expect, rtol=1e-13)


def test_coarse_mesh_rejected(cylinder):
    with pytest.raises(ValueError, match="coarse"):
        assemble(cylinder, 4.0, 0.25)
    with pytest.raises(ValueError):
        assemble(cylinder, 4.0, 0.125, rho_in=5.0)


def test_cylinder_energy_close_to_continuum(cylinder):
    # a slab of length n - 1 has energy 1/(m (n - 1)) per unit sphere measure
    mesh, form = assemble(cylinder, 16.0, 0.125)
    disc, cont = radial_test_energy(cylinder, form)
    assert cont == pytest.approx(0.5 / 15.0)
    assert disc == pytest.approx(cont, rel=0.05)


def test_minimizer_properties(horn_half):
    mesh, form = assemble(horn_half, 8.0, 0.125)
    u, ell, info = minimize(form)
    act = mesh.active
    # maximum principle and boundary values
    assert np.nanmin(u) >= -1e-12 and np.nanmax(u) <= 1 + 1e-12
    assert np.all(u[mesh.tag == 1] == 1.0) and np.all(u[mesh.tag == 2] == 0.0)
    assert info["residual"] <= 1e-9
    # the radial candidate is admissible, so it cannot beat the minimiser
    assert ell <= radial_test_energy(horn_half, form)[0] * (1 + 1e-12)
    assert np.count_nonzero(act) == mesh.cells


def test_convergence_error(horn_half):
    _, form = assemble(horn_half, 8.0, 0.125)
    with pytest.raises(ConvergenceError) as exc:
        minimize(form, max_iter=3)
    assert len(exc.value.history) == 3


def test_fit_models_recover_parameters():
    n = np.array([4.0, 8.0, 16.0, 32.0])
    S = np.log(n)
    fits = fit_models(n, 0.7 / (S + 0.3), S)
    assert fits["recurrent"]["params"]["c"] == pytest.approx(0.7, rel=1e-8)
    assert fits["recurrent"]["params"]["b"] == pytest.approx(0.3, rel=1e-8)
    fits = fit_models(n, 0.2 + 0.5 * n**-0.5, S)
    assert fits["transient"]["error"] < 1e-8
    assert fits["transient"]["params"]["c0"] == pytest.approx(0.2, rel=1e-6)


def test_sequence_monotone_and_verdicts():
    cyl = capacity_sequence(domain(1, 2, "constant", a=1.0), [4, 8, 16, 32])
    assert np.all(np.diff(cyl.ell) < 0)
    assert cyl.best == "recurrent" and cyl.verdict == "recurrent"
    assert cyl.fits["recurrent"]["params"]["c"] == pytest.approx(0.5, rel=1e-3)
    horn = capacity_sequence(domain(1, 2, "power", gamma=0.75), [4, 8, 16, 32])
    assert horn.best == "transient" and horn.verdict == "transient"
    rows = list(horn.rows())
    assert rows[0][0] == 4.0 and rows[0][-1] == "transient"


def test_domain_monotonicity():
    # the gamma = 0.4 horn sits inside the gamma = 0.5 horn
    n = [4, 8, 16, 24]
    small = capacity_sequence(domain(1, 2, "power", gamma=0.4), n, h_mesh=0.125)
    big = capacity_sequence(domain(1, 2, "power", gamma=0.5), n, h_mesh=0.125)
    assert np.all(small.ell <= big.ell)


def test_sequence_argument_checks(cylinder):
    with pytest.raises(ValueError):
        capacity_sequence(cylinder, [8, 4, 16, 32])
    with pytest.raises(ValueError, match="four"):
        capacity_sequence(cylinder, [4, 8, 16])
