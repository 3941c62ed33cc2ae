import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modpulse import _fourier as fo
from modpulse.bloch import (BlochPoint, DegenerateBandError, PeriodicCoefficient, band_omegas,
                            band_table, bloch2_residual, bloch_point, dl_eigenfunction,
                            group_velocity, omega_second_derivative, reduce_quasimomentum,
                            track_bands)
from oracles import central_difference, constant_bands, fd_bloch_bands


def test_constant_medium_closed_form(const):
    for l in np.linspace(-0.49, 0.5, 23):
        np.testing.assert_allclose(band_omegas(const, l, 32)[:5], constant_bands(l, 5), atol=1e-12)


def test_carrier_frequency_constant_medium(const_point):
    assert abs(const_point.omega - np.sqrt(1 + 0.35 ** 2)) < 1e-13
    assert abs(const_point.omega - 1.059481) < 1e-6


def test_constant_medium_derivatives(const_point):
    w = const_point.omega
    assert abs(const_point.cg - 0.35 / w) < 1e-12
    assert abs(const_point.omega_pp - 1 / w ** 3) < 1e-10


def test_fd_oracle_periodic_medium():
    rho = PeriodicCoefficient((1.0, 0.3, 0.1))
    for l in (-0.3, 0.0, 0.25, 0.5):
        np.testing.assert_allclose(band_omegas(rho, l, 32)[:4], fd_bloch_bands(rho, l, 4),
                                   atol=1e-9)


def test_group_velocity_and_curvature_match_finite_differences(cosine):
    p = bloch_point(cosine, 0.25, 0, 32)
    om = lambda l: band_omegas(cosine, l, 32)[0]
    assert abs(p.cg - central_difference(om, 0.25, 1e-4)) < 1e-6
    assert abs(p.omega_pp - central_difference(om, 0.25, 1e-3, order=2)) < 1e-5


def test_dl_eigenfunction_solves_differentiated_problem(cosine):
    p = bloch_point(cosine, 0.25, 1, 32)
    assert bloch2_residual(p) < 1e-10
    assert abs(fo.inner(p.f_hat, p.dlf_hat)) < 1e-12


def test_dl_eigenfunction_matches_difference_of_gauge_fixed_modes(cosine):
    h = 1e-5
    p = bloch_point(cosine, 0.2, 0, 32)
    fp = bloch_point(cosine, 0.2 + h, 0, 32, derivatives=False).f_hat
    fm = bloch_point(cosine, 0.2 - h, 0, 32, derivatives=False).f_hat
    fd = (fp - fm) / (2 * h)
    # the difference quotient is in the max-coefficient gauge; remove its f component
    fd = fd - fo.inner(p.f_hat, fd) * p.f_hat
    np.testing.assert_allclose(p.dlf_hat, fd, atol=1e-6)


@pytest.mark.parametrize("theta, dtheta", [(0.3, 0.0), (1.1, 0.7), (-2.0, -3.1)])
def test_gauge_invariance(cosine, theta, dtheta):
    p = bloch_point(cosine, 0.25, 0, 32)
    ph = np.exp(1j * theta)
    f2 = ph * p.f_hat
    g2 = ph * (p.dlf_hat + 1j * dtheta * p.f_hat)
    q = BlochPoint(l=p.l, n=p.n, omega=p.omega, f_hat=f2, rho=cosine, gap=p.gap)
    cg2 = group_velocity(q)
    assert abs(cg2 - p.cg) < 1e-8
    assert abs(omega_second_derivative(q, cg2, g2) - p.omega_pp) < 1e-8


def test_degenerate_band_raises(const):
    p = bloch_point(const, 0.0, 1, 16, derivatives=False)
    with pytest.raises(DegenerateBandError):
        group_velocity(p)
    with pytest.raises(DegenerateBandError):
        dl_eigenfunction(p)


def test_nonpositive_coefficient_rejected():
    with pytest.raises(ValueError):
        PeriodicCoefficient((0.2, 0.5))


def test_truncation_too_small_rejected():
    rho = PeriodicCoefficient((1.0, 0.0, 0.0, 0.0, 0.0, 0.1))
    with pytest.raises(ValueError):
        rho.conv_matrix(2)


@pytest.mark.parametrize("l, lr, shift", [(0.35, 0.35, 0), (1.05, 0.05, 1), (-0.5, 0.5, -1),
                                          (0.5, 0.5, 0), (2.5, 0.5, 2)])
def test_reduce_quasimomentum(l, lr, shift):
    a, b = reduce_quasimomentum(l)
    assert abs(a - lr) < 1e-14 and b == shift


def test_band_periodicity_in_l(cosine):
    np.testing.assert_allclose(band_omegas(cosine, 0.3 + 2.0, 24), band_omegas(cosine, 0.3, 24),
                               atol=1e-12)


def test_band_table_and_tracking(const):
    ls = np.linspace(-0.45, 0.45, 7)
    rows = band_table(const, ls, nbands=2, K=16)
    assert len(rows) == 14
    for l, n, om, cg, opp in rows:
        assert abs(om - constant_bands(l, 2)[n]) < 1e-12
    tr = track_bands(const, ls, nbands=2, K=16)
    assert tr.shape == (7, 2)


@settings(max_examples=25, deadline=None)
@given(l=st.floats(-0.45, 0.45), a1=st.floats(-0.4, 0.4), a2=st.floats(-0.2, 0.2))
def test_random_media_properties(l, a1, a2):
    rho = PeriodicCoefficient((1.0, a1, a2))
    om = band_omegas(rho, l, 20)
    assert np.all(np.diff(om) >= -1e-12)
    assert np.all(om > 0)
    p = bloch_point(rho, l, 0, 20)
    assert abs(fo.norm(p.f_hat) - 1) < 1e-12
    if p.gap > 1e-3:
        assert bloch2_residual(p) < 1e-8
        assert abs(p.cg) < 1
