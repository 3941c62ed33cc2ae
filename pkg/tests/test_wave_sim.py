import numpy as np
import pytest

from modpulse import _fourier as fo
from modpulse.bloch import PeriodicCoefficient, bloch_point
from modpulse.envelope import SolitonProfiles, build_initial_data, envelope_params, soliton
from modpulse.wave_sim import (BlowUpError, Cone, ConeError, SimConfig, WaveField, compact_bump,
                               demodulate, discrete_energy, periodic_grid, simulate, step,
                               taylor_start, twin_run)
from oracles import discrete_plane_wave_frequency

ONE = PeriodicCoefficient.constant()


def grid_dt(Q, ppc, factor=0.9):
    x = periodic_grid(Q, ppc)
    return x, factor * (x[1] - x[0])


# ----------------------------------------------------------------------------
# stepping
# ----------------------------------------------------------------------------

def test_plane_wave_matches_discrete_dispersion():
    x, dt = grid_dt(2, 32)
    dx = x[1] - x[0]
    k = 3.0
    wd = discrete_plane_wave_frequency(k, dx, dt)
    exact = lambda t: np.cos(k * x) * np.cos(wd * t)
    fld = WaveField(x, exact(dt), exact(0.0), dt, dt, dx)
    worst = 0.0
    for n in range(2, 200):
        fld = step(fld, 1.0, 1.0, 0.0)
        worst = max(worst, float(np.max(np.abs(fld.u_curr - exact(n * dt)))))
        # per-step error stays at roundoff level
        assert worst <= 1e-10 * n
    assert worst < 1e-10 * 200


def test_zero_stays_zero():
    x, dt = grid_dt(1, 32)
    fld = taylor_start(np.zeros_like(x), np.zeros_like(x), x, dt, ONE, ONE, 1.0)
    for _ in range(50):
        fld = step(fld, ONE, ONE, 1.0)
    assert np.all(fld.u_curr == 0)


def test_linear_energy_conserved_over_1e4_steps(cosine):
    x, dt = grid_dt(2, 32)
    u0 = compact_bump(x, 2 * np.pi, 2.0)
    rho_g = cosine(x)
    fld = taylor_start(u0, np.zeros_like(x), x, dt, rho_g, 1.0, 0.0)
    E0 = discrete_energy(fld.u_curr, fld.u_prev, dt, fld.dx, rho_g)
    drift = 0.0
    for _ in range(10_000):
        fld = step(fld, rho_g, 1.0, 0.0)
        E = discrete_energy(fld.u_curr, fld.u_prev, dt, fld.dx, rho_g)
        drift = max(drift, abs(E - E0) / E0)
    assert drift <= 1e-6


def test_cfl_violation_rejected():
    x = periodic_grid(1, 32)
    dx = x[1] - x[0]
    with pytest.raises(ValueError, match="CFL"):
        WaveField(x, np.zeros_like(x), np.zeros_like(x), 0.0, 0.95 * dx, dx)


def test_domain_must_be_multiple_of_period():
    x = np.linspace(0, 7.0, 64, endpoint=False)
    with pytest.raises(ValueError, match="multiple"):
        WaveField(x, np.zeros_like(x), np.zeros_like(x), 0.0, 0.01, x[1] - x[0])


def test_focusing_blow_up_reports_last_time():
    x, dt = grid_dt(1, 32)
    u0 = compact_bump(x, np.pi, 2.0, amp=5.0)
    with pytest.raises(BlowUpError) as info:
        simulate(u0, np.zeros_like(x), x, ONE, ONE, SimConfig(T=20.0, dt=dt, gamma=1.0))
    assert 0 < info.value.t_last < 20.0


# ----------------------------------------------------------------------------
# demodulation
# ----------------------------------------------------------------------------

@pytest.mark.parametrize("rho,l0", [((1.0,), 0.35), ((1.0, 0.3), 0.2)])
def test_demodulation_round_trip(rho, l0):
    medium = PeriodicCoefficient(rho)
    p = bloch_point(medium, l0, 0, 32)
    par = envelope_params(p, ONE, 1, 0.05)
    x = periodic_grid(120, 32)
    L = x[1] * len(x)
    xc = L / 2
    prof = SolitonProfiles(par)
    u0, u1 = build_initial_data(par, p, prof.psi, prof.phi, x, center=xc)
    A = demodulate(u0, u1, x, par.l0, par.omega, 0.0, fo.evaluate(p.f_hat, x))
    ref = par.epsilon * soliton(par, par.epsilon * (x - xc))
    assert np.max(np.abs(A - ref)) <= 0.02 * ref.max()


def test_demodulation_of_zero():
    x = periodic_grid(4, 32)
    f = np.ones_like(x, complex) / np.sqrt(2 * np.pi)
    A = demodulate(np.zeros_like(x), np.zeros_like(x), x, 0.35, 1.06, 0.0, f)
    assert np.all(A == 0)


def test_demodulation_of_flat_carrier(cosine):
    p = bloch_point(cosine, 0.2, 0, 32)
    x = periodic_grid(20, 64)
    f = fo.evaluate(p.f_hat, x)
    c = 0.3 - 0.1j
    t = 1.7
    ph = np.exp(1j * (p.l * x - p.omega * t))
    u = 2 * np.real(c * f * ph)
    ut = 2 * np.real(-1j * p.omega * c * f * ph)
    A = demodulate(u, ut, x, p.l, p.omega, t, f)
    # the Q-cell domain resolves f's cell average exactly up to the filter
    assert np.max(np.abs(A - c)) < 0.05 * abs(c)


# ----------------------------------------------------------------------------
# light cone and finite speed
# ----------------------------------------------------------------------------

def cone_run(gamma, amp=0.5, rho=ONE):
    x, dt = grid_dt(4, 32)
    L = x[1] * len(x)
    x0 = L / 2
    u0 = compact_bump(x, x0, 3.0, amp)
    cone = Cone(x0, 10.0)
    return simulate(u0, np.zeros_like(x), x, rho, ONE, SimConfig(T=10.0, dt=dt, stride=5,
                                                                 gamma=gamma), cone=cone)


def test_cone_energy_of_zero_field():
    x, dt = grid_dt(2, 32)
    d = simulate(np.zeros_like(x), np.zeros_like(x), x, ONE, ONE,
                 SimConfig(T=5.0, dt=dt, gamma=1.0), cone=Cone(x[1] * len(x) / 2, 5.0))
    assert np.all(np.asarray(d.cone_track.energy) == 0)
    assert d.cone_check["holds"] and d.cone_check["max_violation"] <= 0


def test_linear_cone_energy_non_increasing(cosine):
    d = cone_run(0.0, rho=cosine)
    E = np.asarray(d.cone_track.energy)
    assert np.all(np.diff(E) <= 1e-6 * E[:-1] + 1e-12)
    assert E[-1] < E[0]          # energy leaves the shrinking cone
    assert d.cone_check["holds"]


@pytest.mark.parametrize("gamma", [1.0, -1.0])
def test_cone_inequality_nonlinear(gamma):
    d = cone_run(gamma)
    chk = d.cone_check
    assert chk["pairs"] > 1000
    assert chk["holds"], chk


def test_cone_larger_than_domain_rejected():
    x = periodic_grid(1, 32)
    with pytest.raises(ConeError):
        Cone(np.pi, 4.0).weights(0.0, x, 2 * np.pi)


def test_twin_run_outside_cone_is_identical():
    x, dt = grid_dt(8, 32)
    L = x[1] * len(x)
    x0, t0 = L / 2, 8.0
    u0 = compact_bump(x, x0, 4.0, 0.5)
    worst, clear = twin_run(u0, np.zeros_like(x), x, ONE, ONE, 1.0, dt, x0, t0,
                            bump_center=x0 + 15.0, bump_width=1.5)
    assert clear > 0
    assert worst <= 1e-6


def test_twin_run_detects_bump_inside_cone():
    x, dt = grid_dt(8, 32)
    L = x[1] * len(x)
    x0, t0 = L / 2, 8.0
    u0 = compact_bump(x, x0, 4.0, 0.5)
    worst, clear = twin_run(u0, np.zeros_like(x), x, ONE, ONE, 1.0, dt, x0, t0,
                            bump_center=x0 + 5.0, bump_width=1.5)
    assert clear < 0
    assert worst > 1e-3


# ----------------------------------------------------------------------------
# pulse runs
# ----------------------------------------------------------------------------

def pulse_run(gamma, eps=0.1, T=100.0):
    p = bloch_point(ONE, 0.35, 0, 32)
    par = envelope_params(p, ONE, 1, eps)
    Q = 47 if eps <= 0.1 else 30
    x, dt = grid_dt(Q, 128)
    L = x[1] * len(x)
    xc = 0.3 * L
    prof = SolitonProfiles(par)
    u0, u1 = build_initial_data(par, p, prof.psi, prof.phi, x, center=xc)
    return par, simulate(u0, u1, x, ONE, ONE, SimConfig(T=T, dt=dt, stride=40, gamma=gamma),
                         par, p, x_c=xc)


@pytest.fixture(scope="module")
def trapped():
    return pulse_run(1.0)


@pytest.fixture(scope="module")
def linear():
    return pulse_run(0.0)


def test_pulse_speed_matches_group_velocity(trapped):
    par, d = trapped
    assert abs(d.speed_fit - par.cg) <= 0.02 * par.cg
    assert np.all(np.isfinite(d.approx_err)) and np.all(np.isfinite(d.tail_amp))


def test_linear_run_disperses(trapped, linear):
    _, dn = trapped
    _, dl = linear
    assert dl.tail_amp[-1] > 2 * dl.tail_amp[0]
    assert dl.tail_amp[-1] > 2 * dn.tail_amp[-1]
    assert np.max(dl.approx_err) > 10 * np.max(dn.approx_err)


def test_records_at_fixed_stride(trapped):
    _, d = trapped
    assert np.allclose(np.diff(d.t)[:-1], 40 * d.meta["dt"])
    assert d.meta["T"] == pytest.approx(100.0, abs=d.meta["dt"])


def test_horizon_capped_at_eps_minus_two():
    par, d = pulse_run(1.0, eps=0.2, T=500.0)
    assert d.meta["T"] == pytest.approx(25.0, abs=d.meta["dt"])
