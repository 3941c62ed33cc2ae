"""Carrier selection and NLS envelope constants in two media.

Run: python3 demos/bands_and_envelope.py
"""
import numpy as np

from modpulse.bloch import PeriodicCoefficient, band_omegas, bloch_point
from modpulse.conditions import check_conditions
from modpulse.envelope import envelope_params, soliton, stationary_nls_residual

ONE = PeriodicCoefficient.constant()

for label, rho, l0 in (("rho = 1", ONE, 0.35),
                       ("rho = 1 + 0.3 cos x", PeriodicCoefficient((1.0, 0.3)), 0.2)):
    print(f"== {label}, l0 = {l0}")
    ls = np.linspace(-0.5, 0.5, 6)
    for l in ls:
        print(f"  l = {l:+.2f}  omega_0..2 =", np.round(band_omegas(rho, l, 32)[:3], 6))
    p = bloch_point(rho, l0, 0, 32)
    print(f"  carrier: omega0 = {p.omega:.6f}, c_g = {p.cg:.6f}, omega'' = {p.omega_pp:.6f}, "
          f"gap = {p.gap:.4f}")
    rep = check_conditions(rho, 0, l0, 1)
    print(f"  conditions pass: {rep.passed}  failures: {rep.failures}")
    par = envelope_params(p, ONE, 1, 0.1)
    X = np.linspace(-30, 30, 4096)
    res = stationary_nls_residual(par, soliton(par, X), X)
    print(f"  gamma_nl = {par.gamma_nl:.6f}, gamma1 = {par.gamma1:.6f}, gamma2 = {par.gamma2:.6f}, "
          f"soliton residual = {res:.1e}")
