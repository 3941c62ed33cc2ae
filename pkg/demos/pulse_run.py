"""Launch the modulating pulse in the wave equation and compare with the linear run.

Run: python3 demos/pulse_run.py   (about 10 s)
"""
import numpy as np

from modpulse.bloch import PeriodicCoefficient, bloch_point
from modpulse.envelope import SolitonProfiles, build_initial_data, envelope_params
from modpulse.wave_sim import SimConfig, periodic_grid, simulate

ONE = PeriodicCoefficient.constant()
p = bloch_point(ONE, 0.35, 0, 32)
par = envelope_params(p, ONE, 1, 0.1)
x = periodic_grid(47, 128)
L = x[1] * len(x)
xc = 0.3 * L
prof = SolitonProfiles(par)
u0, u1 = build_initial_data(par, p, prof.psi, prof.phi, x, center=xc)

for gamma in (1.0, 0.0):
    d = simulate(u0, u1, x, ONE, ONE, SimConfig(T=100.0, dt=0.9 * x[1], stride=40, gamma=gamma),
                 par, p, x_c=xc)
    print(f"gamma = {gamma:+.0f}: speed {d.speed_fit:.5f} (c_g {par.cg:.5f}), "
          f"max approx_err {np.max(d.approx_err):.4f}, tail {d.tail_amp[0]:.4f} -> {d.tail_amp[-1]:.4f}")
    for t, c, tail in list(zip(d.t, d.centroid, d.tail_amp))[::10]:
        print(f"    t = {t:7.2f}  centroid = {c:9.3f}  tail = {tail:.4f}")
