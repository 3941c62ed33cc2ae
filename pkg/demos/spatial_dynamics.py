"""Spatial dynamics at the carrier: spectrum of A_m, Jordan chain, normal form, homoclinic orbit.

Run: python3 demos/spatial_dynamics.py
"""
import numpy as np

from modpulse.bloch import PeriodicCoefficient, bloch_point
from modpulse.envelope import envelope_params
from modpulse.homoclinic import fitted_order, reduced_field, refine_homoclinic
from modpulse.normal_form import m1_first_step, m3_first_step, verify_elimination
from modpulse.spectrum import assemble_Am, jordan_chain_m1, spectrum

ONE = PeriodicCoefficient.constant()
rho = PeriodicCoefficient((1.0, 0.3))
l0 = 0.2
p = bloch_point(rho, l0, 0, 32)

for m in (1, 3):
    sp = spectrum(assemble_Am(rho, m, p.omega, p.cg, l0, 32))
    near = sp.values[np.abs(sp.values) < 1.0]
    print(f"A_{m}: {len(sp.values)} eigenvalues, those with |lambda| < 1:", np.round(near, 4))

op1 = assemble_Am(rho, 1, p.omega, p.cg, l0, 32)
op3 = assemble_Am(rho, 3, p.omega, p.cg, l0, 32)
jd = jordan_chain_m1(op1, p)
print("Jordan residuals:", {k: f"{v:.1e}" for k, v in jd.residuals.items()})
print(f"nu = {jd.nu:.6f}")

par = envelope_params(p, ONE, 1, 0.1)
fld = reduced_field(jd, p, ONE, 1, par.omega_tilde)
st1 = m1_first_step(jd, p, ONE, 1, par.omega_tilde)
st3 = m3_first_step(op3, p, ONE, 1)
for name, st, op, kw in (("m=1", st1, op1, {"jd": jd}), ("m=3", st3, op3, {})):
    v = verify_elimination(st, fld, op, p, ONE, 1, par.omega_tilde, **kw)
    print(f"{name}: max chain residual {st.max_residual():.1e}, leftover slope {v['slope']:.3f} "
          f"(untransformed {v['slope_untransformed']:.3f})")

eps = [0.2, 0.1, 0.05]
orbits = [refine_homoclinic(fld, par, e) for e in eps]
for e, o in zip(eps, orbits):
    print(f"eps = {e}: Newton its {o.newton['iterations']}, ||q0 - A|| = {o.proximity[0]:.3e}, "
          f"decay rate {o.decay_rate:.4f}")
print(f"proximity order {fitted_order(eps, [o.proximity[0] for o in orbits]):.4f}")
