"""Numerical margins for the non-degeneracy and non-resonance hypotheses.

Every condition is an exact inequality in the analysis; here each one is
turned into a margin (distance from failure) and a condition "passes" when
its margin exceeds PASS_TOL.
"""
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Tuple

import numpy as np

from . import _fourier as fo
from .bloch import (assemble_bloch_matrix, band_omegas, bloch_point, reduce_quasimomentum,
                    PeriodicCoefficient)

PASS_TOL = 1e-8


@dataclass
class ConditionReport:
    n0: int
    l0: float
    N: int
    omega0: float
    s: float                                  # band exponent + quasimomentum
    nd1_margin: float
    nd2_margins: Tuple[float, float]
    nr_margins: Dict[int, dict] = field(default_factory=dict)
    zero_ev_distances: List[dict] = field(default_factory=list)
    zero_ev_min: dict = field(default_factory=dict)
    Dm: Dict[int, dict] = field(default_factory=dict)
    passed: bool = False
    failures: List[str] = field(default_factory=list)

    def to_dict(self):
        d = asdict(self)
        d["nr_margins"] = {str(k): v for k, v in self.nr_margins.items()}
        d["Dm"] = {str(k): v for k, v in self.Dm.items()}
        d["pass"] = d.pop("passed")
        return d

    def table_rows(self):
        """Rows (kind, m, index, margin) for CSV output."""
        rows = [("nd1", 1, self.n0, self.nd1_margin),
                ("nd2_cg", 1, self.n0, self.nd2_margins[0]),
                ("nd2_omega_pp", 1, self.n0, self.nd2_margins[1])]
        for m, v in sorted(self.nr_margins.items()):
            rows.append(("nr", m, v["n"], v["margin"]))
        for v in self.zero_ev_distances:
            rows.append(("zero_ev", v["m"], v["kappa"], v["distance"]))
        for m, v in sorted(self.Dm.items()):
            rows.append(("Dm", m, v["kappa"], v["D"]))
        return rows


def check_nondegeneracy(rho: PeriodicCoefficient, l0, n0, K=32):
    """Margins (nd1, (|1-|c_g||, |omega''|)); nd2 is NaN when the band is degenerate."""
    om = band_omegas(rho, l0, K)
    others = np.delete(om, n0)
    nd1 = float(np.min(np.abs(others - om[n0])))
    if nd1 <= PASS_TOL:
        return nd1, (float("nan"), float("nan"))
    pt = bloch_point(rho, l0, n0, K)
    return nd1, (abs(1 - abs(pt.cg)), abs(pt.omega_pp))


def check_nonresonance(rho: PeriodicCoefficient, n0, l0, N, K=32, omega0=None):
    """For odd m = 3..2N+1: min_n |omega_n(m l0)^2 - m^2 omega0^2| over n <= n_max(m).

    m*l0 is reduced into (-1/2, 1/2] (the bands are 1-periodic in l), and
    n_max(m) is the first band with omega_n^2 > m^2 omega0^2 + 1; bands are
    sorted, so every later band stays above the target.
    """
    if omega0 is None:
        omega0 = band_omegas(rho, l0, K)[n0]
    table = {}
    for m in range(3, 2 * N + 2, 2):
        lr, shift = reduce_quasimomentum(m * l0)
        lam = band_omegas(rho, lr, K) ** 2
        target = m * m * omega0 ** 2
        above = np.nonzero(lam > target + 1)[0]
        if len(above) == 0 or above[0] >= K:
            raise ValueError(f"truncation K={K} too small to bracket the m={m} resonance target")
        n_max = int(above[0])
        d = np.abs(lam[: n_max + 1] - target)
        j = int(np.argmin(d))
        table[m] = {"margin": float(d[j]), "n": j, "n_max": n_max, "l_reduced": lr,
                    "shift": shift}
    return table


def zero_ev_value(m, kappa):
    return (m * m - 1 - kappa * kappa) / (2.0 * m * kappa)


def check_zero_ev_cond2(s, N, kappa_max=None, include_negative=False, window=10.0):
    """Distances |s - (m^2-1-kappa^2)/(2 m kappa)| for odd m = 3..2N+1.

    kappa runs over 1..kappa_max (and -kappa_max..-1 when include_negative).
    Values with |value| > |s| + window are skipped: for kappa beyond
    m*(|s| + window + 1) the value only moves further away, so the cutoff is
    safe.  Returns (rows, minimum row).
    """
    rows = []
    for m in range(3, 2 * N + 2, 2):
        kmax = kappa_max or int(np.ceil(2 * m * (abs(s) + window + 1))) + 1
        ks = list(range(1, kmax + 1))
        if include_negative:
            ks += [-k for k in ks]
        for kap in ks:
            v = zero_ev_value(m, kap)
            if abs(v) > abs(s) + window:
                continue
            rows.append({"m": m, "kappa": kap, "value": v, "distance": abs(s - v)})
    best = min(rows, key=lambda r: r["distance"]) if rows else {}
    return rows, best


def compute_Dm(s, omega0, m, kappa_max=200):
    """D_m = omega0 * inf over kappa >= 1 with (m - kappa s)^2 >= 1 of
    |sqrt((m - kappa s)^2 - 1) - kappa omega0|.

    For kappa beyond the enumerated range the bracket exceeds
    kappa (omega0 - |s|) - m, which bounds the tail; the range is extended
    until that bound passes the current minimum.
    """
    best, arg = np.inf, None
    kap = 0
    limit = kappa_max
    slope = omega0 - abs(s)
    while True:
        kap += 1
        a = (m - kap * s) ** 2
        if a >= 1:
            val = abs(np.sqrt(a - 1) - kap * omega0)
            if val < best:
                best, arg = val, kap
        if kap >= limit:
            if slope > 0 and np.isfinite(best) and kap * slope - m > best:
                break
            if slope <= 0:
                break
            limit = kap + max(1, kappa_max)
            if limit > 10 ** 6:
                break
    return {"D": float(omega0 * best) if np.isfinite(best) else 0.0, "kappa": arg,
            "kappa_used": kap}


def dominant_exponent(rho, l0, n0, K=32):
    """Fourier exponent carrying the largest coefficient of band n0 (exact for constant media)."""
    pt = bloch_point(rho, l0, n0, K, derivatives=False)
    return int(pt.k[np.argmax(np.abs(pt.f_hat))])


def check_conditions(rho: PeriodicCoefficient, n0, l0, N, K=32, kappa_max=200,
                     include_negative_kappa=False):
    """Full hypothesis report; pass requires positive nd1, nd2 and non-resonance margins."""
    if N < 0:
        raise ValueError("N must be non-negative")
    om = band_omegas(rho, l0, K)
    omega0 = float(om[n0])
    nd1, nd2 = check_nondegeneracy(rho, l0, n0, K)
    s = dominant_exponent(rho, l0, n0, K) + l0
    rep = ConditionReport(n0=n0, l0=l0, N=N, omega0=omega0, s=s, nd1_margin=nd1,
                          nd2_margins=nd2)
    rep.nr_margins = check_nonresonance(rho, n0, l0, N, K, omega0)
    rep.zero_ev_distances, rep.zero_ev_min = check_zero_ev_cond2(
        s, N, include_negative=include_negative_kappa)
    for m in range(1, 2 * N + 2, 2):
        rep.Dm[m] = compute_Dm(s, omega0, m, kappa_max)
    fails = []
    if not nd1 > PASS_TOL:
        fails.append("nd1")
    if not (nd2[0] > PASS_TOL and nd2[1] > PASS_TOL):
        fails.append("nd2")
    for m, v in rep.nr_margins.items():
        if not v["margin"] > PASS_TOL:
            fails.append(f"nr_m{m}")
    rep.failures = fails
    rep.passed = not fails
    return rep
