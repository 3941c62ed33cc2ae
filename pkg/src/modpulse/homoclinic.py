"""Reduced (q0, q1) dynamics and its reversible homoclinic orbit.

The reduced vector field at leading order is

    d_xi q1       = eps^2 Z[0](q0, q1),
    d_xi q0 - q1  = eps^2 Z[1](q0, q1),

where Z is a cubic polynomial in (q0, q1, conj q0, conj q1) built from the
Bloch data.  The homoclinic orbit bifurcating from the NLS soliton is found
on the half line [0, L] with the reversibility conditions Im q0(0) = 0,
Re q1(0) = 0 and continued to [-L, 0] by q0(-xi) = conj q0(xi),
q1(-xi) = -conj q1(xi).
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicHermiteSpline

from . import _fourier as fo
from .bloch import BlochPoint, PeriodicCoefficient
from .envelope import EnvelopeParams, soliton, soliton_derivative
from .spectrum import JordanData


class NewtonError(RuntimeError):
    pass


# Monomials of |P|^2 P with P = q0 f - i q1 g, in the order
# q0^2 cq0, q0^2 cq1, q0 cq0 q1, q0 q1 cq1, cq0 q1^2, q1^2 cq1
_EXPONENTS = np.array([  # powers of (q0, cq0, q1, cq1)
    [2, 1, 0, 0],
    [2, 0, 0, 1],
    [1, 1, 1, 0],
    [1, 0, 1, 1],
    [0, 1, 2, 0],
    [0, 0, 2, 1],
])


def cubic_coefficient_functions(f, g, N):
    """Grid samples of the functions multiplying each monomial in |P|^2 P."""
    fv, gv = fo.to_grid(f, N), fo.to_grid(g, N)
    fc, gc = np.conj(fv), np.conj(gv)
    return [fv * fv * fc, 1j * fv * fv * gc, -2j * fv * fc * gv,
            2 * fv * gv * gc, -gv * gv * fc, -1j * gv * gv * gc]


@dataclass
class ReducedField:
    """Z(q0, q1) = lin @ (q0, q1) + sum_i cubic[:, i] * monomial_i."""

    lin: np.ndarray       # 2x2 complex
    cubic: np.ndarray     # 2x6 complex
    omega0: float
    omega_pp: float
    omega_tilde: float
    cg: float
    gamma: float

    def monomials(self, q0, q1):
        q0 = np.asarray(q0, complex)
        q1 = np.asarray(q1, complex)
        base = [q0, np.conj(q0), q1, np.conj(q1)]
        out = []
        for e in _EXPONENTS:
            t = np.ones_like(q0)
            for b, p in zip(base, e):
                if p:
                    t = t * b ** p
            out.append(t)
        return np.array(out)

    def linear(self, q0, q1):
        return np.array([self.lin[0, 0] * q0 + self.lin[0, 1] * q1,
                         self.lin[1, 0] * q0 + self.lin[1, 1] * q1])

    def cubic_part(self, q0, q1):
        mons = self.monomials(q0, q1)
        return np.tensordot(self.cubic, mons, axes=(1, 0))

    def __call__(self, q0, q1):
        return self.linear(q0, q1) + self.cubic_part(q0, q1)

    def wirtinger(self, q0, q1):
        """dZ/d(q0, q1) and dZ/d(cq0, cq1) as arrays of shape (2, 2, ...)."""
        q0 = np.asarray(q0, complex)
        q1 = np.asarray(q1, complex)
        base = [q0, np.conj(q0), q1, np.conj(q1)]
        d = np.zeros((4, 2) + q0.shape, dtype=complex)   # derivative wrt base var, row
        for i, e in enumerate(_EXPONENTS):
            for v in range(4):
                if e[v] == 0:
                    continue
                t = e[v] * np.ones_like(q0)
                for b, p in zip(base, e):
                    pp = p - 1 if b is base[v] else p
                    if pp:
                        t = t * b ** pp
                for row in range(2):
                    d[v, row] += self.cubic[row, i] * t
        Dq = np.zeros((2, 2) + q0.shape, dtype=complex)
        Dc = np.zeros((2, 2) + q0.shape, dtype=complex)
        for row in range(2):
            Dq[row, 0] = self.lin[row, 0] + d[0, row]
            Dq[row, 1] = self.lin[row, 1] + d[2, row]
            Dc[row, 0] = d[1, row]
            Dc[row, 1] = d[3, row]
        return Dq, Dc

    def to_dict(self):
        return {"lin_re": self.lin.real.tolist(), "lin_im": self.lin.imag.tolist(),
                "cubic_re": self.cubic.real.tolist(), "cubic_im": self.cubic.imag.tolist()}


def reduced_field(jordan: JordanData, point: BlochPoint, r: PeriodicCoefficient, gamma,
                  omega_tilde, N=None):
    """Precompute the explicit leading-order reduced field Z1 as a polynomial.

    Row 0 (the d_xi q1 equation):
      2w~/(w0 w'') [-w0 q0 + i(w0 <f, g> + c_g) q1] - 3 gamma/(w0 w'') <f, r|P|^2 P>
    Row 1 (the d_xi q0 - q1 equation):
      2w~/(w0 w'') [<h, f>(i w0 q0 + c_g q1) + w0 <h, g> q1] - 3 gamma/(w0 w'') <i h, r|P|^2 P>
    with g = d_l f, h = g - i nu f and P = q0 f - i q1 g.
    """
    f, g = point.f_hat, point.dlf_hat
    nu = jordan.nu
    w0, opp, cg = point.omega, point.omega_pp, jordan.op.c
    h = g - 1j * nu * f
    pre = 2 * omega_tilde / (w0 * opp)
    lin = pre * np.array([
        [-w0, 1j * (w0 * fo.inner(f, g) + cg)],
        [1j * w0 * fo.inner(h, f), cg * fo.inner(h, f) + w0 * fo.inner(h, g)],
    ], dtype=complex)
    if N is None:
        N = fo.product_grid_size(point.K, 4, r.harmonics)
    x = fo.grid(N)
    rv = r(x)
    phis = cubic_coefficient_functions(f, g, N)
    fv = fo.to_grid(f, N)
    ihv = 1j * fo.to_grid(h, N)
    cub = np.zeros((2, 6), dtype=complex)
    for i, ph in enumerate(phis):
        cub[0, i] = fo.TWO_PI * np.mean(np.conj(fv) * rv * ph)
        cub[1, i] = fo.TWO_PI * np.mean(np.conj(ihv) * rv * ph)
    cub *= -3 * gamma / (w0 * opp)
    return ReducedField(lin=lin, cubic=cub, omega0=w0, omega_pp=opp, omega_tilde=omega_tilde,
                        cg=cg, gamma=gamma)


def compute_Z1(field: ReducedField, q0, q1):
    """Leading-order reduced field (row 0: d_xi q1, row 1: d_xi q0 - q1)."""
    return field(q0, q1)


def truncated_rhs(field: ReducedField, q0, q1, epsilon):
    """eps^2 Z1(q0, q1): right-hand side of the truncated reduced system."""
    return epsilon ** 2 * field(q0, q1)


def soliton_state(params: EnvelopeParams, xi, epsilon=None):
    """(q0, q1) = (A(eps xi), eps A'(eps xi))."""
    e = params.epsilon if epsilon is None else epsilon
    X = e * np.asarray(xi, dtype=float)
    return soliton(params, X).astype(complex), e * soliton_derivative(params, X, 1).astype(complex)


def soliton_residual(field: ReducedField, params: EnvelopeParams, xi, epsilon):
    """Max-norm residual of the truncated system along the NLS soliton."""
    X = epsilon * np.asarray(xi, dtype=float)
    q0 = soliton(params, X)
    q1 = epsilon * soliton_derivative(params, X, 1)
    dq0 = epsilon * soliton_derivative(params, X, 1)
    dq1 = epsilon ** 2 * soliton_derivative(params, X, 2)
    Z = truncated_rhs(field, q0, q1, epsilon)
    return float(max(np.max(np.abs(dq1 - Z[0])), np.max(np.abs(dq0 - q1 - Z[1]))))


# ----------------------------------------------------------------------------
# boundary value problem on [0, L]
# ----------------------------------------------------------------------------

def _pack(q0, q1):
    return np.stack([q0.real, q0.imag, q1.real, q1.imag], axis=-1)


def _unpack(y):
    return y[..., 0] + 1j * y[..., 1], y[..., 2] + 1j * y[..., 3]


class _System:
    """Real 4-dimensional form of the truncated reduced system."""

    def __init__(self, field: ReducedField, epsilon):
        self.field = field
        self.e2 = epsilon ** 2

    def F(self, y):
        q0, q1 = _unpack(y)
        Z = self.field(q0, q1)
        dq0 = q1 + self.e2 * Z[1]
        dq1 = self.e2 * Z[0]
        return _pack(dq0, dq1)

    def J(self, y):
        """Real Jacobian, shape (..., 4, 4)."""
        q0, q1 = _unpack(y)
        Dq, Dc = self.field.wirtinger(q0, q1)
        shape = q0.shape
        Jc = np.zeros(shape + (4, 4))
        # complex d(out)/d(x_a) = Dq + Dc, d(out)/d(y_a) = i (Dq - Dc)
        for out_row, (zrow, extra) in enumerate([(1, 0), (0, None)]):
            for a in range(2):
                dx = self.e2 * (Dq[zrow, a] + Dc[zrow, a])
                dy = self.e2 * 1j * (Dq[zrow, a] - Dc[zrow, a])
                if out_row == 0 and a == 1:      # dq0 = q1 + ...
                    dx = dx + 1.0
                    dy = dy + 1j
                r = 2 * out_row
                Jc[..., r, 2 * a] = dx.real
                Jc[..., r + 1, 2 * a] = dx.imag
                Jc[..., r, 2 * a + 1] = dy.real
                Jc[..., r + 1, 2 * a + 1] = dy.imag
        return Jc

    def linear_matrix(self):
        """Complex 2x2 linearisation at the origin acting on (q0, q1)."""
        lin = self.field.lin
        return np.array([[self.e2 * lin[1, 0], 1 + self.e2 * lin[1, 1]],
                         [self.e2 * lin[0, 0], self.e2 * lin[0, 1]]])


@dataclass
class HomoclinicOrbit:
    xi_grid: np.ndarray
    q0: np.ndarray
    q1: np.ndarray
    dq0: np.ndarray
    dq1: np.ndarray
    epsilon: float
    proximity: tuple
    decay_rate: float
    reversibility: dict
    newton: dict
    field: ReducedField = field(repr=False, default=None)

    def splines(self):
        return (CubicHermiteSpline(self.xi_grid, self.q0, self.dq0),
                CubicHermiteSpline(self.xi_grid, self.q1, self.dq1))

    def profiles(self):
        """eps-scaled profiles psi = eps q0, phi = eps q1 as callables (xi, nu)."""
        s0, s1 = self.splines()
        e = self.epsilon
        lo, hi = self.xi_grid[0], self.xi_grid[-1]

        def make(s):
            def prof(xi, nu=0):
                xi = np.asarray(xi, dtype=float)
                inside = (xi >= lo) & (xi <= hi)
                out = np.zeros(xi.shape, dtype=complex)
                out[inside] = e * s(xi[inside], nu)
                return out
            return prof
        return make(s0), make(s1)

    def rows(self):
        return [(float(x), float(a.real), float(a.imag), float(b.real), float(b.imag))
                for x, a, b in zip(self.xi_grid, self.q0, self.q1)]

    def report(self):
        return {"epsilon": self.epsilon, "proximity_q0": self.proximity[0],
                "proximity_q1": self.proximity[1], "decay_rate": self.decay_rate,
                "reversibility": self.reversibility, "newton": self.newton,
                "half_length": float(self.xi_grid[-1]), "points": int(len(self.xi_grid))}


def _unstable_left_vector(sysm):
    """Left eigenvector w (complex 2-vector) of the unstable eigenvalue of the linearisation."""
    Ac = sysm.linear_matrix()
    lam, Wl = scipy.linalg.eig(Ac, left=True, right=False)
    j = int(np.argmax(lam.real))
    if not lam[j].real > 0 or not lam[1 - j].real < 0:
        raise NewtonError(f"origin is not hyperbolic: eigenvalues {lam}")
    return Wl[:, j], lam


def _residual(sysm, y, h, w):
    F = sysm.F(y)
    ym = 0.5 * (y[:-1] + y[1:]) + h / 8 * (F[:-1] - F[1:])
    Fm = sysm.F(ym)
    col = y[1:] - y[:-1] - h / 6 * (F[:-1] + 4 * Fm + F[1:])
    q0L, q1L = _unpack(y[-1])
    bc_r = np.conj(w[0]) * q0L + np.conj(w[1]) * q1L
    bc = np.array([y[0, 1], y[0, 2], bc_r.real, bc_r.imag])
    return np.concatenate([bc[:2], col.ravel(), bc[2:]]), F, ym, Fm


def _jacobian(sysm, y, h, w, ym):
    n = len(y)
    Jy = sysm.J(y)
    Jm = sysm.J(ym)
    I = np.eye(4)
    rows, cols, vals = [], [], []

    def put(r0, c0, block):
        rr, cc = np.nonzero(np.ones((4, 4)))
        rows.extend(r0 + rr)
        cols.extend(c0 + cc)
        vals.extend(block[rr, cc])

    # left boundary: Im q0, Re q1 of y_0
    rows += [0, 1]
    cols += [1, 2]
    vals += [1.0, 1.0]
    for i in range(n - 1):
        dFm_dyi = Jm[i] @ (0.5 * I + h / 8 * Jy[i])
        dFm_dyj = Jm[i] @ (0.5 * I - h / 8 * Jy[i + 1])
        Ai = -I - h / 6 * (Jy[i] + 4 * dFm_dyi)
        Bi = I - h / 6 * (Jy[i + 1] + 4 * dFm_dyj)
        put(2 + 4 * i, 4 * i, Ai)
        put(2 + 4 * i, 4 * (i + 1), Bi)
    # right boundary: w^H (q0, q1)(L), real and imaginary parts
    wc = np.conj(w)
    r0 = 2 + 4 * (n - 1)
    c0 = 4 * (n - 1)
    # d/dRe q0 -> wc0, d/dIm q0 -> i wc0, d/dRe q1 -> wc1, d/dIm q1 -> i wc1
    comp = [wc[0], 1j * wc[0], wc[1], 1j * wc[1]]
    for j, v in enumerate(comp):
        rows += [r0, r0 + 1]
        cols += [c0 + j, c0 + j]
        vals += [v.real, v.imag]
    N = 4 * n
    return sp.csc_matrix((vals, (rows, cols)), shape=(N, N))


def refine_homoclinic(field: ReducedField, params: EnvelopeParams, epsilon=None, L=None,
                      h=0.5, tol=1e-11, max_iter=25, max_halvings=6):
    """Newton-collocation solution of the reversible homoclinic BVP.

    Fourth-order Hermite-Simpson collocation on a uniform grid of [0, L]
    (spacing <= h), started from the NLS soliton.  The orbit is returned on
    [-L, L] after reflection.
    """
    e = params.epsilon if epsilon is None else float(epsilon)
    if field.omega_pp * params.gamma_nl <= 0:
        raise ValueError("focusing condition fails")
    Lmin = 30.0 / (e * params.gamma2)
    if L is None:
        L = Lmin
    if L < Lmin - 1e-9:
        raise ValueError(f"half length {L} below 30/(eps gamma2) = {Lmin}")
    if h > 0.5:
        raise ValueError("grid spacing must be <= 0.5")
    n = int(np.ceil(L / h)) + 1
    xi = np.linspace(0.0, L, n)
    hh = xi[1] - xi[0]
    sysm = _System(field, e)
    w, lam = _unstable_left_vector(sysm)
    q0, q1 = soliton_state(params, xi, e)
    y = _pack(q0, q1)
    hist = []
    converged = False
    for it in range(max_iter):
        R, F, ym, Fm = _residual(sysm, y, hh, w)
        rn = float(np.max(np.abs(R)))
        hist.append(rn)
        if rn < tol:
            converged = True
            break
        Jm = _jacobian(sysm, y, hh, w, ym)
        try:
            dy = spla.spsolve(Jm, -R).reshape(y.shape)
        except RuntimeError as exc:
            raise NewtonError(f"singular Newton matrix: {exc}") from exc
        if not np.all(np.isfinite(dy)):
            raise NewtonError("boundary-condition rank deficiency (singular Newton matrix)")
        t = 1.0
        for _ in range(max_halvings + 1):
            yt = y + t * dy
            Rt = _residual(sysm, yt, hh, w)[0]
            if np.max(np.abs(Rt)) < rn or t < 2.0 ** -max_halvings:
                break
            t *= 0.5
        y = yt
    if not converged:
        raise NewtonError(f"Newton did not converge in {max_iter} iterations (residual {hist[-1]:.3e})")
    q0, q1 = _unpack(y)
    F = sysm.F(y)
    dq0, dq1 = _unpack(F)
    # reflection: q0(-xi) = conj q0(xi), q1(-xi) = -conj q1(xi)
    xs = np.concatenate([-xi[:0:-1], xi])
    Q0 = np.concatenate([np.conj(q0[:0:-1]), q0])
    Q1 = np.concatenate([-np.conj(q1[:0:-1]), q1])
    D0 = np.concatenate([-np.conj(dq0[:0:-1]), dq0])
    D1 = np.concatenate([np.conj(dq1[:0:-1]), dq1])
    A = soliton(params, e * xs)
    dA = e * soliton_derivative(params, e * xs, 1)
    prox = (float(np.max(np.abs(Q0 - A))), float(np.max(np.abs(Q1 - dA))))
    rev = {"im_q0_0": float(abs(q0[0].imag)), "re_q1_0": float(abs(q1[0].real)),
           "jump_dq0": float(abs(dq0[0] + np.conj(dq0[0]))),
           "jump_dq1": float(abs(dq1[0] - np.conj(dq1[0])))}
    rate = decay_rate(xi, q0, params.gamma1)
    return HomoclinicOrbit(xi_grid=xs, q0=Q0, q1=Q1, dq0=D0, dq1=D1, epsilon=e, proximity=prox,
                           decay_rate=rate, reversibility=rev,
                           newton={"iterations": len(hist), "residuals": hist,
                                   "linear_eigenvalues": [[complex(v).real, complex(v).imag]
                                                          for v in lam]},
                           field=field)


def decay_rate(xi, q0, amp, lo=1e-3, hi=1e-9):
    """Least-squares slope of -log|q0| over the tail where lo >= |q0|/amp >= hi."""
    a = np.abs(q0) / amp
    m = (a <= lo) & (a >= hi)
    if np.sum(m) < 5:
        return float("nan")
    slope = np.polyfit(xi[m], np.log(a[m]), 1)[0]
    return float(-slope)


def fitted_order(eps, values):
    """Least-squares slope of log(values) against log(eps)."""
    return float(np.polyfit(np.log(eps), np.log(values), 1)[0])
