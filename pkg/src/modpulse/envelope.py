"""NLS envelope of a Bloch wave packet.

A wave packet eps*A(eps(x - c_g t), eps^2 t) f(x) exp(i(l0 x - omega0 t)) + c.c.
has an envelope governed by

    2i A_T + omega'' A_XX + gamma_nl |A|^2 A = 0,
    gamma_nl = (3 gamma / omega0) * int_0^{2pi} r |f|^4 dx.

With A = exp(-i omega_t T) A(X) the profile solves the stationary equation

    -omega0 omega'' A'' - 2 omega0 omega_t A = omega0 gamma_nl A^3,

whose sech solution A = gamma1 sech(gamma2 X) has
gamma2 = sqrt(2|omega_t|/|omega''|) and gamma1 = sqrt(4|omega_t|/|gamma_nl|).
"""
from dataclasses import dataclass, asdict

import numpy as np

from . import _fourier as fo
from .bloch import BlochPoint, PeriodicCoefficient


class FocusingError(ValueError):
    """The band curvature and nonlinearity have opposite signs (no bright soliton)."""


def nonlinear_coefficient(point: BlochPoint, r: PeriodicCoefficient, gamma, N=None):
    """gamma_nl = (3 gamma / omega0) * int r |f|^4 dx (periodic trapezoid rule)."""
    if N is None:
        N = fo.product_grid_size(point.K, 4, r.harmonics)
    N = max(int(N), 1024)
    x = fo.grid(N)
    f = fo.to_grid(point.f_hat, N)
    integral = fo.TWO_PI * np.mean(r(x) * np.abs(f) ** 4)
    return float(3.0 * gamma * integral / point.omega)


@dataclass(frozen=True)
class EnvelopeParams:
    n0: int
    l0: float
    omega0: float
    cg: float
    omega_pp: float
    gamma: float
    gamma_nl: float
    omega_tilde: float
    gamma1: float
    gamma2: float
    epsilon: float

    @property
    def omega(self):
        """Carrier frequency of the pulse, omega0 + omega_tilde eps^2."""
        return self.omega0 + self.omega_tilde * self.epsilon ** 2

    def to_dict(self):
        return asdict(self)


def envelope_params(point: BlochPoint, r: PeriodicCoefficient, gamma, epsilon=0.1):
    """Envelope constants for the bright NLS soliton at a Bloch point."""
    if gamma not in (1, -1):
        raise ValueError("gamma must be +1 or -1")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if point.omega_pp is None or point.cg is None:
        raise ValueError("Bloch point lacks band derivatives")
    gnl = nonlinear_coefficient(point, r, gamma)
    opp = point.omega_pp
    if not opp * gnl > 0:
        raise FocusingError(f"defocusing configuration: omega''={opp:.4g}, gamma_nl={gnl:.4g}")
    wt = -float(np.sign(opp))
    g1 = np.sqrt(4 * abs(wt) / abs(gnl))
    g2 = np.sqrt(2 * abs(wt) / abs(opp))
    return EnvelopeParams(n0=point.n, l0=point.l, omega0=point.omega, cg=point.cg,
                          omega_pp=opp, gamma=float(gamma), gamma_nl=gnl, omega_tilde=wt,
                          gamma1=float(g1), gamma2=float(g2), epsilon=float(epsilon))


def soliton(params: EnvelopeParams, X):
    X = np.asarray(X, dtype=float)
    return params.gamma1 / np.cosh(params.gamma2 * X)


def soliton_derivative(params, X, order=1):
    """Derivatives of gamma1 sech(gamma2 X) up to order 2."""
    X = np.asarray(X, dtype=float)
    s = 1 / np.cosh(params.gamma2 * X)
    t = np.tanh(params.gamma2 * X)
    g1, g2 = params.gamma1, params.gamma2
    if order == 0:
        return g1 * s
    if order == 1:
        return -g1 * g2 * s * t
    if order == 2:
        return g1 * g2 ** 2 * (s - 2 * s ** 3)
    raise ValueError("order must be 0, 1 or 2")


# eighth-order centred stencil for the second derivative
_D2_STENCIL = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72,
                        8 / 5, -1 / 5, 8 / 315, -1 / 560])


def stationary_nls_residual(params: EnvelopeParams, A, X):
    """Max-norm residual of the stationary NLS on a uniform grid (interior points)."""
    A = np.asarray(A)
    X = np.asarray(X, dtype=float)
    if A.shape != X.shape or A.ndim != 1 or len(X) < 16:
        raise ValueError("A and X must be matching 1-D samples")
    h = np.diff(X)
    if not np.allclose(h, h[0], rtol=1e-10):
        raise ValueError("X grid must be uniform")
    h = h[0]
    scale = max(1.0, float(np.max(np.abs(A))))
    if max(abs(A[0]), abs(A[-1])) > 1e-12 * scale:
        raise ValueError("grid too narrow: profile does not vanish at the ends")
    w = len(_D2_STENCIL) // 2
    d2 = sum(c * A[i:len(A) - 2 * w + i] for i, c in enumerate(_D2_STENCIL)) / h ** 2
    a = A[w:-w]
    p = params
    res = -p.omega0 * p.omega_pp * d2 - 2 * p.omega0 * p.omega_tilde * a \
        - p.omega0 * p.gamma_nl * np.abs(a) ** 2 * a
    return float(np.max(np.abs(res)))


def build_h_app(params: EnvelopeParams, point: BlochPoint, xi, z, x):
    """h_app = eps gamma1 sech(eps gamma2 xi) f(x) e^{iz} + c.c. (broadcast over xi, z, x)."""
    xi, z, x = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (xi, z, x)))
    eps = params.epsilon
    amp = eps * soliton(params, eps * xi)
    f = fo.evaluate(point.f_hat, x)
    return 2.0 * np.real(amp * f * np.exp(1j * z))


def build_h(point: BlochPoint, psi, phi, z, x):
    """h = (psi f - i phi d_l f) e^{iz} + c.c. for sampled psi, phi (already eps-scaled)."""
    psi, phi, z, x = np.broadcast_arrays(np.asarray(psi), np.asarray(phi),
                                         np.asarray(z, dtype=float), np.asarray(x, dtype=float))
    f = fo.evaluate(point.f_hat, x)
    g = fo.evaluate(point.dlf_hat, x)
    return 2.0 * np.real((psi * f - 1j * phi * g) * np.exp(1j * z))


def smoothstep_taper(xi, xi_max, width):
    """C^2 window: 1 on |xi| <= xi_max, quintic decay to 0 over `width`. Returns (chi, chi')."""
    a = np.abs(np.asarray(xi, dtype=float))
    s = np.clip((a - xi_max) / width, 0.0, 1.0)
    chi = 1 - s ** 3 * (10 - 15 * s + 6 * s ** 2)
    dchi_ds = -30 * s ** 2 * (1 - s) ** 2
    dchi = dchi_ds / width * np.sign(xi)
    return chi, dchi


class SolitonProfiles:
    """Leading-order profiles psi = eps A(eps xi), phi = eps^2 A'(eps xi)."""

    def __init__(self, params: EnvelopeParams):
        self.params = params

    def psi(self, xi, nu=0):
        e = self.params.epsilon
        return e * e ** nu * soliton_derivative(self.params, e * np.asarray(xi), nu)

    def phi(self, xi, nu=0):
        e = self.params.epsilon
        return e ** 2 * e ** nu * soliton_derivative(self.params, e * np.asarray(xi), nu + 1)


def check_periodic_grid(x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) < 4:
        raise ValueError("x grid must be 1-D")
    dx = x[1] - x[0]
    if not np.allclose(np.diff(x), dx, rtol=1e-9):
        raise ValueError("x grid must be uniform")
    L = dx * len(x)
    Q = L / fo.TWO_PI
    if abs(Q - round(Q)) > 1e-9 * max(1.0, Q) or round(Q) < 1:
        raise ValueError(f"domain length {L:.6g} is not an integer multiple of 2*pi")
    return float(dx), int(round(Q))


def build_initial_data(params: EnvelopeParams, point: BlochPoint, psi, phi, x,
                       center=None, xi_max=None, taper_width=None):
    """Wave-equation data (u0, u1) from the two-mode profile.

    psi, phi are callables psi(xi, nu) returning the nu-th derivative of the
    eps-scaled amplitudes of f and -i d_l f.  With
    v = (psi f - i phi d_l f) e^{iz} + c.c. we return u0 = v(x, l0 x, x) and
    u1 = -c_g d_xi v - omega d_z v at the same points, where xi = x - center.
    Beyond |xi| > xi_max the amplitudes are tapered to zero by a C^2 window.
    """
    x = np.asarray(x, dtype=float)
    dx, _ = check_periodic_grid(x)
    L = dx * len(x)
    if center is None:
        center = x[0] + L / 2
    xi = x - center
    xi = (xi + L / 2) % L - L / 2
    if taper_width is None:
        taper_width = 1.0 / (params.epsilon * params.gamma2)
    if xi_max is None:
        xi_max = L / 2 - taper_width
    if xi_max <= 0:
        raise ValueError("domain too short for the requested taper")
    chi, dchi = smoothstep_taper(xi, xi_max, taper_width)
    a0, a1 = psi(xi, 0), psi(xi, 1)
    b0, b1 = phi(xi, 0), phi(xi, 1)
    P = chi * a0
    dP = dchi * a0 + chi * a1
    Q = chi * b0
    dQ = dchi * b0 + chi * b1
    f = fo.evaluate(point.f_hat, x)
    g = fo.evaluate(point.dlf_hat, x) if point.dlf_hat is not None else np.zeros_like(f)
    carrier = np.exp(1j * params.l0 * x)
    amp = P * f - 1j * Q * g
    damp = dP * f - 1j * dQ * g
    u0 = 2 * np.real(amp * carrier)
    dv_dxi = 2 * np.real(damp * carrier)
    dv_dz = 2 * np.real(1j * amp * carrier)
    u1 = -params.cg * dv_dxi - params.omega * dv_dz
    return u0, u1
