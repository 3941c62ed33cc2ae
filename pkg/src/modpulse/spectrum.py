"""Spatial-dynamics operators A_m(omega, c) and the m = 1 Jordan structure.

Writing the co-moving pulse as a Fourier series in the carrier phase z,
the m-th harmonic (v_m, w_m = d_xi v_m) obeys d_xi (v, w) = A_m (v, w) + ...,

    A_m = [[0, I], [L_m, M_m]],
    L_m = (1-c^2)^{-1} [-(d_x + i m l0)^2 + rho - m^2 omega^2],
    M_m = 2 (1-c^2)^{-1} [i m c omega - (d_x + i m l0)],

realised here on the Fourier basis |k| <= K.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from . import _fourier as fo
from .bloch import BlochPoint, PeriodicCoefficient

CLASS_TOL = 1e-8
SPURIOUS_MASS = 1e-6


class SpectrumError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpatialOperator:
    m: int
    omega: float
    c: float
    l0: float
    K: int
    L: np.ndarray
    M: np.ndarray
    matrix: np.ndarray
    rho: PeriodicCoefficient

    @property
    def n(self):
        return 2 * self.K + 1

    @property
    def k(self):
        return fo.wavenumbers(self.K)

    def B(self, omega_shifted=None):
        """Perturbation block [[0, 0], [-m^2 (omega' + omega), 2 i m c]] for omega' = omega + eps^2 w~."""
        if omega_shifted is None:
            omega_shifted = self.omega
        n = self.n
        out = np.zeros((2 * n, 2 * n), dtype=complex)
        out[n:, :n] = -self.m ** 2 * (omega_shifted + self.omega) * np.eye(n)
        out[n:, n:] = 2j * self.m * self.c * np.eye(n)
        return out

    def apply(self, Y):
        """A_m Y computed blockwise (independent of the assembled matrix)."""
        n = self.n
        v, w = Y[:n], Y[n:]
        s = 1.0 / (1 - self.c ** 2)
        a = self.k + self.m * self.l0
        conv = fo.multiply(v, weight=self.rho, K=self.K) if not self.rho.is_constant \
            else self.rho.cos_coeffs[0] * v
        Lv = s * (a ** 2 * v + conv - self.m ** 2 * self.omega ** 2 * v)
        Mw = 2 * s * (1j * self.m * self.c * self.omega * w - 1j * a * w)
        return np.concatenate([w, Lv + Mw])

    def adjoint(self):
        return self.matrix.conj().T


def assemble_Am(rho: PeriodicCoefficient, m, omega, c, l0, K=32):
    if abs(c) >= 1 - 1e-10:
        raise ValueError(f"|c| = {abs(c)} must be < 1")
    if m < 1 or m % 2 == 0:
        raise ValueError("m must be an odd positive integer")
    n = 2 * K + 1
    k = fo.wavenumbers(K)
    a = k + m * l0
    s = 1.0 / (1 - c ** 2)
    L = s * (np.diag(a ** 2).astype(complex) + rho.conv_matrix(K) - m * m * omega ** 2 * np.eye(n))
    M = 2 * s * np.diag(1j * m * c * omega - 1j * a)
    A = np.zeros((2 * n, 2 * n), dtype=complex)
    A[:n, n:] = np.eye(n)
    A[n:, :n] = L
    A[n:, n:] = M
    return SpatialOperator(m=m, omega=float(omega), c=float(c), l0=float(l0), K=K, L=L, M=M,
                           matrix=A, rho=rho)


@dataclass
class Spectrum:
    values: np.ndarray          # eigenvalues (defective clusters merged to their centroid)
    multiplicity: np.ndarray    # algebraic multiplicity of each entry
    classes: list               # 'center' | 'stable' | 'unstable'
    vectors: np.ndarray         # one eigenvector per entry (columns)
    pair_residual: np.ndarray   # ||A V - lambda V|| / ||V|| per raw eigenpair (kept ones)
    scalar_residual: np.ndarray # scalar dispersion residual per entry
    dropped: int                # eigenvalues discarded as truncation artefacts

    def expanded(self):
        """Eigenvalues repeated by multiplicity."""
        return np.repeat(self.values, self.multiplicity)

    def rows(self, m):
        return [(m, float(v.real), float(v.imag), c, int(mu))
                for v, c, mu in zip(self.values, self.classes, self.multiplicity)]


def classify(lam, tol=CLASS_TOL):
    if lam.real > tol:
        return "unstable"
    if lam.real < -tol:
        return "stable"
    return "center"


def scalar_residual(op: SpatialOperator, lam, V):
    """Residual of [-(d_x + i m l0 + lam)^2 + rho - (m omega - i c lam)^2] V = 0."""
    a = op.k + op.m * op.l0
    R = op.rho.conv_matrix(op.K)
    r = (a ** 2 - 2j * a * lam - lam ** 2) * V + R @ V - (op.m * op.omega - 1j * op.c * lam) ** 2 * V
    return float(np.linalg.norm(r) / (np.linalg.norm(V) * max(1.0, abs(lam) ** 2)))


def spectrum(op: SpatialOperator, cluster_tol=1e-6, top_fraction=0.1):
    """Eigenvalues of A_m with classification.

    Eigenvectors whose V-block carries more than SPURIOUS_MASS of its mass in
    the outermost Fourier modes are dropped as truncation artefacts.  Nearly
    equal eigenvalues with nearly parallel eigenvectors (a numerically split
    Jordan block) are merged into their centroid with multiplicity 2.
    """
    try:
        lam, W = scipy.linalg.eig(op.matrix)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SpectrumError(f"eigensolver failed: {exc}") from exc
    n = op.n
    ntop = max(2, int(np.ceil(top_fraction * n / 2)))
    top = np.zeros(n, bool)
    top[:ntop] = top[-ntop:] = True
    keep = []
    for j in range(len(lam)):
        V = W[:n, j]
        mass = np.sum(np.abs(V[top]) ** 2) / max(np.sum(np.abs(V) ** 2), 1e-300)
        if mass < SPURIOUS_MASS:
            keep.append(j)
    dropped = len(lam) - len(keep)
    lam, W = lam[keep], W[:, keep]
    W = W / np.linalg.norm(W, axis=0)
    pair_res = np.linalg.norm(op.matrix @ W - W * lam, axis=0)

    used = np.zeros(len(lam), bool)
    vals, mult, vecs = [], [], []
    order = np.argsort(lam.imag + 1e-3 * lam.real)
    for j in order:
        if used[j]:
            continue
        used[j] = True
        group = [j]
        for i in order:
            if used[i]:
                continue
            close = abs(lam[i] - lam[j]) < cluster_tol * max(1.0, abs(lam[j]))
            parallel = abs(np.vdot(W[:, i], W[:, j])) > 1 - 1e-4
            if close and parallel:
                group.append(i)
                used[i] = True
        vals.append(np.mean(lam[group]))
        mult.append(len(group))
        vecs.append(W[:, group[0]])
    vals = np.array(vals)
    vecs = np.array(vecs).T if vecs else np.zeros((2 * n, 0), complex)
    sres = np.array([scalar_residual(op, v, vecs[:n, i]) for i, v in enumerate(vals)])
    return Spectrum(values=vals, multiplicity=np.array(mult, int),
                    classes=[classify(v) for v in vals], vectors=vecs,
                    pair_residual=pair_res, scalar_residual=sres, dropped=dropped)


def closed_form_eigenvalues(m, s, omega0, kappa_range):
    """Constant-medium eigenvalues lambda = -i kappa w0^2 +- i w0 sqrt((m - kappa s)^2 - 1).

    s = n0 + l0.  Negative radicands give a pair symmetric about the
    imaginary axis.  Returns a list of (lambda, kappa, class).
    """
    out = []
    for kap in kappa_range:
        rad = (m - kap * s) ** 2 - 1
        root = np.sqrt(complex(rad))
        for sign in (1, -1):
            lam = -1j * kap * omega0 ** 2 + sign * 1j * omega0 * root
            if rad >= 0:
                lam = complex(0.0, lam.imag)
            out.append((lam, kap, classify(lam)))
    return out


def hausdorff_one_sided(ref, numeric):
    """max over ref of the distance to the nearest point of numeric."""
    ref = np.asarray(ref, complex)
    numeric = np.asarray(numeric, complex)
    if len(ref) == 0:
        return 0.0
    return float(np.max(np.min(np.abs(ref[:, None] - numeric[None, :]), axis=1)))


def reversibility_defect(values):
    """Set distance between the spectrum and its image under lambda -> -conj(lambda)."""
    v = np.asarray(values, complex)
    w = -np.conj(v)
    return max(hausdorff_one_sided(v, w), hausdorff_one_sided(w, v))


# ----------------------------------------------------------------------------
# Jordan chain of A_1 at the double zero
# ----------------------------------------------------------------------------

def pair(a, b):
    """<<a, b>> = <a1, b1> + <a2, b2> on stacked coefficient vectors."""
    return fo.TWO_PI * np.vdot(a, b)


@dataclass
class JordanData:
    F0: np.ndarray
    F1: np.ndarray
    G0: np.ndarray
    G1: np.ndarray
    nu: complex
    nu_closed_form: complex
    dualities: np.ndarray
    residuals: dict
    op: SpatialOperator
    point: BlochPoint

    def project(self, psi):
        return projector_Pi(self, psi)

    def projector_matrix(self):
        return (np.eye(len(self.F0), dtype=complex)
                - fo.TWO_PI * (np.outer(self.F1, self.G0.conj()) + np.outer(self.F0, self.G1.conj())))

    def to_dict(self):
        d = {"nu": [self.nu.real, self.nu.imag],
             "nu_closed_form": [self.nu_closed_form.real, self.nu_closed_form.imag],
             "dualities_re": self.dualities.real.tolist(),
             "dualities_im": self.dualities.imag.tolist()}
        d.update({k: float(v) for k, v in self.residuals.items()})
        return d


def nu_closed_form(point: BlochPoint, cg, omega_pp):
    """2i/(w0 w'') [(1-c^2) Re<f, g> - (c w0 - l0)||g||^2 - Im<d_x g, g>]."""
    f, g = point.f_hat, point.dlf_hat
    w0, l0 = point.omega, point.l
    bracket = ((1 - cg ** 2) * fo.inner(f, g).real - (cg * w0 - l0) * fo.inner(g, g).real
               - fo.inner(fo.deriv(g), g).imag)
    return complex(2j / (w0 * omega_pp) * bracket)


def jordan_chain_m1(op: SpatialOperator, point: BlochPoint):
    """F0, F1, G0, G1 and nu for the double zero eigenvalue of A_1(omega0, c_g)."""
    if op.m != 1:
        raise ValueError("Jordan chain is defined for m = 1")
    if point.omega_pp is None or abs(point.omega_pp) < 1e-14:
        raise SpectrumError("omega'' vanishes; G0 normalisation singular")
    if point.K != op.K:
        raise ValueError("Bloch point and operator use different truncations")
    f, g = point.f_hat, point.dlf_hat
    c, w0, opp = op.c, point.omega, point.omega_pp
    a = op.k + op.l0
    D = 1j * c * w0 - 1j * a                 # symbol of i c w0 - (d_x + i l0)
    F0 = np.concatenate([f, np.zeros_like(f)])
    F1 = np.concatenate([-1j * g, f])
    G0 = np.concatenate([2 * D * f, (1 - c ** 2) * f]) / (w0 * opp)
    pref = (1 - c ** 2) / (w0 * opp)
    G1_0 = pref * np.concatenate([f + 2j / (1 - c ** 2) * D * g, 1j * g])
    # nu makes <G1, F1> = 0; <G0, F1> = 1 so <G1_0 + nu G0, F1> = <G1_0, F1> + conj(nu)
    nu = -np.conj(pair(G1_0, F1))
    nu_cf = nu_closed_form(point, c, opp)
    G1 = G1_0 + nu * G0
    A = op.matrix
    As = op.adjoint()
    dual = np.array([[pair(G0, F0), pair(G0, F1)], [pair(G1, F0), pair(G1, F1)]])
    res = {
        "A1F0": np.linalg.norm(A @ F0),
        "A1F1_minus_F0": np.linalg.norm(A @ F1 - F0),
        "A1adjG0": np.linalg.norm(As @ G0),
        "A1adjG1_minus_G0": np.linalg.norm(As @ G1 - G0),
        "duality_defect": np.max(np.abs(dual - np.array([[0, 1], [1, 0]]))),
        "nu_closed_form_gap": abs(nu - nu_cf),
    }
    return JordanData(F0=F0, F1=F1, G0=G0, G1=G1, nu=complex(nu), nu_closed_form=nu_cf,
                      dualities=dual, residuals=res, op=op, point=point)


def projector_Pi(jd: JordanData, psi):
    """Pi psi = psi - <G0, psi> F1 - <G1, psi> F0."""
    return psi - pair(jd.G0, psi) * jd.F1 - pair(jd.G1, psi) * jd.F0


def deflated_solve(jd: JordanData, rhs):
    """Solve Pi A1 Pi S = rhs with Pi S = S via the bordered system.

    [[A1, F0, F1], [2pi G0^H, 0, 0], [2pi G1^H, 0, 0]] (S, a, b) = (rhs, 0, 0).
    """
    A = jd.op.matrix
    N = A.shape[0]
    B = np.zeros((N + 2, N + 2), dtype=complex)
    B[:N, :N] = A
    B[:N, N] = jd.F0
    B[:N, N + 1] = jd.F1
    B[N, :N] = fo.TWO_PI * jd.G0.conj()
    B[N + 1, :N] = fo.TWO_PI * jd.G1.conj()
    r = np.concatenate([rhs, [0, 0]])
    try:
        sol = scipy.linalg.solve(B, r)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SpectrumError(f"deflated system singular: {exc}") from exc
    return sol[:N]


def range_basis(jd: JordanData):
    """Orthonormal basis of range(Pi) = span(G0, G1)^perp."""
    C = np.vstack([jd.G0.conj(), jd.G1.conj()])
    return scipy.linalg.null_space(C)


def resolvent_health(ops, jd: Optional[JordanData] = None, zero_tol=1e-10):
    """Smallest singular values of A_m (m >= 3) and of Pi A1 Pi on range(Pi).

    Returns a dict with per-m sigma_min and inverse norms, the number of
    numerically zero singular values removed by the deflation, and the
    estimate C0 = max inverse norm.
    """
    out = {"sigma_min": {}, "inverse_norm": {}}
    for op in ops:
        if op.m == 1:
            continue
        s = scipy.linalg.svdvals(op.matrix)
        out["sigma_min"][op.m] = float(s[-1])
        out["inverse_norm"][op.m] = float(1 / s[-1]) if s[-1] > 0 else float("inf")
    if jd is not None:
        A = jd.op.matrix
        P = jd.projector_matrix()
        s_full = scipy.linalg.svdvals(P @ A @ P)
        scale = max(1.0, s_full[0])
        out["removed_zero_singular_values"] = int(np.sum(s_full < zero_tol * scale * 1e3))
        Q = range_basis(jd)
        s_def = scipy.linalg.svdvals(Q.conj().T @ A @ Q)
        out["sigma_min"][1] = float(s_def[-1])
        out["inverse_norm"][1] = float(1 / s_def[-1])
    vals = list(out["sigma_min"].values())
    out["flagged"] = [m for m, v in out["sigma_min"].items() if v < zero_tol]
    out["C0"] = float(max(out["inverse_norm"].values())) if vals else float("nan")
    return out
