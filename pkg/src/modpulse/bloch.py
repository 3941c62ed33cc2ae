"""Bloch bands of the periodic Klein-Gordon operator.

For a 2pi-periodic, even and positive coefficient rho we solve

    [-(d/dx + i l)^2 + rho(x)] f = omega^2 f,   f 2pi-periodic,

by Fourier-Galerkin truncation to |k| <= K, and compute the band slope
(group velocity), the band curvature and the l-derivative of the Bloch
function from the Hellmann-Feynman identities.
"""
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from . import _fourier as fo

DEGENERACY_TOL = 1e-8
POSITIVITY_GRID = 1024


class BlochError(RuntimeError):
    """Numerical failure inside the band solver."""


class DegenerateBandError(BlochError):
    """The requested band is not simple (nearest band closer than the tolerance)."""


@dataclass(frozen=True)
class PeriodicCoefficient:
    """An even, positive, 2pi-periodic function sum_k c_k cos(k x)."""

    cos_coeffs: tuple
    label: str = ""
    rho0: float = field(init=False)

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.cos_coeffs, dtype=float))
        if c.ndim != 1 or len(c) == 0:
            raise ValueError("cos_coeffs must be a non-empty list of reals")
        if not np.all(np.isfinite(c)):
            raise ValueError("cos_coeffs must be finite")
        # drop trailing zero harmonics so the bandwidth is honest
        nz = np.nonzero(c)[0]
        c = c[: (nz[-1] + 1 if len(nz) else 1)]
        object.__setattr__(self, "cos_coeffs", tuple(float(v) for v in c))
        vals = self(fo.grid(POSITIVITY_GRID))
        lo = float(vals.min())
        if lo <= 0.0:
            raise ValueError(f"coefficient '{self.label}' is not strictly positive (min {lo:.3g})")
        object.__setattr__(self, "rho0", lo)

    @classmethod
    def constant(cls, value=1.0, label="const"):
        return cls((float(value),), label)

    @property
    def harmonics(self):
        return len(self.cos_coeffs) - 1

    @property
    def is_constant(self):
        return self.harmonics == 0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k, c in enumerate(self.cos_coeffs):
            out = out + c * np.cos(k * x)
        return out

    def exp_coeffs(self, K):
        """Coefficients over exp(i k x), |k| <= K (rho_hat_0 = c_0, rho_hat_{+-j} = c_j/2)."""
        out = np.zeros(2 * K + 1)
        out[K] = self.cos_coeffs[0]
        for j, c in enumerate(self.cos_coeffs[1:], start=1):
            if j <= K:
                out[K + j] = out[K - j] = 0.5 * c
        return out

    def conv_matrix(self, K):
        """Matrix T with T[j, k] = rho_hat_{j-k} acting on |k| <= K coefficients."""
        Kc = self.harmonics
        if Kc > 2 * K:
            raise ValueError(f"truncation K={K} too small for a coefficient with {Kc} harmonics")
        full = self.exp_coeffs(2 * K)
        col = full[2 * K:]          # rho_hat_0 .. rho_hat_{2K}
        return scipy.linalg.toeplitz(col, col)

    def to_dict(self):
        return {"cos_coeffs": list(self.cos_coeffs), "label": self.label}


@dataclass(frozen=True)
class BlochPoint:
    """One gauge-fixed Bloch eigenpair with its band derivatives."""

    l: float
    n: int
    omega: float
    f_hat: np.ndarray
    rho: PeriodicCoefficient
    gap: float = np.inf
    dlf_hat: Optional[np.ndarray] = None
    cg: Optional[float] = None
    omega_pp: Optional[float] = None
    gauge: str = "max-coeff-real-positive"

    @property
    def K(self):
        return fo.size_to_K(len(self.f_hat))

    @property
    def k(self):
        return fo.wavenumbers(self.K)

    def matrix(self):
        return assemble_bloch_matrix(self.rho, self.l, self.K)


def _check_l(l):
    if not (-0.5 < l <= 0.5 + 1e-14):
        raise ValueError(f"quasimomentum l={l} outside (-1/2, 1/2]")


def reduce_quasimomentum(l):
    """Map l to the Brillouin zone (-1/2, 1/2]; returns (l_red, shift) with l = l_red + shift."""
    shift = np.ceil(l - 0.5)
    lr = l - shift
    if lr <= -0.5:
        lr += 1.0
        shift -= 1.0
    return float(lr), int(shift)


def assemble_bloch_matrix(rho, l, K):
    """Hermitian matrix with entries (k+l)^2 delta_jk + rho_hat_{j-k}, |j|,|k| <= K."""
    if K < 1:
        raise ValueError("K must be at least 1")
    _check_l(l)
    k = fo.wavenumbers(K)
    H = rho.conv_matrix(K).astype(complex)
    H[np.diag_indices_from(H)] += (k + l) ** 2
    return H


def fix_gauge(v):
    """Rotate v so its largest-modulus entry is real positive."""
    j = np.argmax(np.abs(v))
    return v * (np.abs(v[j]) / v[j])


def solve_bands(matrix):
    """Eigenpairs of a Bloch matrix as (omega, f_hat), ascending in omega.

    Eigenvectors are normalized so that 2*pi*sum|f_hat|^2 = 1 and gauge-fixed.
    """
    H = np.asarray(matrix)
    if not np.allclose(H, H.conj().T, atol=1e-12 * max(1.0, np.abs(H).max())):
        raise ValueError("Bloch matrix is not Hermitian")
    try:
        lam, V = scipy.linalg.eigh(H)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise BlochError(f"eigensolver failed: {exc}") from exc
    if lam[0] <= 0:
        raise BlochError("non-positive Bloch eigenvalue; coefficient not positive")
    out = []
    for j in range(len(lam)):
        v = fix_gauge(V[:, j]) / np.sqrt(fo.TWO_PI)
        out.append((float(np.sqrt(lam[j])), v))
    return out


def band_gaps(omegas):
    om = np.asarray(omegas)
    gaps = np.full(len(om), np.inf)
    d = np.diff(om)
    gaps[:-1] = d
    gaps[1:] = np.minimum(gaps[1:], d)
    return gaps


def group_velocity(point):
    """c_g = (l - <f, i f'>)/omega = 2*pi*sum (k+l)|f_k|^2 / omega."""
    _require_simple(point)
    f = point.f_hat
    w = fo.TWO_PI * np.sum((point.k + point.l) * np.abs(f) ** 2)
    return float(w / (point.omega * fo.TWO_PI * np.sum(np.abs(f) ** 2)))


def _require_simple(point):
    if not point.gap > DEGENERACY_TOL:
        raise DegenerateBandError(
            f"band n={point.n} at l={point.l} is within {point.gap:.2e} of a neighbour")


def dl_eigenfunction(point, cg=None):
    """Coefficients of d_l f solving the bordered system with <f, d_l f> = 0."""
    _require_simple(point)
    if cg is None:
        cg = group_velocity(point)
    f = point.f_hat
    H = point.matrix()
    n = len(f)
    B = np.zeros((n + 1, n + 1), dtype=complex)
    B[:n, :n] = H - point.omega ** 2 * np.eye(n)
    B[:n, n] = f
    B[n, :n] = np.conj(f)
    rhs = np.zeros(n + 1, dtype=complex)
    rhs[:n] = 2 * point.omega * cg * f - 2 * (point.k + point.l) * f
    try:
        sol = scipy.linalg.solve(B, rhs)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise DegenerateBandError(f"bordered system singular: {exc}") from exc
    if not np.all(np.isfinite(sol)):
        raise DegenerateBandError("bordered system singular")
    return sol[:n]


def bloch2_residual(point, dlf=None, cg=None):
    """Max-norm residual of [H - omega^2] d_l f - (2 omega c_g f + 2i(d/dx + il) f)."""
    if dlf is None:
        dlf = point.dlf_hat
    if cg is None:
        cg = point.cg if point.cg is not None else group_velocity(point)
    f = point.f_hat
    H = point.matrix()
    lhs = H @ dlf - point.omega ** 2 * dlf
    rhs = 2 * point.omega * cg * f - 2 * (point.k + point.l) * f
    return float(np.max(np.abs(lhs - rhs)))


def omega_second_derivative(point, cg=None, dlf=None):
    """Band curvature from the second Hellmann-Feynman identity.

    omega'' = [1 - c_g^2 - 2(omega c_g - l)<f, d_l f> - 2<f, i d_x d_l f>] / omega
    """
    _require_simple(point)
    if cg is None:
        cg = point.cg if point.cg is not None else group_velocity(point)
    if dlf is None:
        dlf = point.dlf_hat if point.dlf_hat is not None else dl_eigenfunction(point, cg)
    f = point.f_hat
    fg = fo.inner(f, dlf)
    fidg = fo.inner(f, 1j * fo.deriv(dlf))
    val = (1 - cg ** 2 - 2 * (point.omega * cg - point.l) * fg - 2 * fidg) / point.omega
    return float(val.real)


def bloch_point(rho, l, n=0, K=32, derivatives=True):
    """Solve at quasimomentum l and return band n (0-based, ascending) with derivatives."""
    H = assemble_bloch_matrix(rho, l, K)
    bands = solve_bands(H)
    if not 0 <= n < len(bands) - 1:
        raise ValueError(f"band index {n} out of range for K={K}")
    gaps = band_gaps([b[0] for b in bands])
    om, f = bands[n]
    pt = BlochPoint(l=float(l), n=int(n), omega=om, f_hat=f, rho=rho, gap=float(gaps[n]))
    if not derivatives:
        return pt
    cg = group_velocity(pt)
    g = dl_eigenfunction(pt, cg)
    pt = replace(pt, cg=cg, dlf_hat=g)
    return replace(pt, omega_pp=omega_second_derivative(pt))


def band_omegas(rho, l, K=32, nbands=None):
    """Sorted band frequencies at (possibly out-of-zone) quasimomentum l."""
    lr, _ = reduce_quasimomentum(l)
    lam = scipy.linalg.eigvalsh(assemble_bloch_matrix(rho, lr, K))
    om = np.sqrt(lam)
    return om if nbands is None else om[:nbands]


def track_bands(rho, ls: Sequence[float], nbands=4, K=32):
    """Bands over an l-grid, re-indexed by eigenvector overlap between neighbouring points.

    Returns an array omega[i, b] where column b follows one band continuously
    through near-crossings.  The first point uses magnitude ordering.
    """
    ls = np.asarray(ls, dtype=float)
    out = np.zeros((len(ls), nbands))
    prev = None
    for i, l in enumerate(ls):
        lam, V = scipy.linalg.eigh(assemble_bloch_matrix(rho, l, K))
        om = np.sqrt(lam)
        if prev is None:
            order = np.arange(nbands)
        else:
            ov = np.abs(prev.conj().T @ V[:, : nbands + 2])
            order = np.full(nbands, -1)
            taken = set()
            for b in np.argsort(-ov.max(axis=1)):
                cand = [c for c in np.argsort(-ov[b]) if c not in taken]
                order[b] = cand[0]
                taken.add(cand[0])
        out[i] = om[order]
        prev = V[:, order]
    return out


def band_table(rho, ls, nbands=4, K=32):
    """Rows (l, n, omega, cg, omega_pp) for each l and band; derivatives NaN at degeneracies."""
    rows = []
    for l in ls:
        H = assemble_bloch_matrix(rho, l, K)
        bands = solve_bands(H)
        gaps = band_gaps([b[0] for b in bands])
        for n in range(nbands):
            pt = BlochPoint(l=float(l), n=n, omega=bands[n][0], f_hat=bands[n][1], rho=rho,
                            gap=float(gaps[n]))
            try:
                cg = group_velocity(pt)
                pt = replace(pt, cg=cg, dlf_hat=dl_eigenfunction(pt, cg))
                opp = omega_second_derivative(pt)
            except DegenerateBandError:
                cg, opp = np.nan, np.nan
            rows.append((float(l), n, pt.omega, cg, opp))
    return rows
