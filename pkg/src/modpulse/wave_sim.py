"""Leapfrog integration of u_tt - u_xx + rho u = gamma r u^3 on a periodic grid.

Energies are the staggered discrete ones that the scheme conserves exactly:

    E^{n+1/2} = 1/2 sum_j [((u_j^{n+1} - u_j^n)/dt)^2 + rho_j u_j^{n+1} u_j^n] dx
              + 1/2 sum_edges (D+ u^{n+1})(D+ u^n) dx,

restricted to node windows for the light-cone version.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _fourier as fo
from .bloch import BlochPoint, PeriodicCoefficient
from .envelope import EnvelopeParams, check_periodic_grid, soliton

CFL_MAX = 0.9
BLOWUP_AMP = 1e6


class BlowUpError(RuntimeError):
    def __init__(self, msg, t_last):
        super().__init__(msg)
        self.t_last = t_last


class ConeError(ValueError):
    pass


def periodic_grid(Q, points_per_cell):
    """x_j = j dx on [0, 2 pi Q)."""
    n = int(Q) * int(points_per_cell)
    dx = fo.TWO_PI * Q / n
    return np.arange(n) * dx


def _on_grid(c, x):
    if isinstance(c, PeriodicCoefficient):
        return c(x)
    c = np.asarray(c, dtype=float)
    return np.full_like(x, float(c)) if c.ndim == 0 else c


@dataclass
class WaveField:
    x: np.ndarray
    u_curr: np.ndarray
    u_prev: np.ndarray
    t: float
    dt: float
    dx: float

    def __post_init__(self):
        dx, _ = check_periodic_grid(self.x)
        if abs(dx - self.dx) > 1e-12 * dx:
            raise ValueError("dx does not match the grid")
        if self.dt > CFL_MAX * self.dx * (1 + 1e-12):
            raise ValueError(f"CFL violated: dt = {self.dt:.4g} > {CFL_MAX} dx = {CFL_MAX * self.dx:.4g}")
        if self.u_curr.shape != self.x.shape or self.u_prev.shape != self.x.shape:
            raise ValueError("field samples must match the grid")

    @property
    def L(self):
        return self.dx * len(self.x)


def laplacian(u, dx):
    return (np.roll(u, -1) - 2 * u + np.roll(u, 1)) / dx ** 2


def _force(u, dx, rho_g, r_g, gamma):
    out = laplacian(u, dx) - rho_g * u
    if gamma:
        out = out + gamma * r_g * u ** 3
    return out


def step(field: WaveField, rho, r, gamma):
    """One leapfrog step; raises BlowUpError on non-finite or runaway values."""
    rho_g, r_g = _on_grid(rho, field.x), _on_grid(r, field.x)
    u_next = 2 * field.u_curr - field.u_prev + field.dt ** 2 * _force(
        field.u_curr, field.dx, rho_g, r_g, gamma)
    if not np.all(np.isfinite(u_next)) or np.max(np.abs(u_next)) > BLOWUP_AMP:
        raise BlowUpError(f"blow-up after t = {field.t:.6g}", field.t)
    return WaveField(field.x, u_next, field.u_curr, field.t + field.dt, field.dt, field.dx)


def taylor_start(u0, u1, x, dt, rho, r, gamma):
    """Field at t = dt from u^1 = u0 + dt u1 + dt^2/2 (D2 u0 - rho u0 + gamma r u0^3)."""
    dx, _ = check_periodic_grid(x)
    rho_g, r_g = _on_grid(rho, x), _on_grid(r, x)
    u_1 = u0 + dt * u1 + 0.5 * dt ** 2 * _force(u0, dx, rho_g, r_g, gamma)
    return WaveField(np.asarray(x, float), u_1, np.asarray(u0, float), dt, dt, dx)


def discrete_energy(u_new, u_old, dt, dx, rho_g, weights=None):
    """Staggered energy between two consecutive levels, optionally with node weights.

    Edge j -> j+1 carries the mean of the two node weights.
    """
    e_node = 0.5 * (((u_new - u_old) / dt) ** 2 + rho_g * u_new * u_old)
    dn = (np.roll(u_new, -1) - u_new) / dx
    do = (np.roll(u_old, -1) - u_old) / dx
    e_edge = 0.5 * dn * do
    if weights is None:
        return float((e_node.sum() + e_edge.sum()) * dx)
    we = 0.5 * (weights + np.roll(weights, -1))
    return float((np.dot(weights, e_node) + np.dot(we, e_edge)) * dx)


def nonlinear_potential(u_new, u_old, dx, r_g, gamma):
    """-gamma/4 int r u^4, averaged over the two levels."""
    return float(-0.125 * gamma * np.sum(r_g * (u_new ** 4 + u_old ** 4)) * dx)


# ----------------------------------------------------------------------------
# light cone
# ----------------------------------------------------------------------------

@dataclass
class Cone:
    """Backward cone |x - x0| <= t0 - t.

    The interval is sampled with node weights clip((t0 - t - |x_j - x0|)/dx + 1/2, 0, 1),
    a trapezoid-type rule whose end cells shrink continuously at unit speed.
    """
    x0: float
    t0: float

    def weights(self, t, x, L):
        half = self.t0 - t
        if half < 0:
            return None
        dx = x[1] - x[0]
        if half + dx >= L / 2:
            raise ConeError("light cone exceeds the periodic domain")
        d = periodic_distance(x, self.x0, L)
        return np.clip((half - d) / dx + 0.5, 0.0, 1.0)

    def inside(self, t, x, L):
        half = self.t0 - t
        if half < 0:
            return np.zeros(len(x), bool)
        return periodic_distance(x, self.x0, L) <= half


@dataclass
class ConeTrack:
    cone: Cone
    t: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    source: list = field(default_factory=list)    # cumulative int F w_t

    def check(self, rel=1e-6, abs_tol=1e-12):
        """Worst excess of E(t2) - E(t1) - int_{t1}^{t2} F w_t over rel E(t1) + abs_tol, all pairs."""
        E = np.asarray(self.energy)
        S = np.asarray(self.source)
        worst, n_pairs = -np.inf, 0
        for i in range(len(E) - 1):
            excess = E[i + 1:] - E[i] - (S[i + 1:] - S[i]) - (rel * E[i] + abs_tol)
            worst = max(worst, float(np.max(excess)))
            n_pairs += len(excess)
        return {"pairs": n_pairs, "max_violation": worst if n_pairs else 0.0,
                "holds": bool(n_pairs == 0 or worst <= 0.0)}


# ----------------------------------------------------------------------------
# envelope diagnostics
# ----------------------------------------------------------------------------

def lowpass(z, L, cutoff=0.25):
    """Remove Fourier modes with |wavenumber| > cutoff on a domain of length L."""
    kap = np.fft.fftfreq(len(z), d=L / len(z)) * fo.TWO_PI
    zh = np.fft.fft(z)
    zh[np.abs(kap) > cutoff] = 0
    return np.fft.ifft(zh)


def demodulate(u, ut, x, l0, omega, t, f_grid, cutoff=0.25):
    """Complex envelope A with u ~ A f e^{i(l0 x - omega t)} + c.c.

    (u + i u_t/omega)/2 isolates the e^{-i omega t} part; multiplying by
    e^{-i(l0 x - omega t)} 2 pi conj(f) and low-passing projects onto f cell
    by cell (the cell average of 2 pi |f|^2 is 1).
    """
    x = np.asarray(x, float)
    dx, _ = check_periodic_grid(x)
    z = 0.5 * (u + 1j * ut / omega) * np.exp(-1j * (l0 * x - omega * t))
    return lowpass(fo.TWO_PI * np.conj(f_grid) * z, dx * len(x), cutoff)


def circular_centroid(w, x, L):
    """Centre of a weight distribution on a circle of length L."""
    th = fo.TWO_PI * x / L
    return float(np.angle(np.sum(w * np.exp(1j * th))) * L / fo.TWO_PI % L)


def periodic_distance(x, c, L):
    return np.abs((x - c + L / 2) % L - L / 2)


def u_app(params: EnvelopeParams, f_grid, x, t, x_c, L):
    """eps gamma1 sech(eps gamma2 (x - c_g t - x_c)) f e^{i(l0 x - omega t)} + c.c."""
    eps = params.epsilon
    xi = (x - x_c - params.cg * t + L / 2) % L - L / 2
    amp = eps * soliton(params, eps * xi)
    return 2 * np.real(amp * f_grid * np.exp(1j * (params.l0 * x - params.omega * t)))


@dataclass
class SimConfig:
    T: float
    dt: float
    stride: int = 20
    gamma: float = 1.0
    snapshot_stride: int = 0          # in records; 0 disables


@dataclass
class Diagnostics:
    t: np.ndarray
    centroid: np.ndarray
    tail_amp: np.ndarray
    approx_err: np.ndarray
    energy: np.ndarray
    cone_energy: Optional[np.ndarray]
    speed_fit: float
    cone_check: Optional[dict]
    meta: dict
    snapshots: list = field(default_factory=list)

    def rows(self):
        ce = self.cone_energy if self.cone_energy is not None else np.full(len(self.t), np.nan)
        return [(float(a), float(b), float(c), float(d), float(e))
                for a, b, c, d, e in zip(self.t, self.centroid, self.tail_amp, self.approx_err, ce)]

    def report(self):
        d = {"speed_fit": self.speed_fit, "max_approx_err": float(np.max(self.approx_err)),
             "final_tail_amp": float(self.tail_amp[-1]),
             "energy_drift": float(np.max(np.abs(self.energy - self.energy[0]))
                                   / max(abs(self.energy[0]), 1e-300))}
        if self.cone_check is not None:
            d["cone_check"] = self.cone_check
        d.update(self.meta)
        return d


def simulate(u0, u1, x, rho, r, config: SimConfig, params: Optional[EnvelopeParams] = None,
             point: Optional[BlochPoint] = None, x_c=None, cone: Optional[Cone] = None,
             progress: Optional[Callable] = None):
    """Run to T = min(config.T, eps^-2) and record diagnostics every `stride` steps.

    Envelope diagnostics (centroid, tail, approximation error) need params and
    point; otherwise they are NaN.  The cone energy is tracked every step when
    a Cone is supplied.
    """
    x = np.asarray(x, float)
    dx, _ = check_periodic_grid(x)
    n = len(x)
    L = dx * n
    T = config.T
    if params is not None:
        T = min(T, params.epsilon ** -2)
    nsteps = int(round(T / config.dt))
    rho_g, r_g = _on_grid(rho, x), _on_grid(r, x)
    gamma = config.gamma
    fld = taylor_start(np.asarray(u0, float), np.asarray(u1, float), x, config.dt, rho, r, gamma)
    dt = config.dt
    have_env = params is not None and point is not None
    if have_env:
        f_grid = fo.evaluate(point.f_hat, x)
        half_w = 3.0 / (params.epsilon * params.gamma2)
        if x_c is None:
            x_c = L / 2
    rec = {k: [] for k in ("t", "centroid", "tail", "err", "energy")}
    snaps = []
    track = ConeTrack(cone) if cone is not None else None
    src_acc = 0.0
    last_cent = None
    unwrap = 0.0
    for k in range(1, nsteps + 1):
        # fld holds level k (u_curr) and k-1 (u_prev)
        try:
            nxt = step(fld, rho_g, r_g, gamma)
        except BlowUpError as exc:
            raise BlowUpError(str(exc), exc.t_last) from None
        u_km1, u_k, u_kp1 = fld.u_prev, fld.u_curr, nxt.u_curr
        t_k = fld.t
        if cone is not None:
            if k == 1:
                w = cone.weights(0.5 * dt, x, L)
                if w is not None:
                    track.t.append(0.5 * dt)
                    track.energy.append(discrete_energy(u_k, u_km1, dt, dx, rho_g, w))
                    track.source.append(0.0)
            wn = cone.weights(t_k, x, L)
            wh = cone.weights(t_k + 0.5 * dt, x, L)
            if wn is not None and wh is not None:
                if gamma:
                    v = (u_kp1 - u_km1) / (2 * dt)
                    src_acc += dt * dx * float(np.dot(wn, gamma * r_g * u_k ** 3 * v))
                track.t.append(t_k + 0.5 * dt)
                track.energy.append(discrete_energy(u_kp1, u_k, dt, dx, rho_g, wh))
                track.source.append(src_acc)
        if k % config.stride == 0 or k == nsteps:
            rec["t"].append(t_k)
            rec["energy"].append(discrete_energy(u_kp1, u_k, dt, dx, rho_g)
                                 + nonlinear_potential(u_kp1, u_k, dx, r_g, gamma))
            if have_env:
                ut = (u_kp1 - u_km1) / (2 * dt)
                A = demodulate(u_k, ut, x, params.l0, params.omega, t_k, f_grid)
                c = circular_centroid(np.abs(A) ** 2, x, L)
                if last_cent is not None:
                    jump = (c - last_cent + L / 2) % L - L / 2
                    unwrap += jump
                else:
                    unwrap = c
                last_cent = c
                rec["centroid"].append(unwrap)
                far = periodic_distance(x, c, L) > half_w
                rec["tail"].append(float(np.max(np.abs(u_k[far]))) if np.any(far) else 0.0)
                rec["err"].append(float(np.max(np.abs(u_k - u_app(params, f_grid, x, t_k, x_c, L)))))
            else:
                rec["centroid"].append(np.nan)
                rec["tail"].append(np.nan)
                rec["err"].append(np.nan)
            if config.snapshot_stride and (len(rec["t"]) - 1) % config.snapshot_stride == 0:
                snaps.append((t_k, u_k.copy()))
            if progress is not None:
                progress(t_k)
        fld = nxt
    t = np.asarray(rec["t"])
    cent = np.asarray(rec["centroid"])
    speed = float(np.polyfit(t, cent, 1)[0]) if have_env and len(t) > 1 else float("nan")
    cone_E = None
    cone_chk = None
    if track is not None:
        cone_chk = track.check()
        cone_E = np.interp(t, track.t, track.energy, right=np.nan) if track.t else None
    meta = {"T": float(nsteps * dt), "steps": nsteps, "dt": dt, "dx": dx, "L": L,
            "stride": config.stride, "gamma": gamma}
    diag = Diagnostics(t=t, centroid=cent, tail_amp=np.asarray(rec["tail"]),
                       approx_err=np.asarray(rec["err"]), energy=np.asarray(rec["energy"]),
                       cone_energy=cone_E, speed_fit=speed, cone_check=cone_chk, meta=meta,
                       snapshots=snaps)
    diag.cone_track = track
    return diag


def compact_bump(x, center, width, amp=1.0):
    """C^2 bump amp (1 - s^2)^3 on |x - center| < width (periodic)."""
    L = (x[1] - x[0]) * len(x)
    s = periodic_distance(x, center, L) / width
    return amp * np.where(s < 1, (1 - s ** 2) ** 3, 0.0)


def twin_run(u0, u1, x, rho, r, gamma, dt, x0, t0, bump_center, bump_width, bump_amp=1.0):
    """Max |u - v| inside the cone |x - x0| <= t0 - t for two runs differing by a bump.

    The scheme's numerical cone has half-width t0 dx/dt; a bump beyond it cannot
    reach the cone.  Returns (max difference, clearance of the bump from the
    numerical cone; negative means the bump overlaps it).
    """
    dx, _ = check_periodic_grid(x)
    L = dx * len(x)
    bump = compact_bump(x, bump_center, bump_width, bump_amp)
    nsteps = int(round(t0 / dt))
    cone = Cone(x0, t0)
    fa = taylor_start(u0, u1, x, dt, rho, r, gamma)
    fb = taylor_start(u0 + bump, u1, x, dt, rho, r, gamma)
    worst = float(np.max(np.abs(bump[cone.inside(0.0, x, L)]), initial=0.0))
    for k in range(1, nsteps + 1):
        m = cone.inside(fa.t, x, L)
        worst = max(worst, float(np.max(np.abs(fa.u_curr[m] - fb.u_curr[m]), initial=0.0)))
        if k < nsteps:
            fa = step(fa, rho, r, gamma)
            fb = step(fb, rho, r, gamma)
    clearance = float(periodic_distance(np.array([bump_center]), x0, L)[0]
                      - bump_width - t0 * dx / dt)
    return worst, clearance
