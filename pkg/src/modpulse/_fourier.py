"""Helpers for truncated Fourier series on [0, 2pi).

A function is stored by its coefficients c_k, k = -K..K, with

    f(x) = sum_k c_k exp(i k x),

and array index j corresponds to k = j - K.  The L2(0, 2pi) inner product
of two such series is 2*pi*vdot(a, b) (conjugate-linear in the first slot).
"""
import numpy as np

TWO_PI = 2.0 * np.pi


def wavenumbers(K):
    return np.arange(-K, K + 1)


def size_to_K(n):
    return (n - 1) // 2


def inner(a, b):
    """L2(0, 2pi) inner product <a, b> of two coefficient vectors."""
    return TWO_PI * np.vdot(a, b)


def norm(a):
    return np.sqrt(TWO_PI * np.vdot(a, a).real)


def deriv(c, shift=0.0):
    """Coefficients of (d/dx + i*shift) f."""
    k = wavenumbers(size_to_K(len(c)))
    return 1j * (k + shift) * c


def grid(N):
    return TWO_PI * np.arange(N) / N


def to_grid(c, N):
    """Evaluate the series on the N-point uniform grid over [0, 2pi)."""
    K = size_to_K(len(c))
    if N < 2 * K + 1:
        raise ValueError(f"grid of {N} points cannot carry {2 * K + 1} modes")
    arr = np.zeros(N, dtype=complex)
    arr[wavenumbers(K) % N] = c
    return N * np.fft.ifft(arr)


def from_grid(f, K):
    """Coefficients |k| <= K of grid samples f (inverse of to_grid)."""
    N = len(f)
    F = np.fft.fft(f) / N
    return F[wavenumbers(K) % N]


def product_grid_size(K, degree, extra=0):
    """Smallest FFT size (power of two, >= 1024) that represents a product of
    `degree` series of half-width K (plus `extra` harmonics) and projects it
    back onto |k| <= K without aliasing."""
    need = (degree + 1) * K + extra + 1
    N = 1024
    while N < need:
        N *= 2
    return N


def multiply(*series, K=None, weight=None):
    """Product of several coefficient vectors, truncated to |k| <= K.

    `weight` is an optional extra factor given as a PeriodicCoefficient-like
    object with an ``exp_coeffs`` method.  The product is formed on a grid
    large enough that no alias falls into |k| <= K.
    """
    Ks = [size_to_K(len(s)) for s in series]
    if K is None:
        K = max(Ks)
    extra = 0
    if weight is not None:
        extra = weight.harmonics
    N = product_grid_size(max(Ks + [K]), len(series), extra)
    vals = np.ones(N, dtype=complex)
    for s in series:
        vals = vals * to_grid(s, N)
    if weight is not None:
        vals = vals * weight(grid(N))
    return from_grid(vals, K)


def conj_series(c):
    """Coefficients of the complex conjugate function: c_{-k}^*."""
    return np.conj(c[::-1])


def embed(c, K):
    """Zero-pad or truncate a coefficient vector to half-width K."""
    K0 = size_to_K(len(c))
    out = np.zeros(2 * K + 1, dtype=complex)
    m = min(K, K0)
    out[K - m:K + m + 1] = c[K0 - m:K0 + m + 1]
    return out


def evaluate(c, x, chunk=4096):
    """Evaluate the series at arbitrary points x (direct summation)."""
    x = np.asarray(x, dtype=float)
    k = wavenumbers(size_to_K(len(c)))
    flat = x.ravel()
    out = np.empty(flat.shape, dtype=complex)
    for s in range(0, len(flat), chunk):
        out[s:s + chunk] = np.exp(1j * np.outer(flat[s:s + chunk], k)) @ c
    return out.reshape(x.shape)
