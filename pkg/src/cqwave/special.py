"""Spherical Bessel and Hankel functions of complex argument.

``j_n`` uses Miller's downward recurrence normalised against the closed-form
``j_0``/``j_1``; ``h_n^{(1)}`` uses the upward recurrence, which is stable
for the outgoing solution. Hankel values are also available in the scaled
form ``e^{-ix} h_n^{(1)}(x)``, which stays finite for large ``|Im x|`` and is
what the series solver works with.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "spherical_jn_all",
    "spherical_bessel_j",
    "spherical_bessel_j_prime",
    "spherical_h1_scaled_all",
    "spherical_hankel1",
    "spherical_hankel1_prime",
]

_SMALL = 1e-2


def _j0_j1_scaled(x: np.ndarray):
    """``j_0, j_1`` times ``exp(-|Im x|)``."""
    ax = np.abs(x)
    small = ax < _SMALL
    xs = np.where(small, 1.0, x)
    damp = np.exp(-np.abs(x.imag))
    # sin and cos with the exponential growth in Im x removed
    e_pos = np.exp(1j * xs.real - xs.imag - np.abs(xs.imag))
    e_neg = np.exp(-1j * xs.real + xs.imag - np.abs(xs.imag))
    sin_s = (e_pos - e_neg) / 2j
    cos_s = (e_pos + e_neg) / 2
    j0 = sin_s / xs
    j1 = sin_s / xs**2 - cos_s / xs
    x2 = x * x
    j0_series = 1 - x2 / 6 * (1 - x2 / 20 * (1 - x2 / 42))
    j1_series = x / 3 * (1 - x2 / 10 * (1 - x2 / 28 * (1 - x2 / 54)))
    j0 = np.where(small, j0_series * damp, j0)
    j1 = np.where(small, j1_series * damp, j1)
    return j0, j1


def spherical_jn_all(n_max: int, x, scaled: bool = False) -> np.ndarray:
    """``j_0 .. j_{n_max}`` at ``x``; output shape ``(n_max + 1,) + x.shape``.

    With ``scaled=True`` the values are multiplied by ``exp(-|Im x|)`` so that
    arguments far from the real axis do not overflow.
    """
    if n_max < 0:
        raise ValueError("order must be non-negative")
    x = np.asarray(x, dtype=complex)
    shape = x.shape
    x = x.ravel()
    out = np.zeros((n_max + 1, x.size), dtype=complex)
    j0, j1 = _j0_j1_scaled(x)
    zero = x == 0
    xs = np.where(zero, 1.0, x)

    start = int(n_max + np.ceil(np.abs(x).max(initial=0.0)) + 20 + 2 * np.sqrt(n_max + 10))
    f_next = np.zeros(x.size, dtype=complex)
    f_cur = np.full(x.size, 1e-300, dtype=complex)
    for k in range(start, 0, -1):
        f_prev = (2 * k + 1) / xs * f_cur - f_next
        f_next, f_cur = f_cur, f_prev
        if k - 1 <= n_max:
            out[k - 1] = f_cur
        big = np.abs(f_cur) > 1e250
        if np.any(big):
            f_cur = np.where(big, f_cur * 1e-250, f_cur)
            f_next = np.where(big, f_next * 1e-250, f_next)
            out[:, big] *= 1e-250
    # f_next now holds the unnormalised f_1, f_cur the unnormalised f_0
    f0, f1 = f_cur, f_next
    use_j0 = np.abs(j0) >= np.abs(j1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(use_j0, j0 / f0, j1 / f1)
    out *= scale
    if np.any(zero):
        out[:, zero] = 0.0
        out[0, zero] = 1.0
    if not scaled:
        out *= np.exp(np.abs(x.imag))
    return out.reshape((n_max + 1,) + shape)


def spherical_bessel_j(n: int, x, scaled: bool = False):
    """Spherical Bessel function ``j_n(x)`` for complex ``x``."""
    vals = spherical_jn_all(n, x, scaled=scaled)[n]
    return vals[()] if vals.ndim == 0 else vals


def spherical_bessel_j_prime(n: int, x):
    """``j_n'(x)`` via ``j_n' = j_{n-1} - (n+1)/x j_n`` (``j_0' = -j_1``)."""
    vals = spherical_jn_all(n + 1, x)
    x = np.asarray(x, dtype=complex)
    if n == 0:
        out = -vals[1]
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = vals[n - 1] - (n + 1) / x * vals[n]
        out = np.where(x == 0, (1.0 / 3.0) if n == 1 else 0.0, out)
    return out[()] if np.ndim(out) == 0 else out


def spherical_h1_scaled_all(n_max: int, x) -> np.ndarray:
    """``e^{-ix} h_n^{(1)}(x)`` for ``n = 0..n_max`` by upward recurrence."""
    x = np.asarray(x, dtype=complex)
    if np.any(x == 0):
        raise ValueError("spherical Hankel function is singular at x = 0")
    out = np.empty((n_max + 1,) + x.shape, dtype=complex)
    out[0] = -1j / x
    if n_max >= 1:
        out[1] = -(1.0 / x) * (1.0 + 1j / x)
    for n in range(1, n_max):
        out[n + 1] = (2 * n + 1) / x * out[n] - out[n - 1]
    return out


def spherical_hankel1(n: int, x):
    """Spherical Hankel function of the first kind ``h_n^{(1)}(x)``."""
    x = np.asarray(x, dtype=complex)
    vals = spherical_h1_scaled_all(n, x)[n] * np.exp(1j * x)
    return vals[()] if vals.ndim == 0 else vals


def spherical_hankel1_prime(n: int, x):
    """``h_n^{(1)}'(x)``."""
    x = np.asarray(x, dtype=complex)
    vals = spherical_h1_scaled_all(n + 1, x) * np.exp(1j * x)
    out = -vals[1] if n == 0 else vals[n - 1] - (n + 1) / x * vals[n]
    return out[()] if out.ndim == 0 else out
