"""Boundary data in time: Gaussian beam, polynomial pulse and the exact monopole field."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "GaussianBeam",
    "PolynomialPulse",
    "gaussian_beam",
    "polynomial_pulse",
    "exact_monopole_solution",
    "sample_boundary_signal",
]

TAIL_TOLERANCE = 1e-16


@dataclass(frozen=True)
class GaussianBeam:
    """Incident beam ``-cos(2 pi f s) exp(-(s - t_p)^2 / (2 sigma^2))``, ``s = t - d.x/c``.

    ``sigma_w`` switches on the window ``1 - exp(-t^2 / (2 sigma_w^2))`` that
    makes the data vanish at ``t = 0``. There is no default carrier frequency.
    """

    f: float
    t_p: float
    sigma: float
    direction: tuple = (1.0, 0.0, 0.0)
    c: float = 343.0
    sigma_w: float | None = None

    uniform = False

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if d.shape != (3,) or abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValueError(f"beam direction must be a unit 3-vector, got {self.direction}")
        if self.sigma <= 0 or self.c <= 0:
            raise ValueError("sigma and c must be positive")
        if self.sigma_w is not None and self.sigma_w <= 0:
            raise ValueError("sigma_w must be positive when given")
        object.__setattr__(self, "direction", tuple(float(v) for v in d))

    def __call__(self, t, x):
        """Values with shape ``t.shape + (n_points,)``."""
        t = np.asarray(t, dtype=float)
        x = np.atleast_2d(np.asarray(x, dtype=float))
        delay = x @ np.asarray(self.direction) / self.c
        s = t[..., None] - delay
        g = -np.cos(2 * np.pi * self.f * s) * np.exp(-((s - self.t_p) ** 2) / (2 * self.sigma**2))
        if self.sigma_w is not None:
            g = g * (-np.expm1(-(t[..., None] ** 2) / (2 * self.sigma_w**2)))
        return g


@dataclass(frozen=True)
class PolynomialPulse:
    """Spatially uniform ``f(t) = b (a t)^m exp(-p t)`` for ``t >= 0`` (zero before)."""

    a: float
    b: float
    m: int
    p: float

    uniform = True

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("exponent m must be non-negative")
        if self.p < 0:
            raise ValueError("decay rate p must be non-negative")

    def signal(self, t):
        t = np.asarray(t, dtype=float)
        tp = np.where(t > 0, t, 0.0)
        with np.errstate(under="ignore"):
            val = self.b * (self.a * tp) ** self.m * np.exp(-self.p * tp)
        if self.m == 0:
            val = np.where(t >= 0, val, 0.0)
        else:
            val = np.where(t > 0, val, 0.0)
        return val[()] if val.ndim == 0 else val

    def __call__(self, t, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.repeat(self.signal(t)[..., None], x.shape[0], axis=-1)

    @property
    def peak_time(self) -> float:
        return self.m / self.p if self.p > 0 else np.inf


def gaussian_beam(params: dict, t, x):
    """Functional form of ``GaussianBeam(**params)(t, x)`` for a single point or many."""
    beam = GaussianBeam(**params)
    out = beam(t, x)
    if np.ndim(x) == 1:
        out = out[..., 0]
    return out[()] if np.ndim(out) == 0 else out


def polynomial_pulse(params: dict, t):
    return PolynomialPulse(**params).signal(t)


def exact_monopole_solution(params: dict | PolynomialPulse, r, t, c: float = 343.0):
    """Radiating field ``H(tau) f(tau) / r`` with retarded time ``tau = t + (1 - r)/c``."""
    pulse = params if isinstance(params, PolynomialPulse) else PolynomialPulse(**params)
    r = np.asarray(r, dtype=float)
    if np.any(r < 1.0):
        raise ValueError("the monopole solution is defined for r >= 1")
    tau = np.asarray(t, dtype=float) + (1.0 - r) / c
    out = pulse.signal(tau) / r
    return out[()] if np.ndim(out) == 0 else out


def sample_boundary_signal(data, points, dt: float, n_min: int, offsets=(0.0,), max_samples=None):
    """Sample ``data(t, x)`` at ``t = (n + offset) dt`` until the tail is negligible.

    Returns an array ``(n_sig, len(offsets), n_points)``. Sampling continues
    past ``n_min`` until a full block of samples lies below
    ``TAIL_TOLERANCE * max|g|``; trailing negligible samples are trimmed.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    max_samples = max_samples or max(64 * n_min, 4096)
    offsets = np.asarray(offsets, dtype=float)
    block = max(n_min, 64)
    chunks = []
    n0 = 0
    peak = 0.0
    while True:
        n = np.arange(n0, n0 + block)
        t = (n[:, None] + offsets[None, :]) * dt
        vals = np.asarray(data(t, points), dtype=float)
        chunks.append(vals)
        block_max = float(np.max(np.abs(vals), initial=0.0))
        peak = max(peak, block_max)
        n0 += block
        if n0 >= n_min and block_max <= TAIL_TOLERANCE * peak:
            break
        if n0 >= max_samples:
            logger.warning(
                "boundary data not decayed below %.0e after %d samples; truncating", TAIL_TOLERANCE, n0
            )
            break
    values = np.concatenate(chunks)
    mags = np.max(np.abs(values).reshape(values.shape[0], -1), axis=1)
    keep = np.flatnonzero(mags > TAIL_TOLERANCE * peak)
    n_keep = max(int(keep[-1]) + 1 if keep.size else 1, n_min)
    return values[:n_keep]
