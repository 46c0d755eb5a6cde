"""Exterior Dirichlet problem on the unit sphere by spherical-harmonic series.

Boundary data are projected onto orthonormal ``Y_n^m`` on a Gauss-Legendre x
uniform product grid; each mode is continued outwards with the ratio
``h_n(k r) / h_n(k)``. This is the pole-exact frequency back end: the only
singularities are the zeros of ``h_n^{(1)}`` for the retained orders.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import sph_harm_y

from .special import spherical_h1_scaled_all

__all__ = [
    "NearPoleError",
    "SphericalHarmonicExpansion",
    "SphereSolution",
    "sh_grid",
    "sh_index",
    "sh_matrix",
    "sh_analyze",
    "sh_synthesize",
    "default_degree",
    "solve_exterior_dirichlet_sphere",
    "evaluate_sphere_solution",
]


class NearPoleError(ArithmeticError):
    """The requested wavenumber sits on a scattering pole of a retained mode."""


def sh_index(n: int, m: int) -> int:
    return n * n + n + m


def default_degree(k_abs: float) -> int:
    return max(8, int(np.ceil(k_abs)) + 10)


@dataclass(frozen=True)
class SHGrid:
    degree: int
    theta: np.ndarray  # polar angles, Gauss-Legendre in cos(theta)
    phi: np.ndarray
    weights: np.ndarray  # per grid point, flattened (theta-major)
    points: np.ndarray  # (n_points, 3) on the unit sphere

    @property
    def shape(self):
        return (self.theta.size, self.phi.size)


@lru_cache(maxsize=16)
def sh_grid(degree: int) -> SHGrid:
    """Product grid exact for band-limited data of degree ``<= degree``."""
    x, w = np.polynomial.legendre.leggauss(degree + 1)
    theta = np.arccos(x)
    n_phi = 2 * degree + 2
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    weights = np.outer(w, np.full(n_phi, 2 * np.pi / n_phi)).ravel()
    points = np.stack(
        [np.sin(tt) * np.cos(pp), np.sin(tt) * np.sin(pp), np.cos(tt)], axis=-1
    ).reshape(-1, 3)
    return SHGrid(degree, theta, phi, weights, points)


def sh_matrix(degree: int, directions: np.ndarray) -> np.ndarray:
    """``Y[p, sh_index(n, m)] = Y_n^m(direction_p)`` for unit (or nonzero) directions."""
    d = np.atleast_2d(np.asarray(directions, dtype=float))
    r = np.linalg.norm(d, axis=1)
    theta = np.arccos(np.clip(d[:, 2] / r, -1.0, 1.0))
    phi = np.arctan2(d[:, 1], d[:, 0])
    out = np.empty((d.shape[0], (degree + 1) ** 2), dtype=complex)
    for n in range(degree + 1):
        m = np.arange(-n, n + 1)
        out[:, n * n : (n + 1) ** 2] = sph_harm_y(n, m[None, :], theta[:, None], phi[:, None])
    return out


@lru_cache(maxsize=16)
def _analysis_operator(degree: int) -> np.ndarray:
    grid = sh_grid(degree)
    Y = sh_matrix(degree, grid.points)
    op = (Y.conj() * grid.weights[:, None]).T
    op.setflags(write=False)
    return op


@dataclass(frozen=True)
class SphericalHarmonicExpansion:
    """Coefficients ``g[sh_index(n, m)]`` of orthonormal ``Y_n^m``; trailing axes allowed."""

    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if coeffs.shape[0] != (self.degree + 1) ** 2:
            raise ValueError(
                f"degree {self.degree} needs {(self.degree + 1) ** 2} coefficients, "
                f"got {coeffs.shape[0]}"
            )
        object.__setattr__(self, "coeffs", coeffs)

    def mode_norms(self) -> np.ndarray:
        """Largest coefficient magnitude per order ``n``."""
        c = np.abs(self.coeffs.reshape(self.coeffs.shape[0], -1))
        return np.array([c[n * n : (n + 1) ** 2].max() for n in range(self.degree + 1)])


def sh_analyze(boundary_values, degree: int) -> SphericalHarmonicExpansion:
    """Quadrature projection of grid samples onto ``Y_n^m``, ``n <= degree``.

    ``boundary_values`` has leading axis over the points of ``sh_grid(degree)``
    (or leading shape ``(n_theta, n_phi)``).
    """
    values = np.asarray(boundary_values)
    grid = sh_grid(degree)
    n_points = grid.points.shape[0]
    if values.shape[:2] == grid.shape:
        values = values.reshape((n_points,) + values.shape[2:])
    if values.shape[0] != n_points:
        raise ValueError(
            f"degree {degree} expects {n_points} grid samples "
            f"({grid.shape[0]} x {grid.shape[1]}), got leading shape {values.shape[:2]}"
        )
    op = _analysis_operator(degree)
    coeffs = np.tensordot(op, values, axes=(1, 0))
    return SphericalHarmonicExpansion(degree, coeffs)


def sh_synthesize(expansion: SphericalHarmonicExpansion, directions) -> np.ndarray:
    Y = sh_matrix(expansion.degree, directions)
    return np.tensordot(Y, expansion.coeffs, axes=(1, 0))


@dataclass(frozen=True)
class SphereSolution:
    """Outgoing field ``sum a_nm h_n(k r) Y_n^m`` stored with scaled coefficients.

    ``scaled_coeffs = g_nm / (e^{-ik} h_n(k))``, i.e. ``a_nm = scaled_coeffs * e^{-ik}``.
    """

    k: complex
    degree: int
    scaled_coeffs: np.ndarray

    @property
    def coeffs(self) -> np.ndarray:
        return self.scaled_coeffs * np.exp(-1j * self.k)


def solve_exterior_dirichlet_sphere(
    data: SphericalHarmonicExpansion, k: complex, pole_tol: float = 1e-13
) -> SphereSolution:
    """Divide each mode by ``h_n^{(1)}(k)``.

    Raises ``NearPoleError`` when ``|h_n(k)|`` is below ``pole_tol`` relative to
    its neighbouring orders for a mode that carries data.
    """
    k = complex(k)
    if k == 0:
        raise ValueError("wavenumber 0 is outside the supported range (use a static solver)")
    L = data.degree
    h = spherical_h1_scaled_all(L + 1, k)
    mode_scale = data.mode_norms()
    present = mode_scale > 1e-15 * max(mode_scale.max(), 1e-300)
    for n in np.flatnonzero(present):
        neighbours = max(abs(h[n - 1]) if n > 0 else 0.0, abs(h[n + 1]))
        if abs(h[n]) < pole_tol * neighbours:
            raise NearPoleError(
                f"k={k:.6g} is at a scattering pole of mode n={n} (|h_n(k)| = {abs(h[n]):.2e})"
            )
    n_of = np.repeat(np.arange(L + 1), 2 * np.arange(L + 1) + 1)
    shape = (-1,) + (1,) * (data.coeffs.ndim - 1)
    # modes without data stay zero even where h_n(k) vanishes
    keep = present[n_of].reshape(shape)
    hk = np.where(present, h[: L + 1], 1.0)[n_of].reshape(shape)
    return SphereSolution(k, L, np.where(keep, data.coeffs, 0.0) / hk)


def evaluate_sphere_solution(sol: SphereSolution, points) -> np.ndarray:
    """Series evaluation at exterior points ``|x| >= 1``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    r = np.linalg.norm(pts, axis=1)
    if np.any(r < 1.0 - 1e-12):
        raise ValueError("evaluation points must satisfy |x| >= 1")
    Y = sh_matrix(sol.degree, pts)
    h = spherical_h1_scaled_all(sol.degree, sol.k * r)  # (L+1, P)
    n_of = np.repeat(np.arange(sol.degree + 1), 2 * np.arange(sol.degree + 1) + 1)
    radial = h[n_of].T * np.exp(1j * sol.k * (r - 1.0))[:, None]  # (P, nsh)
    coeffs = sol.scaled_coeffs.reshape(sol.scaled_coeffs.shape[0], -1)
    out = (Y * radial) @ coeffs
    return out.reshape((pts.shape[0],) + sol.scaled_coeffs.shape[1:])
