"""Pole atlas for the unit sphere and its image in the z-plane.

Singularities are collected in the Helmholtz variable ``k`` (``k = i omega``):
interior eigenvalues that each indirect formulation inherits, and the
scattering poles of the exterior problem. Each is mapped through the
time-stepping symbol to the z-plane, where the smallest modulus bounds the
radius of analyticity of the transformed solution.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .radau import RADAU_DEFECTIVE_POINT
from .special import spherical_bessel_j, spherical_bessel_j_prime
from .zdomain import MultistepRule, TimeGrid, multistep_symbol

logger = logging.getLogger(__name__)

__all__ = [
    "POLE_KINDS",
    "PoleEntry",
    "AnalyticityReport",
    "interior_eigenvalues_sphere",
    "scattering_poles_sphere",
    "map_pole_to_z",
    "analyticity_report",
    "data_analyticity_radius",
    "formulation_poles_sphere",
    "sphere_pole_atlas",
]

POLE_KINDS = ("dirichlet", "neumann", "impedance", "scattering")
_KIND_ORDER = {k: i for i, k in enumerate(POLE_KINDS)}
_GRID_STEP = 0.01


@dataclass(frozen=True)
class PoleEntry:
    kind: str
    n: int
    k_value: complex
    z_image: complex = complex("nan")

    def __post_init__(self):
        if self.kind not in POLE_KINDS and self.kind != "defective":
            raise ValueError(f"unknown pole kind {self.kind!r}")
        object.__setattr__(self, "k_value", complex(self.k_value))
        object.__setattr__(self, "z_image", complex(self.z_image))

    @property
    def z_modulus(self) -> float:
        return abs(self.z_image)

    def sort_key(self):
        return (self.z_modulus, _KIND_ORDER.get(self.kind, 99), self.n, self.k_value.real, self.k_value.imag)


@dataclass(frozen=True)
class AnalyticityReport:
    lambda_B: float
    lambda_G: float
    lambda_U: float
    dominant: PoleEntry | None
    entries: tuple = field(default=(), repr=False)
    advisory: tuple = field(default=(), repr=False)

    def rate(self, lam: float) -> float:
        from .zdomain import predicted_rate

        return predicted_rate(lam, self.lambda_U)


# ------------------------------------------------------------------ k-plane


def _defining_function(kind: str, n: int, eta: float):
    if kind == "dirichlet":
        return lambda k: spherical_bessel_j(n, k).real
    if kind == "neumann":
        return lambda k: spherical_bessel_j_prime(n, k).real
    if kind == "impedance":
        return lambda k: (k * spherical_bessel_j_prime(n, k) + eta * spherical_bessel_j(n, k)).real
    raise ValueError(f"unknown interior eigenproblem {kind!r}")


def interior_eigenvalues_sphere(kind: str, eta: complex = 0.0, n_max: int = 8, k_max: float = 12.0):
    """Real roots in ``(0, k_max]`` of ``j_n``, ``j_n'`` or ``k j_n' + eta j_n``, ``n <= n_max``.

    Roots are bracketed on a grid of step 0.01 and polished with Brent's
    method to ``1e-12``. The Neumann list always contains ``k = 0``.
    """
    if n_max < 0 or k_max <= 0:
        raise ValueError("n_max must be >= 0 and k_max > 0")
    if kind == "impedance":
        if complex(eta).imag != 0:
            raise ValueError("impedance roots are only located for real eta; use inverse_norm_scan")
        eta = complex(eta).real
    grid = np.arange(1, int(math.floor(k_max / _GRID_STEP)) + 1) * _GRID_STEP
    if grid.size == 0 or grid[-1] < k_max:
        grid = np.append(grid, k_max)
    entries = []
    if kind == "neumann":
        entries.append(PoleEntry("neumann", 0, 0.0))
    for n in range(n_max + 1):
        fn = _defining_function(kind, n, eta)
        vals = fn(grid)
        for i in range(grid.size - 1):
            a, b = grid[i], grid[i + 1]
            fa, fb = vals[i], vals[i + 1]
            if fa == 0:
                root = a
            elif fa * fb < 0:
                root = brentq(fn, a, b, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=200)
            else:
                continue
            entries.append(PoleEntry(kind, n, root))
        if vals[-1] == 0:
            entries.append(PoleEntry(kind, n, grid[-1]))
    # roots inside the first grid cell (0, 0.01] for impedance with eta near -n
    return sorted(entries, key=lambda e: (e.n, e.k_value.real))


def _hankel_polynomial(n: int) -> np.ndarray:
    """Coefficients (highest power first) of ``sum_k i^k (n+k)! / (k! (n-k)! 2^k) w^k``."""
    coeffs = [
        (1j**k) * math.factorial(n + k) / (math.factorial(k) * math.factorial(n - k) * 2**k)
        for k in range(n + 1)
    ]
    return np.array(coeffs[::-1], dtype=complex)


def scattering_poles_sphere(n_max: int = 8):
    """Zeros of ``h_n^{(1)}`` for ``1 <= n <= n_max`` via companion-matrix roots in ``w = 1/k``."""
    if n_max > 12:
        raise ValueError("n_max above 12 is outside the polynomial root-finding regime")
    entries = []
    for n in range(1, n_max + 1):
        w = np.roots(_hankel_polynomial(n))
        ks = 1.0 / w
        for k in sorted(ks, key=lambda v: (round(v.real, 12), v.imag)):
            if k.imag >= 0:
                raise ArithmeticError(f"scattering pole {k} of mode {n} is not in the lower half-plane")
            entries.append(PoleEntry("scattering", n, k))
    return entries


# ------------------------------------------------------------------ z-plane


def _radau_images(k_pole: complex, cdt: float):
    gamma = -1j * cdt * complex(k_pole)
    return [(gamma * gamma - 4.0 * gamma + 6.0) / (2.0 * gamma + 6.0)]


def map_pole_to_z(rule, k_pole: complex, grid: TimeGrid) -> list:
    """All ``z`` with ``gamma(z) = -i c dt k_pole``.

    ``rule`` is a ``MultistepRule`` or ``"radau2a"``; for Radau IIa the stage
    symbols satisfy ``gamma^2 - (4 + 2z) gamma + 6 - 6z = 0``, which is linear
    in ``z``.
    """
    k_pole = complex(k_pole)
    target = -1j * grid.cdt * k_pole
    if rule == "radau2a" or getattr(rule, "name", None) == "radau2a":
        return _radau_images(k_pole, grid.cdt)
    if not isinstance(rule, MultistepRule):
        raise TypeError(f"unsupported rule {rule!r}")
    coeffs = np.array(rule.coeffs, dtype=complex)
    coeffs[0] -= target
    while coeffs.size > 1 and coeffs[-1] == 0:
        coeffs = coeffs[:-1]
    if coeffs.size == 2:
        # linear symbol: exact arithmetic, so k = 0 gives z = 1 exactly
        return [-coeffs[0] / coeffs[1]]
    roots = np.roots(coeffs[::-1])
    # one Newton step against the Horner-evaluated symbol
    deriv = np.polyder(coeffs[::-1])
    roots = roots - (multistep_symbol(rule, roots) - target) / np.polyval(deriv, roots)
    return sorted(roots.tolist(), key=lambda z: (abs(z), z.imag))


def _map_entries(entries, rule, grid):
    out = []
    for e in entries:
        for z in map_pole_to_z(rule, e.k_value, grid):
            out.append(PoleEntry(e.kind, e.n, e.k_value, z))
    return out


def analyticity_report(entries, lambda_G: float = np.inf, advisory=()) -> AnalyticityReport:
    """``lambda_B`` = smallest mapped modulus, ``lambda_U = min(lambda_B, lambda_G)``."""
    entries = tuple(sorted(entries, key=PoleEntry.sort_key))
    if not entries and not np.isfinite(lambda_G):
        raise ValueError("no poles and no data radius: analyticity radius is undetermined")
    dominant = entries[0] if entries else None
    lambda_B = dominant.z_modulus if dominant else np.inf
    return AnalyticityReport(
        lambda_B=float(lambda_B),
        lambda_G=float(lambda_G),
        lambda_U=float(min(lambda_B, lambda_G)),
        dominant=dominant,
        entries=entries,
        advisory=tuple(advisory),
    )


def data_analyticity_radius(data_kind: str, grid: TimeGrid, beta: float = 0.0) -> float:
    """``inf`` for the Gaussian beam (entire transform), ``exp(beta dt)`` for ``exp(-beta t)`` envelopes."""
    if data_kind == "gaussian-beam":
        return np.inf
    if data_kind == "exponential-envelope":
        if beta < 0:
            raise ValueError("envelope rate beta must be non-negative")
        return float(np.exp(beta * grid.dt))
    raise ValueError(f"unknown data kind {data_kind!r}")


def formulation_poles_sphere(formulation: str, eta: complex = 0.0, n_max: int = 8, k_max: float = 12.0):
    """k-plane singularities of an indirect formulation on the unit sphere.

    ``sphere-analytic`` has only the scattering poles; the integral
    formulations add the interior eigenvalues they inherit.
    """
    scattering = scattering_poles_sphere(n_max)
    if formulation == "sphere-analytic":
        return scattering
    if formulation == "first-kind":
        interior = interior_eigenvalues_sphere("dirichlet", n_max=n_max, k_max=k_max)
    elif formulation == "second-kind":
        interior = interior_eigenvalues_sphere("neumann", n_max=n_max, k_max=k_max)
    elif formulation == "combined-const":
        interior = interior_eigenvalues_sphere("impedance", eta=eta, n_max=n_max, k_max=k_max)
    elif formulation == "combined-omega":
        # k j_n' - i k j_n = 0 has no nonzero real root; only the origin remains
        interior = [PoleEntry("impedance", 0, 0.0)]
    else:
        raise ValueError(f"unknown formulation {formulation!r}")
    return interior + scattering


def sphere_pole_atlas(
    formulation: str,
    rule,
    grid: TimeGrid,
    eta: complex = 0.0,
    lambda_G: float = np.inf,
    n_max: int = 8,
    k_max: float = 12.0,
) -> AnalyticityReport:
    entries = _map_entries(formulation_poles_sphere(formulation, eta, n_max, k_max), rule, grid)
    advisory = ()
    if rule == "radau2a" or getattr(rule, "name", None) == "radau2a":
        advisory = (PoleEntry("defective", 0, complex("nan"), RADAU_DEFECTIVE_POINT),)
    return analyticity_report(entries, lambda_G, advisory)
