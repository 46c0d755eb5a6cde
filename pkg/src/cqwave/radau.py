"""Runge-Kutta convolution quadrature: stage symbols, diagonalisation, recombination.

For a stiffly accurate tableau ``(A, b, c)`` the Z-transformed stage system is
governed by ``Delta(z) = (A + z/(1-z) * 1 b^T)^{-1}``. Diagonalising
``Delta(z) = P D P^{-1}`` decouples it into ``m`` scalar modified-Helmholtz
problems with frequencies ``gamma_j(z) / (c*dt)``; the step value is
recovered from the last stage.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .zdomain import ContourSpec, TimeGrid, TimeSignal, contour_nodes, ztransform_at_node

logger = logging.getLogger(__name__)

__all__ = [
    "DefectivePointError",
    "RKTableau",
    "RADAU_IIA_2",
    "RADAU_DEFECTIVE_POINT",
    "StageDecomposition",
    "delta_matrix",
    "radau2_eigenvalues",
    "stage_decomposition",
    "stage_signal",
    "stage_boundary_transform",
    "mix_stage_data",
    "recombine_solution",
    "avoid_defective_nodes",
]

RADAU_DEFECTIVE_POINT = 3.0 * np.sqrt(3.0) - 5.0


class DefectivePointError(ArithmeticError):
    """Delta(z) has a (numerically) repeated eigenvalue and cannot be diagonalised."""

    def __init__(self, z, gap):
        super().__init__(
            f"Delta(z) is not diagonalisable at z={complex(z):.6g} (eigenvalue gap {gap:.3e}); "
            "perturb the contour radius or node count"
        )
        self.z = z
        self.gap = gap


@dataclass(frozen=True)
class RKTableau:
    name: str
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        b = np.array(self.b, dtype=float)
        c = np.array(self.c, dtype=float)
        m = b.size
        if A.shape != (m, m) or c.shape != (m,):
            raise ValueError("tableau shapes do not match: A must be m x m, b and c length m")
        if not np.array_equal(A[-1], b):
            raise ValueError(f"tableau {self.name!r} is not stiffly accurate (last row of A != b)")
        for arr in (A, b, c):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def m(self) -> int:
        return self.b.size


RADAU_IIA_2 = RKTableau(
    "radau2a",
    A=[[5.0 / 12.0, -1.0 / 12.0], [3.0 / 4.0, 1.0 / 4.0]],
    b=[3.0 / 4.0, 1.0 / 4.0],
    c=[1.0 / 3.0, 1.0],
)


@dataclass(frozen=True)
class StageDecomposition:
    gamma: np.ndarray
    P: np.ndarray
    P_inv: np.ndarray

    @property
    def condition(self) -> float:
        """``||P||_2 * ||P^{-1}||_2``; large values flag proximity to a defective point."""
        return float(np.linalg.norm(self.P, 2) * np.linalg.norm(self.P_inv, 2))

    def recompose(self) -> np.ndarray:
        return (self.P * self.gamma) @ self.P_inv


def delta_matrix(tab: RKTableau, z: complex) -> np.ndarray:
    """``(A + z/(1-z) * 1 b^T)^{-1}`` by LU with partial pivoting."""
    z = complex(z)
    if z == 1:
        raise ZeroDivisionError("Delta(z) is undefined at z = 1")
    m = tab.m
    inner = tab.A.astype(complex) + (z / (1.0 - z)) * np.outer(np.ones(m), tab.b)
    lu = scipy.linalg.lu_factor(inner)
    delta = scipy.linalg.lu_solve(lu, np.eye(m, dtype=complex))
    residual = np.linalg.norm(delta @ inner - np.eye(m), np.inf)
    if not np.isfinite(residual) or residual > 1e-10:
        raise np.linalg.LinAlgError(
            f"stage matrix is numerically singular at z={z:.6g} (residual {residual:.2e})"
        )
    return delta


def radau2_eigenvalues(z):
    """Closed-form eigenvalues ``2 + z -/+ sqrt(z**2 + 10 z - 2)`` (principal branch)."""
    z = np.asarray(z, dtype=complex)
    root = np.sqrt(z * z + 10.0 * z - 2.0)
    g1, g2 = 2.0 + z - root, 2.0 + z + root
    if z.ndim == 0:
        return g1[()], g2[()]
    return g1, g2


def _normalise_columns(P: np.ndarray) -> np.ndarray:
    P = P / np.linalg.norm(P, axis=0)
    for j in range(P.shape[1]):
        col = P[:, j]
        lead = col[np.flatnonzero(np.abs(col) > 1e-14 * np.abs(col).max())[0]]
        P[:, j] = col * (abs(lead) / lead)
    return P


def stage_decomposition(tab: RKTableau, z: complex, gap_tol: float = 1e-6) -> StageDecomposition:
    """Eigendecomposition ``Delta(z) = P diag(gamma) P^{-1}``.

    Two-stage Radau IIa uses the closed-form eigenvalues and explicit
    eigenvectors; other tableaus fall back to a dense eigensolver. Columns of
    ``P`` have unit norm with the first nonzero entry real and positive.

    ``gap_tol`` bounds the relative eigenvalue gap. At the exact defective
    point the computed gap is of order ``sqrt(eps)``, so the bound must sit
    above ``~1e-7``.
    """
    delta = delta_matrix(tab, z)
    if tab is RADAU_IIA_2 or (tab.m == 2 and np.array_equal(tab.A, RADAU_IIA_2.A)):
        gamma = np.array(radau2_eigenvalues(z))
        (a, b), (c, d) = delta
        cols = []
        for g in gamma:
            v1 = np.array([b, g - a])
            v2 = np.array([g - d, c])
            cols.append(v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2)
        P = np.column_stack(cols)
    else:
        gamma, P = np.linalg.eig(delta)
    gap = min(
        abs(gamma[i] - gamma[j]) / max(abs(gamma[i]), 1e-300)
        for i in range(gamma.size)
        for j in range(gamma.size)
        if i != j
    ) if gamma.size > 1 else np.inf
    if gap < gap_tol:
        raise DefectivePointError(z, gap)
    P = _normalise_columns(P.astype(complex))
    P_inv = np.linalg.inv(P)
    return StageDecomposition(gamma=gamma, P=P, P_inv=P_inv)


def stage_signal(func, grid: TimeGrid, tab: RKTableau, n_samples: int) -> TimeSignal:
    """Sample ``func(t)`` at the stage times ``t_n + c_j*dt``; values have shape ``(n, m, ...)``."""
    n = np.arange(n_samples)
    rows = [np.asarray(func((n + cj) * grid.dt)) for cj in tab.c]
    return TimeSignal(np.stack(rows, axis=1), dt=grid.dt)


def stage_boundary_transform(stages: TimeSignal, z: complex) -> np.ndarray:
    """``G_j(z) = sum_n g(t_n + c_j dt) z**n`` for each stage ``j`` (leading output axis)."""
    return np.asarray(ztransform_at_node(stages, z))


def mix_stage_data(P_inv: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Dirichlet data of the decoupled problems: ``W_j = sum_l P_inv[j, l] G_l``."""
    G = np.asarray(G)
    P_inv = np.asarray(P_inv)
    if P_inv.shape[1] != G.shape[0]:
        raise ValueError(f"cannot mix {G.shape[0]} stage values with a {P_inv.shape} matrix")
    return np.tensordot(P_inv, G, axes=(1, 0))


def recombine_solution(P: np.ndarray, W: np.ndarray, z: complex):
    """Step value from stage solutions of a stiffly accurate rule: ``z * sum_j P[m-1, j] W_j``."""
    W = np.asarray(W)
    return z * np.tensordot(np.asarray(P)[-1], W, axes=(0, 0))


def avoid_defective_nodes(
    contour: ContourSpec, defect=RADAU_DEFECTIVE_POINT, tol: float = 1e-6
) -> ContourSpec:
    """Bump ``n_freq`` until no node lies within ``tol`` of the defective point.

    The node ``z = lam`` is present for every node count, so a radius at the
    defective point cannot be repaired this way and raises ``ValueError``.
    """
    if abs(contour.lam - defect) < tol:
        raise ValueError(
            f"contour radius {contour.lam} coincides with the defective point {complex(defect):.6g}; "
            "choose a different lam"
        )
    current = contour
    while np.min(np.abs(contour_nodes(current) - defect)) < tol:
        bumped = ContourSpec(current.lam, current.n_freq + 1)
        logger.warning(
            "contour node within %.1e of the defective point %s; n_freq %d -> %d",
            tol, f"{complex(defect):.6g}", current.n_freq, bumped.n_freq,
        )
        current = bumped
    return current
