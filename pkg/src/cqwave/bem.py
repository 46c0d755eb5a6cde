"""Dense P0-collocation boundary elements for the modified Helmholtz equation.

Kernel ``g_w(x, y) = exp(-w r) / (4 pi r)``. Densities are piecewise constant,
collocated at panel centroids; regular panel integrals use a 7-point
degree-5 triangle rule. The self-panel single-layer integral of ``1/r`` is
done in closed form, the bounded remainder ``g_w - g_0`` by the same rule.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
from scipy.linalg import lapack
from scipy.optimize import minimize_scalar

from .mesh import SurfaceMesh

logger = logging.getLogger(__name__)

__all__ = [
    "FORMULATION_KINDS",
    "Formulation",
    "DensitySolution",
    "SingularSystemError",
    "NearFieldError",
    "triangle_rule",
    "green_kernel",
    "assemble_layer",
    "assemble_layers",
    "formulation_matrix",
    "solve_density",
    "evaluate_potential",
    "inverse_norm_scan",
    "refine_scan_peak",
    "gauss_identity_defect",
]

FORMULATION_KINDS = ("first-kind", "second-kind", "combined-const", "combined-omega")

_FOUR_PI = 4.0 * np.pi
_CHUNK_ELEMENTS = 1_500_000


class SingularSystemError(np.linalg.LinAlgError):
    def __init__(self, message, rcond=None):
        super().__init__(message)
        self.rcond = rcond


class NearFieldError(ValueError):
    """Observation point too close to the surface for the panel quadrature."""


def triangle_rule():
    """Barycentric points ``(7, 3)`` and weights (summing to 1) of the 7-point rule."""
    a1, b1 = 0.059715871789770, 0.470142064105115
    a2, b2 = 0.797426985353087, 0.101286507323456
    w0, w1, w2 = 0.225, 0.132394152788506, 0.125939180544827
    bary = np.array(
        [
            [1 / 3, 1 / 3, 1 / 3],
            [a1, b1, b1], [b1, a1, b1], [b1, b1, a1],
            [a2, b2, b2], [b2, a2, b2], [b2, b2, a2],
        ]
    )
    weights = np.array([w0, w1, w1, w1, w2, w2, w2])
    return bary, weights


@lru_cache(maxsize=8)
def _subdivided_rule(level: int):
    """7-point rule on the ``4**level`` congruent sub-triangles of the reference triangle."""
    bary, w = triangle_rule()
    tris = [np.eye(3)]  # rows: barycentric coordinates of the corners
    for _ in range(level):
        new = []
        for T in tris:
            a, b, c = T
            ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
            new += [np.array(x) for x in ((a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca))]
        tris = new
    pts = np.concatenate([bary @ T for T in tris])
    weights = np.tile(w, len(tris)) / len(tris)
    return pts, weights


def green_kernel(omega, x, y):
    """``exp(-omega r) / (4 pi r)`` with ``r = |x - y|``."""
    r = np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float), axis=-1)
    if np.any(r == 0):
        raise ValueError("Green's function is singular at coincident points")
    val = np.exp(-complex(omega) * r) / (_FOUR_PI * r)
    return val[()] if np.ndim(val) == 0 else val


@dataclass(frozen=True)
class Formulation:
    kind: str
    eta: complex = 0.0

    def __post_init__(self):
        if self.kind not in FORMULATION_KINDS:
            raise ValueError(f"unknown formulation {self.kind!r}; choose from {FORMULATION_KINDS}")
        object.__setattr__(self, "eta", complex(self.eta))

    def coupling(self, omega: complex) -> complex:
        """Weight of the single layer in the combined operator and representation."""
        if self.kind == "combined-omega":
            return complex(omega)
        if self.kind == "combined-const":
            return self.eta
        return 0.0


@dataclass(frozen=True)
class DensitySolution:
    omega: complex
    formulation: Formulation
    phi: np.ndarray
    residual: float
    rcond: float


# --------------------------------------------------------------------- geometry


@dataclass(frozen=True, eq=False)
class _PanelGeometry:
    quad_points: np.ndarray  # (N, 7, 3)
    quad_weights: np.ndarray  # (N, 7) physical weights
    self_static: np.ndarray  # (N,) integral of 1/(4 pi r) over own panel from its centroid
    self_r: np.ndarray  # (N, 7) distances from centroid to own quadrature points


def _self_integral_inv_r(corners: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``int_T 1/|x - y| dy`` for ``x`` in the plane and interior of ``T``.

    Sum over edges of ``h * (asinh(s_B / h) - asinh(s_A / h))`` with ``h`` the
    distance from ``x`` to the edge line and ``s`` tangential coordinates.
    """
    total = np.zeros(corners.shape[0])
    for a, b in ((0, 1), (1, 2), (2, 0)):
        A, B = corners[:, a], corners[:, b]
        e = B - A
        L = np.linalg.norm(e, axis=1)
        t = e / L[:, None]
        sA = np.einsum("ij,ij->i", A - x, t)
        sB = np.einsum("ij,ij->i", B - x, t)
        h = np.linalg.norm((A - x) - sA[:, None] * t, axis=1)
        total += h * (np.arcsinh(sB / h) - np.arcsinh(sA / h))
    return total


@lru_cache(maxsize=4)
def _geometry(mesh: SurfaceMesh) -> _PanelGeometry:
    bary, w = triangle_rule()
    P = mesh.corners
    qp = np.einsum("qk,nkd->nqd", bary, P)
    qw = mesh.areas[:, None] * w[None, :]
    self_static = _self_integral_inv_r(P, mesh.centroids) / _FOUR_PI
    self_r = np.linalg.norm(qp - mesh.centroids[:, None, :], axis=2)
    for arr in (qp, qw, self_static, self_r):
        arr.setflags(write=False)
    return _PanelGeometry(qp, qw, self_static, self_r)


def _row_chunks(n_rows: int, n_cols: int):
    step = max(1, _CHUNK_ELEMENTS // max(1, n_cols * 7))
    for start in range(0, n_rows, step):
        yield slice(start, min(n_rows, start + step))


def _kernel_blocks(x: np.ndarray, geo: _PanelGeometry, normals: np.ndarray):
    """Per-quadrature-point ``r``, ``w/(4 pi r)`` and ``w (x-y).n / (4 pi r^3)`` for a row block."""
    diff = x[:, None, None, :] - geo.quad_points[None]
    r = np.sqrt(np.einsum("mnqd,mnqd->mnq", diff, diff))
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_r = 1.0 / r
        w4r = geo.quad_weights[None] * inv_r / _FOUR_PI
        dn = np.einsum("mnqd,nd->mnq", diff, normals) * inv_r * inv_r * w4r
    return r, w4r, dn


@dataclass(frozen=True, eq=False)
class _CollocationBlocks:
    """Frequency-independent kernel factors at the centroids, self panels zeroed."""

    r: np.ndarray  # (N, N, 7)
    w4r: np.ndarray  # w / (4 pi r)
    dn: np.ndarray  # w (x - y).n / (4 pi r^3)
    rdn: np.ndarray  # r * dn


@lru_cache(maxsize=2)
def _collocation_blocks(mesh: SurfaceMesh) -> _CollocationBlocks:
    geo = _geometry(mesh)
    r, w4r, dn = _kernel_blocks(mesh.centroids, geo, mesh.normals)
    i = np.arange(mesh.n_panels)
    r[i, i] = 1.0
    w4r[i, i] = 0.0
    dn[i, i] = 0.0
    rdn = r * dn
    for arr in (r, w4r, dn, rdn):
        arr.setflags(write=False)
    return _CollocationBlocks(r, w4r, dn, rdn)


def _contract(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("mnq,mnq->mn", a, b)


def assemble_layers(mesh: SurfaceMesh, omega: complex, single: bool = True, double: bool = True):
    """Single- and double-layer collocation matrices at one frequency.

    Returns ``(S, K)``; entries not requested are ``None``. The exponential
    is split as ``exp(-Re(w) r) (cos(Im(w) r) - i sin(Im(w) r))`` so that all
    contractions run in real arithmetic.
    """
    omega = complex(omega)
    geo = _geometry(mesh)
    blocks = _collocation_blocks(mesh)
    N = mesh.n_panels
    a, b = omega.real, omega.imag
    S = np.empty((N, N), dtype=complex) if single else None
    K = np.empty((N, N), dtype=complex) if double else None
    for rows in _row_chunks(N, N):
        r = blocks.r[rows]
        decay = np.exp(-a * r)
        cos = np.cos(b * r)
        cos *= decay
        sin = np.sin(b * r) if b != 0 else None
        if sin is not None:
            sin *= decay
        if single:
            w4r = blocks.w4r[rows]
            S.real[rows] = _contract(cos, w4r)
            S.imag[rows] = -_contract(sin, w4r) if sin is not None else 0.0
        if double:
            dn, rdn = blocks.dn[rows], blocks.rdn[rows]
            e_dn = _contract(cos, dn) - (1j * _contract(sin, dn) if sin is not None else 0.0)
            e_rdn = _contract(cos, rdn) - (1j * _contract(sin, rdn) if sin is not None else 0.0)
            K[rows] = e_dn + omega * e_rdn
    if single:
        rs = geo.self_r
        with np.errstate(divide="ignore", invalid="ignore"):
            rem = np.where(rs > 0, np.expm1(-omega * rs) / np.where(rs > 0, rs, 1.0), -omega)
        diag = geo.self_static + np.einsum("nq,nq->n", rem, geo.quad_weights) / _FOUR_PI
        S[np.diag_indices(N)] = diag
    return S, K


def assemble_layer(mesh: SurfaceMesh, omega: complex, which: str) -> np.ndarray:
    """Dense ``N x N`` single (``"single"``) or double (``"double"``) layer matrix."""
    if which == "single":
        return assemble_layers(mesh, omega, single=True, double=False)[0]
    if which == "double":
        return assemble_layers(mesh, omega, single=False, double=True)[1]
    raise ValueError(f"which must be 'single' or 'double', got {which!r}")


def formulation_matrix(mesh: SurfaceMesh, omega: complex, f: Formulation) -> np.ndarray:
    """``S`` (first kind), ``I/2 + K`` (second kind) or ``I/2 + K + eta S`` (combined)."""
    omega = complex(omega)
    if f.kind == "first-kind":
        return assemble_layer(mesh, omega, "single")
    eta = f.coupling(omega)
    S, K = assemble_layers(mesh, omega, single=eta != 0, double=True)
    A = K
    if eta != 0:
        A += eta * S
    A[np.diag_indices_from(A)] += 0.5
    return A


def gauss_identity_defect(mesh: SurfaceMesh) -> np.ndarray:
    """Row sums of the static double layer plus 1/2 (zero for exact quadrature)."""
    K = assemble_layer(mesh, 0.0, "double")
    return K.real.sum(axis=1) + 0.5


# ------------------------------------------------------------------------ solve


def solve_density(
    matrix: np.ndarray,
    rhs,
    omega: complex = 0.0,
    formulation: Formulation | None = None,
    rcond_min: float = 1e-12,
) -> DensitySolution:
    """Dense LU solve with a reciprocal-condition check; ``rhs`` may have trailing columns."""
    A = np.asarray(matrix, dtype=complex)
    b = np.asarray(rhs, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if b.shape[0] != A.shape[0]:
        raise ValueError(f"rhs length {b.shape[0]} does not match matrix size {A.shape[0]}")
    anorm = np.linalg.norm(A, 1)
    lu, piv, info = lapack.zgetrf(A)
    if info > 0:
        raise SingularSystemError(f"matrix is exactly singular at omega={omega:.6g}", rcond=0.0)
    rcond, _ = lapack.zgecon(lu, anorm)
    if not rcond >= rcond_min:
        raise SingularSystemError(
            f"matrix is singular to working precision at omega={omega:.6g} "
            f"(reciprocal condition {rcond:.2e} < {rcond_min:.0e})",
            rcond=rcond,
        )
    b2 = b.reshape(b.shape[0], -1)
    x = scipy.linalg.lu_solve((lu, piv), b2, check_finite=False)
    bnorm = np.linalg.norm(b2)
    residual = float(np.linalg.norm(A @ x - b2) / bnorm) if bnorm > 0 else 0.0
    return DensitySolution(
        omega=complex(omega),
        formulation=formulation,
        phi=x.reshape(b.shape),
        residual=residual,
        rcond=float(rcond),
    )


# --------------------------------------------------------------- evaluation


def _refinement_level(dist: np.ndarray, diam: np.ndarray, far: float) -> np.ndarray:
    ratio = np.maximum(dist / diam, 1e-300)
    return np.clip(np.ceil(np.log2(far / ratio)), 0, None).astype(int)


def evaluate_potential(
    mesh: SurfaceMesh,
    sol: DensitySolution,
    f: Formulation | None = None,
    points=None,
    far_ratio: float = 3.0,
    min_ratio: float = 0.25,
    max_level: int = 6,
) -> np.ndarray:
    """Exterior field of the layer representation matching the formulation.

    ``S phi`` for the first kind, ``K phi`` for the second kind and
    ``K phi + eta S phi`` for the combined forms. Panels closer than
    ``far_ratio`` diameters to a point are integrated on uniformly
    subdivided copies; points closer than ``min_ratio`` diameters raise
    ``NearFieldError``.
    """
    f = f if f is not None else sol.formulation
    if f is None:
        raise ValueError("a formulation is required to choose the representation")
    omega = sol.omega
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    phi = np.asarray(sol.phi)
    phi2 = phi.reshape(phi.shape[0], -1)
    out = np.zeros((pts.shape[0], phi2.shape[1]), dtype=complex)
    if pts.shape[0] == 0 or not np.any(phi2):
        return out.reshape((pts.shape[0],) + phi.shape[1:])

    w_single = 1.0 if f.kind == "first-kind" else f.coupling(omega)
    use_double = f.kind != "first-kind"
    geo = _geometry(mesh)
    N = mesh.n_panels
    diam = mesh.diameters
    for rows in _row_chunks(pts.shape[0], N):
        r, w4r, dn = _kernel_blocks(pts[rows], geo, mesh.normals)
        if np.any(r == 0):
            raise NearFieldError("observation point coincides with a quadrature point")
        e = np.exp(-omega * r)
        kern = np.zeros(r.shape[:2], dtype=complex)
        if w_single != 0:
            kern += w_single * np.einsum("mnq,mnq->mn", e, w4r)
        if use_double:
            kern += np.einsum("mnq,mnq->mn", e * (1.0 + omega * r), dn)
        out[rows] = kern @ phi2

    # near-field correction on subdivided panels
    dist = np.linalg.norm(pts[:, None, :] - mesh.centroids[None], axis=2)
    too_close = dist < min_ratio * diam[None]
    if np.any(too_close):
        p = np.flatnonzero(too_close.any(axis=1))
        raise NearFieldError(
            f"{p.size} observation point(s) within {min_ratio} panel diameters of the surface "
            f"(first index {p[0]}); near-field evaluation is not supported"
        )
    levels = _refinement_level(dist, diam[None], far_ratio)
    levels = np.minimum(levels, max_level)
    for level in range(1, max_level + 1):
        pi, pj = np.nonzero(levels == level)
        if pi.size == 0:
            continue
        bary, w = _subdivided_rule(level)
        coarse_bary, coarse_w = triangle_rule()
        for b_, w_, sign in ((bary, w, 1.0), (coarse_bary, coarse_w, -1.0)):
            y = np.einsum("qk,pkd->pqd", b_, mesh.corners[pj])
            diff = pts[pi][:, None, :] - y
            rr = np.linalg.norm(diff, axis=2)
            ww = mesh.areas[pj][:, None] * w_[None, :]
            ee = np.exp(-omega * rr)
            g = ee * ww / (_FOUR_PI * rr)
            k = np.zeros(pi.size, dtype=complex)
            if w_single != 0:
                k += w_single * g.sum(axis=1)
            if use_double:
                dnn = np.einsum("pqd,pd->pq", diff, mesh.normals[pj]) / rr**2
                k += (g * (1.0 + omega * rr) * dnn).sum(axis=1)
            np.add.at(out, pi, sign * k[:, None] * phi2[pj])
    return out.reshape((pts.shape[0],) + phi.shape[1:])


# ---------------------------------------------------------------------- scan


def inverse_norm_scan(mesh: SurfaceMesh, f: Formulation, omegas) -> np.ndarray:
    """``p(w) = ||C^{-1} A(w)^{-1} C^{-1}||_2`` with ``C = diag(sqrt(area))``.

    Equals ``1 / sigma_min(C A C)``; an exactly singular matrix gives ``inf``.
    """
    c = np.sqrt(mesh.areas)
    out = []
    for omega in np.atleast_1d(omegas):
        A = formulation_matrix(mesh, omega, f)
        smin = scipy.linalg.svdvals(c[:, None] * A * c[None, :])[-1]
        out.append(np.inf if smin == 0 else 1.0 / smin)
    return np.array(out)


def refine_scan_peak(mesh: SurfaceMesh, f: Formulation, omegas, p, xatol: float = 1e-5):
    """Refine the largest interior local maximum of a scan along a straight ``omega`` path.

    Maximises ``log p`` between the neighbours of the best coarse sample.
    Returns ``(omega_peak, p_peak)`` or ``None`` if the maximum sits at an end.
    """
    omegas = np.asarray(omegas, dtype=complex)
    p = np.asarray(p, dtype=float)
    interior = [i for i in range(1, p.size - 1) if p[i] >= p[i - 1] and p[i] >= p[i + 1]]
    if not interior:
        return None
    i = max(interior, key=lambda j: p[j])
    a, b = omegas[i - 1], omegas[i + 1]

    def neg_log_p(s):
        return -np.log(inverse_norm_scan(mesh, f, [a + s * (b - a)])[0])

    res = minimize_scalar(neg_log_p, bounds=(0.0, 1.0), method="bounded",
                          options={"xatol": xatol / max(abs(b - a), 1e-300)})
    return complex(a + res.x * (b - a)), float(np.exp(-res.fun))
