"""Estimator-style front end for the CQ pipeline.

``fit`` performs the Laplace-domain work: sample the boundary data,
Z-transform it at the contour nodes and solve one frequency problem per
node (per stage for Runge-Kutta rules). ``predict`` evaluates the node
solutions at observation points and inverts the transform.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted
from threadpoolctl import threadpool_limits

from .bem import Formulation, evaluate_potential, formulation_matrix, solve_density
from .mesh import SurfaceMesh, icosphere, load_mesh
from .radau import RADAU_IIA_2, avoid_defective_nodes, stage_decomposition
from .signals import sample_boundary_signal
from .sphere import (
    default_degree,
    evaluate_sphere_solution,
    sh_analyze,
    sh_grid,
    solve_exterior_dirichlet_sphere,
)
from .zdomain import (
    ContourSpec,
    FrequencySamples,
    TimeGrid,
    TimeSignal,
    contour_nodes,
    expand_half_spectrum,
    frequency_of_node,
    get_rule,
    half_spectrum_indices,
    inverse_ztransform,
    multistep_symbol,
    ztransform_nodes,
)

logger = logging.getLogger(__name__)

__all__ = ["CQWaveSolver", "FrequencySolveError", "NodeSolution", "node_key"]

RULES = ("backward-euler", "bdf2", "radau2a")
GEOMETRIES = ("sphere-analytic", "mesh")


class FrequencySolveError(RuntimeError):
    """A node solve failed; carries the node index and frequency."""

    def __init__(self, k: int, omega, cause: Exception):
        hint = "change the contour radius lam or the node count n_freq"
        super().__init__(f"frequency solve failed at node k={k}, omega={complex(omega):.6g}: {cause}; {hint}")
        self.k = k
        self.omega = omega
        self.__cause__ = cause


def node_key(z: complex) -> tuple:
    """Hashable identity of a contour node, stable across node counts that share it."""
    z = complex(z)
    return (round(z.real, 13) + 0.0, round(z.imag, 13) + 0.0)


@dataclass(frozen=True)
class NodeSolution:
    """Frequency-domain solution at one node.

    ``parts`` holds one back-end solution per stage with recombination
    weights, so that ``U(z; x) = sum_j weights[j] * field_j(x)``.
    """

    z: complex
    omegas: tuple
    parts: tuple
    weights: tuple


class CQWaveSolver(BaseEstimator):
    """Convolution-quadrature solver for exterior Dirichlet wave problems.

    Parameters
    ----------
    c, dt, n_steps : float, float, int
        Wave speed, time step and number of output steps.
    lam, n_freq : float, int or None
        Contour radius and node count; ``n_freq=None`` uses ``n_steps``.
    rule : {"backward-euler", "bdf2", "radau2a"}
    geometry : {"sphere-analytic", "mesh"}
    mesh : SurfaceMesh, path or int, optional
        Boundary mesh for ``geometry="mesh"``; an int is an icosphere
        subdivision level.
    formulation : {"first-kind", "second-kind", "combined-const", "combined-omega"}
    eta : complex
        Coupling for ``combined-const``.
    degree : int, optional
        Spherical-harmonic degree for the analytic back end.
    half_spectrum : bool
        Solve only the nodes not related by conjugation.
    n_jobs : int
        Concurrent node solves (threads); results do not depend on it.
    """

    def __init__(
        self,
        c=343.0,
        dt=5e-4,
        n_steps=40,
        lam=0.95,
        n_freq=None,
        rule="backward-euler",
        geometry="sphere-analytic",
        mesh=None,
        formulation="combined-const",
        eta=1.0,
        degree=None,
        half_spectrum=True,
        n_jobs=1,
    ):
        self.c = c
        self.dt = dt
        self.n_steps = n_steps
        self.lam = lam
        self.n_freq = n_freq
        self.rule = rule
        self.geometry = geometry
        self.mesh = mesh
        self.formulation = formulation
        self.eta = eta
        self.degree = degree
        self.half_spectrum = half_spectrum
        self.n_jobs = n_jobs

    # ---------------------------------------------------------------- checks

    def _validate(self):
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}, got {self.rule!r}")
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"geometry must be one of {GEOMETRIES}, got {self.geometry!r}")
        grid = TimeGrid(float(self.c), float(self.dt), int(self.n_steps))
        n_freq = int(self.n_freq) if self.n_freq is not None else grid.n_steps
        contour = ContourSpec(float(self.lam), n_freq)
        if self.rule == "radau2a":
            contour = avoid_defective_nodes(contour)
        if not 0 < contour.lam < 1:
            logger.warning("contour radius %.3g outside (0, 1): stage symbols may be undefined", contour.lam)
        if int(self.n_jobs) < 1:
            raise ValueError("n_jobs must be a positive integer")
        mesh = None
        formulation = None
        if self.geometry == "mesh":
            formulation = Formulation(self.formulation, self.eta)
            mesh = self._resolve_mesh()
        return grid, contour, mesh, formulation

    def _resolve_mesh(self) -> SurfaceMesh:
        if isinstance(self.mesh, SurfaceMesh):
            return self.mesh
        if self.mesh is None:
            raise ValueError("geometry='mesh' needs a mesh (SurfaceMesh, OFF path or icosphere level)")
        if isinstance(self.mesh, (int, np.integer)):
            return icosphere(int(self.mesh))
        return load_mesh(self.mesh)

    # ------------------------------------------------------------------- fit

    def _stage_symbols(self, z: complex):
        """Frequencies, data-mixing matrix and recombination weights at one node."""
        if self.rule == "radau2a":
            dec = stage_decomposition(RADAU_IIA_2, z)
            return dec.gamma, dec.P_inv, z * dec.P[-1]
        gamma = multistep_symbol(get_rule(self.rule), z)
        return np.array([gamma]), np.ones((1, 1)), np.ones(1)

    def _sample_points(self, mesh):
        if self.geometry == "mesh":
            return mesh.centroids
        return sh_grid(self.degree_).points

    def _solve_node(self, k: int, z: complex, data_z: np.ndarray, mesh, formulation) -> NodeSolution:
        gamma, mix, weights = self._stage_symbols(z)
        omegas = [complex(frequency_of_node(g, self.grid_)[0]) for g in gamma]
        stage_data = np.tensordot(mix, data_z, axes=(1, 0))  # (n_stage, n_points)
        parts = []
        for omega, rhs in zip(omegas, stage_data):
            try:
                if self.geometry == "mesh":
                    A = formulation_matrix(mesh, omega, formulation)
                    parts.append(solve_density(A, rhs, omega, formulation))
                else:
                    expansion = sh_analyze(rhs, self.degree_)
                    parts.append(solve_exterior_dirichlet_sphere(expansion, 1j * omega))
            except (ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
                raise FrequencySolveError(k, omega, exc) from exc
        return NodeSolution(complex(z), tuple(omegas), tuple(parts), tuple(complex(w) for w in weights))

    def fit(self, boundary_data, node_cache=None):
        """Transform boundary data and solve the frequency problems.

        Parameters
        ----------
        boundary_data : callable
            ``g(t, x)`` returning values of shape ``t.shape + (n_points,)``.
        node_cache : dict, optional
            Shared store of node solutions keyed by node position; reused
            across fits with the same data and solver settings.
        """
        grid, contour, mesh, formulation = self._validate()
        self.grid_ = grid
        self.contour_ = contour
        self.mesh_ = mesh
        self.formulation_ = formulation
        nodes = contour_nodes(contour)
        self.node_indices_ = (
            half_spectrum_indices(contour.n_freq) if self.half_spectrum else np.arange(1, contour.n_freq + 1)
        )
        solve_nodes = nodes[self.node_indices_ - 1]

        if self.geometry == "sphere-analytic":
            if self.degree is not None:
                self.degree_ = int(self.degree)
            else:
                max_omega = max(
                    float(np.max(np.abs(self._stage_symbols(z)[0]))) for z in solve_nodes
                ) / grid.cdt
                self.degree_ = default_degree(max_omega)
        else:
            self.degree_ = None

        points = self._sample_points(mesh)
        offsets = RADAU_IIA_2.c if self.rule == "radau2a" else (0.0,)
        samples = sample_boundary_signal(boundary_data, points, grid.dt, grid.n_steps, offsets)
        self.n_samples_ = samples.shape[0]
        # (n_sig, n_stage, n_points) -> per node (n_stage, n_points)
        transformed = ztransform_nodes(TimeSignal(samples, grid.dt), contour).values
        data = transformed[self.node_indices_ - 1]

        cache = node_cache if node_cache is not None else {}
        self._settings_key = (
            self.rule, self.geometry, self.formulation if mesh is not None else None,
            complex(self.eta) if mesh is not None else None, id(mesh), grid, self.degree_,
        )
        keys = [(self._settings_key, node_key(z)) for z in solve_nodes]
        todo = [i for i, key in enumerate(keys) if key not in cache]
        with threadpool_limits(limits=1):
            results = Parallel(n_jobs=int(self.n_jobs), prefer="threads")(
                delayed(self._solve_node)(int(self.node_indices_[i]), solve_nodes[i], data[i], mesh, formulation)
                for i in todo
            )
        for i, res in zip(todo, results):
            cache[keys[i]] = res
        self.n_solves_ = len(todo) * (2 if self.rule == "radau2a" else 1)
        self.node_solutions_ = [cache[key] for key in keys]
        self._eval_cache = node_cache if node_cache is not None else {}
        return self

    # --------------------------------------------------------------- predict

    def _evaluate_part(self, part, points):
        if self.geometry == "mesh":
            return evaluate_potential(self.mesh_, part, self.formulation_, points)
        return evaluate_sphere_solution(part, points)

    def _node_field(self, sol: NodeSolution, points, points_key):
        key = ("field", self._settings_key, node_key(sol.z), points_key)
        cached = self._eval_cache.get(key)
        if cached is not None:
            return cached
        out = np.zeros(points.shape[0], dtype=complex)
        for w, part in zip(sol.weights, sol.parts):
            out += w * self._evaluate_part(part, points)
        self._eval_cache[key] = out
        return out

    def transfer(self, X) -> FrequencySamples:
        """Frequency-domain field at every contour node, shape ``(n_freq, n_points)``."""
        check_is_fitted(self, "node_solutions_")
        X = check_array(X, dtype=float, ensure_min_samples=0)
        if X.shape[1] != 3:
            raise ValueError(f"points must have 3 coordinates, got {X.shape[1]}")
        points_key = hash(X.tobytes())
        with threadpool_limits(limits=1):
            vals = Parallel(n_jobs=int(self.n_jobs), prefer="threads")(
                delayed(self._node_field)(sol, X, points_key) for sol in self.node_solutions_
            )
        vals = np.array(vals).reshape(len(self.node_solutions_), X.shape[0])
        if self.half_spectrum:
            return expand_half_spectrum(vals, self.contour_)
        return FrequencySamples(vals, self.contour_)

    def predict(self, X) -> np.ndarray:
        """Time-domain field ``u[n, p]`` at ``t_n = n dt``, ``n < n_steps``."""
        samples = self.transfer(X)
        u = inverse_ztransform(samples, self.grid_.n_steps).values
        scale = float(np.max(np.abs(u), initial=0.0))
        residue = float(np.max(np.abs(u.imag), initial=0.0))
        self.imag_residue_ = residue / scale if scale > 0 else 0.0
        if scale > 0 and residue > 1e-8 * scale:
            logger.warning("inverse transform has imaginary residue %.2e relative to max|u|", self.imag_residue_)
        return u.real
