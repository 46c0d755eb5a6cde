"""Pipeline orchestration: runs, error metrics, convergence studies and outputs."""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bem import Formulation, inverse_norm_scan
from .config import RunConfig
from .estimator import CQWaveSolver
from .mesh import SurfaceMesh, icosphere, load_mesh
from .poles import AnalyticityReport, data_analyticity_radius, sphere_pole_atlas
from .signals import GaussianBeam, PolynomialPulse
from .zdomain import (
    ContourSpec,
    FrequencySamples,
    TimeGrid,
    contour_nodes,
    get_rule,
    inverse_ztransform,
    predicted_rate,
)

logger = logging.getLogger(__name__)

__all__ = [
    "WORKERS_ENV",
    "TimeDomainField",
    "ConvergenceRow",
    "resolve_workers",
    "resolve_mesh",
    "boundary_data_from_config",
    "observation_points",
    "build_solver",
    "run_cq",
    "run_synthetic",
    "abs_diff",
    "floor_estimate",
    "fit_rate",
    "convergence_study",
    "pole_report",
    "omega_scan",
    "parse_omega_axis",
    "emit_outputs",
    "write_timeseries_csv",
    "write_convergence_csv",
    "write_pole_csv",
    "write_scan_csv",
    "write_manifest",
]

WORKERS_ENV = "CQWAVE_WORKERS"


def _fmt(x) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class TimeDomainField:
    values: np.ndarray  # (n_steps, n_points), real
    grid: TimeGrid
    points: np.ndarray  # (n_points, 3)

    def times(self) -> np.ndarray:
        return self.grid.times()


@dataclass(frozen=True)
class ConvergenceRow:
    n_freq: int
    abs_diff: float
    fitted_rate: float
    predicted_rate: float


# ---------------------------------------------------------------- set-up


def resolve_workers(config: RunConfig | None = None) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {env!r}") from None
        if n < 1:
            raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {env!r}")
        return n
    if config is not None and config.workers is not None:
        return int(config.workers)
    return os.cpu_count() or 1


def resolve_mesh(config: RunConfig) -> SurfaceMesh | None:
    if config.geometry != "mesh":
        return None
    if config.mesh.startswith("icosphere:"):
        return icosphere(int(config.mesh.split(":", 1)[1]))
    return load_mesh(config.resolve_path(config.mesh))


def boundary_data_from_config(config: RunConfig):
    params = {k: v for k, v in config.boundary_data.items() if k != "kind"}
    if config.boundary_data["kind"] == "polynomial-pulse":
        return PolynomialPulse(**params)
    if "direction" in params:
        params["direction"] = tuple(params["direction"])
    return GaussianBeam(c=config.c, **params)


def _grid_points(n: int, extent: float) -> np.ndarray:
    x = np.linspace(-extent, extent, n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel(), np.zeros(X.size)])
    return pts[pts[:, 0] ** 2 + pts[:, 1] ** 2 > 1.0]


def observation_points(config: RunConfig, mesh: SurfaceMesh | None = None) -> np.ndarray:
    """Observation points; grid points closer than one panel diameter to the mesh are dropped."""
    obs = config.observation
    if obs["kind"] == "points":
        return np.asarray(obs["points"], dtype=float).reshape(-1, 3)
    if obs["kind"] == "circle":
        n, radius = int(obs["n"]), float(obs["radius"])
        phi = 2 * np.pi * np.arange(n) / n
        return np.column_stack([radius * np.cos(phi), radius * np.sin(phi), np.zeros(n)])
    pts = _grid_points(int(obs["n"]), float(obs["extent"]))
    if mesh is not None:
        keep = np.ones(pts.shape[0], dtype=bool)
        for start in range(0, pts.shape[0], 512):
            block = pts[start : start + 512]
            d = np.linalg.norm(block[:, None, :] - mesh.centroids[None], axis=2)
            keep[start : start + 512] = np.all(d >= mesh.diameters[None], axis=1)
        if not keep.all():
            logger.info("dropped %d observation point(s) within one panel diameter of the surface", (~keep).sum())
        pts = pts[keep]
    return pts


def build_solver(config: RunConfig, n_freq: int | None = None, mesh=None, degree=None, n_jobs=None) -> CQWaveSolver:
    return CQWaveSolver(
        c=config.c,
        dt=config.dt,
        n_steps=config.n_steps,
        lam=config.lam,
        n_freq=n_freq if n_freq is not None else config.n_freq,
        rule=config.rule,
        geometry=config.geometry,
        mesh=mesh if mesh is not None else resolve_mesh(config),
        formulation=config.formulation,
        eta=config.eta_complex,
        degree=degree if degree is not None else config.degree,
        half_spectrum=config.half_spectrum,
        n_jobs=n_jobs if n_jobs is not None else resolve_workers(config),
    )


# ---------------------------------------------------------------- runs


def run_cq(config: RunConfig, n_freq=None, node_cache=None, points=None, mesh=None, degree=None, n_jobs=None):
    """Boundary data to time-domain field at the observation points."""
    mesh = mesh if mesh is not None else resolve_mesh(config)
    solver = build_solver(config, n_freq=n_freq, mesh=mesh, degree=degree, n_jobs=n_jobs)
    solver.fit(boundary_data_from_config(config), node_cache=node_cache)
    pts = observation_points(config, mesh) if points is None else np.asarray(points, dtype=float).reshape(-1, 3)
    values = solver.predict(pts) if pts.shape[0] else np.zeros((config.n_steps, 0))
    return TimeDomainField(values, solver.grid_, pts)


def run_synthetic(transfer, contour: ContourSpec, n_out: int) -> np.ndarray:
    """Inverse transform of a closed-form ``U(z)`` sampled on the contour (no solves)."""
    nodes = contour_nodes(contour)
    samples = FrequencySamples(np.asarray(transfer(nodes), dtype=complex), contour)
    return inverse_ztransform(samples, n_out).values


def abs_diff(field, reference) -> float:
    """``max_n max_p |u[n, p] - ref[n, p]|``."""
    a = field.values if isinstance(field, TimeDomainField) else np.asarray(field)
    b = reference.values if isinstance(reference, TimeDomainField) else np.asarray(reference)
    if a.shape != b.shape:
        raise ValueError(f"field shapes differ: {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)))


def floor_estimate(reference: TimeDomainField, lam: float) -> float:
    """Round-off level of the inverse transform: ``eps * max|u| * lam^-(Nt-1)``."""
    nt = reference.values.shape[0]
    scale = float(np.max(np.abs(reference.values), initial=0.0))
    return float(np.finfo(float).eps * scale * lam ** (-(nt - 1)))


def fit_rate(nfs, diffs, floor: float, margin: float = 100.0):
    """``exp(slope)`` of ``ln AbsDiff`` against ``Nf`` over points above ``margin * floor``.

    Returns ``(rate, mask)``; ``rate`` is NaN when fewer than 3 points remain.
    """
    nfs = np.asarray(nfs, dtype=float)
    diffs = np.asarray(diffs, dtype=float)
    mask = (diffs > margin * floor) & np.isfinite(diffs) & (diffs > 0)
    if mask.sum() < 3:
        logger.warning("rate fit unavailable: only %d point(s) above the round-off floor", mask.sum())
        return float("nan"), mask
    slope = np.polyfit(nfs[mask], np.log(diffs[mask]), 1)[0]
    return float(np.exp(slope)), mask


def pole_report(config: RunConfig, mesh: SurfaceMesh | None = None) -> AnalyticityReport | None:
    """Sphere pole atlas for the configured formulation and rule (``None`` off the sphere)."""
    if config.geometry == "mesh":
        mesh = mesh if mesh is not None else resolve_mesh(config)
        radii = np.linalg.norm(mesh.vertices, axis=1)
        if np.max(np.abs(radii - 1.0)) > 1e-6:
            logger.info("mesh is not a unit sphere; no analytic pole atlas")
            return None
        formulation = config.formulation
    else:
        formulation = "sphere-analytic"
    grid = TimeGrid(config.c, config.dt, config.n_steps)
    if config.boundary_data["kind"] == "polynomial-pulse":
        lam_g = data_analyticity_radius("exponential-envelope", grid, beta=float(config.boundary_data["p"]))
    else:
        lam_g = data_analyticity_radius("gaussian-beam", grid)
    rule = "radau2a" if config.rule == "radau2a" else get_rule(config.rule)
    eta = config.eta_complex
    if formulation == "combined-const" and eta.imag != 0:
        logger.info("complex eta: impedance poles are not located analytically; use the scan command")
        return None
    return sphere_pole_atlas(formulation, rule, grid, eta=eta.real, lambda_G=lam_g)


def convergence_study(config: RunConfig, nf_list, reference_nf=None, points=None, n_jobs=None):
    """AbsDiff against a reference run with ``reference_nf >= 4 max(nf_list)`` nodes.

    Returns ``(rows, reference_field)``. Node solutions are shared between
    node counts whose contours overlap.
    """
    nf_list = [int(v) for v in nf_list]
    if nf_list != sorted(nf_list) or len(set(nf_list)) != len(nf_list):
        raise ValueError("nf_list must be strictly increasing")
    reference_nf = int(reference_nf or config.reference_nf or 4 * nf_list[-1])
    if reference_nf < 4 * nf_list[-1]:
        raise ValueError(f"reference_nf={reference_nf} is below 4 * max(nf_list) = {4 * nf_list[-1]}")
    mesh = resolve_mesh(config)
    pts = observation_points(config, mesh) if points is None else np.asarray(points, dtype=float).reshape(-1, 3)
    degree = config.degree
    if config.geometry == "sphere-analytic" and degree is None:
        probe = build_solver(config, n_freq=reference_nf, mesh=mesh, n_jobs=1)
        probe.fit(boundary_data_from_config(config))
        degree = probe.degree_
    cache: dict = {}
    ref = run_cq(config, n_freq=reference_nf, node_cache=cache, points=pts, mesh=mesh, degree=degree, n_jobs=n_jobs)
    diffs = []
    for nf in nf_list:
        field = run_cq(config, n_freq=nf, node_cache=cache, points=pts, mesh=mesh, degree=degree, n_jobs=n_jobs)
        diffs.append(abs_diff(field, ref))
        logger.info("Nf=%d AbsDiff=%.3e", nf, diffs[-1])
    rate, _ = fit_rate(nf_list, diffs, floor_estimate(ref, config.lam))
    report = pole_report(config, mesh)
    pred = float("nan")
    if report is not None:
        try:
            pred = predicted_rate(config.lam, report.lambda_U)
        except ValueError as exc:
            logger.warning("no predicted rate: %s", exc)
    rows = [ConvergenceRow(nf, d, rate, pred) for nf, d in zip(nf_list, diffs)]
    return rows, ref


def parse_omega_axis(spec: str) -> np.ndarray:
    """``"imag:start:stop:step"`` or ``"real:start:stop:step"`` to an array of omegas."""
    try:
        axis, start, stop, step = spec.split(":")
        start, stop, step = float(start), float(stop), float(step)
    except ValueError:
        raise ValueError(f"omega axis must look like 'imag:0.5:3:0.05', got {spec!r}") from None
    if axis not in ("imag", "real") or step <= 0 or stop < start:
        raise ValueError(f"bad omega axis {spec!r}")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    values = start + step * np.arange(n)
    return values * (1j if axis == "imag" else 1.0)


def omega_scan(config: RunConfig, omegas, mesh: SurfaceMesh | None = None) -> np.ndarray:
    if config.geometry != "mesh":
        raise ValueError("the p(omega) scan needs geometry 'mesh'")
    mesh = mesh if mesh is not None else resolve_mesh(config)
    return inverse_norm_scan(mesh, Formulation(config.formulation, config.eta_complex), omegas)


# ---------------------------------------------------------------- outputs


def _output_path(config: RunConfig, suffix: str, directory=None) -> Path:
    out_dir = Path(directory) if directory is not None else config.resolve_path(config.output["directory"])
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir / f"{config.output['prefix']}{suffix}"


def write_timeseries_csv(field: TimeDomainField, path) -> Path:
    path = Path(path)
    t = field.times()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "point_id", "x", "y", "z", "u"])
        for n in range(field.values.shape[0]):
            for p, (x, y, z) in enumerate(field.points):
                w.writerow([_fmt(t[n]), p, _fmt(x), _fmt(y), _fmt(z), _fmt(field.values[n, p])])
    return path


def write_convergence_csv(rows, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Nf", "abs_diff", "fitted_rate", "predicted_rate"])
        for r in rows:
            w.writerow([r.n_freq, _fmt(r.abs_diff), _fmt(r.fitted_rate), _fmt(r.predicted_rate)])
    return path


def write_pole_csv(report: AnalyticityReport, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "n", "k_re", "k_im", "z_re", "z_im", "z_mod"])
        for e in tuple(report.entries) + tuple(report.advisory):
            w.writerow(
                [e.kind, e.n, _fmt(e.k_value.real), _fmt(e.k_value.imag),
                 _fmt(e.z_image.real), _fmt(e.z_image.imag), _fmt(e.z_modulus)]
            )
    return path


def write_scan_csv(omegas, p, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega_re", "omega_im", "p"])
        for om, val in zip(np.atleast_1d(omegas), p):
            om = complex(om)
            w.writerow([_fmt(om.real), _fmt(om.imag), _fmt(val)])
    return path


def write_manifest(config: RunConfig, path, extra: dict | None = None) -> Path:
    path = Path(path)
    manifest = {"cqwave_version": __version__, "config": config.to_dict()}
    if extra:
        manifest.update(extra)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def emit_outputs(config: RunConfig, field=None, rows=None, report=None, scan=None, directory=None, extra=None):
    """Write whichever results are given; returns the list of paths written."""
    written = []
    if field is not None:
        written.append(write_timeseries_csv(field, _output_path(config, "_timeseries.csv", directory)))
    if rows is not None:
        written.append(write_convergence_csv(rows, _output_path(config, "_convergence.csv", directory)))
    if report is not None:
        written.append(write_pole_csv(report, _output_path(config, "_poles.csv", directory)))
    if scan is not None:
        written.append(write_scan_csv(scan[0], scan[1], _output_path(config, "_scan.csv", directory)))
    written.append(write_manifest(config, _output_path(config, "_manifest.json", directory), extra))
    return written
