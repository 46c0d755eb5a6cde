"""Triangulated closed surfaces: OFF I/O, validation and icosphere generation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "MeshError",
    "SurfaceMesh",
    "load_mesh",
    "write_off",
    "icosphere",
]


class MeshError(ValueError):
    """Malformed, degenerate or open surface mesh."""


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """Triangle mesh with per-panel centroid, area and unit normal.

    Construction validates the triangles and, for closed surfaces, orients
    them so that normals point out of the enclosed region.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    require_closed: bool = True
    centroids: np.ndarray = field(init=False, repr=False)
    areas: np.ndarray = field(init=False, repr=False)
    normals: np.ndarray = field(init=False, repr=False)
    closed: bool = field(init=False)

    def __post_init__(self):
        V = np.array(self.vertices, dtype=float)
        T = np.array(self.triangles, dtype=np.int64)
        if V.ndim != 2 or V.shape[1] != 3:
            raise MeshError(f"vertices must have shape (n, 3), got {V.shape}")
        if T.ndim != 2 or T.shape[1] != 3 or T.shape[0] == 0:
            raise MeshError(f"triangles must have shape (m, 3) with m > 0, got {T.shape}")
        if T.min() < 0 or T.max() >= V.shape[0]:
            raise MeshError("triangle references a vertex index out of range")
        if not np.all(np.isfinite(V)):
            raise MeshError("vertex coordinates must be finite")

        cross = np.cross(V[T[:, 1]] - V[T[:, 0]], V[T[:, 2]] - V[T[:, 0]])
        twice_area = np.linalg.norm(cross, axis=1)
        bbox = np.ptp(V[np.unique(T)], axis=0).max()
        bad = np.flatnonzero(0.5 * twice_area <= 1e-14 * bbox**2)
        if bad.size:
            raise MeshError(f"degenerate triangle(s) with zero area: {bad[:10].tolist()}")

        closed = _is_closed(T)
        if closed:
            T = _orient_consistently(T)
            cross = np.cross(V[T[:, 1]] - V[T[:, 0]], V[T[:, 2]] - V[T[:, 0]])
            # divergence theorem with the position field: flux = 3 * volume
            volume = np.einsum("ij,ij->", V[T[:, 0]], cross) / 6.0
            if volume < 0:
                logger.info("mesh orientation is inward; flipping all triangles")
                T = T[:, [0, 2, 1]]
                cross = -cross
        elif self.require_closed:
            raise MeshError("surface is not closed (every edge must be shared by exactly two triangles)")

        for arr in (V, T):
            arr.setflags(write=False)
        centroids = V[T].mean(axis=1)
        areas = 0.5 * np.linalg.norm(cross, axis=1)
        normals = cross / (2.0 * areas[:, None])
        for arr in (centroids, areas, normals):
            arr.setflags(write=False)
        object.__setattr__(self, "vertices", V)
        object.__setattr__(self, "triangles", T)
        object.__setattr__(self, "centroids", centroids)
        object.__setattr__(self, "areas", areas)
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "closed", closed)

    @property
    def n_panels(self) -> int:
        return self.triangles.shape[0]

    @property
    def corners(self) -> np.ndarray:
        """Vertex coordinates per panel, shape ``(n_panels, 3, 3)``."""
        return self.vertices[self.triangles]

    @property
    def diameters(self) -> np.ndarray:
        """Longest edge of each panel."""
        P = self.corners
        edges = P[:, [1, 2, 0]] - P
        return np.linalg.norm(edges, axis=2).max(axis=1)

    def total_area(self) -> float:
        return float(self.areas.sum())

    def volume(self) -> float:
        P = self.corners
        return float(np.einsum("ij,ij->", P[:, 0], np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])) / 6.0)


def _edge_keys(T: np.ndarray) -> np.ndarray:
    e = np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
    return np.sort(e, axis=1)


def _is_closed(T: np.ndarray) -> bool:
    _, counts = np.unique(_edge_keys(T), axis=0, return_counts=True)
    return bool(np.all(counts == 2))


def _orient_consistently(T: np.ndarray) -> np.ndarray:
    """Flip triangles so each shared edge is traversed in opposite directions."""
    T = T.copy()
    m = T.shape[0]
    edge_owner: dict[tuple[int, int], list[int]] = {}
    for f in range(m):
        for a, b in ((0, 1), (1, 2), (2, 0)):
            key = (min(T[f, a], T[f, b]), max(T[f, a], T[f, b]))
            edge_owner.setdefault(key, []).append(f)

    def directed(f):
        t = T[f]
        return {(t[0], t[1]), (t[1], t[2]), (t[2], t[0])}

    visited = np.zeros(m, dtype=bool)
    for seed in range(m):
        if visited[seed]:
            continue
        visited[seed] = True
        stack = [seed]
        while stack:
            f = stack.pop()
            df = directed(f)
            for a, b in ((0, 1), (1, 2), (2, 0)):
                key = (min(T[f, a], T[f, b]), max(T[f, a], T[f, b]))
                for g in edge_owner[key]:
                    if g == f or visited[g]:
                        continue
                    if df & directed(g):
                        T[g] = T[g, [0, 2, 1]]
                    visited[g] = True
                    stack.append(g)
    return T


def load_mesh(path, require_closed: bool = True) -> SurfaceMesh:
    """Read an ASCII OFF file (triangles only)."""
    path = Path(path)
    lines = []
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if text:
                lines.append((lineno, text))
    if not lines or lines[0][1].split()[0] != "OFF":
        raise MeshError(f"{path}:{lines[0][0] if lines else 1}: expected 'OFF' header")
    header_rest = lines[0][1].split()[1:]
    cursor = 1
    if header_rest:
        counts_tokens, counts_line = header_rest, lines[0][0]
    else:
        if len(lines) < 2:
            raise MeshError(f"{path}: missing counts line")
        counts_line, counts_text = lines[1]
        counts_tokens = counts_text.split()
        cursor = 2
    try:
        n_vert, n_face = int(counts_tokens[0]), int(counts_tokens[1])
    except (IndexError, ValueError):
        raise MeshError(f"{path}:{counts_line}: cannot parse vertex/face counts") from None

    if len(lines) < cursor + n_vert + n_face:
        raise MeshError(
            f"{path}: expected {n_vert} vertices and {n_face} faces, file has "
            f"{len(lines) - cursor} data lines"
        )
    V = np.empty((n_vert, 3))
    for i in range(n_vert):
        lineno, text = lines[cursor + i]
        tok = text.split()
        try:
            V[i] = [float(v) for v in tok[:3]]
            if len(tok) < 3:
                raise ValueError
        except ValueError:
            raise MeshError(f"{path}:{lineno}: malformed vertex line {text!r}") from None
    cursor += n_vert
    T = np.empty((n_face, 3), dtype=np.int64)
    for i in range(n_face):
        lineno, text = lines[cursor + i]
        tok = text.split()
        try:
            count = int(tok[0])
            idx = [int(v) for v in tok[1 : 1 + count]]
        except (ValueError, IndexError):
            raise MeshError(f"{path}:{lineno}: malformed face line {text!r}") from None
        if count != 3 or len(idx) != 3:
            raise MeshError(f"{path}:{lineno}: only triangular faces are supported")
        if min(idx) < 0 or max(idx) >= n_vert:
            raise MeshError(f"{path}:{lineno}: vertex index out of range")
        T[i] = idx
    try:
        return SurfaceMesh(V, T, require_closed=require_closed)
    except MeshError as exc:
        raise MeshError(f"{path}: {exc}") from None


def write_off(mesh_or_arrays, path) -> None:
    if isinstance(mesh_or_arrays, SurfaceMesh):
        V, T = mesh_or_arrays.vertices, mesh_or_arrays.triangles
    else:
        V, T = mesh_or_arrays
    with Path(path).open("w") as fh:
        fh.write("OFF\n")
        fh.write(f"{len(V)} {len(T)} 0\n")
        for v in V:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for t in T:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")


@lru_cache(maxsize=8)
def icosphere(subdivisions: int = 2, radius: float = 1.0) -> SurfaceMesh:
    """Subdivided icosahedron with vertices on the sphere; ``20 * 4**s`` panels.

    Results are cached; the mesh is immutable.
    """
    if subdivisions < 0:
        raise ValueError("subdivisions must be non-negative")
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    V = [
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ]
    T = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in V]
    tris = [tuple(t) for t in T]
    for _ in range(subdivisions):
        midpoint: dict[tuple[int, int], int] = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in midpoint:
                p = verts[a] + verts[b]
                verts.append(p / np.linalg.norm(p))
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        new = []
        for a, b, c in tris:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        tris = new
    return SurfaceMesh(radius * np.array(verts), np.array(tris))
