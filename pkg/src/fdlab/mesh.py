"""Triangulated level-set surfaces and OBJ export.

The level sets {|r-1| + |z| = c} are tori for 0 < c < 1 and
sphere-like (axis-capped) for c > 1. Both are built from the
cross-section parametrization revolved around the z-axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import mapping
from .coords import slice_param, wrap_angle
from .errors import DegenerateLevelError


@dataclass
class TriMesh:
    vertices: np.ndarray  # (V, 3) float
    faces: np.ndarray  # (F, 3) int, CCW seen from outside

    def euler_characteristic(self) -> int:
        V = len(self.vertices)
        F = len(self.faces)
        edges = set()
        for a, b, c in self.faces:
            edges.add((min(a, b), max(a, b)))
            edges.add((min(b, c), max(b, c)))
            edges.add((min(a, c), max(a, c)))
        return V - len(edges) + F

    def signed_volume(self) -> float:
        """Divergence-theorem volume; positive iff faces wind outward."""
        v = self.vertices
        a, b, c = v[self.faces[:, 0]], v[self.faces[:, 1]], v[self.faces[:, 2]]
        return float(np.sum(np.einsum("ij,ij->i", a, np.cross(b, c))) / 6.0)


def _slice_points(c: float, n_s: int, closed: bool) -> np.ndarray:
    if closed:
        s = np.arange(n_s) / n_s
    else:
        # open arc: interior samples only, poles added separately
        s = np.arange(1, n_s + 1) / (n_s + 1)
    return np.array([tuple(slice_param(c, 0.0, float(si))) for si in s])


def level_mesh(c: float, resolution: int = 64) -> TriMesh:
    """Domain mesh of the level set at c: torus for c < 1, sphere for c > 1.

    `resolution` counts angular steps; the cross-section uses the same
    count. Levels c = 0 (a circle) and c = 1 (a sphere pinched on the
    axis) are rejected.
    """
    if c <= 0.0:
        raise DegenerateLevelError("level 0 is the unit circle")
    if c == 1.0:
        raise DegenerateLevelError("level 1 touches the axis in a point")
    if resolution < 16:
        raise ValueError("resolution < 16")
    n_th = resolution
    th = wrap_angle(-math.pi + 2.0 * math.pi * np.arange(n_th) / n_th)
    cos_t, sin_t = np.cos(th), np.sin(th)

    if c < 1.0:
        prof = _slice_points(c, resolution, closed=True)
        n_s = len(prof)
        # vertex (i, j): profile i revolved to angle j
        verts = np.empty((n_s, n_th, 3))
        verts[:, :, 0] = prof[:, 0:1] * cos_t
        verts[:, :, 1] = prof[:, 0:1] * sin_t
        verts[:, :, 2] = prof[:, 2:3]
        idx = np.arange(n_s * n_th).reshape(n_s, n_th)
        faces = []
        for i in range(n_s):
            i1 = (i + 1) % n_s
            for j in range(n_th):
                j1 = (j + 1) % n_th
                a, b_, cc, d = idx[i, j], idx[i1, j], idx[i1, j1], idx[i, j1]
                faces.append((a, cc, b_))
                faces.append((a, d, cc))
        return TriMesh(verts.reshape(-1, 3), np.array(faces, dtype=int))

    # c > 1: open arc revolved into a sphere with two pole vertices
    prof = _slice_points(c, resolution, closed=False)
    n_s = len(prof)
    verts = np.empty((n_s, n_th, 3))
    verts[:, :, 0] = prof[:, 0:1] * cos_t
    verts[:, :, 1] = prof[:, 0:1] * sin_t
    verts[:, :, 2] = prof[:, 2:3]
    verts = verts.reshape(-1, 3)
    south = np.array([[0.0, 0.0, -(c - 1.0)]])  # s = 0 endpoint
    north = np.array([[0.0, 0.0, c - 1.0]])
    vertices = np.concatenate([verts, south, north], axis=0)
    i_south, i_north = n_s * n_th, n_s * n_th + 1
    idx = np.arange(n_s * n_th).reshape(n_s, n_th)
    faces = []
    for i in range(n_s - 1):
        for j in range(n_th):
            j1 = (j + 1) % n_th
            a, b_, cc, d = idx[i, j], idx[i + 1, j], idx[i + 1, j1], idx[i, j1]
            faces.append((a, cc, b_))
            faces.append((a, d, cc))
    for j in range(n_th):
        j1 = (j + 1) % n_th
        faces.append((i_south, idx[0, j], idx[0, j1]))
        faces.append((i_north, idx[n_s - 1, j1], idx[n_s - 1, j]))
    return TriMesh(vertices, np.array(faces, dtype=int))


def image_mesh(c: float, resolution: int = 64) -> TriMesh:
    """Push the domain level mesh through the map, vertex by vertex.

    Connectivity is inherited, so collapsed circles (the whole theta = 0
    ring of a torus maps to the single point (-c, 0, 0)) show up as
    coincident vertex positions, not as topology changes.
    """
    dom = level_mesh(c, resolution)
    v = dom.vertices
    hx, hy, hz = mapping.eval_cart_many(v[:, 0], v[:, 1], v[:, 2])
    return TriMesh(np.stack([hx, hy, hz], axis=-1), dom.faces)


def circle_polyline(resolution: int = 64) -> np.ndarray:
    """The level-0 fiber {r = 1, z = 0} as a closed polyline, (n, 3)."""
    th = 2.0 * math.pi * np.arange(resolution) / resolution
    return np.stack([np.cos(th), np.sin(th), np.zeros_like(th)], axis=-1)


def write_obj(path: str, mesh: TriMesh) -> None:
    """ASCII OBJ with 1-based CCW faces."""
    with open(path, "w") as fh:
        for x, y, z in mesh.vertices:
            fh.write(f"v {x:.17g} {y:.17g} {z:.17g}\n")
        for a, b, c in mesh.faces + 1:
            fh.write(f"f {a} {b} {c}\n")


def write_obj_polyline(path: str, points: np.ndarray, closed: bool = True) -> None:
    """ASCII OBJ polyline (`l` record), closed by default."""
    with open(path, "w") as fh:
        for x, y, z in points:
            fh.write(f"v {x:.17g} {y:.17g} {z:.17g}\n")
        idx = list(range(1, len(points) + 1))
        if closed:
            idx.append(1)
        fh.write("l " + " ".join(map(str, idx)) + "\n")


def vertex_face_counts(c: float, resolution: int) -> tuple[int, int]:
    """Closed-form (V, F) for level_mesh at the given resolution."""
    if c < 1.0:
        return resolution * resolution, 2 * resolution * resolution
    n_s = len(_slice_points(c, resolution, closed=False))
    return n_s * resolution + 2, 2 * (n_s - 1) * resolution + 2 * resolution
