"""Icosphere discretization of the unit sphere.

Nodes are the vertices of a repeatedly subdivided icosahedron projected to
the sphere; quadrature weights assign one third of each adjacent spherical
triangle's area to each of its vertices, so the weights sum to 4*pi exactly
(up to rounding).  Outward normals on the unit sphere equal the node
coordinates.  Node ordering is deterministic: lexicographic in (x, y, z).

Immutable after construction; safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_LEVEL = 6  # 40962 nodes; beyond this dense layer operators stop being desk-scale


def _icosahedron():
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=float)
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=int)
    return verts, faces


def _subdivide(verts, faces):
    verts = list(map(tuple, verts))
    midpoint = {}

    def mid(i, j):
        key = (i, j) if i < j else (j, i)
        if key not in midpoint:
            v = np.array(verts[i]) + np.array(verts[j])
            v /= np.linalg.norm(v)
            midpoint[key] = len(verts)
            verts.append(tuple(v))
        return midpoint[key]

    new_faces = []
    for a, b, c in faces:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
    return np.array(verts), np.array(new_faces, dtype=int)


def _spherical_triangle_areas(verts, faces):
    """Spherical excess per face via l'Huilier's formula."""
    v0, v1, v2 = (verts[faces[:, i]] for i in range(3))

    def arc(u, v):
        # numerically stable angle between unit vectors
        return 2.0 * np.arcsin(0.5 * np.linalg.norm(u - v, axis=1))

    a, b, c = arc(v1, v2), arc(v2, v0), arc(v0, v1)
    s = 0.5 * (a + b + c)
    t = (np.tan(0.5 * s) * np.tan(0.5 * (s - a))
         * np.tan(0.5 * (s - b)) * np.tan(0.5 * (s - c)))
    return 4.0 * np.arctan(np.sqrt(np.maximum(t, 0.0)))


@dataclass(frozen=True)
class BoundaryMesh:
    """Quadrature mesh on the unit sphere."""

    level: int
    nodes: np.ndarray    # (N, 3) unit vectors
    normals: np.ndarray  # (N, 3), equal to nodes on the unit sphere
    weights: np.ndarray  # (N,) positive, sum ~ 4*pi
    faces: np.ndarray    # (F, 3) vertex indices (kept for singular quadrature)

    @property
    def node_count(self):
        return self.nodes.shape[0]

    @property
    def face_count(self):
        return self.faces.shape[0]

    def integrate(self, nodal):
        """Quadrature of a nodal function over the sphere."""
        return np.tensordot(self.weights, nodal, axes=(0, 0))

    def norm_l2(self, nodal):
        return float(np.sqrt(abs(self.integrate(np.abs(nodal) ** 2))))

    def export_dict(self):
        """JSON-ready header + flat row-major arrays."""
        return {
            "format": "boundary-mesh/1",
            "level": int(self.level),
            "node_count": int(self.node_count),
            "face_count": int(self.face_count),
            "weight_sum": float(self.weights.sum()),
            "nodes": [float(v) for v in self.nodes.ravel()],
            "normals": [float(v) for v in self.normals.ravel()],
            "weights": [float(v) for v in self.weights],
        }


def build_sphere_mesh(level):
    """Subdivided-icosahedron mesh at the given refinement level.

    level 0 is the icosahedron itself (12 nodes, 20 faces); each level
    quadruples the face count.  level is capped at MAX_LEVEL; exceeding it
    is a usage error.
    """
    if not 0 <= level <= MAX_LEVEL:
        raise ValueError(f"level must be in [0, {MAX_LEVEL}], got {level}")
    verts, faces = _icosahedron()
    for _ in range(level):
        verts, faces = _subdivide(verts, faces)

    order = np.lexsort((verts[:, 2], verts[:, 1], verts[:, 0]))
    inverse = np.empty_like(order)
    inverse[order] = np.arange(len(order))
    verts = verts[order]
    faces = inverse[faces]

    areas = _spherical_triangle_areas(verts, faces)
    weights = np.zeros(len(verts))
    np.add.at(weights, faces.ravel(), np.repeat(areas / 3.0, 3))

    norms = np.linalg.norm(verts, axis=1)
    if np.max(np.abs(norms - 1.0)) > 1e-12:
        raise AssertionError("mesh nodes left the unit sphere")
    total = weights.sum()
    if not (4 * np.pi * (1 - 1e-3) <= total <= 4 * np.pi * (1 + 1e-3)):
        raise AssertionError(f"weight sum {total} not within 1e-3 of 4*pi")

    return BoundaryMesh(level=level, nodes=verts, normals=verts.copy(),
                        weights=weights, faces=faces)
