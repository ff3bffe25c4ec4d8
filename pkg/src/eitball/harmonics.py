"""Real spherical harmonics as exact homogeneous polynomials.

The orthonormal real basis Y_lm on the unit sphere is generated as solid
harmonics R_lm(x, y, z) = r^l Y_lm(x/r), which are homogeneous polynomials
of degree l.  Working with monomial coefficients (built once by integer
recurrences) gives

  * basis values on mesh nodes with no pole/azimuth special cases,
  * machine-exact gradients of the harmonic lifts r^l Y_lm used by the
    Dirichlet-to-Neumann weak form,
  * evaluation at arbitrary interior points (radial oracle, traces).

Recurrences (no Condon-Shortley phase):

  A_0 = 1, B_0 = 0
  A_m = x A_{m-1} - y B_{m-1},   B_m = x B_{m-1} + y A_{m-1}
  W_m^m = (2m-1)!!,  W_{m+1}^m = (2m+1) z W_m^m
  (l-m) W_l^m = (2l-1) z W_{l-1}^m - (l+m-1) r^2 W_{l-2}^m

with R_l^{+m} ~ W_l^m A_m, R_l^{-m} ~ W_l^m B_m and normalization
N_lm = sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!) (times sqrt(2) for m != 0) so that
the basis is orthonormal in L^2 of the unit sphere.

Basis ordering: l ascending, m from -l to l.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_DEGREE = 24


def _poly_add(p, q, scale=1.0):
    out = dict(p)
    for mono, c in q.items():
        out[mono] = out.get(mono, 0.0) + scale * c
    return out


def _poly_scale(p, s):
    return {mono: c * s for mono, c in p.items()}


def _poly_shift(p, axis):
    """Multiply a monomial dict by x, y or z."""
    out = {}
    for (i, j, k), c in p.items():
        mono = (i + (axis == 0), j + (axis == 1), k + (axis == 2))
        out[mono] = out.get(mono, 0.0) + c
    return out


def _poly_mul_r2(p):
    out = {}
    for (i, j, k), c in p.items():
        for mono in ((i + 2, j, k), (i, j + 2, k), (i, j, k + 2)):
            out[mono] = out.get(mono, 0.0) + c
    return out


def _poly_diff(p, axis):
    out = {}
    for (i, j, k), c in p.items():
        e = (i, j, k)[axis]
        if e == 0:
            continue
        mono = (i - (axis == 0), j - (axis == 1), k - (axis == 2))
        out[mono] = out.get(mono, 0.0) + c * e
    return out


@lru_cache(maxsize=None)
def _solid_harmonic_polys(lmax):
    """Monomial dicts of orthonormal real solid harmonics, (l, m) -> poly."""
    if not 0 <= lmax <= MAX_DEGREE:
        raise ValueError(f"degree must be in [0, {MAX_DEGREE}], got {lmax}")
    A = {0: {(0, 0, 0): 1.0}}
    B = {0: {}}
    for m in range(1, lmax + 1):
        A[m] = _poly_add(_poly_shift(A[m - 1], 0), _poly_shift(B[m - 1], 1), -1.0)
        B[m] = _poly_add(_poly_shift(B[m - 1], 0), _poly_shift(A[m - 1], 1), 1.0)

    W = {}
    for m in range(0, lmax + 1):
        W[(m, m)] = {(0, 0, 0): float(math.prod(range(1, 2 * m, 2)) or 1)}
        if m + 1 <= lmax:
            W[(m + 1, m)] = _poly_scale(_poly_shift(W[(m, m)], 2), 2 * m + 1)
        for l in range(m + 2, lmax + 1):
            p = _poly_scale(_poly_shift(W[(l - 1, m)], 2), (2 * l - 1) / (l - m))
            p = _poly_add(p, _poly_mul_r2(W[(l - 2, m)]), -(l + m - 1) / (l - m))
            W[(l, m)] = p

    polys = {}
    for l in range(lmax + 1):
        for m in range(0, l + 1):
            norm = math.sqrt(
                (2 * l + 1) / (4.0 * math.pi)
                * math.factorial(l - m) / math.factorial(l + m)
            )
            if m == 0:
                polys[(l, 0)] = _poly_scale(W[(l, 0)], norm)
            else:
                norm *= math.sqrt(2.0)
                base = _poly_scale(W[(l, m)], norm)
                polys[(l, m)] = _poly_mul(base, A[m])
                polys[(l, -m)] = _poly_mul(base, B[m])
    return polys


def _poly_mul(p, q):
    out = {}
    for (i1, j1, k1), c1 in p.items():
        for (i2, j2, k2), c2 in q.items():
            mono = (i1 + i2, j1 + j2, k1 + k2)
            out[mono] = out.get(mono, 0.0) + c1 * c2
    return out


def basis_index_map(lmax):
    """Column order of the basis: [(0,0), (1,-1), (1,0), (1,1), ...]."""
    return [(l, m) for l in range(lmax + 1) for m in range(-l, l + 1)]


def _eval_polys(polys, pts):
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    lmax = max(l for l, _ in polys)
    # powers up to lmax per coordinate
    pows = np.empty((3, lmax + 1) + pts.shape[:1])
    pows[:, 0] = 1.0
    for e in range(1, lmax + 1):
        pows[:, e] = pows[:, e - 1] * pts.T
    return pts, pows


def eval_solid_harmonics(lmax, pts):
    """Values of r^l Y_lm at points, shape (npts, (lmax+1)^2)."""
    polys = _solid_harmonic_polys(lmax)
    pts, pows = _eval_polys(polys, pts)
    cols = []
    for l, m in basis_index_map(lmax):
        acc = np.zeros(pts.shape[0])
        for (i, j, k), c in polys[(l, m)].items():
            acc += c * pows[0, i] * pows[1, j] * pows[2, k]
        cols.append(acc)
    return np.stack(cols, axis=1)


def eval_solid_harmonic_grads(lmax, pts):
    """Gradients of r^l Y_lm at points, shape (npts, (lmax+1)^2, 3)."""
    polys = _solid_harmonic_polys(lmax)
    pts, pows = _eval_polys(polys, pts)
    out = np.zeros((pts.shape[0], (lmax + 1) ** 2, 3))
    for col, (l, m) in enumerate(basis_index_map(lmax)):
        for ax in range(3):
            dp = _poly_diff(polys[(l, m)], ax)
            acc = np.zeros(pts.shape[0])
            for (i, j, k), c in dp.items():
                acc += c * pows[0, i] * pows[1, j] * pows[2, k]
            out[:, col, ax] = acc
    return out


@dataclass(frozen=True)
class HarmonicBasis:
    """Real spherical-harmonic basis sampled on a boundary mesh.

    values[i, col] = Y_lm(node_i) with columns ordered by basis_index_map.
    The quadrature Gram matrix B^T diag(w) B is checked against identity at
    construction; gram_defect records max |Gram - I| and gram_tol the
    declared bound it must satisfy.
    """

    mesh: "BoundaryMesh"  # noqa: F821  (import cycle kept soft)
    degree_max: int
    values: np.ndarray
    gram_defect: float
    gram_tol: float

    @property
    def index_map(self):
        return basis_index_map(self.degree_max)

    @property
    def size(self):
        return (self.degree_max + 1) ** 2

    @property
    def degrees(self):
        """l value of every column."""
        return np.array([l for l, _ in self.index_map])

    def gram(self):
        return self.values.T @ (self.mesh.weights[:, None] * self.values)

    def project(self, nodal):
        """Quadrature projection of nodal values onto basis coefficients."""
        rhs = self.values.T @ (self.mesh.weights * nodal)
        return np.linalg.solve(self.gram(), rhs)

    def synthesize(self, coeffs):
        return self.values @ coeffs


def declared_gram_tol(level, lmax):
    """Gram-defect bound for the icosphere vertex quadrature.

    Second-order quadrature: defect ~ C * (L(L+1)) * 4^-level; constant
    calibrated on levels 2..4 with a ~3x safety factor.
    """
    return max(0.03 * lmax * (lmax + 1) * 0.25 ** level, 1e-13)


def build_harmonic_basis(mesh, lmax):
    """Orthonormal real spherical harmonics on the mesh nodes.

    Requires (lmax+1)^2 <= node_count / 2 (resolvability rule).
    """
    size = (lmax + 1) ** 2
    if size > mesh.node_count // 2:
        raise ValueError(
            f"basis of size {size} not resolvable on {mesh.node_count} nodes "
            f"(need (L+1)^2 <= nodes/2)"
        )
    values = eval_solid_harmonics(lmax, mesh.nodes)
    gram = values.T @ (mesh.weights[:, None] * values)
    defect = float(np.max(np.abs(gram - np.eye(size))))
    tol = declared_gram_tol(mesh.level, lmax)
    if defect > tol:
        raise ValueError(
            f"Gram defect {defect:.3e} exceeds declared tol {tol:.3e} "
            f"(level={mesh.level}, L={lmax})"
        )
    return HarmonicBasis(mesh=mesh, degree_max=lmax, values=values,
                         gram_defect=defect, gram_tol=tol)
