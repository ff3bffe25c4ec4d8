"""Dirichlet-to-Neumann operators on the unit sphere.

Two independent routes compute the complex DtN map:

  * radial_dtn: for radially symmetric admittivities, per-degree eigenvalues
    from a 1-D ODE shoot (the oracle);
  * volumetric_dtn: general fields, one Shortley-Weller Dirichlet solve per
    basis function, entries assembled from the volume weak pairing
    <Lam f_i, f_j> = int gamma grad(u_i).grad(v_j).

For the weak pairing the test function is the analytic harmonic lift
v_j = r^l Y_lm, and the pairing is integrated by parts, which for a field
with gamma = 1 on the boundary shell reduces the entries to

    M_ij = l_i delta_ij - h^3 sum_x u_j(x) (grad gamma . grad v_i)(x)
    M_ij = l_i delta_ij + h^3 sum_x q(x) u_j(x) v_i(x)      (Schroedinger)

so only solution VALUES enter (no differencing of the discrete solution,
in particular none at the boundary).  The matrix is then symmetrized,
(M + M^T)/2, making the weak-form complex symmetry exact at the discrete
level; the two triangles are O(h^2)-consistent estimates of the same true
entry, so the averaging costs no accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp

from .elliptic import DirichletSolver, SolverFailure
from .harmonics import eval_solid_harmonic_grads, eval_solid_harmonics
from .phantoms import AdmittivityField, PotentialField

DTN_KINDS = ("dtn_gamma", "dtn_q", "dtn_zero",
             "single_layer", "double_layer_trace", "kzeta")
SYMMETRY_TOL = 1e-8
EPS0 = 1e-6  # inner radius for the radial ODE start


@dataclass(frozen=True)
class BoundaryOperator:
    """Dense complex operator over the mesh/basis pair.

    rep "basis": matrix is (L+1)^2 square in the orthonormal harmonic basis.
    rep "nodal": matrix acts on nodal values; the relevant pairing is the
    quadrature bilinear form sum_i w_i f_i g_i (complex symmetric, not
    Hermitian).
    """

    kind: str
    rep: str
    matrix: np.ndarray
    mesh: object
    basis: object

    def __post_init__(self):
        if self.kind not in DTN_KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.rep not in ("basis", "nodal"):
            raise ValueError("rep must be 'basis' or 'nodal'")
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("operator matrix must be square")
        want = self.basis.size if self.rep == "basis" else self.mesh.node_count
        if m.shape[0] != want:
            raise ValueError(f"{self.rep} operator must have dimension {want}")

    def symmetry_defect(self):
        """Spectral norm of the antisymmetric part in the quadrature pairing,
        relative to the operator's scale."""
        if self.rep == "basis":
            a = self.matrix - self.matrix.T
            scale = max(np.linalg.norm(self.matrix, 2), 1e-300)
        else:
            w = self.mesh.weights
            wm = w[:, None] * self.matrix
            a = wm - wm.T
            scale = max(np.linalg.norm(wm, 2), 1e-300)
        return float(np.linalg.norm(a, 2) / scale)

    def to_nodal(self):
        if self.rep == "nodal":
            return self
        b = self.basis
        proj = _projection(b)
        return replace(self, rep="nodal", matrix=b.values @ self.matrix @ proj)

    def to_basis(self):
        if self.rep == "basis":
            return self
        b = self.basis
        proj = _projection(b)
        return replace(self, rep="basis", matrix=proj @ self.matrix @ b.values)

    def apply_nodal(self, f):
        """Action on nodal values (through the basis when rep='basis')."""
        if self.rep == "nodal":
            return self.matrix @ f
        b = self.basis
        return b.synthesize(self.matrix @ b.project(f))


def _projection(basis):
    """Gram-corrected quadrature projection: coefficients = P @ nodal."""
    w = basis.mesh.weights
    return np.linalg.solve(basis.gram(), basis.values.T * w[None, :])


@dataclass(frozen=True)
class RadialProfile:
    """Complex gamma(r) on [0, 1] with gamma(r) = 1 for r >= r_b."""

    gamma: object          # callable r -> complex
    r_b: float = 0.85
    dgamma: object = None  # optional analytic derivative

    def deriv(self, r):
        if self.dgamma is not None:
            return self.dgamma(r)
        dr = 1e-6
        rp = np.minimum(np.asarray(r) + dr, 1.0)
        rm = np.maximum(np.asarray(r) - dr, 0.0)
        return (self.gamma(rp) - self.gamma(rm)) / (rp - rm)

    @classmethod
    def from_spec(cls, spec):
        return cls(gamma=spec.radial_profile(), r_b=spec.r_b)


def _radial_rhs(profile, l):
    """ODE for v with u = r^l v:  gamma v'' + (gamma' + 2(l+1)gamma/r) v'
    + (l/r) gamma' v = 0, regular at r=0."""

    def rhs(r, y):
        v, dv = y[0], y[1]
        g = profile.gamma(r)
        dg = profile.deriv(r)
        ddv = -((dg + 2.0 * (l + 1) * g / r) * dv + (l / r) * dg * v) / g
        return np.array([dv, ddv])

    return rhs


def radial_dtn(profile, lmax, rtol=1e-10):
    """DtN eigenvalues lambda_l = gamma(1) u'(1)/u(1), l = 0..lmax.

    Integrates from EPS0 with the series initial data u = r^l (1 + O(r^2)),
    i.e. v(EPS0) = 1, v'(EPS0) = 0 for v = u / r^l.
    """
    lams = []
    for l in range(lmax + 1):
        # max_step guards against the integrator stepping across a thin
        # transition shell while the solution is still exactly constant
        sol = solve_ivp(_radial_rhs(profile, l), (EPS0, 1.0),
                        np.array([1.0 + 0.0j, 0.0 + 0.0j]),
                        method="RK45", rtol=rtol, atol=1e-12, max_step=0.0025)
        if not sol.success:
            raise SolverFailure(f"radial ODE failed at l={l}: {sol.message}")
        v, dv = sol.y[0, -1], sol.y[1, -1]
        if abs(v) < 1e-8:
            raise SolverFailure(
                f"radial solution vanished at r=1 for l={l}; interior "
                "resonance is impossible for Re gamma > 0, so this indicates "
                "an integrator bug"
            )
        lams.append(complex(profile.gamma(1.0)) * (l + dv / v))
    return np.array(lams)


def radial_dtn_shooting(profile, lmax, nsteps=4000):
    """Fixed-step RK4 variant, used as a step-halving oracle."""
    rs = np.linspace(EPS0, 1.0, nsteps + 1)
    h = rs[1] - rs[0]
    lams = []
    for l in range(lmax + 1):
        rhs = _radial_rhs(profile, l)
        y = np.array([1.0 + 0.0j, 0.0 + 0.0j])
        for r in rs[:-1]:
            k1 = rhs(r, y)
            k2 = rhs(r + 0.5 * h, y + 0.5 * h * k1)
            k3 = rhs(r + 0.5 * h, y + 0.5 * h * k2)
            k4 = rhs(r + h, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        v, dv = y
        lams.append(complex(profile.gamma(1.0)) * (l + dv / v))
    return np.array(lams)


def radial_dtn_operator(profile, basis):
    """Basis-rep DtN with eigenvalue lambda_l repeated over m."""
    lams = radial_dtn(profile, basis.degree_max)
    diag = lams[basis.degrees]
    return BoundaryOperator(kind="dtn_gamma", rep="basis",
                            matrix=np.diag(diag), mesh=basis.mesh, basis=basis)


def analytic_dtn_zero(basis):
    """DtN of the unit admittivity (= Schroedinger with q=0): diag(l)."""
    return BoundaryOperator(kind="dtn_zero", rep="basis",
                            matrix=np.diag(basis.degrees.astype(np.complex128)),
                            mesh=basis.mesh, basis=basis)


def _check_resolution(grid, basis):
    if grid.n < 4 * (basis.degree_max + 1):
        raise ValueError(
            f"grid n={grid.n} too coarse for L={basis.degree_max} "
            f"(need n >= {4 * (basis.degree_max + 1)})"
        )


def volumetric_dtn(field, mesh, basis, solver=None, return_solver=False):
    """DtN matrix in basis rep by interior finite-difference solves.

    field: AdmittivityField (conductivity form) or PotentialField
    (Schroedinger form).  Requires the coefficient to be trivial on the
    boundary shell (gamma=1, q=0 near |x|=1), which the phantom
    constructors enforce.
    """
    grid = field.grid
    _check_resolution(grid, basis)
    lmax = basis.degree_max
    degrees = basis.degrees.astype(float)

    if isinstance(field, AdmittivityField):
        if field.r_b >= 1.0 and not field.is_unit:
            raise ValueError("volumetric DtN requires gamma identically 1 near the boundary")
        kind = "dtn_gamma"
        coeff = field.gamma
        if solver is None:
            solver = DirichletSolver(grid, coeff, mode="gamma")
        grad_gamma = np.stack(
            [np.gradient(field.gamma, grid.h, axis=ax, edge_order=2)
             for ax in range(3)], axis=-1)
        inside = solver.op.index >= 0
        gg = grad_gamma[inside]
        support = np.nonzero(np.max(np.abs(gg), axis=1) > 0)[0]
        pts = solver.op.points[support]
        # weight matrix P[x, i] = (grad gamma . grad v_i)(x)
        grads = eval_solid_harmonic_grads(lmax, pts)
        P = np.einsum("xc,xic->xi", gg[support], grads)
        sign = -1.0
    elif isinstance(field, PotentialField):
        kind = "dtn_q"
        if solver is None:
            solver = DirichletSolver(grid, field.q, mode="schroedinger")
        inside = solver.op.index >= 0
        qv = field.q[inside]
        support = np.nonzero(np.abs(qv) > 0)[0]
        pts = solver.op.points[support]
        vals = eval_solid_harmonics(lmax, pts)
        P = qv[support, None] * vals
        sign = +1.0
    else:
        raise TypeError("field must be AdmittivityField or PotentialField")

    K = basis.size
    U = np.empty((support.size, K), dtype=np.complex128)
    for col in range(K):
        u = solver.solve(_basis_trace(lmax, col))
        U[:, col] = u[support]

    M = np.diag(degrees).astype(np.complex128)
    M += sign * grid.cell_volume() * (P.T @ U)
    M = 0.5 * (M + M.T)
    op = BoundaryOperator(kind=kind, rep="basis", matrix=M, mesh=mesh, basis=basis)
    return (op, solver) if return_solver else op


def _basis_trace(lmax, col):
    def g(pts):
        return eval_solid_harmonics(lmax, pts)[:, col].astype(np.complex128)
    return g


def dtn_gamma_to_q(dtn_gamma, gamma_bd, dgamma_bd):
    """Lam_q = gamma_bd^{-1/2} [Lam_gamma + diag(dgamma_bd)/2] gamma_bd^{-1/2}.

    gamma_bd and dgamma_bd are nodal traces on the mesh; Re gamma_bd > 0 is
    required for the principal square root.
    """
    gamma_bd = np.asarray(gamma_bd, dtype=np.complex128)
    dgamma_bd = np.asarray(dgamma_bd, dtype=np.complex128)
    if np.any(gamma_bd.real <= 0):
        raise ValueError("Re gamma_bd must be positive")
    nod = dtn_gamma.to_nodal()
    s = 1.0 / np.sqrt(gamma_bd)
    mat = s[:, None] * (nod.matrix + 0.5 * np.diag(dgamma_bd)) * s[None, :]
    out = BoundaryOperator(kind="dtn_q", rep="nodal", matrix=mat,
                           mesh=dtn_gamma.mesh, basis=dtn_gamma.basis)
    return out


def schrodinger_dirichlet_solve(potential, f, solver=None):
    """Solve (-lap + q) w = 0, w|_boundary = f; returns (w_grid, inside_mask).

    f is a callable on (k, 3) points (use a constant lambda for constant
    data).  Non-convergence raises SolverFailure with a condition hint.
    """
    if solver is None:
        solver = DirichletSolver(potential.grid, potential.q, mode="schroedinger")
    u = solver.solve(f)
    return solver.op.embed(u, fill=0.0), solver.op.index >= 0
