"""Galerkin solver for the weighted variational problems.

The bilinear form ``int w(theta) r^{a+n-1} (grad u . grad phi)`` is
assembled from tensor products of 1D matrices on (x..., r[, theta])
grids with bilinear trial functions and cell-exact radial moments.  The
conormal condition at the hole boundary ``r = epsilon`` (and the
vanishing weighted flux at ``r = 0`` when there is no hole) is natural:
no boundary rows are written for it.  Anisotropic constant coefficients
in the degenerate block are handled in straightened coordinates, where
they reduce to the isotropic operator with the angular weight
``w(theta) = |A3^{1/2} sigma|^a``.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from math import pi, sqrt
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import (CoefficientField, Perforation, PolarGrid, ProblemDims,
                       radial_moment, sphere_area)
from .spectral import circle_weight

DEFAULT_TOL = 1e-10


# ---------------------------------------------------------------------------
# 1D element matrices
# ---------------------------------------------------------------------------

def _power_cell_moments(q: float, rl: float, rr: float):
    m0 = radial_moment(q, rl, rr)
    m1 = radial_moment(q + 1.0, rl, rr)
    m2 = radial_moment(q + 2.0, rl, rr)
    return m0, m1, m2


def power_mass_matrix(nodes: np.ndarray, q: float,
                      drop_divergent_center: bool = False) -> sp.csr_matrix:
    """Weighted mass matrix  M_ab = int r^q hat_a hat_b dr.

    With ``drop_divergent_center`` the (finite-energy-irrelevant) entries
    of the first cell that touch the node r=0 are set to zero when their
    moments diverge; they are annihilated by the center collapse.
    """
    m = len(nodes)
    rows, cols, vals = [], [], []
    for k in range(m - 1):
        rl, rr = nodes[k], nodes[k + 1]
        h = rr - rl
        m0, m1, m2 = _power_cell_moments(q, rl, rr)
        with np.errstate(invalid="ignore"):
            mll = (rr * rr * m0 - 2.0 * rr * m1 + m2) / h ** 2
            mlr = (-rl * rr * m0 + (rl + rr) * m1 - m2) / h ** 2
            mrr = (m2 - 2.0 * rl * m1 + rl * rl * m0) / h ** 2
        if rl == 0.0:
            # avoid 0 * inf: the rl-proportional terms vanish exactly
            mlr = (rr * m1 - m2) / h ** 2 if np.isfinite(m1) else np.nan
            mrr = m2 / h ** 2
        if not np.isfinite([mll, mlr, mrr]).all():
            if drop_divergent_center and k == 0 and rl == 0.0:
                # hat at r=0 is collapsed into the angular-constant dof
                mll, mlr = 0.0, 0.0
                mrr = radial_moment(q + 2.0, rl, rr) / h ** 2
            else:
                raise ValueError(
                    f"divergent weighted moment (q={q}) on cell [{rl},{rr}]")
        rows += [k, k, k + 1, k + 1]
        cols += [k, k + 1, k, k + 1]
        vals += [mll, mlr, mlr, mrr]
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, m))


def power_stiffness_matrix(nodes: np.ndarray, q: float) -> sp.csr_matrix:
    """Weighted stiffness matrix  K_ab = int r^q hat_a' hat_b' dr."""
    m = len(nodes)
    rows, cols, vals = [], [], []
    for k in range(m - 1):
        rl, rr = nodes[k], nodes[k + 1]
        h = rr - rl
        m0 = radial_moment(q, rl, rr)
        if not np.isfinite(m0):
            raise ValueError(
                f"divergent weighted moment (q={q}) on cell [{rl},{rr}]")
        s = m0 / h ** 2
        rows += [k, k, k + 1, k + 1]
        cols += [k, k + 1, k, k + 1]
        vals += [s, -s, -s, s]
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, m))


def power_gradient_matrix(nodes: np.ndarray, q: float) -> sp.csr_matrix:
    """Mixed matrix  G_ab = int r^q hat_a hat_b' dr (loads from vector
    fields)."""
    m = len(nodes)
    rows, cols, vals = [], [], []
    for k in range(m - 1):
        rl, rr = nodes[k], nodes[k + 1]
        h = rr - rl
        m0 = radial_moment(q, rl, rr)
        m1 = radial_moment(q + 1.0, rl, rr)
        if not np.isfinite([m0, m1]).all():
            raise ValueError(
                f"divergent weighted moment (q={q}) on cell [{rl},{rr}]")
        il = (rr * m0 - m1) / h   # int r^q hat_l
        ir = (m1 - rl * m0) / h   # int r^q hat_r
        rows += [k, k, k + 1, k + 1]
        cols += [k, k + 1, k, k + 1]
        vals += [-il / h, il / h, -ir / h, ir / h]
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, m))


_GAUSS2 = (np.array([-1.0, 1.0]) / sqrt(3.0) / 2.0 + 0.5,
           np.array([0.5, 0.5]))
_GAUSS3 = (np.array([0.5 - sqrt(0.15), 0.5, 0.5 + sqrt(0.15)]),
           np.array([5.0, 8.0, 5.0]) / 18.0)


def periodic_theta_matrices(theta: np.ndarray,
                            weight: Optional[Callable[[np.ndarray],
                                                      np.ndarray]] = None):
    """Stiffness and mass matrices on the periodic angular grid with a
    smooth weight, integrated with 3-point Gauss per cell."""
    m = len(theta)
    h = 2.0 * pi / m
    pts, wts = _GAUSS3
    rows, cols, kvals, mvals = [], [], [], []
    for k in range(m):
        kk = (k + 1) % m
        t0 = theta[k]
        tq = t0 + pts * h
        wq = np.ones_like(tq) if weight is None else np.asarray(weight(tq))
        phi_r = pts          # hat of right node on the cell
        phi_l = 1.0 - pts
        w_int = float(np.sum(wts * wq) * h)
        mll = float(np.sum(wts * wq * phi_l * phi_l) * h)
        mlr = float(np.sum(wts * wq * phi_l * phi_r) * h)
        mrr = float(np.sum(wts * wq * phi_r * phi_r) * h)
        s = w_int / h ** 2
        rows += [k, k, kk, kk]
        cols += [k, kk, k, kk]
        kvals += [s, -s, -s, s]
        mvals += [mll, mlr, mlr, mrr]
    K = sp.csr_matrix((kvals, (rows, cols)), shape=(m, m))
    M = sp.csr_matrix((mvals, (rows, cols)), shape=(m, m))
    return K, M


def interval_matrices(nodes: np.ndarray):
    """Unweighted 1D stiffness and mass matrices for the x axes."""
    m = len(nodes)
    rows, cols, kvals, mvals = [], [], [], []
    for k in range(m - 1):
        h = nodes[k + 1] - nodes[k]
        rows += [k, k, k + 1, k + 1]
        cols += [k, k + 1, k, k + 1]
        kvals += [1.0 / h, -1.0 / h, -1.0 / h, 1.0 / h]
        mvals += [h / 3.0, h / 6.0, h / 6.0, h / 3.0]
    K = sp.csr_matrix((kvals, (rows, cols)), shape=(m, m))
    M = sp.csr_matrix((mvals, (rows, cols)), shape=(m, m))
    return K, M


# ---------------------------------------------------------------------------
# Problem specification
# ---------------------------------------------------------------------------

THIN_ACROSS = "across"
THIN_DIRICHLET = "dirichlet"
THIN_CONORMAL = "conormal"


@dataclass
class ProblemSpec:
    """Specification of a weighted variational problem.

    ``outer_bc(x..., r, theta)`` prescribes the Dirichlet trace on the
    outer boundary (r = R and the x-box faces).  ``thin_bc`` selects the
    condition on the characteristic manifold when there is no hole:
    natural conormal (``across``), prescribed values (``dirichlet``, only
    for a+n < 2), or the inhomogeneous weighted conormal condition with
    density ``thin_data(x)`` (only for a+n in (0, 2)).
    """

    dims: ProblemDims
    radius: float = 1.0
    A: Optional[CoefficientField] = None
    f: Optional[Callable] = None
    F: Optional[Sequence[Callable]] = None
    perforation: Perforation = dataclass_field(default_factory=Perforation)
    thin_bc: str = THIN_ACROSS
    thin_data: Optional[Callable] = None
    outer_bc: Optional[Callable] = None
    x_boxes: Sequence[tuple[float, float]] = ()
    axisymmetric: bool = False

    def __post_init__(self):
        dims = self.dims
        t = dims.a + dims.n
        if self.thin_bc not in (THIN_ACROSS, THIN_DIRICHLET, THIN_CONORMAL):
            raise ValueError(f"unknown thin_bc {self.thin_bc!r}")
        if self.perforation.is_perforated and self.thin_bc != THIN_ACROSS:
            raise ValueError("a perforated domain replaces the thin set; "
                             "thin_bc must be 'across'")
        if not self.perforation.is_perforated:
            if self.thin_bc == THIN_DIRICHLET and t >= 2:
                raise ValueError("thin Dirichlet data requires a + n < 2")
            if self.thin_bc == THIN_CONORMAL and not (0 < t < 2):
                raise ValueError(
                    "inhomogeneous conormal data requires a + n in (0, 2)")
            if self.thin_bc == THIN_ACROSS and t <= 0:
                raise ValueError(
                    "a + n <= 0 with no hole: the weight is not locally "
                    "integrable; solve on a perforated domain instead")
        if len(self.x_boxes) != dims.d - dims.n and not self.axisymmetric:
            if len(self.x_boxes) != dims.d - dims.n:
                raise ValueError(
                    f"need {dims.d - dims.n} x-boxes for d-n free directions")
        if self.axisymmetric and len(self.x_boxes) != dims.d - dims.n:
            raise ValueError(
                f"need {dims.d - dims.n} x-boxes for d-n free directions")
        if not self.axisymmetric and dims.d - dims.n > 2:
            raise ValueError("full solves support d - n <= 2; use the "
                             "axisymmetric reduction for higher dimension")
        if not self.axisymmetric and dims.n != 2:
            raise ValueError("grids with an explicit angle require n = 2; "
                             "use axisymmetric=True otherwise")

    def angular_weight(self) -> Optional[Callable]:
        """Angular weight of the straightened problem, for constant
        anisotropic A3 in codimension 2."""
        if self.A is None or self.A.kind == "identity":
            return None
        if not self.A.is_constant:
            raise ValueError("the solver meshes holes only for constant "
                             "coefficients (after straightening)")
        if self.axisymmetric:
            _, _, A3 = self.A.blocks(np.zeros(self.A.d))
            if not np.allclose(A3, A3[0, 0] * np.eye(self.dims.n)):
                raise ValueError("axisymmetric solves require an isotropic "
                                 "degenerate block")
            return None
        _, _, A3 = self.A.blocks(np.zeros(self.A.d))
        return lambda t: circle_weight(A3, self.dims.a, t)


def build_grid(spec: ProblemSpec, num_r: int, num_theta: Optional[int] = None,
               num_x: int = 0, grading: float = 1.0) -> PolarGrid:
    if spec.axisymmetric:
        num_theta = None
    elif num_theta is None:
        raise ValueError("non-axisymmetric grids need num_theta")
    return PolarGrid.build(spec.dims, spec.radius, num_r,
                           num_theta=num_theta,
                           epsilon=spec.perforation.epsilon,
                           grading=grading,
                           x_boxes=spec.x_boxes, num_x=num_x)


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

@dataclass
class LinearSystem:
    """Reduced SPD system with Dirichlet lifting already applied."""

    matrix: sp.csr_matrix           # collapsed (pre-reduction) operator
    rhs: np.ndarray                 # collapsed load vector
    constrained: np.ndarray         # collapsed indices with Dirichlet rows
    values: np.ndarray              # prescribed values at those indices
    grid: PolarGrid
    spec: ProblemSpec
    collapse: Optional[sp.csr_matrix]   # collapsed -> full-grid dof map

    @property
    def num_dofs(self) -> int:
        return self.matrix.shape[0]

    def free_indices(self) -> np.ndarray:
        mask = np.ones(self.num_dofs, dtype=bool)
        mask[self.constrained] = False
        return np.nonzero(mask)[0]


@dataclass
class DiscreteField:
    """Nodal solution values on the grid, plus solver metadata."""

    grid: PolarGrid
    values: np.ndarray              # full grid array, shape grid.shape
    iterations: int = 0
    residual: float = 0.0
    spec: Optional[ProblemSpec] = None

    def energy(self, system: Optional[LinearSystem] = None) -> float:
        if system is None:
            raise ValueError("energy needs the assembled system")
        u = collapse_values(system, self.values)
        return float(u @ (system.matrix @ u))


def _grid_axes(grid: PolarGrid) -> list[np.ndarray]:
    axes = list(grid.x_axes) + [grid.r_nodes]
    if grid.theta_nodes is not None:
        axes.append(grid.theta_nodes)
    return axes


def eval_on_grid(func: Callable, grid: PolarGrid) -> np.ndarray:
    """Evaluate func(x..., r[, theta]) on the tensor grid."""
    axes = _grid_axes(grid)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.asarray(func(*mesh), dtype=float) * np.ones(grid.shape)


def _polar_collapse_matrix(num_r: int, num_t: int) -> sp.csr_matrix:
    """Map collapsed polar dofs [center, rings r_1..] to the full ring
    layout including the r=0 ring."""
    rows, cols = [], []
    for j in range(num_t):
        rows.append(j)
        cols.append(0)
    for i in range(1, num_r):
        for j in range(num_t):
            rows.append(i * num_t + j)
            cols.append(1 + (i - 1) * num_t + j)
    vals = np.ones(len(rows))
    return sp.csr_matrix((vals, (rows, cols)),
                         shape=(num_r * num_t, 1 + (num_r - 1) * num_t))


def _kron_chain(mats: Sequence[sp.spmatrix]) -> sp.csr_matrix:
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return out.tocsr()


def assemble(spec: ProblemSpec, grid: PolarGrid) -> LinearSystem:
    """Assemble the weighted Galerkin operator and load on the grid."""
    dims = spec.dims
    p = dims.a + dims.n - 1.0
    eps = grid.epsilon
    if abs(eps - spec.perforation.epsilon) > 1e-12:
        raise ValueError("grid inner radius differs from the perforation")
    if eps == 0.0 and dims.a + dims.n <= 0:
        raise ValueError("a + n <= 0 requires a perforated grid")

    collapsed = (eps == 0.0 and grid.theta_nodes is not None)
    wfun = spec.angular_weight()

    K_r = power_stiffness_matrix(grid.r_nodes, p)
    M_r = power_mass_matrix(grid.r_nodes, p)
    x_mats = [interval_matrices(ax) for ax in grid.x_axes]

    terms = []
    masses = []
    if grid.theta_nodes is not None:
        K_t, M_t = periodic_theta_matrices(grid.theta_nodes, wfun)
        Q_r = power_mass_matrix(grid.r_nodes, p - 2.0,
                                drop_divergent_center=collapsed)
        for i in range(len(x_mats)):
            mats = [x_mats[j][0] if j == i else x_mats[j][1]
                    for j in range(len(x_mats))]
            terms.append(_kron_chain(mats + [M_r, M_t]))
        terms.append(_kron_chain([m[1] for m in x_mats] + [K_r, M_t]))
        terms.append(_kron_chain([m[1] for m in x_mats] + [Q_r, K_t]))
        masses = [m[1] for m in x_mats] + [M_r, M_t]
        scale = 1.0
    else:
        for i in range(len(x_mats)):
            mats = [x_mats[j][0] if j == i else x_mats[j][1]
                    for j in range(len(x_mats))]
            terms.append(_kron_chain(mats + [M_r]))
        terms.append(_kron_chain([m[1] for m in x_mats] + [K_r]))
        masses = [m[1] for m in x_mats] + [M_r]
        scale = sphere_area(dims.n)

    A_full = scale * sum(terms)
    M_full = scale * _kron_chain(masses) if masses else None

    # load vector on the full grid
    b_full = np.zeros(int(np.prod(grid.shape)))
    if spec.f is not None:
        fvals = eval_on_grid(spec.f, grid).ravel()
        b_full += M_full @ fvals
    if spec.F is not None:
        b_full -= _vector_field_load(spec, grid, x_mats, scale)

    # collapse the r=0 ring into one angular-constant dof per x-node
    collapse = None
    if collapsed:
        num_t = len(grid.theta_nodes)
        c_polar = _polar_collapse_matrix(len(grid.r_nodes), num_t)
        nx = int(np.prod([len(ax) for ax in grid.x_axes])) if grid.x_axes else 1
        collapse = sp.kron(sp.eye(nx), c_polar, format="csr")
        A_op = (collapse.T @ A_full @ collapse).tocsr()
        b = collapse.T @ b_full
    else:
        A_op = A_full.tocsr()
        b = b_full

    # inhomogeneous conormal load on the thin set
    if spec.thin_bc == THIN_CONORMAL:
        b = b + _conormal_load(spec, grid, x_mats, collapsed)

    constrained, values = _dirichlet_data(spec, grid, collapsed)

    sym_defect = abs(A_op - A_op.T).max()
    if sym_defect > 1e-10 * max(1.0, abs(A_op).max()):
        raise AssertionError(f"assembled operator not symmetric: {sym_defect}")

    return LinearSystem(A_op, b, constrained, values, grid, spec, collapse)


def _vector_field_load(spec: ProblemSpec, grid: PolarGrid, x_mats,
                       scale: float) -> np.ndarray:
    """Load  int w F . grad(phi)  for a vector field F given per gradient
    component (x..., r[, theta-hat]) as callables on grid coordinates."""
    dims = spec.dims
    p = dims.a + dims.n - 1.0
    comps = list(spec.F)
    nx = len(grid.x_axes)
    expected = nx + 1 + (1 if grid.theta_nodes is not None else 0)
    if len(comps) != expected:
        raise ValueError(f"F needs {expected} components on this grid")
    M_r = power_mass_matrix(grid.r_nodes, p)
    G_r = power_gradient_matrix(grid.r_nodes, p)
    out = np.zeros(int(np.prod(grid.shape)))
    if grid.theta_nodes is not None:
        K_t, M_t = periodic_theta_matrices(grid.theta_nodes,
                                           spec.angular_weight())
        G_t = _theta_gradient_matrix(grid.theta_nodes, spec.angular_weight())
        # radial weight r^{p-1} for the (1/r) d_theta phi pairing
        Mr_m1 = power_mass_matrix(grid.r_nodes, p - 1.0,
                                  drop_divergent_center=(grid.epsilon == 0.0))
        for i in range(nx):
            mats = [(interval_gradient_matrix(grid.x_axes[j]) if j == i
                     else x_mats[j][1]) for j in range(nx)]
            fv = eval_on_grid(comps[i], grid).ravel()
            out += _kron_chain(mats + [M_r, M_t]).T @ fv
        fv = eval_on_grid(comps[nx], grid).ravel()
        out += _kron_chain([m[1] for m in x_mats] + [G_r, M_t]).T @ fv
        fv = eval_on_grid(comps[nx + 1], grid).ravel()
        out += _kron_chain([m[1] for m in x_mats] + [Mr_m1, G_t]).T @ fv
    else:
        for i in range(nx):
            mats = [(interval_gradient_matrix(grid.x_axes[j]) if j == i
                     else x_mats[j][1]) for j in range(nx)]
            fv = eval_on_grid(comps[i], grid).ravel()
            out += _kron_chain(mats + [M_r]).T @ fv
        fv = eval_on_grid(comps[nx], grid).ravel()
        out += _kron_chain([m[1] for m in x_mats] + [G_r]).T @ fv
    return scale * out


def interval_gradient_matrix(nodes: np.ndarray) -> sp.csr_matrix:
    """Mixed matrix  G_ab = int hat_a hat_b' dx on an x axis."""
    m = len(nodes)
    rows, cols, vals = [], [], []
    for k in range(m - 1):
        rows += [k, k, k + 1, k + 1]
        cols += [k, k + 1, k, k + 1]
        vals += [-0.5, 0.5, -0.5, 0.5]
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, m))


def _theta_gradient_matrix(theta, weight):
    m = len(theta)
    h = 2.0 * pi / m
    pts, wts = _GAUSS3
    rows, cols, vals = [], [], []
    for k in range(m):
        kk = (k + 1) % m
        tq = theta[k] + pts * h
        wq = np.ones_like(tq) if weight is None else np.asarray(weight(tq))
        il = float(np.sum(wts * wq * (1.0 - pts)) * h)
        ir = float(np.sum(wts * wq * pts) * h)
        rows += [k, k, kk, kk]
        cols += [k, kk, k, kk]
        vals += [-il / h, il / h, -ir / h, ir / h]
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, m))


def _conormal_load(spec: ProblemSpec, grid: PolarGrid,
                   x_mats, collapsed: bool) -> np.ndarray:
    """Load  omega_n int g(x) phi(x, 0) dx  on the thin-set dofs."""
    dims = spec.dims
    omega = sphere_area(dims.n)
    g = spec.thin_data if spec.thin_data is not None else (lambda *x: 1.0)
    if grid.x_axes:
        mesh = np.meshgrid(*grid.x_axes, indexing="ij")
        gv = (np.asarray(g(*mesh), dtype=float)
              * np.ones([len(ax) for ax in grid.x_axes])).ravel()
        mx = _kron_chain([m[1] for m in x_mats])
        load_x = omega * (mx @ gv)
    else:
        load_x = omega * np.array([float(g())])
    return _scatter_center(grid, collapsed, load_x)


def _center_dof_indices(grid: PolarGrid, collapsed: bool) -> np.ndarray:
    """Collapsed-numbering indices of the r=0 (or r=eps ring, in the
    axisymmetric case r=first node) thin-set dofs, one per x node."""
    nx = int(np.prod([len(ax) for ax in grid.x_axes])) if grid.x_axes else 1
    num_r = len(grid.r_nodes)
    if grid.theta_nodes is not None:
        if not collapsed:
            raise ValueError("thin-set dofs exist only on collapsed grids")
        block = 1 + (num_r - 1) * len(grid.theta_nodes)
        return np.arange(nx) * block
    return np.arange(nx) * num_r


def _scatter_center(grid: PolarGrid, collapsed: bool,
                    load_x: np.ndarray) -> np.ndarray:
    idx = _center_dof_indices(grid, collapsed)
    nx = int(np.prod([len(ax) for ax in grid.x_axes])) if grid.x_axes else 1
    num_r = len(grid.r_nodes)
    if grid.theta_nodes is not None:
        size = nx * (1 + (num_r - 1) * len(grid.theta_nodes))
    else:
        size = nx * num_r
    out = np.zeros(size)
    out[idx] = load_x
    return out


def _dirichlet_data(spec: ProblemSpec, grid: PolarGrid, collapsed: bool):
    """Constrained collapsed indices and values: outer boundary (r = R
    and x faces) plus, for thin Dirichlet problems, the r=0 dofs."""
    shape = grid.shape
    axes = _grid_axes(grid)
    mesh = np.meshgrid(*axes, indexing="ij")
    nx = len(grid.x_axes)
    mask = np.zeros(shape, dtype=bool)
    # outer radius
    sl = [slice(None)] * len(shape)
    sl[nx] = len(grid.r_nodes) - 1
    mask[tuple(sl)] = True
    # x faces
    for i in range(nx):
        sl = [slice(None)] * len(shape)
        sl[i] = 0
        mask[tuple(sl)] = True
        sl[i] = shape[i] - 1
        mask[tuple(sl)] = True

    if spec.outer_bc is not None:
        bvals = np.asarray(spec.outer_bc(*mesh), dtype=float) * np.ones(shape)
    else:
        bvals = np.zeros(shape)

    full_idx = np.nonzero(mask.ravel())[0]
    full_val = bvals.ravel()[full_idx]

    if collapsed:
        num_t = len(grid.theta_nodes)
        num_r = len(grid.r_nodes)
        block_full = num_r * num_t
        block_col = 1 + (num_r - 1) * num_t
        col_idx = []
        for fi in full_idx:
            xi, rem = divmod(fi, block_full)
            ir, jt = divmod(rem, num_t)
            if ir == 0:
                col_idx.append(xi * block_col)
            else:
                col_idx.append(xi * block_col + 1 + (ir - 1) * num_t + jt)
        col_idx = np.asarray(col_idx)
        # deduplicate (the whole r=0 ring maps to one center dof)
        col_idx, keep = np.unique(col_idx, return_index=True)
        constrained, values = col_idx, full_val[keep]
    else:
        constrained, values = full_idx, full_val

    if spec.thin_bc == THIN_DIRICHLET and not spec.perforation.is_perforated:
        centers = _center_dof_indices(grid, collapsed)
        if spec.thin_data is None:
            tvals = np.zeros(len(centers))
        elif grid.x_axes:
            xm = np.meshgrid(*grid.x_axes, indexing="ij")
            tvals = (np.asarray(spec.thin_data(*xm), dtype=float)
                     * np.ones([len(ax) for ax in grid.x_axes])).ravel()
        else:
            tvals = np.array([float(spec.thin_data())])
        constrained = np.concatenate([constrained, centers])
        values = np.concatenate([values, tvals])
        constrained, keep = np.unique(constrained, return_index=True)
        values = values[keep]

    return constrained, values


# ---------------------------------------------------------------------------
# Solve
# ---------------------------------------------------------------------------

def collapse_values(system: LinearSystem, full_values: np.ndarray) -> np.ndarray:
    """Project a full grid array onto the collapsed dof vector (the r=0
    ring is averaged into the center dof)."""
    v = np.asarray(full_values, dtype=float).ravel()
    if system.collapse is None:
        return v
    c = system.collapse
    counts = np.asarray(c.sum(axis=0)).ravel()
    return (c.T @ v) / counts


def expand_values(system: LinearSystem, coll_values: np.ndarray) -> np.ndarray:
    """Expand a collapsed dof vector to the full grid array."""
    if system.collapse is None:
        return coll_values.reshape(system.grid.shape)
    return (system.collapse @ coll_values).reshape(system.grid.shape)


def solve(system: LinearSystem, tol: float = DEFAULT_TOL,
          max_iter: Optional[int] = None) -> DiscreteField:
    """Preconditioned conjugate gradients (diagonal preconditioner) on
    the Dirichlet-reduced system."""
    free = system.free_indices()
    ucoll = np.zeros(system.num_dofs)
    ucoll[system.constrained] = system.values

    A = system.matrix
    b = system.rhs - A @ ucoll
    Aff = A[free][:, free].tocsr()
    bf = b[free]

    if len(free) == 0:
        pass
    elif np.linalg.norm(bf) == 0.0:
        iterations = 0
    else:
        if max_iter is None:
            max_iter = int(50 * sqrt(len(free))) + 100
        diag = Aff.diagonal()
        if np.any(diag <= 0):
            raise AssertionError("non-positive diagonal in the SPD system")
        M = sp.diags(1.0 / diag)
        iterations = 0

        def count(_):
            nonlocal iterations
            iterations += 1

        uf, info = spla.cg(Aff, bf, rtol=tol, atol=0.0, maxiter=max_iter,
                           M=M, callback=count)
        if info != 0:
            raise RuntimeError(
                f"CG did not converge in {max_iter} iterations "
                f"(ill-conditioned assembly?)")
        ucoll[free] = uf

    resid = float(np.linalg.norm((system.rhs - A @ ucoll)[free]))
    nrm = float(np.linalg.norm(system.rhs[free])) or 1.0
    vals = expand_values(system, ucoll)
    it = iterations if len(free) and np.linalg.norm(bf) > 0 else 0
    return DiscreteField(system.grid, vals, it, resid / nrm, system.spec)


def solve_problem(spec: ProblemSpec, num_r: int,
                  num_theta: Optional[int] = None, num_x: int = 0,
                  grading: float = 1.0,
                  tol: float = DEFAULT_TOL) -> DiscreteField:
    grid = build_grid(spec, num_r, num_theta=num_theta, num_x=num_x,
                      grading=grading)
    system = assemble(spec, grid)
    return solve(system, tol=tol)


def solve_axisym(spec: ProblemSpec, num_r: int, num_x: int = 0,
                 grading: float = 1.0, tol: float = DEFAULT_TOL) -> DiscreteField:
    """Codimension-1 reduction: solve on the (x, r) half-strip with the
    radial weight r^{a+n-1}; the lift u(x, |y|) solves the full problem
    for data radial in y."""
    if not spec.axisymmetric:
        raise ValueError("spec must be axisymmetric")
    return solve_problem(spec, num_r, num_x=num_x, grading=grading, tol=tol)


# ---------------------------------------------------------------------------
# Evaluation and error measures
# ---------------------------------------------------------------------------

def _interp_matrix(nodes: np.ndarray, pts: np.ndarray,
                   periodic: bool = False, period: float = 2.0 * pi,
                   derivative: bool = False) -> np.ndarray:
    """Linear interpolation (or cell-wise derivative) matrix from nodal
    values to the given points."""
    n = len(nodes)
    out = np.zeros((len(pts), n))
    if periodic:
        ext = np.append(nodes, nodes[0] + period)
        pm = np.mod(pts - nodes[0], period) + nodes[0]
        idx = np.clip(np.searchsorted(ext, pm, side="right") - 1, 0, n - 1)
        h = ext[idx + 1] - ext[idx]
        t = (pm - ext[idx]) / h
        for row, (k, tt, hh) in enumerate(zip(idx, t, h)):
            kk = (k + 1) % n
            if derivative:
                out[row, k] += -1.0 / hh
                out[row, kk] += 1.0 / hh
            else:
                out[row, k] += 1.0 - tt
                out[row, kk] += tt
        return out
    idx = np.clip(np.searchsorted(nodes, pts, side="right") - 1, 0, n - 2)
    h = nodes[idx + 1] - nodes[idx]
    t = (pts - nodes[idx]) / h
    for row, (k, tt, hh) in enumerate(zip(idx, t, h)):
        if derivative:
            out[row, k] += -1.0 / hh
            out[row, k + 1] += 1.0 / hh
        else:
            out[row, k] += 1.0 - tt
            out[row, k + 1] += tt
    return out


def tensor_eval(field: DiscreteField, axis_pts: list[np.ndarray],
                diff_axis: Optional[int] = None) -> np.ndarray:
    """Evaluate the bilinear interpolant (or its derivative along one
    axis) at a tensor product of points."""
    grid = field.grid
    axes = _grid_axes(grid)
    vals = field.values
    ntheta_axis = len(axes) - 1 if grid.theta_nodes is not None else -1
    for ax_i in range(len(axes)):
        periodic = (ax_i == ntheta_axis)
        mat = _interp_matrix(axes[ax_i], axis_pts[ax_i], periodic=periodic,
                             derivative=(ax_i == diff_axis))
        vals = np.moveaxis(
            np.tensordot(mat, np.moveaxis(vals, ax_i, 0), axes=1), 0, ax_i)
    return vals


def _gauss_points_axis(nodes: np.ndarray, periodic: bool = False):
    pts2, wts2 = _GAUSS2
    if periodic:
        h = nodes[1] - nodes[0]
        cells = np.append(nodes, nodes[-1] + h)
    else:
        cells = nodes
    lo, hi = cells[:-1], cells[1:]
    hh = hi - lo
    qp = (lo[:, None] + pts2[None, :] * hh[:, None]).ravel()
    qw = (wts2[None, :] * hh[:, None]).ravel()
    return qp, qw


def energy_norm_error(field: DiscreteField,
                      grad_exact: Optional[Sequence[Callable]],
                      r_min: float = 0.0) -> float:
    """Weighted energy seminorm of (u_h - u) by per-cell Gauss
    quadrature, with the exact gradient given per component in grid
    coordinates (x..., d_r, (1/r) d_theta).  Pass grad_exact=None to get
    the energy seminorm of the field itself."""
    grid = field.grid
    dims = field.grid.dims
    spec = field.spec
    wfun = spec.angular_weight() if spec is not None else None
    axes = _grid_axes(grid)
    ntheta_axis = len(axes) - 1 if grid.theta_nodes is not None else -1

    qps, qws = [], []
    for ax_i, nodes in enumerate(axes):
        qp, qw = _gauss_points_axis(nodes, periodic=(ax_i == ntheta_axis))
        qps.append(qp)
        qws.append(qw)

    r_ax = len(grid.x_axes)
    rq = qps[r_ax]
    keep = rq >= r_min
    p = dims.a + dims.n - 1.0
    wr = qws[r_ax] * rq ** p
    weights = []
    for ax_i in range(len(axes)):
        if ax_i == r_ax:
            weights.append(np.where(keep, wr, 0.0))
        elif ax_i == ntheta_axis and wfun is not None:
            weights.append(qws[ax_i] * np.asarray(wfun(qps[ax_i])))
        else:
            weights.append(qws[ax_i])

    mesh = np.meshgrid(*qps, indexing="ij")
    total = np.zeros([len(q) for q in qps])
    for comp in range(len(axes)):
        g_h = tensor_eval(field, qps, diff_axis=comp)
        if comp == ntheta_axis:
            g_h = g_h / mesh[r_ax]
        diff = g_h
        if grad_exact is not None:
            diff = g_h - np.asarray(grad_exact[comp](*mesh), dtype=float)
        total += diff ** 2

    for w in reversed(weights):
        total = total @ w
    scale = 1.0 if grid.theta_nodes is not None else sphere_area(dims.n)
    return float(np.sqrt(scale * total))


def weighted_l2_error(field: DiscreteField, exact: Optional[Callable],
                      r_min: float = 0.0) -> float:
    """Weighted L2 norm of (u_h - u), or of u_h when exact is None."""
    grid = field.grid
    dims = grid.dims
    axes = _grid_axes(grid)
    ntheta_axis = len(axes) - 1 if grid.theta_nodes is not None else -1
    qps, qws = [], []
    for ax_i, nodes in enumerate(axes):
        qp, qw = _gauss_points_axis(nodes, periodic=(ax_i == ntheta_axis))
        qps.append(qp)
        qws.append(qw)
    r_ax = len(grid.x_axes)
    p = dims.a + dims.n - 1.0
    keep = qps[r_ax] >= r_min
    weights = [qw.copy() for qw in qws]
    weights[r_ax] = np.where(keep, qws[r_ax] * qps[r_ax] ** p, 0.0)
    mesh = np.meshgrid(*qps, indexing="ij")
    vals = tensor_eval(field, qps)
    if exact is not None:
        vals = vals - np.asarray(exact(*mesh), dtype=float)
    total = vals ** 2
    for w in reversed(weights):
        total = total @ w
    scale = 1.0 if grid.theta_nodes is not None else sphere_area(dims.n)
    return float(np.sqrt(scale * total))


# ---------------------------------------------------------------------------
# Convergence and sweeps
# ---------------------------------------------------------------------------

def manufactured_residual(exact: Callable,
                          grad_exact: Sequence[Callable],
                          spec: ProblemSpec,
                          resolutions: Sequence[tuple],
                          grading: float = 1.0,
                          tol: float = DEFAULT_TOL) -> dict:
    """Convergence table against a closed-form solution.  Each
    resolution entry is (num_r, num_theta_or_None, num_x)."""
    errs, maxes, dofs = [], [], []
    for num_r, num_t, num_x in resolutions:
        fld = solve_problem(spec, num_r, num_theta=num_t, num_x=num_x,
                            grading=grading, tol=tol)
        errs.append(energy_norm_error(fld, grad_exact))
        mesh = np.meshgrid(*_grid_axes(fld.grid), indexing="ij")
        exv = np.asarray(exact(*mesh), dtype=float) * np.ones(fld.grid.shape)
        maxes.append(float(np.max(np.abs(fld.values - exv))))
        dofs.append(int(np.prod(fld.grid.shape)))
    orders = [float(np.log2(errs[i] / errs[i + 1]))
              for i in range(len(errs) - 1)]
    return {"energy_errors": errs, "max_errors": maxes, "dofs": dofs,
            "observed_orders": orders}


def perforation_sweep(spec: ProblemSpec, eps_list: Sequence[float],
                      num_r: int, num_theta: Optional[int] = None,
                      num_x: int = 0, r_cut: float = 0.25,
                      grading: float = 1.0) -> list[dict]:
    """Solve the family of perforated problems and report weighted-L2 and
    local-H1 distances to the unperforated reference solution."""
    from dataclasses import replace

    ref = solve_problem(spec, num_r, num_theta=num_theta, num_x=num_x,
                        grading=grading)
    out = []
    for eps in sorted(eps_list, reverse=True):
        pspec = replace(spec, perforation=Perforation(epsilon=eps),
                        thin_bc=THIN_ACROSS)
        fld = solve_problem(pspec, num_r, num_theta=num_theta, num_x=num_x,
                            grading=grading)
        l2, h1 = field_distance(ref, fld, r_cut=max(r_cut, eps))
        energy = energy_norm_error(fld, None, r_min=eps)
        out.append({"epsilon": eps, "l2": l2, "h1_local": h1,
                    "energy": energy, "field": fld})
    return out


def field_distance(ref: DiscreteField, other: DiscreteField,
                   r_cut: float) -> tuple[float, float]:
    """Weighted L2 and H1-seminorm distances on {r >= r_cut}, measured on
    the reference grid's quadrature points."""
    grid = ref.grid
    axes = _grid_axes(grid)
    ntheta_axis = len(axes) - 1 if grid.theta_nodes is not None else -1
    qps, qws = [], []
    for ax_i, nodes in enumerate(axes):
        qp, qw = _gauss_points_axis(nodes, periodic=(ax_i == ntheta_axis))
        qps.append(qp)
        qws.append(qw)
    r_ax = len(grid.x_axes)
    dims = grid.dims
    p = dims.a + dims.n - 1.0
    keep = qps[r_ax] >= r_cut
    weights = [qw.copy() for qw in qws]
    weights[r_ax] = np.where(keep, qws[r_ax] * qps[r_ax] ** p, 0.0)
    scale = 1.0 if grid.theta_nodes is not None else sphere_area(dims.n)

    v_ref = tensor_eval(ref, qps)
    v_oth = tensor_eval(other, qps)
    l2tot = (v_ref - v_oth) ** 2
    mesh = np.meshgrid(*qps, indexing="ij")
    h1tot = np.zeros_like(l2tot)
    for comp in range(len(axes)):
        g1 = tensor_eval(ref, qps, diff_axis=comp)
        g2 = tensor_eval(other, qps, diff_axis=comp)
        if comp == ntheta_axis:
            g1, g2 = g1 / mesh[r_ax], g2 / mesh[r_ax]
        h1tot += (g1 - g2) ** 2
    for w in reversed(weights):
        l2tot = l2tot @ w
        h1tot = h1tot @ w
    return float(np.sqrt(scale * l2tot)), float(np.sqrt(scale * h1tot))
