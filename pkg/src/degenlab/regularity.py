"""Regularity measurements on solved fields.

Observed Holder exponents from oscillation decay over dyadic balls,
conormal boundary-condition residuals at the thin set and at hole
boundaries, the Liouville mode decomposition with indicial power fits,
the second-derivative Holder-quotient instability table, and the
boundary-Harnack ratio u/u0 with its conjugate-weight equation check.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from math import log, pi, sqrt
from typing import Callable, Optional, Sequence

import numpy as np

from .geometry import ProblemDims, sphere_area
from .solver import (DiscreteField, _grid_axes, power_mass_matrix,
                     power_stiffness_matrix, tensor_eval)
from .spectral import SphereEigenBasis, indicial_exponents

#: oscillation below this multiple of machine epsilon (times the field
#: scale) cannot support an exponent fit
RESOLUTION_FLOOR = 1e2 * np.finfo(float).eps


# ---------------------------------------------------------------------------
# Observed Holder exponents
# ---------------------------------------------------------------------------

@dataclass
class OscillationProfile:
    """Dyadic oscillation decay around a center and its fitted slope."""

    center: np.ndarray
    radii: np.ndarray
    osc: np.ndarray
    alpha_hat: float
    fit_residual: float
    order: int
    resolution_limited: bool


def _node_distances(field: DiscreteField, center: np.ndarray) -> np.ndarray:
    """Euclidean distance from each grid node to a center on the thin
    set (center given in x coordinates; the y part is 0)."""
    grid = field.grid
    axes = _grid_axes(grid)
    nx = len(grid.x_axes)
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if len(center) not in (0, nx):
        raise ValueError(f"center needs {nx} x-coordinates")
    mesh = np.meshgrid(*axes, indexing="ij")
    dist2 = mesh[nx] ** 2
    for i in range(nx):
        dist2 = dist2 + (mesh[i] - center[i]) ** 2
    return np.sqrt(dist2)


def _gradient_magnitude(field: DiscreteField) -> np.ndarray:
    grid = field.grid
    axes = _grid_axes(grid)
    nx = len(grid.x_axes)
    comps = np.gradient(field.values, *axes, edge_order=1)
    if not isinstance(comps, list):
        comps = [comps]
    total = np.zeros_like(field.values)
    for i, g in enumerate(comps):
        if grid.theta_nodes is not None and i == len(axes) - 1:
            mesh_r = np.meshgrid(*axes, indexing="ij")[nx]
            with np.errstate(divide="ignore", invalid="ignore"):
                g = np.where(mesh_r > 0, g / np.maximum(mesh_r, 1e-300), 0.0)
        total += g ** 2
    return np.sqrt(total)


def holder_exponent(field: DiscreteField, center=(), order: int = 0,
                    num_radii: int = 6,
                    r0: Optional[float] = None) -> OscillationProfile:
    """Fitted exponent of the oscillation decay osc(B_r) ~ r^alpha over
    dyadic radii; order 1 measures the oscillation of |grad u| instead.
    The two coarsest radii are discarded from the fit and the reported
    exponent is capped at 1 (oscillation cannot see beyond Lipschitz).
    """
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    grid = field.grid
    if r0 is None:
        r0 = grid.radius / 4.0
    radii = r0 * 0.5 ** np.arange(num_radii)
    dist = _node_distances(field, center)
    data = field.values if order == 0 else _gradient_magnitude(field)

    oscs, eff_radii = [], []
    for r in radii:
        mask = dist <= r
        if np.count_nonzero(mask) < 4:
            break
        vals = data[mask]
        oscs.append(float(vals.max() - vals.min()))
        # effective radius: the ball actually resolved by the grid
        eff_radii.append(float(dist[mask].max()) or r)
    oscs = np.array(oscs)
    radii = np.array(eff_radii)
    if len(oscs) < 4:
        raise ValueError("need at least 4 resolved dyadic radii; refine "
                         "the grid or enlarge r0")

    scale = float(np.max(np.abs(data))) or 1.0
    limited = bool(oscs[-1] < RESOLUTION_FLOOR * scale)
    if limited:
        return OscillationProfile(np.atleast_1d(np.asarray(center, float)),
                                  radii, oscs, float("nan"), float("nan"),
                                  order, True)

    # drop the two coarsest radii (boundary-contaminated scales)
    lr = np.log(radii[2:])
    lo = np.log(oscs[2:])
    k = max(2, len(lr) // 2)
    lr, lo = lr[-k:], lo[-k:]
    slope, intercept = np.polyfit(lr, lo, 1)
    resid = float(np.max(np.abs(lo - (slope * lr + intercept))))
    return OscillationProfile(np.atleast_1d(np.asarray(center, float)),
                              radii, oscs, float(min(slope, 1.0)), resid,
                              order, False)


# ---------------------------------------------------------------------------
# Conormal boundary-condition residual
# ---------------------------------------------------------------------------

def _one_sided_derivative(nodes: np.ndarray, vals: np.ndarray,
                          axis: int) -> np.ndarray:
    """Second-order one-sided 3-point derivative at the first node of
    the given axis, applied along that axis."""
    v = np.moveaxis(vals, axis, 0)
    h1 = nodes[1] - nodes[0]
    h2 = nodes[2] - nodes[0]
    c0 = -(h1 + h2) / (h1 * h2)
    c1 = h2 / (h1 * (h2 - h1))
    c2 = -h1 / (h2 * (h2 - h1))
    return c0 * v[0] + c1 * v[1] + c2 * v[2]


def conormal_residual(field: DiscreteField, where: str = "sigma0",
                      F_y: Optional[Sequence[Callable]] = None,
                      alpha: float = 1.0) -> dict:
    """Max over the surface of |(grad u + F) . e_{y_i}|, by one-sided
    second-order differences in r.

    ``where`` is 'sigma0' (the thin set, unperforated grids) or 'hole'
    (the surface r = epsilon).  For holes the report also carries
    residual / epsilon^alpha.
    """
    grid = field.grid
    r = grid.r_nodes
    if where not in ("sigma0", "hole"):
        raise ValueError("where must be 'sigma0' or 'hole'")
    if where == "hole" and grid.epsilon == 0.0:
        raise ValueError("no hole on this grid")
    if where == "sigma0" and grid.epsilon > 0.0:
        raise ValueError("the thin set is not part of a perforated grid")

    nx = len(grid.x_axes)
    du_r = _one_sided_derivative(r, field.values, nx)

    if grid.theta_nodes is not None:
        theta = grid.theta_nodes
        u_surf = np.moveaxis(field.values, nx, 0)[0]
        h = theta[1] - theta[0]
        du_t = (np.roll(u_surf, -1, axis=-1)
                - np.roll(u_surf, 1, axis=-1)) / (2.0 * h)
        r_surf = max(r[0], r[1])  # at r=0 the angular derivative vanishes
        if r[0] == 0.0:
            du_t = np.zeros_like(du_t)
        gy1 = du_r * np.cos(theta) - du_t * np.sin(theta) / r_surf
        gy2 = du_r * np.sin(theta) + du_t * np.cos(theta) / r_surf
        comps = [gy1, gy2]
    else:
        comps = [du_r]

    if F_y is not None:
        axes = _grid_axes(grid)
        surf_axes = axes[:nx] + axes[nx + 1:]
        mesh = np.meshgrid(*surf_axes, indexing="ij") if surf_axes else []
        for i, func in enumerate(F_y):
            add = np.asarray(func(*mesh), dtype=float) if mesh else float(func())
            comps[i] = comps[i] + add

    residual = float(max(np.max(np.abs(c)) for c in comps))
    rec = {"where": where, "residual": residual, "alpha": alpha}
    if where == "hole":
        rec["epsilon"] = grid.epsilon
        rec["residual_over_eps_alpha"] = residual / grid.epsilon ** alpha
    return rec


# ---------------------------------------------------------------------------
# Liouville mode decomposition
# ---------------------------------------------------------------------------

@dataclass
class ModeFit:
    mode: int
    mu: float
    gamma_plus: float
    gamma_minus: float
    c_plus: float
    c_minus: float
    fit_residual: float
    regularized: bool = False


@dataclass
class ModeDecomposition:
    radii: np.ndarray
    coefficients: np.ndarray        # shape (num_fns, num_radii)
    fits: list[ModeFit]
    reconstruction_error: float

    def fit_for_level(self, k: int) -> ModeFit:
        for f in self.fits:
            if f.mode == k:
                return f
        raise KeyError(f"no fit for mode level {k}")


def mode_coefficients(field: DiscreteField, basis: SphereEigenBasis,
                      radii: np.ndarray) -> np.ndarray:
    """Angular projections v_k(r) = int w(theta) u(r, theta) e_k dtheta
    at the given radii, by the periodic rectangle rule on the basis grid."""
    grid = field.grid
    if grid.theta_nodes is None:
        raise ValueError("mode decomposition needs an explicit angle")
    if len(grid.x_axes) != 0:
        raise ValueError("restrict the field to a fixed x-slice first")
    theta = basis.theta
    vals = tensor_eval(field, [np.asarray(radii, float), theta])
    h = 2.0 * pi / len(theta)
    # rows: eigenfunctions; columns: radii
    return (basis.eigfns * basis.weight) @ vals.T * h


def mode_fit(field: DiscreteField, basis: SphereEigenBasis,
             num_levels: int = 4,
             annulus: tuple[float, float] = (0.2, 0.6),
             num_radii: int = 24,
             epsilon: Optional[float] = None) -> ModeDecomposition:
    """Least-squares indicial-power fits of the angular mode amplitudes.

    Mode k >= 1 amplitudes are fitted in span{r^{gamma_k^+},
    r^{gamma_k^-}}; mode 0 in span{1, r^{2-a-n}} (span{1, log r} when
    a+n = 2).  A near-double indicial root switches to a regularized fit.
    """
    grid = field.grid
    dims = grid.dims
    a, n = dims.a, dims.n
    lo = max(annulus[0], grid.epsilon * 1.5 if grid.epsilon > 0 else annulus[0])
    radii = np.linspace(lo, annulus[1], num_radii)
    coeffs = mode_coefficients(field, basis, radii)

    fits = []
    row = 0
    for k, (mu, mult) in enumerate(basis.pairs[:num_levels]):
        ind = indicial_exponents(a, n, mu)
        gp, gm = ind.gamma_plus, ind.gamma_minus
        if k == 0:
            if abs(a + n - 2.0) < 1e-12:
                design = np.column_stack([np.ones_like(radii), np.log(radii)])
            else:
                design = np.column_stack([np.ones_like(radii),
                                          radii ** (2.0 - a - n)])
            gp_rep, gm_rep = 0.0, 2.0 - a - n
        else:
            design = np.column_stack([radii ** gp, radii ** gm])
            gp_rep, gm_rep = gp, gm
        regularized = abs(gp - gm) < 1e-8
        if regularized:
            sol, *_ = np.linalg.lstsq(
                design.T @ design + 1e-12 * np.eye(2), design.T @ coeffs[row],
                rcond=None)
        else:
            sol, *_ = np.linalg.lstsq(design, coeffs[row], rcond=None)
        resid = float(np.max(np.abs(design @ sol - coeffs[row])))
        fits.append(ModeFit(k, float(mu), gp_rep, gm_rep,
                            float(sol[0]), float(sol[1]), resid, regularized))
        row += mult

    # reconstruction defect of the truncated expansion on the annulus
    theta = basis.theta
    vals = tensor_eval(field, [radii, theta])
    recon = coeffs.T @ basis.eigfns
    recon_err = float(np.max(np.abs(vals - recon[:, :])))
    return ModeDecomposition(radii, coeffs, fits, recon_err)


def annular_mode_oracle(a: float, n: int, mu: float, epsilon: float,
                        radius: float, outer_value: float = 1.0
                        ) -> tuple[float, float]:
    """Exact coefficients (c+, c-) of the radial two-point problem
    v = c+ r^{g+} + c- r^{g-} with zero derivative at r = epsilon and
    v(radius) = outer_value."""
    ind = indicial_exponents(a, n, mu)
    gp, gm = ind.gamma_plus, ind.gamma_minus
    mat = np.array([
        [gp * epsilon ** (gp - 1.0), gm * epsilon ** (gm - 1.0)],
        [radius ** gp, radius ** gm],
    ])
    rhs = np.array([0.0, outer_value])
    cp, cm = np.linalg.solve(mat, rhs)
    return float(cp), float(cm)


# ---------------------------------------------------------------------------
# Second-derivative Holder-quotient instability
# ---------------------------------------------------------------------------

def c2_family_value(a: float, n: int, epsilon: float, x1, r):
    """The perforated model family u = (a+n) x1^2 - r^2
    + (2/(2-a-n)) eps^{a+n} r^{2-a-n}, weighted-harmonic outside the hole
    with vanishing conormal derivative on it."""
    t = a + n
    s0 = 2.0 - t
    return t * np.asarray(x1) ** 2 - np.asarray(r) ** 2 \
        + (2.0 / s0) * epsilon ** t * np.asarray(r) ** s0


def c2_offdiag_exact(a: float, n: int, epsilon: float, r: float) -> float:
    """Off-diagonal second derivative d^2 u / dy_i dy_j of the family at
    a point with y_i = y_j = r/sqrt(2) (all other y components 0)."""
    t = a + n
    return -t * epsilon ** t * r ** (-t)


def c2_quotient_closed_form(a: float, n: int, beta: float, alpha: float,
                            epsilon: float) -> float:
    """Closed-form Holder quotient of the off-diagonal second derivative
    between the points at radii epsilon and epsilon^beta."""
    t = a + n
    return t * (1.0 - epsilon ** (t * (1.0 - beta))) / (
        epsilon ** (alpha * beta) * abs(1.0 - epsilon ** (1.0 - beta)) ** alpha)


def _nonuniform_second_derivative(r: np.ndarray, v: np.ndarray,
                                  r0: float) -> tuple[float, float]:
    """(v', v'') at r0 from the three grid nodes nearest to r0."""
    i = int(np.argmin(np.abs(r - r0)))
    i = min(max(i, 1), len(r) - 2)
    rr = r[i - 1:i + 2] - r0
    vv = v[i - 1:i + 2]
    # quadratic through the three points
    coef = np.polyfit(rr, vv, 2)
    return float(coef[1]), float(2.0 * coef[0])


def c2_failure_table(a: float, n: int, beta: float, alpha: float,
                     eps_list: Sequence[float],
                     num_r: int = 384, num_x: int = 24,
                     grading: float = 2.0) -> list[dict]:
    """Finite-difference vs closed-form second-derivative Holder
    quotients of the model family along the perforation sweep.

    Each entry solves the perforated conormal problem with the family's
    own trace, reads v(r) = u(0, r) on the x1 = 0 line, and forms the
    quotient |D(z1) - D(z2)| / |z1 - z2|^alpha with
    D = (v'' - v'/r)/2, the off-diagonal y-Hessian entry at radius r.
    """
    t = a + n
    if t <= 0 or abs(t - 2.0) < 1e-12:
        raise ValueError("the family needs a + n > 0 and a + n != 2")
    if not (0.0 < beta < 1.0) or not (0.0 < alpha < 1.0):
        raise ValueError("beta and alpha must lie in (0, 1)")
    from .geometry import Perforation
    from .solver import ProblemSpec, solve_problem

    d = n + 1
    dims = ProblemDims(d, n, a)
    out = []
    for eps in eps_list:
        ue = lambda x, r, e=eps: c2_family_value(a, n, e, x, r)
        spec = ProblemSpec(dims, radius=1.0,
                           perforation=Perforation(epsilon=eps),
                           thin_bc="across", outer_bc=ue,
                           x_boxes=[(-1.0, 1.0)], axisymmetric=True)
        fld = solve_problem(spec, num_r=num_r, num_x=num_x, grading=grading)
        r = fld.grid.r_nodes
        ix0 = int(np.argmin(np.abs(fld.grid.x_axes[0])))
        v = fld.values[ix0]

        quot_fd, quot_cf = _c2_quotients(a, n, beta, alpha, eps, r, v)
        out.append({"epsilon": eps, "quotient_fd": quot_fd,
                    "quotient_closed_form": quot_cf,
                    "relative_gap": abs(quot_fd - quot_cf) / quot_cf})
    return out


def _c2_quotients(a, n, beta, alpha, eps, r, v):
    t = a + n
    r1, r2 = eps, eps ** beta
    ds = []
    for rr in (r1, r2):
        vp, vpp = _nonuniform_second_derivative(r, v, rr)
        ds.append((vpp - vp / rr) / 2.0)
    dist = abs(r2 - r1)
    quot_fd = abs(ds[0] - ds[1]) / dist ** alpha
    quot_cf = c2_quotient_closed_form(a, n, beta, alpha, eps)
    return quot_fd, quot_cf


# ---------------------------------------------------------------------------
# Boundary-Harnack ratio
# ---------------------------------------------------------------------------

@dataclass
class HarnackRatio:
    w_values: np.ndarray
    r_cut: float
    b: float
    weak_residual: float
    profile: Optional[OscillationProfile]


def harnack_ratio(field: DiscreteField, r_cut: float = 0.05,
                  center=()) -> HarnackRatio:
    """Ratio w = u/u0 against the characteristic Dirichlet solution
    u0 = r^{2-a-n}, extended to the thin set by its limiting radial
    values, with the conjugate-equation check: w is (weakly) a solution
    of the conjugate problem with exponent b = 4 - a - 2n.
    """
    grid = field.grid
    dims = grid.dims
    a, n = dims.a, dims.n
    if a + n >= 2:
        raise ValueError("the ratio u/u0 requires a + n < 2")
    if grid.theta_nodes is not None:
        raise ValueError("harnack_ratio expects an axisymmetric field")
    s0 = 2.0 - a - n
    r = grid.r_nodes
    nx = len(grid.x_axes)

    shape_r = [1] * field.values.ndim
    shape_r[nx] = len(r)
    rcol = r.reshape(shape_r)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(rcol >= r_cut, field.values / rcol ** s0, 0.0)
    # extend below the cut by the first resolved radial value
    i_cut = int(np.searchsorted(r, r_cut))
    i_cut = min(i_cut, len(r) - 1)
    wm = np.moveaxis(w, nx, 0)
    wm[:i_cut] = wm[i_cut]
    w = np.moveaxis(wm, 0, nx)

    b = dims.b
    residual = _conjugate_weak_residual(grid, w, b)

    wfield = DiscreteField(grid, w, spec=field.spec)
    try:
        profile = holder_exponent(wfield, center=center, order=0)
    except ValueError:
        profile = None
    return HarnackRatio(w, r_cut, b, residual, profile)


def _conjugate_weak_residual(grid, w: np.ndarray, b: float) -> float:
    """Sup over interior nodal test functions of the conjugate-weight
    Dirichlet form applied to w, normalized by the diagonal energy."""
    import scipy.sparse as sp

    n = grid.dims.n
    p = b + n - 1.0
    K_r = power_stiffness_matrix(grid.r_nodes, p)
    M_r = power_mass_matrix(grid.r_nodes, p)
    from .solver import interval_matrices, _kron_chain
    x_mats = [interval_matrices(ax) for ax in grid.x_axes]
    terms = []
    for i in range(len(x_mats)):
        row = [x_mats[j][0] if j == i else x_mats[j][1]
               for j in range(len(x_mats))]
        terms.append(_kron_chain(row + [M_r]))
    terms.append(_kron_chain([m[1] for m in x_mats] + [K_r]))
    A = sum(terms)
    res = A @ w.ravel()

    # interior dofs only (Dirichlet boundary rows carry data, not residual)
    shape = grid.shape
    mask = np.ones(shape, dtype=bool)
    nx = len(grid.x_axes)
    sl = [slice(None)] * len(shape)
    sl[nx] = len(grid.r_nodes) - 1
    mask[tuple(sl)] = False
    for i in range(nx):
        sl = [slice(None)] * len(shape)
        sl[i] = 0
        mask[tuple(sl)] = False
        sl[i] = shape[i] - 1
        mask[tuple(sl)] = False
    res = res[mask.ravel()]
    scale = float(np.abs(A.diagonal()).max() * np.abs(w).max()) or 1.0
    return float(np.max(np.abs(res)) / scale)
