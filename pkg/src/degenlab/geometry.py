"""Domains, weights, perforations and weighted quadrature.

Geometry conventions: points are ``z = (x, y)`` with ``x`` in ``R^{d-n}``
and ``y`` in ``R^n``.  The characteristic manifold is ``{y = 0}``; the
anisotropic perforation of size ``epsilon`` is the sublevel set
``{A3^{-1}(z) y . y <= epsilon^2}`` of the level function ``Psi``.  All
built-in grids use polar-in-y coordinates ``(x, r, theta)`` so that both
the manifold (``r = 0``) and the hole boundary (``r = epsilon``) are
coordinate surfaces.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

SUPERSINGULAR = "supersingular"
MID_RANGE = "mid-range"
SUPERDEGENERATE = "superdegenerate"


def classify_regime(a: float, n: int) -> str:
    """Capacity regime of the weight ``|y|^a`` in codimension ``n``."""
    t = a + n
    if t <= 0:
        return SUPERSINGULAR
    if t < 2:
        return MID_RANGE
    return SUPERDEGENERATE


@dataclass(frozen=True)
class ProblemDims:
    """Parameter triple (d, n, a) plus derived regime quantities."""

    d: int
    n: int
    a: float

    def __post_init__(self):
        if not (2 <= self.n <= self.d):
            raise ValueError(f"need 2 <= n <= d, got n={self.n}, d={self.d}")

    @property
    def s(self) -> float:
        """Fractional order s = (2 - a - n)/2; in (0,1) iff a+n in (0,2)."""
        return (2.0 - self.a - self.n) / 2.0

    @property
    def b(self) -> float:
        """Conjugate exponent b = 4 - a - 2n of the quotient equation."""
        return 4.0 - self.a - 2.0 * self.n

    @property
    def two_star_a(self) -> Optional[float]:
        """Critical Sobolev exponent 2(a_+ + d)/(a_+ + d - 2)."""
        ap = max(self.a, 0.0)
        if ap + self.d <= 2:
            return None
        return 2.0 * (ap + self.d) / (ap + self.d - 2.0)

    @property
    def regime(self) -> str:
        return classify_regime(self.a, self.n)

    @property
    def is_a2_weight(self) -> bool:
        """Whether |y|^a is an A2-Muckenhoupt weight (0 < a+n < 2n)."""
        return 0.0 < self.a + self.n < 2.0 * self.n


def _sym_eig_bounds(mat: np.ndarray) -> tuple[float, float]:
    w = np.linalg.eigvalsh(0.5 * (mat + mat.T))
    return float(w[0]), float(w[-1])


class CoefficientField:
    """Symmetric uniformly elliptic coefficient matrix A(z) with block
    structure A1 (x-x), A2 (x-y), A3 (y-y) and the two pairs of
    ellipticity constants: global (lam,Am) and restricted to the
    manifold (lam_star, Lam_star, spectral bounds of A3 at y=0).
    """

    def __init__(self, d: int, n: int, kind: str,
                 evaluator: Callable[[np.ndarray], np.ndarray],
                 lam: float, Lam: float,
                 lam_star: float, Lam_star: float):
        if not (0 < lam <= lam_star <= Lam_star <= Lam):
            raise ValueError("need 0 < lam <= lam_star <= Lam_star <= Lam")
        self.d = d
        self.n = n
        self.kind = kind
        self._eval = evaluator
        self.lam = lam
        self.Lam = Lam
        self.lam_star = lam_star
        self.Lam_star = Lam_star

    @classmethod
    def identity(cls, d: int, n: int) -> "CoefficientField":
        mat = np.eye(d)
        return cls(d, n, "identity", lambda z: mat, 1.0, 1.0, 1.0, 1.0)

    @classmethod
    def constant(cls, mat, d: int, n: int) -> "CoefficientField":
        mat = np.asarray(mat, dtype=float)
        if mat.shape != (d, d):
            raise ValueError(f"matrix must be {d}x{d}")
        if not np.allclose(mat, mat.T, atol=1e-12):
            raise ValueError("matrix must be symmetric")
        lam, Lam = _sym_eig_bounds(mat)
        if lam <= 0:
            raise ValueError("matrix must be positive definite")
        ls, Ls = _sym_eig_bounds(mat[d - n:, d - n:])
        lam_star, Lam_star = max(ls, lam), min(Ls, Lam)
        return cls(d, n, "constant", lambda z, m=mat: m,
                   lam, Lam, lam_star, Lam_star)

    @classmethod
    def from_callable(cls, func: Callable[[np.ndarray], np.ndarray],
                      d: int, n: int,
                      sample_radius: float = 1.0,
                      num_samples: int = 200,
                      seed: int = 0) -> "CoefficientField":
        """Wrap a matrix-valued callable; ellipticity constants are
        estimated by sampling (reported, not certified)."""
        rng = np.random.default_rng(seed)
        pts = rng.uniform(-sample_radius, sample_radius, size=(num_samples, d))
        lam, Lam = np.inf, 0.0
        ls, Ls = np.inf, 0.0
        for z in pts:
            m = np.asarray(func(z), dtype=float)
            lo, hi = _sym_eig_bounds(m)
            lam, Lam = min(lam, lo), max(Lam, hi)
            z0 = z.copy()
            z0[d - n:] = 0.0
            m0 = np.asarray(func(z0), dtype=float)
            lo3, hi3 = _sym_eig_bounds(m0[d - n:, d - n:])
            ls, Ls = min(ls, lo3), max(Ls, hi3)
        ls, Ls = max(ls, lam), min(Ls, Lam)
        return cls(d, n, "callable", func, lam, Lam, ls, Ls)

    def matrix(self, z) -> np.ndarray:
        return np.asarray(self._eval(np.asarray(z, dtype=float)), dtype=float)

    def blocks(self, z) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        m = self.matrix(z)
        k = self.d - self.n
        return m[:k, :k], m[:k, k:], m[k:, k:]

    @property
    def is_constant(self) -> bool:
        return self.kind in ("identity", "constant")


@dataclass(frozen=True)
class Perforation:
    """Hole of size epsilon around the characteristic manifold."""

    epsilon: float = 0.0
    anisotropic: bool = False
    epsilon_max: float = np.inf

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.anisotropic and self.epsilon >= self.epsilon_max:
            raise ValueError("anisotropic hole requires epsilon < epsilon_max")

    @property
    def is_perforated(self) -> bool:
        return self.epsilon > 0


@dataclass
class DefiningFunction:
    """Distance-comparable weight generator for a curved manifold given by
    a parametrization ``x -> (x, phi(x))`` with ``phi(0) = 0`` and
    ``J_phi(0) = 0``.  ``delta`` is the weight-generating function and
    ``c0 <= delta/dist <= c1`` off the manifold; ``alpha`` is the Holder
    class of the straightened ratio ``delta(Phi(x,y))/|y|``.
    """

    phi: Callable[[np.ndarray], np.ndarray]
    delta: Callable[[np.ndarray], float]
    c0: float
    c1: float
    alpha: float = 1.0

    def __post_init__(self):
        if not (0 < self.c0 <= self.c1):
            raise ValueError("need 0 < c0 <= c1")


# ---------------------------------------------------------------------------
# Weight and level-set operations
# ---------------------------------------------------------------------------

def eval_weight(dims: ProblemDims, z) -> float:
    """Evaluate |y|^a at the point z = (x, y)."""
    z = np.asarray(z, dtype=float)
    y = z[dims.d - dims.n:]
    r = float(np.linalg.norm(y))
    if r == 0.0:
        if dims.a < 0:
            raise ValueError("weight |y|^a is singular at y=0 for a < 0")
        return 0.0 if dims.a > 0 else 1.0
    return r ** dims.a


def psi_level(A: CoefficientField, z) -> float:
    """Level function Psi(z) = sqrt(A3^{-1}(z) y . y); the hole boundary
    is the level set {Psi = epsilon}."""
    z = np.asarray(z, dtype=float)
    y = z[A.d - A.n:]
    if not np.any(y):
        return 0.0
    _, _, A3 = A.blocks(z)
    v = np.linalg.solve(A3, y)
    val = float(v @ y)
    if val < 0:
        raise ValueError("A3 not positive definite at the sample point")
    return np.sqrt(val)


def _psi_gradient(A: CoefficientField, z: np.ndarray) -> np.ndarray:
    if A.is_constant:
        grad = np.zeros(A.d)
        y = z[A.d - A.n:]
        _, _, A3 = A.blocks(z)
        v = np.linalg.solve(A3, y)
        grad[A.d - A.n:] = v / np.sqrt(v @ y)
        return grad
    h = 1e-6 * max(1.0, float(np.linalg.norm(z)))
    grad = np.zeros(A.d)
    for i in range(A.d):
        zp, zm = z.copy(), z.copy()
        zp[i] += h
        zm[i] -= h
        grad[i] = (psi_level(A, zp) - psi_level(A, zm)) / (2 * h)
    return grad


def hole_normal(A: CoefficientField, z, epsilon: float,
                tol_surface: Optional[float] = None) -> np.ndarray:
    """Outer unit normal of the hole at a point of its boundary, computed
    as the normalized gradient of the level function."""
    z = np.asarray(z, dtype=float)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if tol_surface is None:
        tol_surface = 1e-8 * epsilon
    psi = psi_level(A, z)
    if abs(psi - epsilon) > tol_surface:
        raise ValueError(
            f"point is not on the hole boundary: Psi={psi}, epsilon={epsilon}")
    grad = _psi_gradient(A, z)
    return grad / np.linalg.norm(grad)


def estimate_epsilon_max(A: CoefficientField,
                         eps_trials: Sequence[float] = (0.5, 0.25, 0.125,
                                                        0.0625, 0.03125),
                         num_samples: int = 100,
                         seed: int = 0,
                         safety: float = 0.9) -> float:
    """Empirical admissibility bound for the hole size: the largest trial
    epsilon (times a safety factor) at which the sampled transversality
    ``nu . y/|y| >= lam/(2 Lam)`` holds on the hole boundary.  The bound
    is reported without any sharpness claim.
    """
    if A.is_constant:
        return np.inf
    rng = np.random.default_rng(seed)
    floor = A.lam / (2.0 * A.Lam)
    best = 0.0
    for eps in sorted(eps_trials, reverse=True):
        ok = True
        for _ in range(num_samples):
            x = rng.uniform(-0.5, 0.5, size=A.d - A.n)
            sigma = rng.normal(size=A.n)
            sigma /= np.linalg.norm(sigma)
            z = np.concatenate([x, sigma])
            # project onto the level set by radial scaling of y
            t = eps / psi_level(A, z)
            z[A.d - A.n:] *= t
            nu = hole_normal(A, z, eps, tol_surface=1e-6 * eps)
            y = z[A.d - A.n:]
            if nu[A.d - A.n:] @ (y / np.linalg.norm(y)) < floor:
                ok = False
                break
        if ok:
            best = eps
            break
    return safety * best


# ---------------------------------------------------------------------------
# Straightening and curved pushforward
# ---------------------------------------------------------------------------

def _a3_inv_sqrt(A: CoefficientField) -> np.ndarray:
    _, _, A3 = A.blocks(np.zeros(A.d))
    w, V = np.linalg.eigh(A3)
    return (V * (1.0 / np.sqrt(w))) @ V.T


def straighten(A: CoefficientField, z) -> np.ndarray:
    """Map z = (x, y) to (x, A3^{-1/2} y); sends the anisotropic hole
    boundary to the round cylinder of radius epsilon.  Constant A only."""
    if not A.is_constant:
        raise ValueError("straightening requires a constant coefficient field")
    z = np.asarray(z, dtype=float)
    out = z.copy()
    out[A.d - A.n:] = _a3_inv_sqrt(A) @ z[A.d - A.n:]
    return out


def straighten_inverse(A: CoefficientField, z) -> np.ndarray:
    if not A.is_constant:
        raise ValueError("straightening requires a constant coefficient field")
    z = np.asarray(z, dtype=float)
    out = z.copy()
    _, _, A3 = A.blocks(z)
    w, V = np.linalg.eigh(A3)
    sqrt_a3 = (V * np.sqrt(w)) @ V.T
    out[A.d - A.n:] = sqrt_a3 @ z[A.d - A.n:]
    return out


def curved_pushforward(A: CoefficientField, df: DefiningFunction, z,
                       comparability_slack: float = 0.1,
                       fd_step: float = 1e-6):
    """Flatten a curved-manifold problem: for the graph map
    ``Phi(x, y) = (x, y + phi(x))`` return the coefficient matrix
    ``Atilde = dtilde^a Jinv (A o Phi) Jinv^T`` and the flat weight
    ``|y|^a``, where ``dtilde = delta(Phi(z))/|y|``.
    """
    z = np.asarray(z, dtype=float)
    k = A.d - A.n
    x, y = z[:k], z[k:]
    r = float(np.linalg.norm(y))
    if r == 0.0:
        raise ValueError("pushforward is evaluated off the manifold (y != 0)")

    jphi = np.zeros((A.n, k))
    for j in range(k):
        xp, xm = x.copy(), x.copy()
        xp[j] += fd_step
        xm[j] -= fd_step
        jphi[:, j] = (np.asarray(df.phi(xp)) - np.asarray(df.phi(xm))) / (2 * fd_step)

    phi_z = np.concatenate([x, y + np.asarray(df.phi(x), dtype=float)])
    dtilde = float(df.delta(phi_z)) / r
    lo = df.c0 * (1.0 - comparability_slack)
    hi = df.c1 * (1.0 + comparability_slack)
    if not (lo <= dtilde <= hi):
        raise ValueError(
            f"delta(Phi(z))/|y| = {dtilde} outside the comparability window "
            f"[{lo}, {hi}]")

    jinv = np.eye(A.d)
    jinv[k:, :k] = -jphi
    # dims of the ambient weight exponent: stored on A? the exponent comes
    # from the caller's dims; here we return the congruence factor only.
    amat = A.matrix(phi_z)
    atilde = jinv @ amat @ jinv.T
    return atilde, dtilde


def curved_coefficient(A: CoefficientField, df: DefiningFunction,
                       dims: ProblemDims, z, **kwargs):
    """Full flattened pair (Atilde, flat weight |y|^a) including the
    dtilde^a factor in Atilde."""
    atilde, dtilde = curved_pushforward(A, df, z, **kwargs)
    return (dtilde ** dims.a) * atilde, eval_weight(dims, z)


# ---------------------------------------------------------------------------
# Polar grids and weighted quadrature
# ---------------------------------------------------------------------------

def radial_moment(q: float, rl: float, rr: float) -> float:
    """Closed-form moment integral of r^q over a cell [rl, rr]."""
    if rl < 0 or rr <= rl:
        raise ValueError("need 0 <= rl < rr")
    if abs(q + 1.0) < 1e-13:
        if rl == 0.0:
            return np.inf
        return float(np.log(rr / rl))
    p = q + 1.0
    if rl == 0.0:
        if p <= 0:
            return np.inf
        return rr ** p / p
    return (rr ** p - rl ** p) / p


def graded_nodes(lo: float, hi: float, num_cells: int,
                 power: float = 1.0) -> np.ndarray:
    """Strictly increasing nodes on [lo, hi] clustered toward lo with a
    power-law density: node_k = lo + (hi - lo) (k/N)^power."""
    if num_cells < 1:
        raise ValueError("need at least one cell")
    t = np.linspace(0.0, 1.0, num_cells + 1)
    return lo + (hi - lo) * t ** power


class PolarGrid:
    """Tensor grid in (x..., r[, theta]) with weighted quadrature.

    The radial measure r^{a+n-1} dr is integrated cell-exactly (closed
    form per cell against the linear hat functions); x uses trapezoid
    weights and theta uses the uniform periodic rule.
    """

    def __init__(self, dims: ProblemDims, r_nodes: np.ndarray,
                 theta_nodes: Optional[np.ndarray] = None,
                 x_axes: Sequence[np.ndarray] = ()):
        self.dims = dims
        self.r_nodes = np.asarray(r_nodes, dtype=float)
        if np.any(np.diff(self.r_nodes) <= 0) or self.r_nodes[0] < 0:
            raise ValueError("r_nodes must be strictly increasing and >= 0")
        self.theta_nodes = (None if theta_nodes is None
                            else np.asarray(theta_nodes, dtype=float))
        self.x_axes = tuple(np.asarray(ax, dtype=float) for ax in x_axes)

    @classmethod
    def build(cls, dims: ProblemDims, radius: float, num_r: int,
              num_theta: Optional[int] = None,
              epsilon: float = 0.0, grading: float = 1.0,
              x_boxes: Sequence[tuple[float, float]] = (),
              num_x: int = 0) -> "PolarGrid":
        r_nodes = graded_nodes(epsilon, radius, num_r, power=grading)
        theta = None
        if num_theta is not None:
            theta = np.linspace(0.0, 2.0 * np.pi, num_theta, endpoint=False)
        x_axes = [np.linspace(lo, hi, num_x + 1) for lo, hi in x_boxes]
        return cls(dims, r_nodes, theta, x_axes)

    @property
    def epsilon(self) -> float:
        return float(self.r_nodes[0])

    @property
    def radius(self) -> float:
        return float(self.r_nodes[-1])

    @property
    def shape(self) -> tuple[int, ...]:
        sh = tuple(len(ax) for ax in self.x_axes) + (len(self.r_nodes),)
        if self.theta_nodes is not None:
            sh = sh + (len(self.theta_nodes),)
        return sh

    def radial_quad_weights(self) -> np.ndarray:
        """Nodal weights w_i with sum_i w_i f_i = int r^{a+n-1} I_h[f] dr,
        exact for piecewise-linear f."""
        p = self.dims.a + self.dims.n - 1.0
        r = self.r_nodes
        w = np.zeros_like(r)
        for k in range(len(r) - 1):
            rl, rr = r[k], r[k + 1]
            h = rr - rl
            m0 = radial_moment(p, rl, rr)
            m1 = radial_moment(p + 1.0, rl, rr)
            if not np.isfinite(m0) or not np.isfinite(m1):
                raise ValueError(
                    "non-integrable radial weight on the first cell "
                    f"(a+n={self.dims.a + self.dims.n})")
            w[k] += (rr * m0 - m1) / h
            w[k + 1] += (m1 - rl * m0) / h
        return w

    def axis_quad_weights(self) -> list[np.ndarray]:
        """Per-axis nodal quadrature weights, in (x..., r[, theta]) order.
        The angular surface measure factor |S^{n-1}| (or the theta cell
        width for n=2 grids with an explicit angle) is included here."""
        out: list[np.ndarray] = []
        for ax in self.x_axes:
            w = np.zeros_like(ax)
            hh = np.diff(ax)
            w[:-1] += 0.5 * hh
            w[1:] += 0.5 * hh
            out.append(w)
        out.append(self.radial_quad_weights())
        if self.theta_nodes is not None:
            h = 2.0 * np.pi / len(self.theta_nodes)
            out.append(np.full(len(self.theta_nodes), h))
        else:
            out[-1] = out[-1] * sphere_area(self.dims.n)
        return out


def sphere_area(n: int) -> float:
    """Surface measure |S^{n-1}| of the unit sphere in R^n."""
    from math import gamma, pi
    return 2.0 * pi ** (n / 2.0) / gamma(n / 2.0)


def weighted_integral(grid: PolarGrid, dims: ProblemDims, f) -> float:
    """Integral of f against the weight |y|^a over the grid's domain
    (box in x, annulus/ball in y), with cell-exact radial moments."""
    if dims.a + dims.n <= 0 and grid.epsilon == 0.0:
        raise ValueError(
            "weight |y|^a is not integrable at the manifold for a+n <= 0")
    f = np.asarray(f, dtype=float)
    if f.shape != grid.shape:
        raise ValueError(f"f has shape {f.shape}, grid expects {grid.shape}")
    ws = grid.axis_quad_weights()
    total = f
    for w in reversed(ws):
        total = total @ w if total.ndim > 1 else float(total @ w)
    return float(total)
