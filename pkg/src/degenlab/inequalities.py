"""Numerical verification of the weighted functional inequalities.

Hardy, Poincare (zero-trace / away-from-hole / Wirtinger), trace scaling
at the hole boundary, the weighted Sobolev embedding, the capacity
trichotomy, and the A2-Muckenhoupt product.  Test integrals are radial
(the inequalities are checked on radial functions of |y|, where the
constants are attained), evaluated by composite Gauss quadrature on
graded cells; sharp constants use discrete Rayleigh quotients.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from math import log, sqrt
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .geometry import ProblemDims, classify_regime, graded_nodes, sphere_area
from .solver import interval_matrices, power_stiffness_matrix, _kron_chain

QUAD_TOL = 1e-6


# ---------------------------------------------------------------------------
# Radial quadrature and the randomized test-function corpus
# ---------------------------------------------------------------------------

_G3 = (np.array([0.5 - sqrt(0.15), 0.5, 0.5 + sqrt(0.15)]),
       np.array([5.0, 8.0, 5.0]) / 18.0)


class RadialQuad:
    """Composite 3-point Gauss rule on power-graded cells of [lo, hi]."""

    def __init__(self, lo: float, hi: float, num_cells: int = 2000,
                 grading: float = 2.0):
        nodes = graded_nodes(lo, hi, num_cells, power=grading)
        l, h = nodes[:-1], nodes[1:]
        width = h - l
        pts, wts = _G3
        self.r = (l[:, None] + pts[None, :] * width[:, None]).ravel()
        self.w = (wts[None, :] * width[:, None]).ravel()

    def integrate(self, fvals: np.ndarray, power: float = 0.0) -> float:
        return float(np.sum(self.w * self.r ** power * fvals))


def smoothstep(t):
    """C^2 quintic step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    return t ** 3 * (10.0 - 15.0 * t + 6.0 * t ** 2)


def smoothstep_prime(t):
    tc = np.clip(t, 0.0, 1.0)
    return np.where((t > 0) & (t < 1),
                    30.0 * tc ** 2 * (1.0 - tc) ** 2, 0.0)


@dataclass
class RadialTestFunction:
    """Radial profile with its derivative, u(r) and u'(r)."""

    u: Callable[[np.ndarray], np.ndarray]
    du: Callable[[np.ndarray], np.ndarray]
    label: str = ""


def _dcut_exact(r, R, inner, outer):
    one = np.ones_like(r)
    f1 = one
    df1 = np.zeros_like(r)
    if inner is not None:
        f1 = smoothstep((r - inner) / inner)
        df1 = smoothstep_prime((r - inner) / inner) / inner
    f2 = one
    df2 = np.zeros_like(r)
    if outer:
        f2 = 1.0 - smoothstep((r - 0.75 * R) / (0.25 * R))
        df2 = -smoothstep_prime((r - 0.75 * R) / (0.25 * R)) / (0.25 * R)
    return df1 * f2 + f1 * df2


def _cutoff(R: float, inner: Optional[float], outer: bool):
    def cut(r):
        out = np.ones_like(np.asarray(r, dtype=float))
        if inner is not None:
            out = out * smoothstep((r - inner) / inner)
        if outer:
            out = out * (1.0 - smoothstep((r - 0.75 * R) / (0.25 * R)))
        return out
    return cut, lambda r: _dcut_exact(np.asarray(r, dtype=float), R, inner,
                                      outer)


def random_corpus(num: int, R: float = 1.0, seed: int = 0,
                  inner_cut: Optional[float] = None,
                  outer_cut: bool = False,
                  max_degree: int = 4) -> list[RadialTestFunction]:
    """Random polynomial-times-window radial test functions."""
    rng = np.random.default_rng(seed)
    cut, dcut = _cutoff(R, inner_cut, outer_cut)
    out = []
    for i in range(num):
        deg = int(rng.integers(1, max_degree + 1))
        coef = rng.uniform(-1.0, 1.0, size=deg + 1)
        poly = np.polynomial.Polynomial(coef)
        dpoly = poly.deriv()

        def u(r, p=poly, c=cut):
            return p(r) * c(r)

        def du(r, p=poly, dp=dpoly, c=cut, dc=dcut):
            return dp(r) * c(r) + p(r) * dc(r)

        out.append(RadialTestFunction(u, du, label=f"poly{i}"))
    return out


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class InequalityReport:
    name: str
    params: dict
    ratios: list[float]
    worst_ratio: float
    passed: bool
    tolerance: float = 1e-3
    near_extremal: Optional[list[float]] = None
    extras: dict = dataclass_field(default_factory=dict)


def _make_report(name, params, ratios, tol=1e-3, near=None, extras=None):
    worst = float(max(ratios)) if ratios else 0.0
    return InequalityReport(name, params, [float(x) for x in ratios], worst,
                            bool(worst <= 1.0 + tol), tol, near, extras or {})


# ---------------------------------------------------------------------------
# Hardy
# ---------------------------------------------------------------------------

def hardy_check(delta: float, n: int, R: float = 1.0, eps: float = 0.0,
                funcs: Optional[Sequence[RadialTestFunction]] = None,
                seed: int = 0, num: int = 10) -> InequalityReport:
    """((delta+n)/2)^2 int |y|^delta u^2 <= [boundary term +]
    int |y|^{delta+2} |grad u|^2, boundary term present iff delta+n > 0."""
    t = delta + n
    if t == 0:
        raise ValueError("delta = -n is excluded")
    if funcs is None:
        inner = 0.1 * R if t < 0 else None
        funcs = random_corpus(num, R=R, seed=seed, inner_cut=inner)
    lo = max(eps, 0.0)
    quad = RadialQuad(lo, R)
    const = (t / 2.0) ** 2
    ratios = []
    for fn in funcs:
        u = fn.u(quad.r)
        du = fn.du(quad.r)
        lhs = const * quad.integrate(u ** 2, power=delta + n - 1.0)
        rhs = quad.integrate(du ** 2, power=delta + n + 1.0)
        if t > 0:
            uR = float(np.asarray(fn.u(np.array([R])))[0])
            rhs += (t / 2.0) * R ** (delta + 1.0) * uR ** 2 * R ** (n - 1.0)
        if rhs == 0.0:
            continue
        ratios.append(lhs / rhs)
    return _make_report("hardy", {"delta": delta, "n": n, "R": R,
                                  "eps": eps, "seed": seed}, ratios)


def hardy_near_extremal(delta: float, n: int, R: float = 1.0,
                        t_list: Sequence[float] = (0.4, 0.2, 0.1, 0.05)
                        ) -> list[float]:
    """lhs/rhs ratios of the family u_t = r^{-(delta+n)/2 + t} (times an
    outer window), approaching 1 as t decreases."""
    tt = delta + n
    if tt <= 0:
        raise ValueError("the near-extremal family is for delta + n > 0")
    quad = RadialQuad(0.0, R, num_cells=4000, grading=3.0)
    const = (tt / 2.0) ** 2
    out = []
    for t in sorted(t_list, reverse=True):
        p = -tt / 2.0 + t
        u = quad.r ** p
        du = p * quad.r ** (p - 1.0)
        lhs = const * quad.integrate(u ** 2, power=delta + n - 1.0)
        rhs = quad.integrate(du ** 2, power=delta + n + 1.0)
        rhs += (tt / 2.0) * R ** (delta + 1.0) * R ** (2.0 * p) * R ** (n - 1.0)
        out.append(float(lhs / rhs))
    return out


# ---------------------------------------------------------------------------
# Poincare and Wirtinger
# ---------------------------------------------------------------------------

def wirtinger_constant(a: float, n: int, R: float = 1.0,
                       num_nodes: int = 400) -> float:
    """Sharp discrete constant: the smallest nonzero weighted Neumann
    eigenvalue on the radial grid, times R^2."""
    from .solver import power_mass_matrix
    nodes = graded_nodes(0.0, R, num_nodes, power=2.0)
    p = a + n - 1.0
    K = power_stiffness_matrix(nodes, p).toarray()
    M = power_mass_matrix(nodes, p).toarray()
    vals = scipy.linalg.eigh(K, M, eigvals_only=True,
                             subset_by_index=[0, 1])
    lam1 = float(vals[1])
    return lam1 * R ** 2


def poincare_check(a: float, n: int, R: float = 1.0, eps: float = 0.0,
                   variant: str = "zero-trace",
                   funcs: Optional[Sequence[RadialTestFunction]] = None,
                   seed: int = 0, num: int = 10) -> InequalityReport:
    """Weighted Poincare inequalities with the displayed constants:
    ((a+n)/2R)^2 for zero-trace data, ((a+n-2)/2R)^2 away from the hole
    (a+n < 2), and the discrete sharp constant for the Wirtinger form."""
    t = a + n
    params = {"a": a, "n": n, "R": R, "eps": eps, "variant": variant,
              "seed": seed}
    if variant == "zero-trace":
        const = (t / (2.0 * R)) ** 2
        if funcs is None:
            funcs = random_corpus(num, R=R, seed=seed, outer_cut=True)
    elif variant == "away-from-hole":
        if t >= 2:
            raise ValueError("the away-from-hole constant requires a+n < 2")
        const = ((t - 2.0) / (2.0 * R)) ** 2
        if funcs is None:
            funcs = random_corpus(num, R=R, seed=seed,
                                  inner_cut=max(eps, 0.05 * R))
    elif variant == "wirtinger":
        const = wirtinger_constant(a, n, R) / R ** 2
        if funcs is None:
            funcs = random_corpus(num, R=R, seed=seed)
    else:
        raise ValueError(f"unknown variant {variant!r}")

    quad = RadialQuad(max(eps, 0.0), R)
    p = a + n - 1.0
    ratios = []
    for fn in funcs:
        u = fn.u(quad.r)
        du = fn.du(quad.r)
        if variant == "wirtinger":
            mass = quad.integrate(np.ones_like(u), power=p)
            mean = quad.integrate(u, power=p) / mass
            u = u - mean
        lhs = const * quad.integrate(u ** 2, power=p)
        rhs = quad.integrate(du ** 2, power=p)
        if rhs == 0.0:
            if lhs > QUAD_TOL:
                ratios.append(np.inf)
            continue
        ratios.append(lhs / rhs)
    return _make_report("poincare", params, ratios)


# ---------------------------------------------------------------------------
# Trace scaling at the hole boundary
# ---------------------------------------------------------------------------

def trace_constant(a: float, n: int, R: float, eps: float,
                   num_r: int = 400) -> float:
    """Best constant of  int_{hole} |y|^a u^2 <= G int |y|^a |grad u|^2
    over radial fields vanishing at r = R: the rank-one Rayleigh maximum
    eps^{a+n-1} (K^{-1})_{00} on the annulus grid."""
    if a + n <= 0:
        raise ValueError("trace scaling requires a + n > 0")
    nodes = graded_nodes(eps, R, num_r, power=2.0)
    p = a + n - 1.0
    K = power_stiffness_matrix(nodes, p).tocsc()
    m = len(nodes)
    free = np.arange(m - 1)      # eliminate u(R) = 0
    Kff = K[free][:, free]
    e0 = np.zeros(m - 1)
    e0[0] = 1.0
    sol = sp.linalg.spsolve(Kff.tocsr(), e0)
    return float(eps ** (a + n - 1.0) * sol[0])


def trace_scaling(a: float, n: int, R: float = 1.0,
                  eps_list: Sequence[float] = (0.01, 0.005, 0.0025, 0.00125),
                  num_r: int = 600) -> dict:
    """Fits log(best trace constant) against log(eps) and reports the
    branch comparison: slope a+n-1 in the mid-range, slope 1 for
    a+n > 2, and boundedness of constant/(eps log(1/eps)) at a+n = 2."""
    t = a + n
    eps_list = sorted(eps_list, reverse=True)
    consts = [trace_constant(a, n, R, e, num_r=num_r) for e in eps_list]
    rec = {"a": a, "n": n, "R": R, "eps": list(eps_list),
           "constants": consts}
    if abs(t - 2.0) < 1e-12:
        profile = [c / (e * log(1.0 / e)) for c, e in zip(consts, eps_list)]
        rec["branch"] = "eps log eps"
        rec["profile_ratios"] = profile
        rec["bounded"] = bool(max(profile) / min(profile) < 10.0)
        return rec
    slope = float(np.polyfit(np.log(eps_list), np.log(consts), 1)[0])
    rec["slope"] = slope
    rec["branch"] = "eps^{a+n-1}" if t < 2 else "eps"
    rec["expected_slope"] = t - 1.0 if t < 2 else 1.0
    return rec


# ---------------------------------------------------------------------------
# Sobolev embedding
# ---------------------------------------------------------------------------

def sobolev_check(a: float, n: int, d: int, q: float,
                  eps_list: Sequence[float] = (0.0, 0.1, 0.05),
                  R: float = 1.0, seed: int = 0, num: int = 10) -> dict:
    """Fitted embedding constant  c (int |y|^a |u|^q)^{2/q} <=
    int |y|^a |grad u|^2 and its stability along the hole sweep."""
    dims = ProblemDims(d, n, a)
    two_star = dims.two_star_a
    if not (d == n == 2 and a <= 0):
        if two_star is None or not (2.0 <= q <= two_star + 1e-12):
            raise ValueError(f"q={q} outside the admissible range "
                             f"[2, {two_star}]")
    elif q < 2:
        raise ValueError("q must be >= 2")
    p = a + n - 1.0
    fitted = []
    for eps in eps_list:
        # keep the corpora comparable along the sweep: the inner window
        # never collapses below a fixed floor
        inner = max(eps, 0.02 * R)
        funcs = random_corpus(num, R=R, seed=seed, inner_cut=inner,
                              outer_cut=True)
        quad = RadialQuad(eps, R)
        cs = []
        for fn in funcs:
            u = fn.u(quad.r)
            du = fn.du(quad.r)
            denom = quad.integrate(np.abs(u) ** q, power=p) ** (2.0 / q)
            if denom == 0.0:
                continue
            cs.append(quad.integrate(du ** 2, power=p) / denom)
        fitted.append(float(min(cs)))
    stable = bool(max(fitted) / min(fitted) <= 2.0)
    return {"a": a, "n": n, "d": d, "q": q, "eps": list(eps_list),
            "fitted_constants": fitted, "stable_within_factor_2": stable}


# ---------------------------------------------------------------------------
# Capacity trichotomy
# ---------------------------------------------------------------------------

@dataclass
class CapacityEstimate:
    regime: str
    energies: list[float]
    parameters: list[float]
    scaling_exponent: Optional[float] = None
    verdict: str = ""


def _midrange_capacity(a: float, n: int, R_outer: float,
                       num_r: int = 400) -> float:
    """Minimized radial condenser energy: field 1 at the manifold, 0 at
    the outer radius (the discrete capacity, times the sphere area)."""
    nodes = graded_nodes(0.0, R_outer, num_r, power=3.0)
    p = a + n - 1.0
    K = power_stiffness_matrix(nodes, p).tocsc()
    m = len(nodes)
    u = np.zeros(m)
    u[0] = 1.0
    free = np.arange(1, m - 1)
    Kff = K[free][:, free]
    rhs = -(K[free][:, [0]].toarray().ravel())
    u[free] = sp.linalg.spsolve(Kff.tocsr(), rhs)
    return float(sphere_area(n) * u @ (K @ u))


def _psih_energy(a: float, n: int, h: float) -> float:
    """Energy of the logarithmic plateau family collapsing on the
    manifold, int |y|^a |grad Psi_h|^2 in the radial variable."""
    pts, wts = _G3
    # transition zone t = -log(r)/h in (1, 2); r = e^{-h t}
    t = 1.0 + pts
    w = wts
    integrand = np.exp(-h * t * (a + n - 2.0)) * smoothstep_prime(t - 1.0)**2
    return float(sphere_area(n) / h * np.sum(w * integrand))


def _supersingular_min_energy(a: float, n: int, delta: float,
                              R_flat: float = 0.5, L: float = 1.0,
                              num_r: int = 96, num_x: int = 48) -> float:
    """Minimal energy of grid fields that are 1 on the truncated
    manifold collar {r = delta, |x| <= R_flat} and 0 on the outer
    boundary of the (x, r) box; grows without bound as delta -> 0."""
    from .solver import power_mass_matrix
    r_nodes = graded_nodes(delta, L, num_r, power=2.0)
    x_nodes = np.linspace(-L, L, num_x + 1)
    p = a + n - 1.0
    K_r = power_stiffness_matrix(r_nodes, p)
    M_r = power_mass_matrix(r_nodes, p)
    K_x, M_x = interval_matrices(x_nodes)
    A = _kron_chain([K_x, M_r]) + _kron_chain([M_x, K_r])
    shape = (len(x_nodes), len(r_nodes))

    ones_mask = np.zeros(shape, dtype=bool)
    ones_mask[np.abs(x_nodes) <= R_flat, 0] = True
    zero_mask = np.zeros(shape, dtype=bool)
    zero_mask[0, :] = zero_mask[-1, :] = True
    zero_mask[:, -1] = True

    u = np.where(ones_mask, 1.0, 0.0).ravel()
    fixed = (ones_mask | zero_mask).ravel()
    free = np.nonzero(~fixed)[0]
    A = A.tocsc()
    Aff = A[free][:, free]
    rhs = -(A[free] @ u)
    u[free] = sp.linalg.spsolve(Aff.tocsr(), rhs)
    return float(sphere_area(n) * u @ (A @ u))


def capacity_estimate(a: float, n: int, d: int, R: float = 0.5,
                      omega_diam: float = 1.0) -> CapacityEstimate:
    """Regime-dependent capacity certificate.

    Mid-range: the minimized condenser energy and its joint-dilation
    scaling exponent (expected d+a-2).  Superdegenerate: the plateau
    family energies decreasing to 0.  Supersingular (requires d > n):
    minimal truncated-collar energies diverging as the truncation radius
    shrinks.
    """
    regime = classify_regime(a, n)
    if regime == "mid-range":
        if d != n:
            raise ValueError("the radial condenser estimate uses d = n")
        e1 = _midrange_capacity(a, n, omega_diam)
        e2 = _midrange_capacity(a, n, 2.0 * omega_diam)
        exponent = float(np.log2(e2 / e1))
        return CapacityEstimate(regime, [e1, e2],
                                [omega_diam, 2.0 * omega_diam],
                                scaling_exponent=exponent,
                                verdict="positive-finite")
    if regime == "superdegenerate":
        hs = [2.0, 4.0, 8.0, 16.0]
        es = [_psih_energy(a, n, h) for h in hs]
        ok = all(es[i + 1] < es[i] for i in range(len(es) - 1))
        verdict = "zero" if ok and es[-1] <= 0.1 * es[0] else "inconclusive"
        return CapacityEstimate(regime, es, hs, verdict=verdict)
    # supersingular
    if d <= n:
        raise ValueError("the supersingular divergence witness needs d > n "
                         "(the manifold must reach the domain boundary)")
    deltas = [0.1, 0.05, 0.025, 0.0125]
    es = [_supersingular_min_energy(a, n, dl) for dl in deltas]
    ok = all(es[i + 1] > es[i] for i in range(len(es) - 1))
    verdict = "infinite" if ok else "inconclusive"
    return CapacityEstimate(regime, es, deltas, verdict=verdict)


# ---------------------------------------------------------------------------
# Muckenhoupt product
# ---------------------------------------------------------------------------

def muckenhoupt_constant(a: float, n: int,
                         rhos: Sequence[float] = (1.0, 0.5, 0.25)) -> dict:
    """A2 product of ball averages of |y|^a and |y|^{-a} over balls
    centered on the manifold, by closed-form radial moments; the product
    is rho-independent and finite iff 0 < a+n < 2n."""
    def ball_average(exponent: float, rho: float) -> float:
        if n + exponent <= 0:
            return np.inf
        return n / (n + exponent) * rho ** exponent

    products = []
    for rho in rhos:
        m1 = ball_average(a, rho)
        m2 = ball_average(-a, rho)
        products.append(m1 * m2)
    finite = all(np.isfinite(products))
    return {"a": a, "n": n, "rhos": list(rhos), "products": products,
            "constant": max(products) if finite else np.inf,
            "is_a2": bool(finite and 0.0 < a + n < 2.0 * n)}
