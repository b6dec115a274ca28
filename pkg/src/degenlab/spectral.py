"""Weighted sphere eigenstructure, indicial exponents and the regularity
threshold exponent.

On the unit sphere the relevant eigenvalue problem is the critical-point
problem of the weighted Rayleigh quotient with angular weight
``w(sigma) = |A3^{1/2} sigma|^a``; for n = 2 this is a periodic weighted
Sturm-Liouville problem ``-(w g')' = mu w g`` on the circle.  The radial
homogeneities compatible with mode k are the indicial exponents, the two
real roots of ``gamma^2 + (a+n-2) gamma - mu_k = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import atan, comb, pi, sqrt
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import classify_regime

#: relative tolerance used to cluster numerically coincident eigenvalues
MULTIPLICITY_RTOL = 1e-6


@dataclass(frozen=True)
class IndicialExponents:
    """The two admissible radial homogeneities for a given mode level."""

    gamma_plus: float
    gamma_minus: float
    mu: float
    a: float
    n: int


def indicial_exponents(a: float, n: int, mu: float) -> IndicialExponents:
    """Roots of gamma^2 + (a+n-2) gamma - mu = 0, ordered (plus, minus)."""
    if mu < 0:
        raise ValueError("mu must be >= 0")
    t = 2.0 - a - n
    disc = sqrt(t * t + 4.0 * mu)
    return IndicialExponents((t + disc) / 2.0, (t - disc) / 2.0, mu, a, n)


def mu_star(a: float, n: int, ratio: float) -> float:
    """First-eigenvalue lower-bound quantity entering the threshold
    exponent, for restricted ellipticity ratio in (0, 1]."""
    if not (0.0 < ratio <= 1.0):
        raise ValueError("ratio must lie in (0, 1]")
    if n >= 3:
        return ratio ** (abs(a) / 2.0) * (n - 1.0)
    if n == 2:
        return ((4.0 / pi) * atan(ratio ** (abs(a) / 4.0))) ** 2
    raise ValueError("codimension n must be >= 2")


def alpha_star(a: float, n: int, ratio: float) -> tuple[float, float]:
    """Threshold Holder exponent: returns (mu_star, alpha_star) with
    alpha_star = (2-a-n + sqrt((2-a-n)^2 + 4 mu_star))/2 > 0."""
    ms = mu_star(a, n, ratio)
    t = 2.0 - a - n
    return ms, (t + sqrt(t * t + 4.0 * ms)) / 2.0


def regime(a: float, n: int, ratio: float = 1.0) -> dict:
    """Classification record: capacity regime, A2 membership, and the
    C^{1,alpha}-regime predicate in both of its equivalent forms."""
    rec = {
        "a": a,
        "n": n,
        "ratio": ratio,
        "capacity_regime": classify_regime(a, n),
        "a2_weight": bool(0.0 < a + n < 2.0 * n),
    }
    ms, als = alpha_star(a, n, ratio)
    rec["mu_star"] = ms
    rec["alpha_star"] = als
    rec["c1_regime"] = bool(als > 1.0)
    rec["c1_regime_equivalent"] = bool(a < ms + 1.0 - n)
    return rec


def gamma1_floor(a: float, n: int, lam: float, Lam: float) -> float:
    """Certified lower bound for the first positive indicial exponent,
    obtained by inserting the mu_1 lower bound at ratio lam/Lam."""
    if a + n <= 0:
        raise ValueError("gamma1_floor requires a + n > 0")
    if not (0 < lam <= Lam):
        raise ValueError("need 0 < lam <= Lam")
    mu1 = mu_star(a, n, lam / Lam)
    return indicial_exponents(a, n, mu1).gamma_plus


# ---------------------------------------------------------------------------
# Sphere eigenbasis
# ---------------------------------------------------------------------------

def circle_weight(A3: np.ndarray, a: float, theta: np.ndarray) -> np.ndarray:
    """Angular weight |A3^{1/2} sigma(theta)|^a on the circle."""
    c, s = np.cos(theta), np.sin(theta)
    quad = A3[0, 0] * c * c + 2.0 * A3[0, 1] * c * s + A3[1, 1] * s * s
    return quad ** (a / 2.0)


def _harmonic_multiplicity(n: int, k: int) -> int:
    if k == 0:
        return 1
    if k == 1:
        return n
    return comb(n + k - 1, k) - comb(n + k - 3, k - 2)


class SphereEigenBasis:
    """Ordered eigenpairs (mu_k, multiplicity, eigenfunctions) of the
    weighted sphere problem, with eigenfunctions sampled on a periodic
    theta grid (n = 2) and orthonormal in the weighted inner product."""

    def __init__(self, n: int, a: float, A3: np.ndarray,
                 mus: list[float], mults: list[int],
                 theta: Optional[np.ndarray],
                 eigfns: Optional[np.ndarray],
                 weight: Optional[np.ndarray]):
        self.n = n
        self.a = a
        self.A3 = A3
        self.mus = list(mus)
        self.mults = list(mults)
        self.theta = theta
        self.eigfns = eigfns  # shape (num_fns, len(theta)) or None
        self.weight = weight

    @property
    def pairs(self) -> list[tuple[float, int]]:
        return list(zip(self.mus, self.mults))

    def flat_mus(self) -> np.ndarray:
        """Eigenvalues repeated with multiplicity, matching eigfns rows."""
        return np.repeat(self.mus, self.mults)

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        """Weighted angular inner product by the periodic rectangle rule."""
        h = 2.0 * pi / len(self.theta)
        return float(np.sum(self.weight * f * g) * h)

    def orthonormality_defect(self) -> float:
        h = 2.0 * pi / len(self.theta)
        gram = (self.eigfns * self.weight) @ self.eigfns.T * h
        return float(np.max(np.abs(gram - np.eye(gram.shape[0]))))

    def sample(self, theta: np.ndarray) -> np.ndarray:
        """Eigenfunction values at arbitrary angles, by periodic linear
        interpolation on the internal grid."""
        theta = np.mod(np.asarray(theta, dtype=float), 2.0 * pi)
        base = np.append(self.theta, 2.0 * pi)
        out = np.empty((self.eigfns.shape[0], len(theta)))
        for i, g in enumerate(self.eigfns):
            gper = np.append(g, g[0])
            out[i] = np.interp(theta, base, gper)
        return out


def _sl_circle_eigs(w_mid: np.ndarray, w_nodes: np.ndarray,
                    num_modes: int) -> tuple[np.ndarray, np.ndarray]:
    """Second-order conservative finite differences for the periodic
    weighted Sturm-Liouville problem -(w g')' = mu w g; returns the
    smallest eigenpairs of the sparse generalized problem."""
    m = len(w_nodes)
    h = 2.0 * pi / m
    lo = np.roll(w_mid, 1)  # w_{i-1/2}
    hi = w_mid               # w_{i+1/2}
    diag = (lo + hi) / h ** 2
    stiff = sp.diags(
        [diag, -hi[:-1] / h ** 2, -hi[:-1] / h ** 2],
        [0, 1, -1], format="lil")
    stiff[0, -1] = -lo[0] / h ** 2
    stiff[-1, 0] = -hi[-1] / h ** 2
    stiff = stiff.tocsc()
    mass = sp.diags(w_nodes).tocsc()
    # fixed start vector keeps the Lanczos iteration bit-deterministic
    v0 = np.full(m, 1.0 / sqrt(m))
    vals, vecs = spla.eigsh(stiff, k=num_modes, M=mass, sigma=-1.0,
                            which="LM", v0=v0)
    order = np.argsort(vals)
    return np.maximum(vals[order], 0.0), vecs[:, order].T


def _cluster(mus: np.ndarray, rtol: float = MULTIPLICITY_RTOL):
    groups: list[list[int]] = []
    for i, m in enumerate(mus):
        if groups and abs(m - mus[groups[-1][0]]) <= rtol * max(1.0, abs(m)):
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def sphere_eigs(n: int, a: float, A3=None, depth: int = 12,
                num_theta: int = 2048,
                richardson: bool = True,
                method: str = "auto") -> SphereEigenBasis:
    """First ``depth`` eigenlevels of the weighted sphere problem.

    Supported cases: n = 2 with any constant SPD 2x2 matrix A3, or any
    n >= 2 with A3 proportional to the identity (classical values
    mu_k = k(k+n-2) with spherical-harmonic multiplicities).  Computed
    eigenvalues (n=2) use conservative finite differences plus one
    Richardson extrapolation step in the angular mesh width.
    """
    if A3 is None:
        A3 = np.eye(n)
    A3 = np.asarray(A3, dtype=float)
    if A3.shape != (n, n):
        raise ValueError(f"A3 must be {n}x{n}")
    if method not in ("auto", "numeric"):
        raise ValueError("method must be 'auto' or 'numeric'")
    isotropic = np.allclose(A3, A3[0, 0] * np.eye(n), rtol=1e-12, atol=1e-14)
    if method == "numeric":
        if n != 2:
            raise ValueError("the numeric path requires n = 2")
        isotropic = False

    if isotropic:
        mus = [float(k * (k + n - 2)) for k in range(depth)]
        mults = [_harmonic_multiplicity(n, k) for k in range(depth)]
        if n == 2:
            theta = np.linspace(0.0, 2.0 * pi, num_theta, endpoint=False)
            w = np.full(num_theta, A3[0, 0] ** (a / 2.0))
            fns = [np.full(num_theta, 1.0 / sqrt(2.0 * pi * w[0]))]
            for k in range(1, depth):
                fns.append(np.cos(k * theta) / sqrt(pi * w[0]))
                fns.append(np.sin(k * theta) / sqrt(pi * w[0]))
            return SphereEigenBasis(n, a, A3, mus, mults, theta,
                                    np.array(fns), w)
        return SphereEigenBasis(n, a, A3, mus, mults, None, None, None)

    if n != 2:
        raise ValueError(
            "anisotropic A3 is supported only in codimension n = 2")

    num_vecs = 2 * depth + 2
    theta = np.linspace(0.0, 2.0 * pi, num_theta, endpoint=False)
    w_nodes = circle_weight(A3, a, theta)
    w_mid = circle_weight(A3, a, theta + pi / num_theta)
    mu_h, vecs = _sl_circle_eigs(w_mid, w_nodes, num_vecs)
    if richardson:
        theta2 = np.linspace(0.0, 2.0 * pi, 2 * num_theta, endpoint=False)
        mu_h2, _ = _sl_circle_eigs(
            circle_weight(A3, a, theta2 + pi / (2 * num_theta)),
            circle_weight(A3, a, theta2), num_vecs)
        mu = (4.0 * mu_h2 - mu_h) / 3.0
    else:
        mu = mu_h
    mu = np.maximum(mu, 0.0)
    mu[0] = 0.0

    # weighted Gram-Schmidt (quadrature inner product) inside clusters
    h = 2.0 * pi / num_theta
    fns = []
    for g in vecs:
        fns.append(np.asarray(g, dtype=float))
    for i in range(len(fns)):
        for j in range(i):
            fns[i] = fns[i] - fns[j] * (
                np.sum(w_nodes * fns[i] * fns[j]) * h)
        nrm = sqrt(np.sum(w_nodes * fns[i] ** 2) * h)
        fns[i] = fns[i] / nrm
        if fns[i][np.argmax(np.abs(fns[i]))] < 0:
            fns[i] = -fns[i]

    groups = _cluster(mu)
    mus, mults = [], []
    for grp in groups[:depth]:
        mus.append(float(np.mean(mu[grp])))
        mults.append(len(grp))
    keep = sum(mults)
    return SphereEigenBasis(n, a, A3, mus, mults, theta,
                            np.array(fns[:keep]), w_nodes)
