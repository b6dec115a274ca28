"""Named experiment registry and report generation.

Every experiment is a named entry point with a default parameter block,
a plain-language statement of what it measures, and a runner that
returns per-check records ``{name, measured, expected, tolerance,
pass}``.  Reports are canonical JSON (sorted keys, fixed float
formatting) so that two runs with the same configuration and seed are
bit-identical; wall-clock times go to a separate timing file.  Sweeps
run the Cartesian product of ranged parameters on a thread pool capped
by the ``DEGENLAB_THREADS`` environment variable.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dataclass_field
from itertools import product
from math import pi, sqrt
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import extension as ext
from . import inequalities as ineq
from . import regularity as rg
from . import solver as sv
from . import spectral as spec
from .expressions import compile_expression
from .geometry import (CoefficientField, Perforation, PolarGrid, ProblemDims,
                       classify_regime)

SWEEP_CAP = 512


class ConfigError(ValueError):
    """Raised for invalid experiment configurations."""


def max_threads() -> int:
    """Thread-pool width, capped by DEGENLAB_THREADS."""
    env = os.environ.get("DEGENLAB_THREADS", "").strip()
    if env:
        try:
            cap = int(env)
        except ValueError as exc:
            raise ConfigError(f"DEGENLAB_THREADS={env!r} is not an integer") \
                from exc
        if cap < 1:
            raise ConfigError("DEGENLAB_THREADS must be >= 1")
        return cap
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# Canonical JSON
# ---------------------------------------------------------------------------

def _sanitize(obj):
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    return obj


def canonical_json(obj) -> str:
    """Deterministic JSON rendering: sorted keys, sanitized numerics."""
    return json.dumps(_sanitize(obj), sort_keys=True, indent=2) + "\n"


def check(name: str, measured, expected, tolerance, passed) -> dict:
    return {"name": name, "measured": _sanitize(measured),
            "expected": _sanitize(expected),
            "tolerance": _sanitize(tolerance), "pass": bool(passed)}


def abs_check(name, measured, expected, tolerance) -> dict:
    ok = np.isfinite(measured) and abs(measured - expected) <= tolerance
    return check(name, float(measured), float(expected), float(tolerance),
                 ok)


def bound_check(name, measured, bound, upper=True) -> dict:
    ok = np.isfinite(measured) and (measured <= bound if upper
                                    else measured >= bound)
    return check(name, float(measured),
                 ("<= " if upper else ">= ") + repr(float(bound)), 0.0, ok)


# ---------------------------------------------------------------------------
# Problem construction from plain configs
# ---------------------------------------------------------------------------

def _as_callable(value, variables: list) -> Optional[Callable]:
    """Expression string or number -> vectorized callable (or None)."""
    if value is None:
        return None
    if isinstance(value, (int, float)):
        const = float(value)
        return lambda *coords: const * np.ones(
            np.broadcast_shapes(*(np.shape(c) for c in coords))
            if coords else ())
    if isinstance(value, str):
        return compile_expression(value, variables)
    raise ConfigError(f"expected a number or expression string, got "
                      f"{value!r}")


def problem_from_config(cfg: dict) -> tuple[sv.ProblemSpec, dict]:
    """Build a ProblemSpec plus discretization settings from a plain
    dictionary (the `solve`/`analyze` configuration block)."""
    known = {"a", "n", "d", "radius", "epsilon", "thin_bc", "thin_data",
             "outer_bc", "f", "x_boxes", "axisymmetric", "A3",
             "num_r", "num_theta", "num_x", "grading", "tol"}
    unknown = set(cfg) - known
    if unknown:
        raise ConfigError(f"unknown problem keys: {sorted(unknown)}")
    for key in ("a", "n"):
        if key not in cfg:
            raise ConfigError(f"problem block needs {key!r}")
    n = int(cfg["n"])
    d = int(cfg.get("d", n))
    a = float(cfg["a"])
    dims = ProblemDims(d, n, a)
    axisym = bool(cfg.get("axisymmetric", d != n or n != 2))
    nx = d - n
    x_vars = [f"x{i + 1}" for i in range(nx)]
    outer_vars = x_vars + (["r"] if axisym else ["r", "theta"])

    coef = None
    if cfg.get("A3") is not None:
        A3 = np.asarray(cfg["A3"], dtype=float)
        mat = np.eye(d)
        mat[nx:, nx:] = A3
        coef = CoefficientField.constant(mat, d, n)

    x_boxes = [tuple(map(float, b)) for b in cfg.get("x_boxes", [])]
    if nx > 0 and not x_boxes:
        x_boxes = [(-1.0, 1.0)] * nx

    pspec = sv.ProblemSpec(
        dims,
        radius=float(cfg.get("radius", 1.0)),
        A=coef,
        f=_as_callable(cfg.get("f"), outer_vars),
        perforation=Perforation(epsilon=float(cfg.get("epsilon", 0.0))),
        thin_bc=str(cfg.get("thin_bc", sv.THIN_ACROSS)),
        thin_data=_as_callable(cfg.get("thin_data"), x_vars),
        outer_bc=_as_callable(cfg.get("outer_bc"), outer_vars),
        x_boxes=x_boxes,
        axisymmetric=axisym,
    )
    disc = {"num_r": int(cfg.get("num_r", 64)),
            "num_theta": (None if axisym
                          else int(cfg.get("num_theta", 96))),
            "num_x": int(cfg.get("num_x", 32)) if nx else 0,
            "grading": float(cfg.get("grading", 2.0)),
            "tol": float(cfg.get("tol", sv.DEFAULT_TOL))}
    return pspec, disc


def _solve_from_config(cfg: dict) -> tuple[sv.DiscreteField, sv.ProblemSpec]:
    pspec, disc = problem_from_config(cfg)
    fld = sv.solve_problem(pspec, disc["num_r"], num_theta=disc["num_theta"],
                           num_x=disc["num_x"], grading=disc["grading"],
                           tol=disc["tol"])
    return fld, pspec


def _field_table(fld: sv.DiscreteField) -> tuple[list, list]:
    grid = fld.grid
    axes = list(grid.x_axes) + [grid.r_nodes]
    names = [f"x{i + 1}" for i in range(len(grid.x_axes))] + ["r"]
    if grid.theta_nodes is not None:
        axes.append(grid.theta_nodes)
        names.append("theta")
    mesh = np.meshgrid(*axes, indexing="ij")
    header = names + ["u"]
    cols = [m.ravel() for m in mesh] + [fld.values.ravel()]
    rows = list(zip(*[c.tolist() for c in cols]))
    return header, rows


# ---------------------------------------------------------------------------
# Experiment runners.  Each returns {"checks": [...], "results": {...},
# "tables": {name: (header, rows)}}.
# ---------------------------------------------------------------------------

def _run_exponents(p: dict) -> dict:
    a, n, ratio = float(p["a"]), int(p["n"]), float(p["ratio"])
    rec = spec.regime(a, n, ratio)
    depth = int(p["depth"])
    rows = []
    for k in range(depth):
        mu = float(k * (k + n - 2))
        ind = spec.indicial_exponents(a, n, mu)
        rows.append((k, mu, ind.gamma_plus, ind.gamma_minus))
    checks = [
        bound_check("alpha_star_positive", rec["alpha_star"], 0.0,
                    upper=False),
        check("c1_predicate_equivalent",
              rec["c1_regime"], rec["c1_regime_equivalent"], 0,
              rec["c1_regime"] == rec["c1_regime_equivalent"]),
    ]
    return {"checks": checks, "results": rec,
            "tables": {"indicial": (["k", "mu", "gamma_plus", "gamma_minus"],
                                    rows)}}


def _run_sphere(p: dict) -> dict:
    n, a = int(p["n"]), float(p["a"])
    A3 = None if p["A3"] is None else np.asarray(p["A3"], dtype=float)
    basis = spec.sphere_eigs(n, a, A3=A3, depth=int(p["depth"]),
                             num_theta=int(p["num_theta"]),
                             method=str(p["method"]))
    checks = []
    results = {"mus": list(basis.mus), "multiplicities": list(basis.mults)}
    if basis.eigfns is not None:
        defect = basis.orthonormality_defect()
        results["orthonormality_defect"] = defect
        checks.append(bound_check("orthonormal", defect, 1e-8))
    if A3 is not None:
        evs = np.linalg.eigvalsh(A3)
        ratio = float(evs[0] / evs[-1])
        mu1 = basis.mus[1] if len(basis.mus) > 1 else np.inf
        floor = spec.mu_star(a, n, ratio)
        results["mu1"] = mu1
        results["mu_star_floor"] = floor
        checks.append(bound_check("mu1_above_floor", mu1,
                                  floor - 1e-8, upper=False))
    rows = list(zip(range(len(basis.mus)), basis.mus, basis.mults))
    return {"checks": checks, "results": results,
            "tables": {"spectrum": (["k", "mu", "multiplicity"], rows)}}


def _manufactured_case(p: dict):
    """(spec, exact, grad_exact, resolutions, grading) per family."""
    family = p["family"]
    a, n = float(p["a"]), int(p["n"])
    t = a + n
    if family == "dirichlet_power":
        s0 = 2.0 - t
        dims = ProblemDims(n, n, a)
        pspec = sv.ProblemSpec(dims, radius=1.0, thin_bc=sv.THIN_DIRICHLET,
                               thin_data=lambda: 0.0,
                               outer_bc=lambda r: r ** s0,
                               axisymmetric=True)
        exact = lambda r: r ** s0
        grad = [lambda r: s0 * r ** (s0 - 1.0)]
        res = [(nr, None, 0) for nr in p["resolutions"]]
        return pspec, exact, grad, res, float(p["grading"])
    if family == "conormal_mode":
        g = spec.indicial_exponents(a, n, 1.0).gamma_plus
        dims = ProblemDims(2, 2, a)
        pspec = sv.ProblemSpec(dims, radius=1.0, thin_bc=sv.THIN_ACROSS,
                               outer_bc=lambda r, th: r ** g * np.cos(th))
        exact = lambda r, th: r ** g * np.cos(th)
        grad = [lambda r, th: g * r ** (g - 1.0) * np.cos(th),
                lambda r, th: -r ** (g - 1.0) * np.sin(th)]
        res = [tuple(nr) + (0,) if len(nr) == 2 else tuple(nr)
               for nr in p["resolutions"]]
        return pspec, exact, grad, res, float(p["grading"])
    if family == "perforated_quadratic":
        eps = float(p["epsilon"])
        s0 = 2.0 - t
        c = 2.0 / s0 * eps ** t
        dims = ProblemDims(n + 1, n, a)
        exact = lambda x, r: t * x ** 2 - r ** 2 + c * r ** s0
        grad = [lambda x, r: 2.0 * t * x,
                lambda x, r: -2.0 * r + c * s0 * r ** (s0 - 1.0)]
        pspec = sv.ProblemSpec(dims, radius=1.0,
                               perforation=Perforation(epsilon=eps),
                               thin_bc=sv.THIN_ACROSS, outer_bc=exact,
                               x_boxes=[(-1.0, 1.0)], axisymmetric=True)
        res = [(nr, None, nr) for nr in p["resolutions"]]
        return pspec, exact, grad, res, float(p["grading"])
    raise ConfigError(f"unknown manufactured family {family!r}")


def _run_manufactured(p: dict) -> dict:
    pspec, exact, grad, res, grading = _manufactured_case(p)
    rec = sv.manufactured_residual(exact, grad, pspec, res, grading=grading)
    errs = rec["energy_errors"]
    orders = rec["observed_orders"]
    # a solution lying in the discrete space gives machine-size errors
    # with meaningless log-ratios; count that as (better than) order 1
    exact_repro = max(errs) <= 1e-10
    min_order = min(orders) if orders and not exact_repro else 1.0
    checks = [check("energy_order_at_least_1",
                    float(min_order) if not exact_repro else "exact",
                    ">= 1", 0.1,
                    exact_repro or min_order >= 1.0 - float(p["order_slack"]))]
    rows = list(zip([r[0] for r in res], rec["dofs"], errs, rec["max_errors"]))
    return {"checks": checks, "results": rec,
            "tables": {"convergence":
                       (["num_r", "dofs", "energy_error", "max_error"],
                        rows)}}


def _run_modes(p: dict) -> dict:
    a, n = float(p["a"]), int(p["n"])
    eps = float(p["epsilon"])
    dims = ProblemDims(2, 2, a)
    basis = spec.sphere_eigs(2, a, depth=6)
    pspec = sv.ProblemSpec(dims, radius=1.0,
                           perforation=Perforation(epsilon=eps),
                           thin_bc=sv.THIN_ACROSS,
                           outer_bc=lambda r, th: np.cos(th)
                           * np.ones_like(r))
    fld = sv.solve_problem(pspec, num_r=int(p["num_r"]),
                           num_theta=int(p["num_theta"]),
                           grading=float(p["grading"]))
    md = rg.mode_fit(fld, basis, num_levels=3,
                     epsilon=eps if eps > 0 else None)
    f1 = md.fit_for_level(1)
    results = {"c_plus": f1.c_plus, "c_minus": f1.c_minus,
               "gamma_plus": f1.gamma_plus, "gamma_minus": f1.gamma_minus,
               "reconstruction_error": md.reconstruction_error}
    checks = []
    if eps == 0.0:
        ratio = abs(f1.c_minus / f1.c_plus)
        results["c_ratio"] = ratio
        checks.append(bound_check("entire_minus_branch_absent", ratio,
                                  float(p["ratio_tol"])))
    else:
        cp, cm = rg.annular_mode_oracle(a, n, 1.0, eps, 1.0)
        # fitted coefficients are relative to the weighted-orthonormal
        # angular basis; rescale by the projection of the raw trace
        proj = basis.inner(np.cos(basis.theta), basis.eigfns[1])
        results["oracle_c_plus"] = cp
        results["oracle_c_minus"] = cm
        results["projection"] = proj
        err = max(abs(f1.c_plus / proj - cp) / abs(cp),
                  abs(f1.c_minus / proj - cm) / abs(cm))
        results["oracle_relative_error"] = err
        checks.append(bound_check("matches_two_point_oracle", err,
                                  float(p["oracle_tol"])))
    rows = [(f.mode, f.mu, f.gamma_plus, f.gamma_minus, f.c_plus, f.c_minus)
            for f in md.fits]
    return {"checks": checks, "results": results,
            "tables": {"modes": (["mode", "mu", "gamma_plus", "gamma_minus",
                                  "c_plus", "c_minus"], rows)}}


def _run_holder(p: dict) -> dict:
    a, n = float(p["a"]), int(p["n"])
    t = a + n
    s0 = 2.0 - t
    dims = ProblemDims(n, n, a)
    pspec = sv.ProblemSpec(dims, radius=1.0, thin_bc=sv.THIN_DIRICHLET,
                           thin_data=lambda: 0.0,
                           outer_bc=lambda r: r ** s0, axisymmetric=True)
    fld = sv.solve_problem(pspec, num_r=int(p["num_r"]),
                           grading=float(p["grading"]))
    prof = rg.holder_exponent(fld, center=(), order=0)
    expected = min(s0, 1.0)
    checks = [abs_check("alpha_hat", prof.alpha_hat, expected,
                        float(p["rel_tol"]) * expected)]
    rows = list(zip(prof.radii.tolist(), prof.osc.tolist()))
    return {"checks": checks,
            "results": {"alpha_hat": prof.alpha_hat, "expected": expected,
                        "fit_residual": prof.fit_residual,
                        "resolution_limited": prof.resolution_limited},
            "tables": {"oscillation": (["radius", "oscillation"], rows)}}


def _run_harnack(p: dict) -> dict:
    a, n, d = float(p["a"]), int(p["n"]), int(p["d"])
    slope = float(p["slope"])
    dims = ProblemDims(d, n, a)
    s0 = 2.0 - a - n
    pspec = sv.ProblemSpec(
        dims, radius=1.0, thin_bc=sv.THIN_DIRICHLET,
        thin_data=lambda x: 0.0 * x,
        outer_bc=lambda x, r: r ** s0 * (1.0 + slope * x),
        x_boxes=[(-1.0, 1.0)], axisymmetric=True)
    fld = sv.solve_problem(pspec, num_r=int(p["num_r"]),
                           num_x=int(p["num_x"]), grading=float(p["grading"]))
    prof = rg.holder_exponent(fld, center=(0.0,), order=0)
    hr = rg.harnack_ratio(fld, r_cut=float(p["r_cut"]), center=(0.0,))
    checks = [
        bound_check("solution_exponent", prof.alpha_hat,
                    float(p["exponent_floor"]), upper=False),
        bound_check("conjugate_equation_residual", hr.weak_residual,
                    float(p["residual_tol"])),
        bound_check("ratio_positive", float(hr.w_values.min()), 0.0,
                    upper=False),
    ]
    results = {"alpha_hat": prof.alpha_hat, "b": hr.b,
               "weak_residual": hr.weak_residual,
               "w_min": float(hr.w_values.min()),
               "w_max": float(hr.w_values.max())}
    return {"checks": checks, "results": results, "tables": {}}


def _run_conormal(p: dict) -> dict:
    a, n = float(p["a"]), int(p["n"])
    g = spec.alpha_star(a, n, 1.0)[1]
    dims = ProblemDims(2, 2, a)
    eps_list = sorted((float(e) for e in p["eps_list"]), reverse=True)
    alpha = float(p["alpha"])
    recs = []
    for eps in eps_list:
        pspec = sv.ProblemSpec(dims, radius=1.0,
                               perforation=Perforation(epsilon=eps),
                               thin_bc=sv.THIN_ACROSS,
                               outer_bc=lambda r, t: r ** g * np.cos(t))
        fld = sv.solve_problem(pspec, num_r=int(p["num_r"]),
                               num_theta=int(p["num_theta"]),
                               grading=float(p["grading"]))
        recs.append(rg.conormal_residual(fld, where="hole", alpha=alpha))
    rs = [r["residual"] for r in recs]
    orders = [float(np.log2(rs[i] / rs[i + 1])) for i in range(len(rs) - 1)]
    scaled = [r["residual_over_eps_alpha"] for r in recs]
    checks = [
        bound_check("residual_order_at_least_1", min(orders), 1.0,
                    upper=False),
        check("scaled_residual_bounded", max(scaled),
              "non-increasing along the sweep", 0.0,
              all(scaled[i + 1] <= scaled[i] * 1.05
                  for i in range(len(scaled) - 1))),
    ]
    rows = list(zip(eps_list, rs, scaled))
    return {"checks": checks,
            "results": {"eps": eps_list, "residuals": rs, "orders": orders,
                        "scaled_residuals": scaled, "alpha": alpha,
                        "gamma": g},
            "tables": {"residuals": (["epsilon", "residual",
                                      "residual_over_eps_alpha"], rows)}}


def _run_c2_failure(p: dict) -> dict:
    a, n = float(p["a"]), int(p["n"])
    rows = rg.c2_failure_table(a, n, float(p["beta"]), float(p["alpha"]),
                               [float(e) for e in p["eps_list"]],
                               num_r=int(p["num_r"]), num_x=int(p["num_x"]),
                               grading=float(p["grading"]))
    gaps = [r["relative_gap"] for r in rows]
    factor = rows[-1]["quotient_fd"] / rows[0]["quotient_fd"]
    cf_factor = (rows[-1]["quotient_closed_form"]
                 / rows[0]["quotient_closed_form"])
    checks = [
        bound_check("closed_form_gap", max(gaps), float(p["gap_tol"])),
        bound_check("quotient_growth_factor", factor,
                    float(p["growth_floor"]), upper=False),
    ]
    table = [(r["epsilon"], r["quotient_fd"], r["quotient_closed_form"],
              r["relative_gap"]) for r in rows]
    return {"checks": checks,
            "results": {"rows": rows, "growth_factor": factor,
                        "closed_form_factor": cf_factor},
            "tables": {"quotients": (["epsilon", "quotient_fd",
                                      "quotient_closed_form",
                                      "relative_gap"], table)}}


def _run_hardy(p: dict) -> dict:
    rep = ineq.hardy_check(float(p["delta"]), int(p["n"]), R=float(p["R"]),
                           eps=float(p["epsilon"]), seed=int(p["seed"]),
                           num=int(p["num"]))
    near = ineq.hardy_near_extremal(float(p["delta"]), int(p["n"]),
                                    R=float(p["R"]))
    checks = [
        check("inequality_holds_on_corpus", rep.worst_ratio,
              "<= 1 + tol", rep.tolerance, rep.passed),
        bound_check("near_extremal_ratio", max(near), float(p["near_floor"]),
                    upper=False),
    ]
    return {"checks": checks,
            "results": {"worst_ratio": rep.worst_ratio, "ratios": rep.ratios,
                        "near_extremal": near},
            "tables": {"ratios": (["ratio"], [(r,) for r in rep.ratios])}}


def _run_poincare(p: dict) -> dict:
    checks, results = [], {}
    for variant in p["variants"]:
        rep = ineq.poincare_check(float(p["a"]), int(p["n"]),
                                  R=float(p["R"]), eps=float(p["epsilon"]),
                                  variant=variant, seed=int(p["seed"]),
                                  num=int(p["num"]))
        results[variant] = {"worst_ratio": rep.worst_ratio}
        checks.append(check(f"{variant}_holds", rep.worst_ratio,
                            "<= 1 + tol", rep.tolerance, rep.passed))
    return {"checks": checks, "results": results, "tables": {}}


def _run_sobolev(p: dict) -> dict:
    rec = ineq.sobolev_check(float(p["a"]), int(p["n"]), int(p["d"]),
                             float(p["q"]),
                             eps_list=[float(e) for e in p["eps_list"]],
                             seed=int(p["seed"]), num=int(p["num"]))
    checks = [
        bound_check("fitted_constant_positive",
                    min(rec["fitted_constants"]), 0.0, upper=False),
        check("stable_along_hole_sweep",
              max(rec["fitted_constants"]) / min(rec["fitted_constants"]),
              "<= 2", 0.0, rec["stable_within_factor_2"]),
    ]
    rows = list(zip(rec["eps"], rec["fitted_constants"]))
    return {"checks": checks, "results": rec,
            "tables": {"constants": (["epsilon", "fitted_constant"], rows)}}


def _run_trace_scaling(p: dict) -> dict:
    rec = ineq.trace_scaling(float(p["a"]), int(p["n"]), R=float(p["R"]),
                             eps_list=[float(e) for e in p["eps_list"]],
                             num_r=int(p["num_r"]))
    checks = []
    if "slope" in rec:
        checks.append(abs_check("scaling_slope", rec["slope"],
                                rec["expected_slope"],
                                float(p["slope_tol"])))
        rows = list(zip(rec["eps"], rec["constants"]))
    else:
        ratio = max(rec["profile_ratios"]) / min(rec["profile_ratios"])
        checks.append(bound_check("log_branch_bounded", ratio, 10.0))
        rows = list(zip(rec["eps"], rec["constants"],
                        rec["profile_ratios"]))
    header = ["epsilon", "constant"] + (
        ["constant_over_eps_log"] if "profile_ratios" in rec else [])
    return {"checks": checks, "results": rec,
            "tables": {"scaling": (header, rows)}}


def _run_capacity(p: dict) -> dict:
    est = ineq.capacity_estimate(float(p["a"]), int(p["n"]), int(p["d"]))
    checks = []
    results = {"regime": est.regime, "energies": est.energies,
               "parameters": est.parameters, "verdict": est.verdict}
    if est.regime == "mid-range":
        results["scaling_exponent"] = est.scaling_exponent
        expected = float(p["d"]) + float(p["a"]) - 2.0
        checks.append(abs_check("dilation_exponent", est.scaling_exponent,
                                expected, float(p["exponent_rel_tol"])
                                * abs(expected)))
        checks.append(bound_check("capacity_positive", min(est.energies),
                                  0.0, upper=False))
    elif est.regime == "superdegenerate":
        checks.append(check("plateau_energy_vanishes", est.energies[-1],
                            "decreasing to 0", 0.0, est.verdict == "zero"))
    else:
        checks.append(check("collar_energy_diverges", est.energies[-1],
                            "increasing", 0.0, est.verdict == "infinite"))
    rows = list(zip(est.parameters, est.energies))
    return {"checks": checks, "results": results,
            "tables": {"energies": (["parameter", "energy"], rows)}}


def _run_muckenhoupt(p: dict) -> dict:
    rec = ineq.muckenhoupt_constant(float(p["a"]), int(p["n"]))
    expected_a2 = 0.0 < float(p["a"]) + int(p["n"]) < 2.0 * int(p["n"])
    checks = [check("a2_classification", rec["is_a2"], expected_a2, 0,
                    rec["is_a2"] == expected_a2)]
    if expected_a2:
        closed = (int(p["n"]) ** 2
                  / ((float(p["a"]) + int(p["n"]))
                     * (int(p["n"]) - float(p["a"]))))
        checks.append(abs_check("a2_constant", rec["constant"], closed,
                                1e-10 * abs(closed)))
    return {"checks": checks, "results": rec, "tables": {}}


def _extension_data(cfg: ext.ExtensionConfig, kind) -> np.ndarray:
    if isinstance(kind, (list, tuple, np.ndarray)):
        vals = np.asarray(kind, dtype=float)
        if vals.shape != tuple([cfg.num_points] * cfg.base_dim):
            raise ConfigError("data values do not match the base grid "
                              f"shape {[cfg.num_points] * cfg.base_dim}")
        return vals
    mesh = np.meshgrid(*cfg.axes(), indexing="ij")
    r2 = sum(m ** 2 for m in mesh)
    if kind == "gaussian":
        return np.exp(-r2)
    if kind == "bump":
        w = (cfg.half_width / 2.0) ** 2
        with np.errstate(divide="ignore", over="ignore"):
            vals = np.where(r2 < w, np.exp(-1.0 / np.maximum(1.0 - r2 / w,
                                                             1e-300)), 0.0)
        return vals * np.e
    raise ConfigError(f"unknown data kind {kind!r}")


def _run_extension(p: dict) -> dict:
    cfg = ext.ExtensionConfig(int(p["d"]), int(p["n"]), float(p["s"]),
                              half_width=float(p["half_width"]),
                              num_points=int(p["num_points"]))
    u = _extension_data(cfg, p["data"])
    masses = [ext.kernel_mass(cfg, h) for h in p["mass_heights"]]
    rec = ext.dtn_check(cfg, u)
    checks = [
        bound_check("kernel_mass_defect",
                    max(abs(m - 1.0) for m in masses), float(p["mass_tol"])),
        bound_check("dtn_sup_defect", rec["sup_defect"],
                    float(p["dtn_tol"])),
        bound_check("energy_identity_defect", rec["energy_defect"],
                    float(p["energy_tol"])),
    ]
    heights = [float(h) for h in p["slice_heights"]]
    U = ext.extend(cfg, u, heights=heights)
    x = cfg.axes()[0]
    if cfg.base_dim == 1:
        rows = list(zip(x.tolist(),
                        *[U[i].tolist() for i in range(len(heights))]))
    else:
        mid = cfg.num_points // 2
        rows = list(zip(x.tolist(),
                        *[U[i][:, mid].tolist() for i in range(len(heights))]))
    header = ["x"] + [f"u_at_r_{h}" for h in heights]
    return {"checks": checks,
            "results": {k: v for k, v in rec.items()},
            "tables": {"slices": (header, rows)}}


def _run_consistency(p: dict) -> dict:
    """Extension field vs the axisymmetric solver with the extension's
    own values as outer Dirichlet data."""
    from scipy.interpolate import RegularGridInterpolator
    cfg = ext.ExtensionConfig(int(p["d"]), int(p["n"]), float(p["s"]),
                              half_width=float(p["half_width"]),
                              num_points=int(p["num_points"]))
    x = cfg.axes()[0]
    u = np.exp(-x ** 2)
    R_top = float(p["radius"])
    dims = ProblemDims(int(p["d"]), int(p["n"]), cfg.a)
    hts = np.linspace(0.02, R_top, 120)
    Utab = ext.extend(cfg, u, heights=hts)
    interp = RegularGridInterpolator((x, hts), Utab.T, bounds_error=False,
                                     fill_value=None)

    def outer(xx, rr):
        shape = np.broadcast_shapes(np.shape(xx), np.shape(rr))
        rr_c = np.clip(rr, hts[0], hts[-1])
        pts = np.stack([np.broadcast_to(xx, shape).ravel(),
                        np.broadcast_to(rr_c, shape).ravel()], axis=-1)
        return interp(pts).reshape(shape)

    pspec = sv.ProblemSpec(dims, radius=R_top, thin_bc=sv.THIN_DIRICHLET,
                           thin_data=lambda xx: np.exp(-xx ** 2),
                           outer_bc=outer,
                           x_boxes=[(-cfg.half_width, cfg.half_width)],
                           axisymmetric=True)
    heights = [float(h) for h in p["heights"]]
    win = float(p["window"])
    errs_per_level = []
    for num_r, num_x in p["resolutions"]:
        fld = sv.solve_problem(pspec, num_r=int(num_r), num_x=int(num_x),
                               grading=float(p["grading"]))
        xs = fld.grid.x_axes[0]
        inner = np.abs(xs) <= win
        errs = []
        for h in heights:
            Uex = np.interp(xs, x, ext.extend(cfg, u, heights=[h])[0])
            usol = sv.tensor_eval(fld, [xs, np.array([h])])[:, 0]
            errs.append(float(np.max(np.abs((usol - Uex)[inner]))))
        errs_per_level.append(errs)
    worst = [max(e) for e in errs_per_level]
    checks = [bound_check("fields_match", worst[-1], float(p["tol"]))]
    if len(worst) > 1:
        checks.append(check("error_decreases_under_refinement", worst,
                            "decreasing", 0.0,
                            all(worst[i + 1] < worst[i]
                                for i in range(len(worst) - 1))))
    rows = [(int(p["resolutions"][i][0]), int(p["resolutions"][i][1]))
            + tuple(errs_per_level[i]) for i in range(len(worst))]
    header = ["num_r", "num_x"] + [f"err_at_r_{h}" for h in heights]
    return {"checks": checks,
            "results": {"errors": errs_per_level, "heights": heights},
            "tables": {"errors": (header, rows)}}


def _run_solve(p: dict) -> dict:
    fld, _ = _solve_from_config(dict(p["problem"]))
    tol = float(p["problem"].get("tol", sv.DEFAULT_TOL))
    checks = [bound_check("converged", fld.residual, 1e4 * tol)]
    results = {"iterations": fld.iterations, "residual": fld.residual,
               "dofs": int(np.prod(fld.grid.shape)),
               "u_min": float(fld.values.min()),
               "u_max": float(fld.values.max())}
    header, rows = _field_table(fld)
    return {"checks": checks, "results": results,
            "tables": {"field": (header, rows)}}


def _run_analyze(p: dict) -> dict:
    fld, pspec = _solve_from_config(dict(p["problem"]))
    checks = [bound_check("converged", fld.residual,
                          1e4 * float(p["problem"].get("tol",
                                                       sv.DEFAULT_TOL)))]
    results = {"iterations": fld.iterations, "residual": fld.residual}
    tables = {}
    nx = len(fld.grid.x_axes)
    center = tuple(0.0 for _ in range(nx))
    prof = rg.holder_exponent(fld, center=center, order=0)
    results["alpha_hat"] = prof.alpha_hat
    results["resolution_limited"] = prof.resolution_limited
    tables["oscillation"] = (["radius", "oscillation"],
                             list(zip(prof.radii.tolist(),
                                      prof.osc.tolist())))
    if fld.grid.theta_nodes is not None:
        basis = spec.sphere_eigs(2, pspec.dims.a,
                                 A3=None, depth=5)
        eps = fld.grid.epsilon
        md = rg.mode_fit(fld, basis, num_levels=3,
                         epsilon=eps if eps > 0 else None)
        results["mode_reconstruction_error"] = md.reconstruction_error
        tables["modes"] = (["mode", "mu", "gamma_plus", "gamma_minus",
                            "c_plus", "c_minus"],
                           [(f.mode, f.mu, f.gamma_plus, f.gamma_minus,
                             f.c_plus, f.c_minus) for f in md.fits])
    if fld.grid.epsilon > 0.0:
        rec = rg.conormal_residual(fld, where="hole")
        results["hole_conormal_residual"] = rec["residual"]
    return {"checks": checks, "results": results, "tables": tables}


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Experiment:
    name: str
    statement: str
    defaults: dict
    runner: Callable[[dict], dict]


REGISTRY: dict[str, Experiment] = {}


def _register(name, statement, defaults, runner):
    REGISTRY[name] = Experiment(name, statement, defaults, runner)


_register(
    "exponents",
    "The regularity threshold exponent alpha*, the eigenvalue floor mu*, "
    "the regime classification, and the indicial exponent ladder.",
    {"a": -2.0, "n": 2, "ratio": 1.0, "depth": 6, "seed": 0},
    _run_exponents)

_register(
    "sphere",
    "Weighted sphere eigenvalues and eigenfunctions; for anisotropic "
    "coefficients the first eigenvalue dominates the mu* floor.",
    {"n": 2, "a": -0.5, "A3": None, "depth": 8, "num_theta": 2048,
     "method": "auto", "seed": 0},
    _run_sphere)

_register(
    "manufactured",
    "Energy-norm convergence against closed-form solutions: the "
    "characteristic Dirichlet power, an indicial angular mode, and the "
    "perforated quadratic family.",
    {"family": "dirichlet_power", "a": -1.5, "n": 2, "epsilon": 0.1,
     "resolutions": [16, 32, 64], "grading": 5.0, "order_slack": 0.1,
     "seed": 0},
    _run_manufactured)

_register(
    "modes",
    "Mode decomposition of entire or annular solutions; the negative "
    "indicial branch vanishes for entire solutions and matches the "
    "two-point annular oracle with a hole.",
    {"a": -0.5, "n": 2, "epsilon": 0.0, "num_r": 192, "num_theta": 256,
     "grading": 3.0, "ratio_tol": 1e-3, "oracle_tol": 1e-3, "seed": 0},
    _run_modes)

_register(
    "holder",
    "Observed Holder exponent of the characteristic Dirichlet solution "
    "at the thin set: oscillation decay fits r^{2-a-n}.",
    {"a": -0.5, "n": 2, "num_r": 256, "grading": 5.0, "rel_tol": 0.05,
     "seed": 0},
    _run_holder)

_register(
    "harnack",
    "Boundary-Harnack behaviour: the ratio of a Dirichlet solution to "
    "the characteristic power is Lipschitz and solves the conjugate "
    "equation weakly.",
    {"a": -3.0, "n": 4, "d": 5, "slope": 0.6, "num_r": 128, "num_x": 64,
     "grading": 3.0, "r_cut": 0.05, "exponent_floor": 0.95,
     "residual_tol": 1e-8, "seed": 0},
    _run_harnack)

_register(
    "conormal",
    "Conormal flux residual at the hole boundary along a shrinking-hole "
    "sweep: decays with order >= 1 in epsilon and stays bounded after "
    "scaling by epsilon^alpha.",
    {"a": -2.0, "n": 2, "eps_list": [0.2, 0.1, 0.05], "alpha": 1.0,
     "num_r": 192, "num_theta": 256, "grading": 2.0, "seed": 0},
    _run_conormal)

_register(
    "c2_failure",
    "Second derivatives are not uniformly controlled: the discrete "
    "second-derivative Holder quotient of the perforated quadratic "
    "family grows as the hole shrinks, matching the closed form.",
    {"a": -2.5, "n": 3, "beta": 0.5, "alpha": 0.5,
     "eps_list": [0.2, 0.0125], "num_r": 384, "num_x": 24, "grading": 2.0,
     "gap_tol": 0.05, "growth_floor": 3.0, "seed": 0},
    _run_c2_failure)

_register(
    "hardy",
    "Weighted Hardy inequality with the explicit constant on a random "
    "corpus, plus a near-extremal family approaching the constant.",
    {"delta": -1.5, "n": 2, "R": 1.0, "epsilon": 0.0, "num": 50,
     "near_floor": 0.9, "seed": 0},
    _run_hardy)

_register(
    "poincare",
    "Weighted Poincare inequalities (zero-trace, away-from-hole, "
    "mean-zero) at their displayed constants on a random corpus.",
    {"a": -0.5, "n": 2, "R": 1.0, "epsilon": 0.0,
     "variants": ["zero-trace", "away-from-hole", "wirtinger"],
     "num": 50, "seed": 0},
    _run_poincare)

_register(
    "sobolev",
    "Weighted Sobolev embedding: the fitted constant is positive and "
    "stable along the shrinking-hole sweep.",
    {"a": -0.5, "n": 2, "d": 3, "q": 3.0, "eps_list": [0.0, 0.1, 0.05],
     "num": 50, "seed": 0},
    _run_sobolev)

_register(
    "trace_scaling",
    "Scaling of the best hole-trace constant in the hole radius: slope "
    "a+n-1 in the mid-range, slope 1 above, log-corrected at a+n = 2.",
    {"a": -0.5, "n": 2, "R": 1.0,
     "eps_list": [0.01, 0.005, 0.0025, 0.00125], "num_r": 600,
     "slope_tol": 0.1, "seed": 0},
    _run_trace_scaling)

_register(
    "capacity",
    "Weighted capacity trichotomy of the thin set: zero, positive-finite "
    "with the dilation exponent d+a-2, or infinite by regime.",
    {"a": -0.5, "n": 2, "d": 2, "exponent_rel_tol": 0.15, "seed": 0},
    _run_capacity)

_register(
    "muckenhoupt",
    "The radial weight is A2 exactly for 0 < a+n < 2n, with the "
    "closed-form product of ball averages.",
    {"a": -0.5, "n": 2, "seed": 0},
    _run_muckenhoupt)

_register(
    "extend",
    "Higher-codimension extension: unit kernel mass, the "
    "Dirichlet-to-Neumann identity with constant d_{a,n}, and the "
    "energy identity.",
    {"d": 4, "n": 2, "s": 0.25, "half_width": 8.0, "num_points": 256,
     "data": "gaussian", "mass_heights": [0.05, 0.1, 0.2],
     "slice_heights": [0.1, 0.5, 1.0], "mass_tol": 1e-6, "dtn_tol": 0.02,
     "energy_tol": 0.02, "seed": 0},
    _run_extension)

_register(
    "consistency",
    "The extension field agrees with the axisymmetric solver when the "
    "extension's own values supply the outer Dirichlet data, within the "
    "combined discretization error.",
    {"d": 3, "n": 2, "s": 0.25, "half_width": 8.0, "num_points": 256,
     "radius": 2.0, "heights": [0.2, 0.5, 1.0], "window": 6.0,
     "resolutions": [[48, 128], [96, 256]], "grading": 2.0, "tol": 5e-3,
     "seed": 0},
    _run_consistency)

_register(
    "solve",
    "Direct solve of a configured weighted problem; emits the field.",
    {"problem": {"a": -0.5, "n": 2, "outer_bc": "r**1.5"}, "seed": 0},
    _run_solve)

_register(
    "analyze",
    "Solve a configured problem and measure regularity quantities: "
    "Holder exponent, mode decomposition, conormal residuals.",
    {"problem": {"a": -0.5, "n": 2, "outer_bc": "r**1.5"}, "seed": 0},
    _run_analyze)


# ---------------------------------------------------------------------------
# Running, sweeping, reporting
# ---------------------------------------------------------------------------

@dataclass
class ExperimentResult:
    report: dict
    tables: dict
    wall_clock: float


def _merge_params(exp: Experiment, overrides: Optional[dict]) -> dict:
    params = dict(exp.defaults)
    overrides = dict(overrides or {})
    unknown = set(overrides) - set(params)
    if unknown:
        raise ConfigError(
            f"unknown parameters for {exp.name!r}: {sorted(unknown)}")
    params.update(overrides)
    for key, val in params.items():
        if key.endswith(("tol", "slack")) or key in ("gap_tol",):
            if isinstance(val, (int, float)) and val <= 0:
                raise ConfigError(f"tolerance {key!r} must be positive")
    return params


def run_experiment(name: str,
                   overrides: Optional[dict] = None) -> ExperimentResult:
    if name not in REGISTRY:
        raise ConfigError(
            f"unknown experiment {name!r}; known: {sorted(REGISTRY)}")
    exp = REGISTRY[name]
    params = _merge_params(exp, overrides)
    t0 = time.perf_counter()
    try:
        out = exp.runner(params)
    except ConfigError:
        raise
    except Exception as exc:
        raise RuntimeError(f"experiment {name!r} failed: {exc}") from exc
    wall = time.perf_counter() - t0
    checks = out["checks"]
    report = {
        "experiment": name,
        "statement": exp.statement,
        "config": _sanitize(params),
        "checks": checks,
        "overall_pass": bool(all(c["pass"] for c in checks)),
        "results": _sanitize(out["results"]),
    }
    return ExperimentResult(report, out.get("tables", {}), wall)


def write_report(result: ExperimentResult, outdir) -> list[str]:
    """Write report.json, one CSV per table, and timing.json; returns
    the artifact file names."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    name = result.report["experiment"]
    files = []
    for tname in sorted(result.tables):
        header, rows = result.tables[tname]
        fname = f"{name}_{tname}.csv"
        with open(outdir / fname, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([repr(float(v)) if isinstance(
                    v, (float, np.floating)) else v for v in row])
        files.append(fname)
    result.report["artifacts"] = files
    report_file = outdir / f"{name}_report.json"
    report_file.write_text(canonical_json(result.report), encoding="utf-8")
    (outdir / f"{name}_timing.json").write_text(
        json.dumps({"experiment": name,
                    "wall_clock_seconds": result.wall_clock}) + "\n",
        encoding="utf-8")
    return files + [report_file.name]


def sweep(name: str, base: Optional[dict], ranges: dict,
          cap: int = SWEEP_CAP) -> tuple[list[ExperimentResult], tuple]:
    """Cartesian product of the ranged parameters; independent runs on a
    thread pool; aggregate rows sorted by parameter tuple."""
    if not ranges:
        raise ConfigError("sweep needs at least one ranged parameter")
    for key, vals in ranges.items():
        if not isinstance(vals, (list, tuple)) or len(vals) == 0:
            raise ConfigError(f"sweep range {key!r} must be a non-empty "
                              "list")
    keys = sorted(ranges)
    points = sorted(product(*[ranges[k] for k in keys]))
    if len(points) > cap:
        raise ConfigError(
            f"sweep size {len(points)} exceeds the cap {cap}")

    def one(pt):
        overrides = dict(base or {})
        overrides.update(dict(zip(keys, pt)))
        return run_experiment(name, overrides)

    with ThreadPoolExecutor(max_workers=max_threads()) as pool:
        results = list(pool.map(one, points))

    header = list(keys) + ["overall_pass"] + ["checks_passed",
                                              "checks_total"]
    rows = []
    for pt, res in zip(points, results):
        checks = res.report["checks"]
        rows.append(list(pt) + [res.report["overall_pass"],
                                sum(c["pass"] for c in checks),
                                len(checks)])
    return results, (header, rows)


# ---------------------------------------------------------------------------
# The acceptance battery
# ---------------------------------------------------------------------------

SUITE = [
    ("exponents", {"a": -2.0, "n": 2}),
    ("exponents", {"a": 0.0, "n": 4}),
    ("sphere", {"n": 2, "a": -0.5, "num_theta": 512}),
    ("sphere", {"n": 2, "a": -0.5, "A3": [[1.0, 0.0], [0.0, 0.5]],
                "num_theta": 512}),
    ("manufactured", {"family": "dirichlet_power", "a": -1.5, "n": 2,
                      "resolutions": [16, 32, 64]}),
    ("manufactured", {"family": "conormal_mode", "a": -1.5, "n": 2,
                      "resolutions": [[8, 12], [16, 24], [32, 48]],
                      "grading": 3.0}),
    ("manufactured", {"family": "perforated_quadratic", "a": -1.5, "n": 2,
                      "epsilon": 0.1, "resolutions": [8, 16, 32],
                      "grading": 2.0}),
    ("modes", {"a": -0.5, "n": 2, "epsilon": 0.0, "num_r": 96,
               "num_theta": 128}),
    ("modes", {"a": -0.5, "n": 2, "epsilon": 0.1, "num_r": 96,
               "num_theta": 128, "grading": 2.0, "oracle_tol": 2e-3}),
    ("holder", {"a": -0.5, "n": 2, "num_r": 128}),
    ("harnack", {"num_r": 64, "num_x": 32}),
    ("conormal", {"eps_list": [0.2, 0.1], "num_r": 96, "num_theta": 128}),
    ("c2_failure", {"eps_list": [0.2, 0.05], "num_r": 192, "num_x": 16,
                    "growth_floor": 1.5}),
    ("hardy", {"delta": -1.5, "n": 2, "num": 20}),
    ("poincare", {"a": -0.5, "n": 2, "num": 20}),
    ("sobolev", {"num": 20}),
    ("trace_scaling", {"a": -0.5, "n": 2, "num_r": 400}),
    ("capacity", {"a": -0.5, "n": 2, "d": 2}),
    ("capacity", {"a": 1.0, "n": 2, "d": 3}),
    ("capacity", {"a": -3.0, "n": 2, "d": 3}),
    ("muckenhoupt", {"a": -0.5, "n": 2}),
    ("extend", {"num_points": 128}),
    ("consistency", {"num_points": 128, "resolutions": [[48, 64]],
                     "tol": 2e-2}),
]


def run_suite(seed: int = 0,
              entries: Optional[list] = None) -> ExperimentResult:
    """The full named battery as one aggregate report."""
    entries = SUITE if entries is None else entries
    t0 = time.perf_counter()
    reports = []
    for name, overrides in entries:
        merged = dict(overrides)
        exp = REGISTRY[name]
        if "seed" in exp.defaults:
            merged.setdefault("seed", seed)
        reports.append(run_experiment(name, merged).report)
    wall = time.perf_counter() - t0
    report = {
        "experiment": "suite",
        "statement": "The full acceptance battery.",
        "config": {"seed": seed, "entries": len(reports)},
        "checks": [check(f"{r['experiment']}[{i}]",
                         sum(c["pass"] for c in r["checks"]),
                         len(r["checks"]), 0, r["overall_pass"])
                   for i, r in enumerate(reports)],
        "overall_pass": bool(all(r["overall_pass"] for r in reports)),
        "results": {"reports": reports},
    }
    rows = [(i, r["experiment"], r["overall_pass"]) for i, r
            in enumerate(reports)]
    return ExperimentResult(report,
                            {"summary": (["index", "experiment", "pass"],
                                         rows)}, wall)
