"""Outer search loops: bisection on the sampling bound and alternating gain design."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .consistency import ConsistencySet
from .lmi import (AnalysisCertificate, DesignCertificate, assemble_analysis,
                  assemble_design, assemble_model_based, _gain_matrix)
from .solver import DEFAULT_SOLVER, FeasibilityStatus, solve_feasibility


class NoCertificateError(RuntimeError):
    """No stability certificate exists in the searched range."""


@dataclass(frozen=True)
class BisectionConfig:
    h_min: float = 0.01
    h_max: float = 3.0
    abs_tol: float = 0.005
    max_iters: int = 60
    prescan_points: int = 8

    def __post_init__(self):
        if not 0 < self.h_min < self.h_max:
            raise ValueError("need 0 < h_min < h_max")
        if self.abs_tol <= 0:
            raise ValueError("abs_tol must be positive")
        if self.prescan_points < 2:
            raise ValueError("need at least two prescan points")


@dataclass(frozen=True)
class IterationSchedule:
    h_growth_factor: float = 1.25
    max_outer_iters: int = 40
    stall_limit: int = 3
    init_backoff: float = 0.9  # start below the certified bound of the initial gain

    def __post_init__(self):
        if self.h_growth_factor <= 1:
            raise ValueError("h_growth_factor must exceed 1")
        if not 0 < self.init_backoff <= 1:
            raise ValueError("init_backoff must lie in (0, 1]")


@dataclass
class SearchTrace:
    evaluations: list = field(default_factory=list)  # (h, status string)
    nonmonotone: bool = False

    def record(self, h: float, status) -> None:
        self.evaluations.append((float(h), str(status)))


def msi_bisection(feasibility_fn, cfg: BisectionConfig | None = None):
    """Largest feasible h in [h_min, h_max], located to within abs_tol.

    A coarse prescan runs first and anchors the bisection at the largest feasible
    prescan point, so non-monotone feasibility is observed (and recorded in the
    trace) instead of silently assumed away. The returned h is always one that
    feasibility_fn certified directly.
    """
    cfg = cfg or BisectionConfig()
    trace = SearchTrace()

    points = np.linspace(cfg.h_min, cfg.h_max, cfg.prescan_points)
    feas = []
    for h in points:
        ok = bool(feasibility_fn(h))
        feas.append(ok)
        trace.record(h, "feasible" if ok else "infeasible")
    if not any(feas):
        raise NoCertificateError(
            f"no certificate >= h_min: all {cfg.prescan_points} prescan points "
            f"in [{cfg.h_min}, {cfg.h_max}] are infeasible"
        )
    idx_best = max(i for i, ok in enumerate(feas) if ok)
    if not feas[0] or not all(feas[: idx_best + 1]):
        trace.nonmonotone = True

    lo = points[idx_best]
    if idx_best == len(points) - 1:
        return float(lo), trace
    hi = points[idx_best + 1]

    iters = 0
    while hi - lo > cfg.abs_tol and iters < cfg.max_iters:
        mid = 0.5 * (lo + hi)
        ok = bool(feasibility_fn(mid))
        trace.record(mid, "feasible" if ok else "infeasible")
        if ok:
            lo = mid
        else:
            hi = mid
        iters += 1
    return float(lo), trace


def _balanced_handoff(P1: np.ndarray, R: np.ndarray):
    """Scale the (homogeneous) analysis witness so inv(P1) and R are comparable.

    Returns (Q1, R_fixed) for the design step; the joint scaling keeps the
    alternation consistent with the duality map Q1 = P1^{-1} while avoiding
    wildly mismatched block magnitudes.
    """
    c = np.sqrt(np.linalg.norm(np.linalg.inv(P1), 2) / np.linalg.norm(R, 2))
    Q1 = np.linalg.inv(c * P1)
    Q1 = 0.5 * (Q1 + Q1.T)
    return Q1, c * R


def analyze_msi(plant_or_set, gain, cfg: BisectionConfig | None = None,
                margin: float | None = None,
                solver: str = DEFAULT_SOLVER) -> AnalysisCertificate:
    """Bisection over the analysis LMIs; returns the certificate at the found bound.

    Accepts a known plant (model-based conditions) or a dualized consistency set
    (robust data-driven conditions). The witness is extracted from a fresh solve
    at the returned h.
    """
    cfg = cfg or BisectionConfig()
    data_driven = isinstance(plant_or_set, ConsistencySet)
    if data_driven and plant_or_set.Pc_dual is None:
        raise ValueError("consistency set must be dualized before analysis")

    def assemble(h):
        if data_driven:
            return assemble_analysis(plant_or_set, gain, h)
        return assemble_model_based(plant_or_set, gain, h)

    def feasibility(h):
        return solve_feasibility(assemble(h), margin=margin, solver=solver)

    h_star, trace = msi_bisection(feasibility, cfg)
    final = solve_feasibility(assemble(h_star), margin=margin, solver=solver)
    if final.status is not FeasibilityStatus.FEASIBLE:
        raise NoCertificateError(
            f"re-verification at h={h_star} returned {final.status.value}"
        )
    vals = final.values
    return AnalysisCertificate(
        h=h_star,
        gain=_gain_matrix(gain),
        P1=vals["P1"], P2=vals["P2"], P3=vals["P3"], R=vals["R"],
        lam1=vals.get("lam1"), lam2=vals.get("lam2"),
        margin=final.achieved_margin,
        mode="data-driven" if data_driven else "model-based",
        trace=trace.evaluations,
        meta={
            "nonmonotone": trace.nonmonotone,
            "config": asdict(cfg),
            "solver": solver,
            "requested_margin": margin,
        },
    )


def design_iterate(cset: ConsistencySet, initial_gain,
                   cfg: BisectionConfig | None = None,
                   sched: IterationSchedule | None = None,
                   margin: float | None = None,
                   solver: str = DEFAULT_SOLVER) -> DesignCertificate:
    """Alternating analysis/design loop growing the certified bound while re-optimizing K.

    Each round fixes the current gain and solves the analysis LMIs at the current
    h, hands off Q1 = P1^{-1} (R kept) to the design LMIs at h' = h * growth, and
    adopts the returned gain on success. On failure the growth factor shrinks
    toward 1; the loop stops after max_outer_iters rounds or stall_limit
    consecutive failures. The best design-certified (K, h) is returned with its
    full witness, after a fresh analysis re-verification at that pair.
    """
    cfg = cfg or BisectionConfig()
    sched = sched or IterationSchedule()
    if cset.Pc_dual is None:
        raise ValueError("consistency set must be dualized before design")

    init_cert = analyze_msi(cset, initial_gain, cfg, margin=margin, solver=solver)
    h0 = init_cert.h
    K = _gain_matrix(initial_gain)
    h = h0 * sched.init_backoff

    trace = [("init", h0, "feasible")]
    best = None  # (h, design values dict)
    growth = sched.h_growth_factor
    fails = 0

    for it in range(sched.max_outer_iters):
        an = solve_feasibility(assemble_analysis(cset, K, h), margin=margin, solver=solver)
        if an.status is not FeasibilityStatus.FEASIBLE:
            trace.append(("analysis", h, an.status.value))
            h *= sched.init_backoff
            fails += 1
            if fails >= sched.stall_limit:
                break
            continue
        Q1, R_fixed = _balanced_handoff(an.values["P1"], an.values["R"])
        h_try = h * growth
        de = solve_feasibility(assemble_design(cset, Q1, R_fixed, h_try),
                               margin=margin, solver=solver)
        trace.append(("design", h_try, de.status.value))
        if de.status is FeasibilityStatus.FEASIBLE:
            K = de.values["K"]
            h = h_try
            fails = 0
            if best is None or h_try > best[0]:
                best = (h_try, {**de.values, "Q1": Q1, "R": R_fixed},
                        de.achieved_margin)
        else:
            growth = 1.0 + (growth - 1.0) / 2.0
            fails += 1
            if fails >= sched.stall_limit:
                break

    if best is None or best[0] < h0:
        # no growth step reached the initial certified bound; fall back to a
        # single design solve at h0 so the result never regresses below it
        an = solve_feasibility(assemble_analysis(cset, initial_gain, h0),
                               margin=margin, solver=solver)
        if an.status is FeasibilityStatus.FEASIBLE:
            Q1, R_fixed = _balanced_handoff(an.values["P1"], an.values["R"])
            de = solve_feasibility(assemble_design(cset, Q1, R_fixed, h0),
                                   margin=margin, solver=solver)
            trace.append(("design", h0, de.status.value))
            if de.status is FeasibilityStatus.FEASIBLE:
                best = (h0, {**de.values, "Q1": Q1, "R": R_fixed},
                        de.achieved_margin)
        if best is None:
            raise NoCertificateError(
                "design LMIs infeasible at the initialization bound; "
                f"trace: {trace[-sched.stall_limit:]}"
            )

    h_best, vals, de_margin = best
    K_best = vals["K"]
    verify = solve_feasibility(assemble_analysis(cset, K_best, h_best),
                               margin=margin, solver=solver)
    trace.append(("verify", h_best, verify.status.value))

    return DesignCertificate(
        h=h_best,
        K=K_best,
        Q1=vals["Q1"],
        Q2=vals["Q2"],
        Q3=vals["Q3"],
        R=vals["R"],
        lam1=vals["lam1"],
        lam2=vals["lam2"],
        margin=de_margin,
        trace=trace,
        meta={
            "initial_h": h0,
            "initial_gain": _gain_matrix(initial_gain),
            "schedule": asdict(sched),
            "config": asdict(cfg),
            "solver": solver,
            "analysis_verified": verify.status is FeasibilityStatus.FEASIBLE,
        },
    )
