"""Command-line front end.

Subcommands: simulate | estimate-deriv | build-set | analyze | design |
reproduce-example | verify. Options resolve as: command-line flag, then
MSICERT_<NAME> environment variable, then config file, then default.
Exit codes: 0 success, 2 partial (some sweep rows failed), 1 fatal.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as mio
from .consistency import (build_consistency_set, check_assumption_inertia,
                          check_inertia_sufficient_conditions, dualize,
                          DualizationError, NoiseBound)
from .derivatives import NormPrior, bounds_to_noise_model, estimate_derivatives
from .experiments import (BENCHMARK_NOISE_LEVELS, DEFAULT_ANALYSIS_SEEDS,
                          DEFAULT_DESIGN_SEEDS, REFERENCE_ANALYSIS_MSI,
                          REFERENCE_DESIGN_MSI, plot_sweep, run_analysis_sweep,
                          run_design_sweep)
from .lmi import assemble_analysis, assemble_model_based
from .search import (BisectionConfig, NoCertificateError, analyze_msi,
                     design_iterate)
from .solver import FeasibilityStatus, solve_feasibility
from .system import (FeedbackGain, LtiSystem, SamplingSequence,
                     simulate_sampled_closed_loop)

ENV_PREFIX = "MSICERT_"

MODES = ("simulate", "estimate-deriv", "build-set", "analyze", "design",
         "reproduce-example", "verify")

#: configuration keys each mode requires before any computation runs
REQUIRED_FIELDS = {
    "simulate": ("system", "gain", "gap", "horizon"),
    "estimate-deriv": ("dataset", "a_bar", "b_bar", "gap"),
    "build-set": ("dataset",),
    "analyze": ("gain",),  # plus either a dataset (data-driven) or a system
    "design": ("dataset", "gain"),
    "reproduce-example": (),
    "verify": ("certificate",),
}


@dataclass
class ExperimentConfig:
    """Merged run configuration; validated per mode before any computation."""

    mode: str = ""
    system: dict | None = None      # {"A": [[..]], "B": [[..]], "Bd": [[..]]}
    gain: list | None = None
    dataset: str | None = None
    certificate: str | None = None
    dbar: list = field(default_factory=lambda: list(BENCHMARK_NOISE_LEVELS))
    seed: int = 1
    seeds: list | None = None
    N: int = 100
    gap: float | None = None
    horizon: float | None = None
    x0: list | None = None
    a_bar: float | None = None
    b_bar: float | None = None
    h_max: float = 3.0
    tol: float = 0.005
    margin: float | None = None
    solver: str = "CLARABEL"
    jobs: int = 1
    out: str = "msicert-out"

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        missing = [k for k in REQUIRED_FIELDS[self.mode] if getattr(self, k) in (None, "")]
        if self.mode == "analyze" and self.dataset is None and self.system is None:
            missing.append("dataset|system")
        if missing:
            raise ValueError(f"mode '{self.mode}' requires fields: {', '.join(missing)}")


def _env_default(name, cast, fallback):
    raw = os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))
    if raw is None:
        return fallback
    return cast(raw)


def _merge_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        for k, v in file_cfg.items():
            if not hasattr(cfg, k):
                raise ValueError(f"unknown config key {k!r}")
            setattr(cfg, k, v)
    for name, cast in [("seed", int), ("out", str), ("margin", float),
                       ("h_max", float), ("tol", float), ("jobs", int),
                       ("solver", str)]:
        setattr(cfg, name, _env_default(name, cast, getattr(cfg, name)))
    for name in ("seed", "out", "margin", "h_max", "tol", "jobs", "solver",
                 "dataset", "certificate"):
        v = getattr(args, name.replace("-", "_"), None)
        if v is not None:
            setattr(cfg, name, v)
    cfg.mode = args.command
    cfg.validate()
    return cfg


def _system_from_config(cfg: ExperimentConfig) -> LtiSystem:
    s = cfg.system
    return LtiSystem(A=s["A"], B=s["B"], Bd=s.get("Bd"))


def _bisection_config(cfg: ExperimentConfig, h_max=None) -> BisectionConfig:
    return BisectionConfig(h_min=0.01, h_max=h_max or cfg.h_max, abs_tol=cfg.tol)


def _out(cfg, name) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def cmd_simulate(cfg: ExperimentConfig) -> int:
    sys_ = _system_from_config(cfg)
    gain = FeedbackGain(cfg.gain)
    sampling = SamplingSequence.periodic(cfg.gap, cfg.horizon)
    x0 = np.ones(sys_.n) if cfg.x0 is None else np.asarray(cfg.x0, dtype=float)
    traj = simulate_sampled_closed_loop(sys_, gain, sampling, x0, cfg.horizon)
    path = _out(cfg, "trajectory.json")
    mio.save_trajectory(path, traj)
    print(f"simulated {traj.grid.size} output points; final ||x|| = "
          f"{np.linalg.norm(traj.states[:, -1]):.3e}; wrote {path}")
    return 0


def cmd_estimate_deriv(cfg: ExperimentConfig) -> int:
    data, _ = mio.load_dataset(cfg.dataset)
    prior = NormPrior(cfg.a_bar, cfg.b_bar)
    est = estimate_derivatives(data.X, data.U, prior, cfg.gap)
    noise = bounds_to_noise_model(est.per_sample_bound, N=data.N - 1, n=data.n)
    trimmed = type(data)(
        tau=data.tau[:-1], X=data.X[:, :-1], U=data.U[:, :-1],
        Xdot=est.xdot_est, Bd=np.eye(data.n),
        meta={**data.meta, "derivatives": "forward-difference estimates"},
    )
    path = _out(cfg, "dataset-estimated.json")
    mio.save_dataset(path, trimmed, noise)
    print(f"estimated derivatives for {est.xdot_est.shape[1]} samples; "
          f"max error bound {est.per_sample_bound.max():.3e}; wrote {path}")
    return 0


def cmd_build_set(cfg: ExperimentConfig) -> int:
    data, noise = mio.load_dataset(cfg.dataset)
    cset = build_consistency_set(data, noise)
    report = check_assumption_inertia(cset)
    conds = check_inertia_sufficient_conditions(data, noise)
    print(f"inertia (neg, zero, pos) = {cset.inertia}; assumption passed: {report.passed}")
    print(f"sufficient conditions: Z full row rank={conds.z_full_row_rank}, "
          f"Bd invertible={conds.bd_invertible}, Sd=0: {conds.sd_zero}"
          + (f" ({conds.warning})" if conds.warning else ""))
    if report.passed:
        try:
            cset = dualize(cset)
            print(f"dual multiplier computed (condition number {cset.dual_condition:.2e})")
        except DualizationError as exc:
            print(f"dualization refused: {exc}")
    path = _out(cfg, "consistency-set.json")
    mio.save_consistency_set(path, cset)
    print(f"wrote {path}")
    return 0


def cmd_analyze(cfg: ExperimentConfig) -> int:
    gain = FeedbackGain(cfg.gain)
    bis = _bisection_config(cfg)
    if cfg.dataset:
        data, noise = mio.load_dataset(cfg.dataset)
        cset = dualize(build_consistency_set(data, noise))
        cert = analyze_msi(cset, gain, bis, margin=cfg.margin, solver=cfg.solver)
        context = {"dataset": mio.dataset_payload(data, noise)}
    else:
        sys_ = _system_from_config(cfg)
        cert = analyze_msi(sys_, gain, bis, margin=cfg.margin, solver=cfg.solver)
        context = {"model": {"A": sys_.A.tolist(), "B": sys_.B.tolist(),
                             "Bd": sys_.Bd.tolist()}}
    path = _out(cfg, "analysis-certificate.json")
    mio.save_analysis_certificate(path, cert, context, seed=cfg.seed,
                                  config=vars(cfg))
    print(f"certified MSI bound h = {cert.h:.4f} ({cert.mode}); wrote {path}")
    return 0


def cmd_design(cfg: ExperimentConfig) -> int:
    data, noise = mio.load_dataset(cfg.dataset)
    cset = dualize(build_consistency_set(data, noise))
    bis = _bisection_config(cfg)
    cert = design_iterate(cset, FeedbackGain(cfg.gain), bis,
                          margin=cfg.margin, solver=cfg.solver)
    context = {"dataset": mio.dataset_payload(data, noise)}
    path = _out(cfg, "design-certificate.json")
    mio.save_design_certificate(path, cert, context, seed=cfg.seed, config=vars(cfg))
    print(f"designed gain K = {cert.K.tolist()} with certified h = {cert.h:.4f}; "
          f"wrote {path}")
    return 0


def cmd_reproduce_example(cfg: ExperimentConfig) -> int:
    seeds = tuple(cfg.seeds) if cfg.seeds else DEFAULT_ANALYSIS_SEEDS
    dbars = tuple(cfg.dbar)
    print(f"analysis sweep: noise levels {dbars}, seeds {seeds}")
    analysis = run_analysis_sweep(dbars, seeds, h_max=cfg.h_max, abs_tol=cfg.tol,
                                  margin=cfg.margin, solver=cfg.solver,
                                  jobs=cfg.jobs, N=cfg.N)
    analysis.to_csv(_out(cfg, "analysis-sweep.csv"))
    plot_sweep(analysis, REFERENCE_ANALYSIS_MSI, _out(cfg, "analysis-sweep.png"))

    design_seeds = tuple(cfg.seeds) if cfg.seeds else DEFAULT_DESIGN_SEEDS
    print(f"design sweep: noise levels {dbars}, seeds {design_seeds}")
    design = run_design_sweep(dbars, design_seeds, h_max=cfg.h_max, abs_tol=cfg.tol,
                              margin=cfg.margin, solver=cfg.solver,
                              jobs=cfg.jobs, N=cfg.N)
    design.to_csv(_out(cfg, "design-sweep.csv"))
    plot_sweep(design, REFERENCE_DESIGN_MSI, _out(cfg, "design-sweep.png"),
               log_scale=True)

    from . import __version__

    payload = {"analysis": analysis.to_payload(), "design": design.to_payload(),
               "config_hash": mio.config_hash(vars(cfg)), "version": __version__}
    with open(_out(cfg, "reproduce-example.json"), "w") as fh:
        json.dump(payload, fh, indent=1)

    for name, table, ref in (("analysis", analysis, REFERENCE_ANALYSIS_MSI),
                             ("design", design, REFERENCE_DESIGN_MSI)):
        med = table.medians()
        print(f"\n{name} sweep medians (reference in parentheses):")
        for d in sorted(med):
            ref_v = ref.get(d)
            med_s = "failed" if med[d] is None else f"{med[d]:.3f}"
            print(f"  dbar={d}: h = {med_s} ({ref_v})")
    failed = [r for t in (analysis, design) for r in t.rows if r.h is None]
    if failed:
        print(f"\n{len(failed)} row(s) failed")
        return 2
    return 0


def cmd_verify(cfg: ExperimentConfig) -> int:
    payload = mio.load_certificate(cfg.certificate)
    h = float(payload["h"])
    K = np.asarray(payload["K"], dtype=float)
    context = payload["context"]
    if "dataset" in context:
        data, noise = mio.dataset_from_payload(context["dataset"], label="certificate dataset")
        cset = dualize(build_consistency_set(data, noise))
        problem = assemble_analysis(cset, K, h)
    else:
        model = context["model"]
        sys_ = LtiSystem(A=model["A"], B=model["B"], Bd=model.get("Bd"))
        problem = assemble_model_based(sys_, K, h)
    res = solve_feasibility(problem, margin=cfg.margin, solver=cfg.solver)
    ok = res.status is FeasibilityStatus.FEASIBLE
    print(f"re-solve at recorded h = {h:.4f}: {res.status.value}")
    return 0 if ok else 1


HANDLERS = {
    "simulate": cmd_simulate,
    "estimate-deriv": cmd_estimate_deriv,
    "build-set": cmd_build_set,
    "analyze": cmd_analyze,
    "design": cmd_design,
    "reproduce-example": cmd_reproduce_example,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msicert",
        description="Certify maximum sampling intervals of sampled-data control "
                    "loops directly from measured data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--margin", type=float)
        p.add_argument("--h-max", dest="h_max", type=float)
        p.add_argument("--tol", type=float)
        p.add_argument("--jobs", type=int)
        p.add_argument("--solver")
        p.add_argument("--dataset", help="dataset JSON path")
        if mode == "verify":
            p.add_argument("--certificate", help="certificate JSON path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _merge_config(args)
        return HANDLERS[args.command](cfg)
    except (ValueError, NoCertificateError, DualizationError,
            mio.SchemaError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
