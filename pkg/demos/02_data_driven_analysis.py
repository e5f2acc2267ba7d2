"""Certifying a sampling bound when the plant is UNKNOWN.

Here the controller designer never sees the plant matrices. One offline
experiment records N = 100 samples of (state derivative, state, input) under
bounded disturbances. Every plant consistent with that data forms an ellipsoidal
consistency set; the analysis certificate must hold robustly for all of them, so
it is always at most as large as the known-plant bound -- and it degrades
gracefully as the assumed noise bound grows.
"""

import numpy as np

from msicert import (analyze_msi, build_consistency_set, check_assumption_inertia,
                     check_inertia_sufficient_conditions, dualize, membership_test)
from msicert.experiments import (REFERENCE_ANALYSIS_MSI, benchmark_gain,
                                 benchmark_plant, make_benchmark_dataset)

gain = benchmark_gain()
truth = benchmark_plant()  # used only to generate data and to check membership

dbar = 0.01
data, noise, realized_D = make_benchmark_dataset(dbar, seed=1)
print(f"dataset: N = {data.N} samples, noise bound {dbar} "
      f"(realized max ||d_k|| = {np.linalg.norm(realized_D, axis=0).max():.4f})")

# The uncertainty description and its health checks.
cset = build_consistency_set(data, noise, tol_eig=1e-12)
print("inertia of the data matrix (neg, zero, pos):", cset.inertia)
conditions = check_inertia_sufficient_conditions(data, noise, realized_D)
print("sufficient conditions hold:", conditions.all_conditions_hold,
      "| direct inertia check:", check_assumption_inertia(cset).passed)

cset = dualize(cset)
member, margin = membership_test(truth, cset)
print(f"true plant is consistent with the data: {member} (margin {margin:.3e})")

cert = analyze_msi(cset, gain)
print(f"\ndata-driven certified bound at noise {dbar}: h* = {cert.h:.3f} "
      f"(reference {REFERENCE_ANALYSIS_MSI[dbar]})")

# Sweep a few noise levels: more admissible disturbance means more admissible
# plants, so the certified bound can only shrink.
print("\nnoise level -> certified h* (reference)")
results = {}
for d in (0.001, 0.01, 0.03, 0.05):
    cs = dualize(build_consistency_set(*make_benchmark_dataset(d, seed=1)[:2],
                                       tol_eig=1e-12))
    results[d] = analyze_msi(cs, gain).h
    print(f"  {d:6}: {results[d]:.3f}  ({REFERENCE_ANALYSIS_MSI[d]})")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ds = sorted(results)
    ax.plot(ds, [results[d] for d in ds], "o-", label="this run (seed 1)")
    refs = sorted(REFERENCE_ANALYSIS_MSI)
    ax.plot(refs, [REFERENCE_ANALYSIS_MSI[d] for d in refs], "s--",
            label="reference")
    ax.set_xlabel("assumed noise bound")
    ax.set_ylabel("certified h*")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig("demo02_noise_sweep.png", dpi=140)
    print("\nwrote demo02_noise_sweep.png")
except ImportError:
    pass
