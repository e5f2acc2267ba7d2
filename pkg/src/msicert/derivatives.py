"""Forward-difference state derivative estimates with certified error bounds.

Applies to noiseless, equidistantly sampled state/input data when 2-norm bounds
on the unknown plant matrices are available. The per-sample error bound converts
into the aggregate quadratic noise-bound format consumed downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .consistency import NoiseBound


@dataclass(frozen=True)
class NormPrior:
    """Known 2-norm bounds on the unknown plant matrices: ||A|| <= a_bar, ||B|| <= b_bar."""

    a_bar: float
    b_bar: float

    def __post_init__(self):
        if self.a_bar < 0 or self.b_bar < 0:
            raise ValueError("norm bounds must be nonnegative")


@dataclass
class DerivEstimate:
    """Forward-difference derivative estimates and certified per-sample error bounds."""

    xdot_est: np.ndarray
    per_sample_bound: np.ndarray

    def __post_init__(self):
        self.xdot_est = np.atleast_2d(np.asarray(self.xdot_est, dtype=float))
        self.per_sample_bound = np.asarray(self.per_sample_bound, dtype=float).ravel()
        if self.per_sample_bound.size != self.xdot_est.shape[1]:
            raise ValueError("one bound per estimated sample is required")
        if not np.all(np.isfinite(self.per_sample_bound)) or np.any(self.per_sample_bound < 0):
            raise ValueError("bounds must be finite and nonnegative")


def euler_derivative(X, h: float) -> np.ndarray:
    """Forward differences (x(tau_{k+1}) - x(tau_k)) / h for k = 1..N-1.

    X holds equidistant state samples column-wise; the last sample has no forward
    difference and is dropped.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] < 2:
        raise ValueError("need at least two samples")
    return (X[:, 1:] - X[:, :-1]) / h


def derivative_error_bound(x_k, u_k, prior: NormPrior, h: float) -> float:
    """Closed-form bound on the forward-difference error at one sample:

        (a_bar h / 2) (a_bar ||x_k|| + (1 + a_bar h / 3) b_bar ||u_k||)

    valid for any plant with ||A|| <= a_bar, ||B|| <= b_bar on noiseless data.
    """
    if h < 0:
        raise ValueError("h must be nonnegative")
    nx = float(np.linalg.norm(np.asarray(x_k, dtype=float).ravel()))
    nu = float(np.linalg.norm(np.asarray(u_k, dtype=float).ravel()))
    a, b = prior.a_bar, prior.b_bar
    return 0.5 * a * h * (a * nx + (1.0 + a * h / 3.0) * b * nu)


def estimate_derivatives(X, U, prior: NormPrior, h: float) -> DerivEstimate:
    """Euler estimates plus the per-sample certified bounds for k = 1..N-1."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if U.shape[1] != X.shape[1]:
        raise ValueError("X and U must have the same sample count")
    est = euler_derivative(X, h)
    bounds = np.array([
        derivative_error_bound(X[:, k], U[:, k], prior, h) for k in range(X.shape[1] - 1)
    ])
    return DerivEstimate(xdot_est=est, per_sample_bound=bounds)


def bounds_to_noise_model(per_sample_bounds, N: int, n: int) -> NoiseBound:
    """Aggregate per-sample error bounds into the standard noise-bound format.

    Uses d_bar = max_k bound_k (the only aggregate the quadratic format admits
    soundly) and returns Qd = -I_N, Sd = 0, Rd = d_bar^2 N I_n for the implicit
    identity disturbance channel. d_bar is recorded in the metadata; an all-zero
    input is flagged as degenerate.
    """
    bounds = np.asarray(per_sample_bounds, dtype=float).ravel()
    if bounds.size == 0:
        raise ValueError("empty bound list")
    if not np.all(np.isfinite(bounds)):
        raise ValueError("bounds must be finite")
    dbar = float(bounds.max())
    model = NoiseBound.pointwise(dbar, N=N, m_d=n)
    model.meta.update({
        "dbar": dbar,
        "source": "derivative-error-bounds",
        "per_sample_max": dbar,
    })
    return model
