"""Continuous-time LTI plant models, exact ZOH simulation, and experiment data generation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .consistency import DataSet


def _as_matrix(M, name):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


@dataclass
class LtiSystem:
    """Plant dx/dt = A x + B u, with disturbance channel B_d for data collection.

    Treated as an immutable value after construction.
    """

    A: np.ndarray
    B: np.ndarray
    Bd: np.ndarray | None = None

    def __post_init__(self):
        self.A = _as_matrix(self.A, "A")
        self.B = _as_matrix(self.B, "B")
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n:
            raise ValueError(f"B has {self.B.shape[0]} rows, expected {n}")
        if self.Bd is None:
            self.Bd = np.eye(n)
        else:
            self.Bd = _as_matrix(self.Bd, "Bd")
        if self.Bd.shape[0] != n:
            raise ValueError(f"Bd has {self.Bd.shape[0]} rows, expected {n}")
        if np.linalg.matrix_rank(self.Bd) < self.Bd.shape[1]:
            raise ValueError("Bd must have full column rank")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def m_d(self) -> int:
        return self.Bd.shape[1]


@dataclass
class FeedbackGain:
    """State-feedback gain u = K x(t_k)."""

    K: np.ndarray

    def __post_init__(self):
        self.K = _as_matrix(self.K, "K")

    def matches(self, sys: LtiSystem) -> bool:
        return self.K.shape == (sys.m, sys.n)


@dataclass
class SamplingSequence:
    """Strictly increasing controller sampling times t_0 = 0 < t_1 < ..."""

    times: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).ravel()
        if self.times.size == 0:
            raise ValueError("sampling sequence is empty")
        if self.times[0] != 0.0:
            raise ValueError("sampling sequence must start at t_0 = 0")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("sampling times must be strictly increasing")

    @property
    def max_gap(self) -> float:
        """Realized bound on t_{k+1} - t_k."""
        if self.times.size < 2:
            return 0.0
        return float(np.max(np.diff(self.times)))

    @property
    def min_gap(self) -> float:
        if self.times.size < 2:
            return 0.0
        return float(np.min(np.diff(self.times)))

    @classmethod
    def periodic(cls, gap: float, horizon: float) -> "SamplingSequence":
        if gap <= 0:
            raise ValueError("gap must be positive")
        n_steps = int(np.ceil(horizon / gap)) + 1
        return cls(np.arange(n_steps + 1) * gap)

    @classmethod
    def random_gaps(cls, h_max: float, horizon: float, rng) -> "SamplingSequence":
        """Gaps drawn uniformly from (0, h_max] until the horizon is covered."""
        times = [0.0]
        while times[-1] < horizon:
            times.append(times[-1] + h_max * (1.0 - rng.uniform(0.0, 1.0)))
        return cls(np.asarray(times))


@dataclass
class Trajectory:
    """Simulation record on an output grid; columns align across fields."""

    grid: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    derivatives: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float).ravel()
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        T = self.grid.size
        if self.states.shape[1] != T or self.inputs.shape[1] != T:
            raise ValueError("grid, states and inputs must have equal column counts")
        if self.derivatives is not None:
            self.derivatives = np.atleast_2d(np.asarray(self.derivatives, dtype=float))
            if self.derivatives.shape[1] != T:
                raise ValueError("derivatives column count must match the grid")


def zoh_step(A: np.ndarray, B: np.ndarray, dt: float):
    """One-step ZOH pair (e^{A dt}, int_0^dt e^{A s} ds B) via the augmented exponential.

    The augmented form avoids inverting A.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = A.shape[0]
    m = B.shape[1]
    M = np.zeros((n + m, n + m))
    M[:n, :n] = A
    M[:n, n:] = B
    E = sla.expm(M * dt)
    return E[:n, :n], E[:n, n:]


def discretize_zoh(sys: LtiSystem, dt: float):
    """Exact discretization of the plant under a piecewise-constant input.

    Returns (Ad, Bd_step) with Ad = exp(A dt) and Bd_step = int_0^dt exp(A s) ds B.
    """
    return zoh_step(sys.A, sys.B, dt)


def simulate_sampled_closed_loop(
    sys: LtiSystem,
    gain: FeedbackGain,
    sampling: SamplingSequence,
    x0,
    horizon: float,
    points_per_gap: int = 20,
) -> Trajectory:
    """Piecewise-exact closed-loop trajectory under u(t) = K x(t_k) on [t_k, t_{k+1}).

    States are recorded on a uniform grid (points_per_gap points per shortest
    sampling gap) plus at every sampling instant up to the horizon.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if not gain.matches(sys):
        raise ValueError("gain dimensions do not match the system")
    t_k = sampling.times
    if horizon > t_k[-1] + 1e-12:
        raise ValueError("horizon exceeds the last sampling time")
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != sys.n or not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be a finite n-vector")

    dt_out = sampling.min_gap / max(points_per_gap, 1) if sampling.min_gap > 0 else horizon
    uniform = np.arange(0.0, horizon + 0.5 * dt_out, dt_out)
    grid = np.unique(np.concatenate([uniform, t_k[t_k <= horizon], [horizon]]))
    grid = grid[grid <= horizon + 1e-12]

    states = np.zeros((sys.n, grid.size))
    inputs = np.zeros((sys.m, grid.size))
    x = x0.copy()
    u = gain.K @ x
    k = 0  # active sampling interval [t_k[k], t_k[k+1])
    t_prev = 0.0
    for j, t in enumerate(grid):
        if t > t_prev:
            # cross any sampling instants in (t_prev, t]
            while k + 1 < t_k.size and t_k[k + 1] <= t + 1e-12:
                step = t_k[k + 1] - t_prev
                if step > 0:
                    Ad, Bs = zoh_step(sys.A, sys.B, step)
                    x = Ad @ x + Bs @ u
                t_prev = t_k[k + 1]
                k += 1
                u = gain.K @ x
            if t > t_prev:
                Ad, Bs = zoh_step(sys.A, sys.B, t - t_prev)
                x = Ad @ x + Bs @ u
                t_prev = t
        states[:, j] = x
        inputs[:, j] = u
    return Trajectory(grid, states, inputs, meta={"points_per_gap": points_per_gap})


def sampled_loop_final_state(sys: LtiSystem, gain: FeedbackGain, times, x0) -> np.ndarray:
    """State at times[-1] of the closed loop, stepping exactly interval by interval.

    Lean path for decay checks over long horizons (no dense output grid).
    """
    times = np.asarray(times, dtype=float).ravel()
    x = np.asarray(x0, dtype=float).ravel().copy()
    for k in range(times.size - 1):
        g = times[k + 1] - times[k]
        Ad, Bs = zoh_step(sys.A, sys.B, g)
        x = Ad @ x + Bs @ (gain.K @ x)
    return x


def uniform_interval_inputs(low=-1.0, high=1.0):
    """Input law: each component drawn uniformly from [low, high] at every sample."""

    def law(rng, k, m):
        return rng.uniform(low, high, size=m)

    return law


def ball_disturbance(radius: float):
    """Disturbance law: d(tau_k) drawn uniformly from the closed 2-norm ball."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")

    def law(rng, k, m_d):
        if radius == 0.0:
            return np.zeros(m_d)
        direction = rng.normal(size=m_d)
        direction /= max(np.linalg.norm(direction), 1e-300)
        return direction * radius * rng.uniform(0.0, 1.0) ** (1.0 / m_d)

    return law


def zero_disturbance():
    def law(rng, k, m_d):
        return np.zeros(m_d)

    return law


def generate_experiment_data(
    sys: LtiSystem,
    sampling_times,
    input_law,
    disturbance_law,
    seed,
    disturbance_bound: float,
    x0=None,
):
    """Simulate the disturbed plant along tau_k and record exact (xdot, x, u) triples.

    The disturbance is held constant over each sampling interval, so the realized
    matrix D_hat is exactly recoverable; it is returned alongside the data for
    verification. Recorded derivatives satisfy
    xdot(tau_k) = A x(tau_k) + B u(tau_k) + Bd d(tau_k) exactly.

    Args:
        sampling_times: strictly increasing tau_1 < ... < tau_N.
        input_law: callable (rng, k, m) -> u_k.
        disturbance_law: callable (rng, k, m_d) -> d_k; must respect the declared
            pointwise bound ||d_k||_2 <= disturbance_bound.
        disturbance_bound: declared pointwise 2-norm bound d_bar >= 0.
        x0: initial state at tau_1 (default zero).

    Returns:
        (DataSet, D_hat) with D_hat of shape m_d x N.
    """
    if disturbance_bound < 0:
        raise ValueError("disturbance_bound must be nonnegative")
    tau = np.asarray(sampling_times, dtype=float).ravel()
    if tau.size == 0:
        raise ValueError("sampling_times is empty")
    if tau.size > 1 and not np.all(np.diff(tau) > 0):
        raise ValueError("sampling_times must be strictly increasing")
    rng = np.random.default_rng(seed)
    n, m, m_d = sys.n, sys.m, sys.m_d
    N = tau.size
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).ravel()
    if x.size != n:
        raise ValueError("x0 dimension mismatch")

    X = np.zeros((n, N))
    U = np.zeros((m, N))
    D = np.zeros((m_d, N))
    B_aug = np.hstack([sys.B, sys.Bd])
    for k in range(N):
        u_k = np.asarray(input_law(rng, k, m), dtype=float).ravel()
        d_k = np.asarray(disturbance_law(rng, k, m_d), dtype=float).ravel()
        if u_k.size != m or d_k.size != m_d:
            raise ValueError("input/disturbance law returned wrong dimension")
        if np.linalg.norm(d_k) > disturbance_bound * (1 + 1e-12) + 1e-300:
            raise ValueError("disturbance law violated the declared bound")
        X[:, k], U[:, k], D[:, k] = x, u_k, d_k
        if k < N - 1:
            Ad, Bs = zoh_step(sys.A, B_aug, tau[k + 1] - tau[k])
            x = Ad @ x + Bs @ np.concatenate([u_k, d_k])
    Xdot = sys.A @ X + sys.B @ U + sys.Bd @ D
    data = DataSet(
        tau=tau,
        X=X,
        U=U,
        Xdot=Xdot,
        Bd=sys.Bd,
        meta={
            "seed": seed,
            "disturbance_bound": disturbance_bound,
            "disturbance_hold": "constant between sampling instants",
        },
    )
    return data, D
