"""Data-consistent uncertainty set: quadratic bound matrix, inertia checks, dualization.

The set of plants consistent with the recorded data and the disturbance bound is
characterized by a quadratic matrix inequality in [A B]^T with a data-dependent
matrix Pc; under the inertia assumption the equivalent primal form uses the
rearranged inverse Pc_dual.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_TOL_EIG = 1e-9  # relative to the spectral norm
DUALIZE_COND_LIMIT = 1e12


class DualizationError(RuntimeError):
    """Pc cannot be safely inverted (assumption unverified or ill-conditioned)."""


def _sym_check(M, name, rtol=1e-10):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    scale = max(np.abs(M).max(), 1.0)
    if np.abs(M - M.T).max() > rtol * scale:
        raise ValueError(f"{name} must be symmetric")
    return 0.5 * (M + M.T)


@dataclass
class DataSet:
    """Sampled triples (xdot, x, u) at times tau_k, plus the disturbance channel Bd."""

    tau: np.ndarray
    X: np.ndarray
    U: np.ndarray
    Xdot: np.ndarray
    Bd: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=float).ravel()
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.U = np.atleast_2d(np.asarray(self.U, dtype=float))
        self.Xdot = np.atleast_2d(np.asarray(self.Xdot, dtype=float))
        self.Bd = np.atleast_2d(np.asarray(self.Bd, dtype=float))
        N = self.X.shape[1]
        if self.U.shape[1] != N or self.Xdot.shape[1] != N or self.tau.size != N:
            raise ValueError("X, U, Xdot and tau must share the sample count N")
        if self.Xdot.shape[0] != self.X.shape[0]:
            raise ValueError("Xdot and X must have the same row count")
        if self.Bd.shape[0] != self.X.shape[0]:
            raise ValueError("Bd row count must equal the state dimension")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.U.shape[0]

    @property
    def m_d(self) -> int:
        return self.Bd.shape[1]

    @property
    def N(self) -> int:
        return self.X.shape[1]

    @property
    def Z(self) -> np.ndarray:
        """Stacked regressor [X; U], materialized on demand."""
        return np.vstack([self.X, self.U])


@dataclass
class NoiseBound:
    """Quadratic disturbance bound: [D^T; I]^T [[Qd, Sd], [Sd^T, Rd]] [D^T; I] >= 0."""

    Qd: np.ndarray
    Sd: np.ndarray
    Rd: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.Qd = _sym_check(self.Qd, "Qd")
        self.Rd = _sym_check(self.Rd, "Rd")
        self.Sd = np.atleast_2d(np.asarray(self.Sd, dtype=float))
        N = self.Qd.shape[0]
        m_d = self.Rd.shape[0]
        if self.Sd.shape != (N, m_d):
            raise ValueError(f"Sd must be {N}x{m_d}, got {self.Sd.shape}")
        eig_max = np.linalg.eigvalsh(self.Qd).max()
        tol = DEFAULT_TOL_EIG * np.linalg.norm(self.Qd, 2)
        if eig_max >= -tol:
            raise ValueError("Qd must be negative definite")

    @property
    def N(self) -> int:
        return self.Qd.shape[0]

    @property
    def m_d(self) -> int:
        return self.Rd.shape[0]

    @classmethod
    def pointwise(cls, dbar: float, N: int, m_d: int) -> "NoiseBound":
        """Standard aggregate of the pointwise bound ||d_k|| <= dbar:
        Qd = -I_N, Sd = 0, Rd = dbar^2 N I."""
        if dbar < 0:
            raise ValueError("dbar must be nonnegative")
        bound = cls(
            Qd=-np.eye(N),
            Sd=np.zeros((N, m_d)),
            Rd=dbar**2 * N * np.eye(m_d),
            meta={"dbar": dbar, "form": "pointwise-aggregate"},
        )
        if dbar == 0.0:
            bound.meta["degenerate"] = True
        return bound

    def holds_for(self, D: np.ndarray, tol: float = 0.0) -> bool:
        """Direct substitution check that a realized disturbance matrix is admitted."""
        D = np.atleast_2d(np.asarray(D, dtype=float))
        F = D @ self.Qd @ D.T + D @ self.Sd + self.Sd.T @ D.T + self.Rd
        return bool(np.linalg.eigvalsh(0.5 * (F + F.T)).min() >= -tol)


@dataclass
class AssumptionReport:
    """Inertia check on Pc: invertible with exactly m_d positive eigenvalues."""

    invertible: bool
    positive_count: int
    negative_count: int
    zero_count: int
    passed: bool
    m_d: int


@dataclass
class SufficientConditionsReport:
    """Sufficient conditions for the inertia assumption (Sd = 0 case)."""

    sd_zero: bool
    z_full_row_rank: bool
    bd_invertible: bool
    strict_noise_qmi: bool | None  # None when the realized disturbance is unknown
    all_conditions_hold: bool | None
    inertia_check_passed: bool | None
    warning: str | None = None


@dataclass
class ConsistencySet:
    """Data-dependent quadratic bound on [A B]; partition sizes (n+m, n).

    Pc_dual is populated by dualize() once the inertia assumption is verified.
    """

    Pc: np.ndarray
    n: int
    m: int
    m_d: int
    inertia: tuple[int, int, int]  # (negative, zero, positive)
    tol_eig: float = DEFAULT_TOL_EIG
    Pc_dual: np.ndarray | None = None
    dual_condition: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def Qc(self) -> np.ndarray:
        k = self.n + self.m
        return self.Pc[:k, :k]

    @property
    def Sc(self) -> np.ndarray:
        k = self.n + self.m
        return self.Pc[:k, k:]

    @property
    def Rc(self) -> np.ndarray:
        k = self.n + self.m
        return self.Pc[k:, k:]


def _inertia(M: np.ndarray, tol_eig: float) -> tuple[int, int, int]:
    w = np.linalg.eigvalsh(M)
    thresh = tol_eig * max(np.abs(w).max(), 1e-300)
    neg = int(np.sum(w < -thresh))
    pos = int(np.sum(w > thresh))
    zero = w.size - neg - pos
    return neg, zero, pos


def build_consistency_set(data: DataSet, noise: NoiseBound,
                          tol_eig: float = DEFAULT_TOL_EIG) -> ConsistencySet:
    """Assemble Pc = [-Z 0; Xdot Bd] [[Qd Sd],[Sd^T Rd]] [-Z 0; Xdot Bd]^T.

    The result is explicitly symmetrized before the eigendecomposition that
    records its inertia; the dual part is deferred to dualize().
    """
    if noise.N != data.N:
        raise ValueError(f"noise bound is for N={noise.N}, data has N={data.N}")
    if noise.m_d != data.m_d:
        raise ValueError(f"noise bound is for m_d={noise.m_d}, data has m_d={data.m_d}")
    Z = data.Z
    outer = np.block([
        [-Z, np.zeros((data.n + data.m, data.m_d))],
        [data.Xdot, data.Bd],
    ])
    mid = np.block([[noise.Qd, noise.Sd], [noise.Sd.T, noise.Rd]])
    Pc = outer @ mid @ outer.T
    Pc = 0.5 * (Pc + Pc.T)
    return ConsistencySet(
        Pc=Pc,
        n=data.n,
        m=data.m,
        m_d=data.m_d,
        inertia=_inertia(Pc, tol_eig),
        tol_eig=tol_eig,
        meta={"N": data.N, **{k: v for k, v in noise.meta.items() if k == "dbar"}},
    )


def membership_test(candidate, cset: ConsistencySet, tol: float = 0.0):
    """Quadratic-form membership of a candidate plant in the consistency set.

    Evaluates M = [[A B]^T; I]^T Pc [[A B]^T; I] (n x n) and reports
    (lambda_min(M) >= -tol, lambda_min(M)). Accepts an LtiSystem or an (A, B) pair.
    """
    if hasattr(candidate, "A"):
        A, B = candidate.A, candidate.B
    else:
        A, B = candidate
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape != (cset.n, cset.n) or B.shape != (cset.n, cset.m):
        raise ValueError("candidate dimensions do not match the set")
    T = np.vstack([np.hstack([A, B]).T, np.eye(cset.n)])
    M = T.T @ cset.Pc @ T
    margin = float(np.linalg.eigvalsh(0.5 * (M + M.T)).min())
    return margin >= -tol, margin


def primal_membership_test(candidate, cset: ConsistencySet, tol: float = 0.0):
    """Membership via the dual multiplier: [[A B]; I]^T Pc_dual [[A B]; I] >= 0."""
    if cset.Pc_dual is None:
        raise ValueError("Pc_dual not populated; run dualize() first")
    if hasattr(candidate, "A"):
        A, B = candidate.A, candidate.B
    else:
        A, B = candidate
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    T = np.vstack([np.hstack([A, B]), np.eye(cset.n + cset.m)])
    M = T.T @ cset.Pc_dual @ T
    margin = float(np.linalg.eigvalsh(0.5 * (M + M.T)).min())
    return margin >= -tol, margin


def check_assumption_inertia(cset: ConsistencySet, m_d: int | None = None,
                             tol_eig: float | None = None) -> AssumptionReport:
    """Pass iff Pc has no eigenvalue within tol of zero and exactly m_d positive ones."""
    if m_d is None:
        m_d = cset.m_d
    if tol_eig is None:
        tol_eig = cset.tol_eig
    neg, zero, pos = _inertia(cset.Pc, tol_eig)
    invertible = zero == 0
    return AssumptionReport(
        invertible=invertible,
        positive_count=pos,
        negative_count=neg,
        zero_count=zero,
        passed=invertible and pos == m_d,
        m_d=m_d,
    )


def check_inertia_sufficient_conditions(data: DataSet, noise: NoiseBound,
                              realized_D: np.ndarray | None = None,
                              tol_eig: float = DEFAULT_TOL_EIG) -> SufficientConditionsReport:
    """Evaluate the sufficient conditions for the inertia assumption independently.

    Conditions (for Sd = 0): (i) Z full row rank, (ii) Bd invertible,
    (iii) D_hat Qd D_hat^T + Rd > 0 strictly. Condition (iii) is unknowable from the
    data alone and is skipped with a warning when realized_D is not supplied.
    When all conditions hold, the implication is cross-checked against the direct
    inertia computation.
    """
    sd_zero = bool(np.all(noise.Sd == 0.0))
    Z = data.Z
    z_full = bool(np.linalg.matrix_rank(Z) == data.n + data.m)
    bd_inv = data.Bd.shape[0] == data.Bd.shape[1] and (
        np.linalg.matrix_rank(data.Bd) == data.Bd.shape[0]
    )
    warning = None
    if realized_D is None:
        strict = None
        warning = "realized disturbance unavailable; strict noise-QMI condition skipped"
    else:
        D = np.atleast_2d(np.asarray(realized_D, dtype=float))
        F = D @ noise.Qd @ D.T + D @ noise.Sd + noise.Sd.T @ D.T + noise.Rd
        strict = bool(np.linalg.eigvalsh(0.5 * (F + F.T)).min() > 0.0)
    if strict is None:
        all_hold = None
    else:
        all_hold = sd_zero and z_full and bd_inv and strict
    inertia_passed = None
    if all_hold:
        cset = build_consistency_set(data, noise, tol_eig)
        inertia_passed = check_assumption_inertia(cset).passed
    return SufficientConditionsReport(
        sd_zero=sd_zero,
        z_full_row_rank=z_full,
        bd_invertible=bool(bd_inv),
        strict_noise_qmi=strict,
        all_conditions_hold=all_hold,
        inertia_check_passed=inertia_passed,
        warning=warning,
    )


def dualize(cset: ConsistencySet, tol_eig: float | None = None) -> ConsistencySet:
    """Populate the rearranged inverse Pc_dual = [-Rt St^T; St -Qt].

    Requires the inertia assumption to hold; refuses when Pc is numerically
    singular (condition number above DUALIZE_COND_LIMIT). Uses the full symmetric
    inverse followed by re-partitioning, keeping a single failure surface.
    """
    report = check_assumption_inertia(cset, tol_eig=tol_eig)
    if not report.passed:
        raise DualizationError(
            f"inertia assumption not verified: invertible={report.invertible}, "
            f"positive={report.positive_count} (expected {report.m_d})"
        )
    w = np.linalg.eigvalsh(cset.Pc)
    cond = float(np.abs(w).max() / np.abs(w).min())
    if cond > DUALIZE_COND_LIMIT:
        raise DualizationError(
            f"Pc condition number {cond:.3e} exceeds {DUALIZE_COND_LIMIT:.0e}; "
            "the dual multiplier would be unreliable"
        )
    Pci = np.linalg.inv(cset.Pc)
    Pci = 0.5 * (Pci + Pci.T)
    k = cset.n + cset.m
    Qt = Pci[:k, :k]
    St = Pci[:k, k:]
    Rt = Pci[k:, k:]
    Ptc = np.block([[-Rt, St.T], [St, -Qt]])
    Ptc = 0.5 * (Ptc + Ptc.T)
    return ConsistencySet(
        Pc=cset.Pc,
        n=cset.n,
        m=cset.m,
        m_d=cset.m_d,
        inertia=cset.inertia,
        tol_eig=cset.tol_eig,
        Pc_dual=Ptc,
        dual_condition=cond,
        meta=dict(cset.meta),
    )


def undualize(Ptc: np.ndarray, n: int, m: int) -> np.ndarray:
    """Reverse the dual construction: recover Pc from Pc_dual."""
    Qt = -Ptc[n:, n:]
    St = Ptc[n:, :n]
    Rt = -Ptc[:n, :n]
    Pci = np.block([[Qt, St], [St.T, Rt]])
    Pc = np.linalg.inv(0.5 * (Pci + Pci.T))
    return 0.5 * (Pc + Pc.T)
