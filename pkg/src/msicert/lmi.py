"""Affine matrix-inequality assembly for sampled-data stability analysis and design.

The three LMI families (model-based stability, data-driven analysis, data-driven
gain design) are assembled as symbolic affine constraint systems over named
decision variables. Constraint expressions are plain functions from variable
assignments to symmetric matrices; affinity is verified by a two-point probe and
the solver layer compiles the same functions into explicit coefficient form.

All structured factors are placed through named block layouts rather than ad-hoc
slicing; the layouts are unit-tested against hand-written one-dimensional
instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .consistency import ConsistencySet


def default_margin(h: float) -> float:
    """Strictness used to realize strict definiteness, scaled with the bound h."""
    return 1e-7 * (1.0 + h)


SCALAR_LOWER_BOUND = 1e-9  # floor for multiplier variables, avoids degenerate collapse


# ---------------------------------------------------------------------------
# problem representation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecisionVariable:
    """A named decision block: () shape for scalars, (r, c) for matrices."""

    name: str
    shape: tuple
    symmetric: bool = False
    positive_definite: bool = False
    lower_bound: float | None = None

    def zero(self):
        return 0.0 if self.shape == () else np.zeros(self.shape)

    def random(self, rng):
        if self.shape == ():
            return float(rng.normal())
        M = rng.normal(size=self.shape)
        return 0.5 * (M + M.T) if self.symmetric else M

    def basis(self):
        """Canonical basis of the variable's (symmetric-respecting) vector space."""
        if self.shape == ():
            return [((), 1.0)]
        r, c = self.shape
        out = []
        if self.symmetric:
            for i in range(r):
                for j in range(i, c):
                    E = np.zeros((r, c))
                    E[i, j] = 1.0
                    E[j, i] = 1.0
                    out.append(((i, j), E))
        else:
            for i in range(r):
                for j in range(c):
                    E = np.zeros((r, c))
                    E[i, j] = 1.0
                    out.append(((i, j), E))
        return out


@dataclass(frozen=True)
class LmiConstraint:
    """A symmetric matrix expression required negative definite (realized <= -eps I)."""

    name: str
    size: int
    build: Callable[[Mapping[str, np.ndarray]], np.ndarray]


@dataclass
class LmiProblem:
    """Affine matrix-inequality feasibility system over named decision variables.

    `homogeneous` marks systems that are jointly positively homogeneous in all
    decision variables (feasibility is then scale-invariant, which the solver
    exploits for numerical robustness).
    """

    variables: tuple[DecisionVariable, ...]
    constraints: tuple[LmiConstraint, ...]
    metadata: dict = field(default_factory=dict)
    homogeneous: bool = False

    def variable(self, name: str) -> DecisionVariable:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def zero_assignment(self) -> dict:
        return {v.name: v.zero() for v in self.variables}

    def random_assignment(self, rng) -> dict:
        return {v.name: v.random(rng) for v in self.variables}

    def evaluate(self, assignment: Mapping[str, np.ndarray]) -> dict:
        return {c.name: c.build(assignment) for c in self.constraints}

    def check_affine(self, rng=None, trials: int = 2, tol: float = 1e-10) -> None:
        """Two-point affinity probe: F(v1) + F(v2) - F(v1+v2) - F(0) = 0 entrywise.

        Also checks symmetry of every constraint value. Raises ValueError on
        violation; tolerance is relative to the probe magnitudes.
        """
        rng = np.random.default_rng(0) if rng is None else rng
        zero = self.zero_assignment()
        for _ in range(trials):
            v1 = self.random_assignment(rng)
            v2 = self.random_assignment(rng)
            v12 = {k: v1[k] + v2[k] for k in v1}
            for c in self.constraints:
                f1, f2, f12, f0 = c.build(v1), c.build(v2), c.build(v12), c.build(zero)
                scale = max(1.0, *(np.abs(F).max() for F in (f1, f2, f12, f0)))
                defect = np.abs(f1 + f2 - f12 - f0).max()
                if defect > tol * scale:
                    raise ValueError(
                        f"constraint '{c.name}' failed the affinity probe "
                        f"(defect {defect:.3e}, scale {scale:.3e})"
                    )
                if np.abs(f1 - f1.T).max() > tol * scale:
                    raise ValueError(f"constraint '{c.name}' is not symmetric-valued")
                if f1.shape != (c.size, c.size):
                    raise ValueError(
                        f"constraint '{c.name}' has size {f1.shape}, declared {c.size}"
                    )

    def compile(self) -> list:
        """Explicit affine coefficients per constraint: (constraint, C0, terms).

        Each term is (variable name, entry index, coefficient matrix) such that
        F(v) = C0 + sum_terms v[name][entry] * coefficient (entry () for scalars;
        symmetric variables contribute one term per upper-triangle entry).
        """
        zero = self.zero_assignment()
        compiled = []
        for c in self.constraints:
            C0 = c.build(zero)
            terms = []
            for var in self.variables:
                for entry, B in var.basis():
                    v = dict(zero)
                    v[var.name] = B
                    Cj = c.build(v) - C0
                    if np.abs(Cj).max() > 0.0:
                        terms.append((var.name, entry, Cj))
            compiled.append((c, C0, terms))
        return compiled

    def debug_dump(self) -> dict:
        """JSON-ready dump of the block structure and numeric coefficient matrices."""
        dump = {
            "metadata": {k: _jsonable(v) for k, v in self.metadata.items()},
            "homogeneous": self.homogeneous,
            "variables": [
                {
                    "name": v.name,
                    "shape": list(v.shape),
                    "symmetric": v.symmetric,
                    "positive_definite": v.positive_definite,
                    "lower_bound": v.lower_bound,
                }
                for v in self.variables
            ],
            "constraints": [],
        }
        for c, C0, terms in self.compile():
            dump["constraints"].append({
                "name": c.name,
                "size": c.size,
                "constant": C0.tolist(),
                "terms": [
                    {"variable": name, "entry": list(entry) if entry != () else [],
                     "coefficient": Cj.tolist()}
                    for name, entry, Cj in terms
                ],
            })
        return dump


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


# ---------------------------------------------------------------------------
# named block layouts
# ---------------------------------------------------------------------------

class BlockLayout:
    """Named contiguous block offsets along one matrix axis."""

    def __init__(self, blocks: Sequence[tuple[str, int]]):
        self._slices = {}
        offset = 0
        for name, size in blocks:
            if name in self._slices:
                raise ValueError(f"duplicate block name {name!r}")
            self._slices[name] = slice(offset, offset + size)
            offset += size
        self.size = offset

    def __getitem__(self, name: str) -> slice:
        return self._slices[name]

    @property
    def names(self):
        return list(self._slices)


class BlockMatrix:
    """Dense matrix assembled by placing named (row, column) blocks."""

    def __init__(self, rows: BlockLayout, cols: BlockLayout):
        self.rows = rows
        self.cols = cols
        self._M = np.zeros((rows.size, cols.size))

    def place(self, row: str, col: str, value) -> "BlockMatrix":
        blk = self._M[self.rows[row], self.cols[col]]
        value = np.asarray(value, dtype=float)
        if value.shape != blk.shape:
            raise ValueError(
                f"block ({row}, {col}) expects shape {blk.shape}, got {value.shape}"
            )
        self._M[self.rows[row], self.cols[col]] = value
        return self

    def array(self) -> np.ndarray:
        return self._M.copy()


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

def _check_pd(M, name):
    if np.linalg.eigvalsh(0.5 * (M + M.T)).min() <= 0:
        raise ValueError(f"{name} must be positive definite at the returned values")


@dataclass
class AnalysisCertificate:
    """Witness that the closed loop is stable for every sampling gap in (0, h]."""

    h: float
    gain: np.ndarray
    P1: np.ndarray
    P2: np.ndarray
    P3: np.ndarray
    R: np.ndarray
    lam1: float | None
    lam2: float | None
    margin: float
    mode: str  # "model-based" or "data-driven"
    trace: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        _check_pd(self.P1, "P1")
        _check_pd(self.R, "R")
        for nm, lam in (("lam1", self.lam1), ("lam2", self.lam2)):
            if lam is not None and lam <= 0:
                raise ValueError(f"{nm} must be positive")


@dataclass
class DesignCertificate:
    """Synthesized gain together with its certified sampling-interval bound."""

    h: float
    K: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    Q3: np.ndarray
    R: np.ndarray
    lam1: float
    lam2: float
    margin: float
    trace: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        _check_pd(self.Q1, "Q1")
        _check_pd(self.R, "R")
        _check_pd(self.Q3 + self.Q3.T, "Q3 + Q3^T")
        if self.lam1 <= 0 or self.lam2 <= 0:
            raise ValueError("multipliers must be positive")


# ---------------------------------------------------------------------------
# model-based stability LMIs
# ---------------------------------------------------------------------------

def _gain_matrix(gain) -> np.ndarray:
    K = gain.K if hasattr(gain, "K") else gain
    return np.atleast_2d(np.asarray(K, dtype=float))


def assemble_model_based(sys, gain, h: float) -> LmiProblem:
    """Two coupled stability LMIs for a known plant under sampled state feedback.

    Feasibility in (P1, P2, P3, R) certifies exponential stability for every
    sampling sequence with gaps in (0, h].
    """
    if h <= 0:
        raise ValueError("h must be positive")
    K = _gain_matrix(gain)
    A = np.atleast_2d(np.asarray(sys.A if hasattr(sys, "A") else sys[0], dtype=float))
    B = np.atleast_2d(np.asarray(sys.B if hasattr(sys, "B") else sys[1], dtype=float))
    n = A.shape[0]
    if K.shape != (B.shape[1], n):
        raise ValueError("gain dimensions do not match the system")
    AK = A + B @ K
    BK = B @ K

    def two_block(v):
        P1, P2, P3, R = v["P1"], v["P2"], v["P3"], v["R"]
        top_left = P2.T @ AK + AK.T @ P2
        low_left = P1 - P2 + P3.T @ AK
        return np.block([
            [top_left, low_left.T],
            [low_left, -P3 - P3.T + h * R],
        ])

    def three_block(v):
        P1, P2, P3, R = v["P1"], v["P2"], v["P3"], v["R"]
        top_left = P2.T @ AK + AK.T @ P2
        low_left = P1 - P2 + P3.T @ AK
        return np.block([
            [top_left, low_left.T, (-h * BK.T @ P2).T],
            [low_left, -P3 - P3.T, (-h * BK.T @ P3).T],
            [-h * BK.T @ P2, -h * BK.T @ P3, -h * R],
        ])

    variables = (
        DecisionVariable("P1", (n, n), symmetric=True, positive_definite=True),
        DecisionVariable("P2", (n, n)),
        DecisionVariable("P3", (n, n)),
        DecisionVariable("R", (n, n), symmetric=True, positive_definite=True),
    )
    constraints = (
        LmiConstraint("stability_2n", 2 * n, two_block),
        LmiConstraint("stability_3n", 3 * n, three_block),
    )
    return LmiProblem(
        variables, constraints,
        metadata={"kind": "model-based", "h": h, "n": n, "m": K.shape[0]},
        homogeneous=True,
    )


# ---------------------------------------------------------------------------
# data-driven analysis LMIs
# ---------------------------------------------------------------------------

def _analysis_factor_short(K: np.ndarray, h: float) -> np.ndarray:
    """Outer factor of the first analysis inequality, shape (7n+m) x 3n.

    Column blocks: state x, derivative-like coordinate v, uncertainty output w.
    Row blocks: identity pair (x, v), three mapped rows, then the uncertainty
    channel rows (w output, then the x / Kx input stack).
    """
    m, n = K.shape
    cols = BlockLayout([("x", n), ("v", n), ("w", n)])
    rows = BlockLayout([
        ("id_x", n), ("id_v", n),
        ("map_a", n), ("map_b", n), ("map_c", n),
        ("unc_w", n), ("unc_x", n), ("unc_u", m),
    ])
    In = np.eye(n)
    G = BlockMatrix(rows, cols)
    G.place("id_x", "x", In)
    G.place("id_v", "v", In)
    G.place("map_a", "v", In)
    G.place("map_b", "v", -In)
    G.place("map_b", "w", In)
    G.place("map_c", "v", 0.5 * h * In)
    G.place("unc_w", "w", In)
    G.place("unc_x", "x", In)
    G.place("unc_u", "x", K)
    return G.array()


def _analysis_factor_long(K: np.ndarray, h: float) -> np.ndarray:
    """Outer factor of the second analysis inequality, shape (8n+m) x 4n.

    Adds the delayed-increment coordinate y to the column blocks.
    """
    m, n = K.shape
    cols = BlockLayout([("x", n), ("v", n), ("y", n), ("w", n)])
    rows = BlockLayout([
        ("id_x", n), ("id_v", n), ("id_y", n),
        ("map_a", n), ("map_b", n), ("map_c", n),
        ("unc_w", n), ("unc_x", n), ("unc_u", m),
    ])
    In = np.eye(n)
    G = BlockMatrix(rows, cols)
    G.place("id_x", "x", In)
    G.place("id_v", "v", In)
    G.place("id_y", "y", In)
    G.place("map_a", "v", In)
    G.place("map_b", "v", -In)
    G.place("map_b", "w", In)
    G.place("map_c", "y", -0.5 * h * In)
    G.place("unc_w", "w", In)
    G.place("unc_x", "x", In)
    G.place("unc_u", "x", K)
    G.place("unc_u", "y", -h * K)
    return G.array()


def assemble_analysis(cset: ConsistencySet, gain, h: float) -> LmiProblem:
    """Robust analysis LMIs over every plant in the consistency set, for fixed gain.

    Requires the dualized multiplier (run dualize() first). The multiplier matrix
    is normalized to unit spectral norm inside the constraints; the scaling is
    absorbed by the positive multiplier variables and recorded in the metadata.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if cset.Pc_dual is None:
        raise ValueError("consistency set has no dual multiplier; "
                         "verify the inertia assumption and call dualize() first")
    K = _gain_matrix(gain)
    n, m = cset.n, cset.m
    if K.shape != (m, n):
        raise ValueError("gain dimensions do not match the consistency set")
    scale = np.linalg.norm(cset.Pc_dual, 2)
    Ptc = cset.Pc_dual / scale
    Zn = np.zeros((n, n))

    G1 = _analysis_factor_short(K, h)
    G2 = _analysis_factor_long(K, h)
    top1, unc1 = G1[: 5 * n], G1[5 * n:]
    top2, unc2 = G2[: 6 * n], G2[6 * n:]
    unc1_quad = unc1.T @ Ptc @ unc1
    unc2_quad = unc2.T @ Ptc @ unc2

    def robust_short(v):
        PR2 = np.block([[v["P1"], Zn], [v["P2"], v["P3"]], [Zn, v["R"]]])
        mid = np.block([
            [np.zeros((2 * n, 2 * n)), PR2.T],
            [PR2, np.zeros((3 * n, 3 * n))],
        ])
        return top1.T @ mid @ top1 + v["lam1"] * unc1_quad

    def robust_long(v):
        PR = np.block([
            [v["P1"], Zn, Zn],
            [v["P2"], v["P3"], Zn],
            [Zn, Zn, v["R"]],
        ])
        mid = np.block([
            [np.zeros((3 * n, 3 * n)), PR.T],
            [PR, np.zeros((3 * n, 3 * n))],
        ])
        return top2.T @ mid @ top2 + v["lam2"] * unc2_quad

    variables = (
        DecisionVariable("P1", (n, n), symmetric=True, positive_definite=True),
        DecisionVariable("P2", (n, n)),
        DecisionVariable("P3", (n, n)),
        DecisionVariable("R", (n, n), symmetric=True, positive_definite=True),
        DecisionVariable("lam1", (), lower_bound=SCALAR_LOWER_BOUND),
        DecisionVariable("lam2", (), lower_bound=SCALAR_LOWER_BOUND),
    )
    constraints = (
        LmiConstraint("robust_3n", 3 * n, robust_short),
        LmiConstraint("robust_4n", 4 * n, robust_long),
    )
    return LmiProblem(
        variables, constraints,
        metadata={"kind": "analysis", "h": h, "n": n, "m": m,
                  "multiplier_scale": scale},
        homogeneous=True,
    )


# ---------------------------------------------------------------------------
# data-driven design LMIs
# ---------------------------------------------------------------------------

def _design_factor(K: np.ndarray, h: float, R_fixed: np.ndarray,
                   variant: str) -> np.ndarray:
    """Outer factor of the design inequalities, shape (8n+m) x (4n+m).

    Column blocks: three dual coordinates (a, b, c) and the uncertainty input
    stack (zx, zu). `variant` selects the short-horizon ("inv_h") or the
    long-horizon ("scaled_h") mapped rows; they differ in the third mapped row
    and in where the gain enters.
    """
    m, n = K.shape
    cols = BlockLayout([("a", n), ("b", n), ("c", n), ("zx", n), ("zu", m)])
    rows = BlockLayout([
        ("id_a", n), ("id_b", n), ("id_c", n),
        ("map_a", n), ("map_b", n), ("map_c", n),
        ("unc_zx", n), ("unc_zu", m), ("unc_y", n),
    ])
    In = np.eye(n)
    G = BlockMatrix(rows, cols)
    G.place("id_a", "a", In)
    G.place("id_b", "b", In)
    G.place("id_c", "c", In)
    G.place("map_a", "zx", In)
    G.place("map_a", "zu", K.T)
    G.place("map_b", "a", In)
    G.place("map_b", "b", -In)
    if variant == "inv_h":
        G.place("map_b", "c", R_fixed)
        G.place("map_c", "c", -1.0 / (2.0 * h) * In)
    elif variant == "scaled_h":
        G.place("map_c", "c", -0.5 * h * In)
        G.place("map_c", "zu", -h * K.T)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    G.place("unc_zx", "zx", In)
    G.place("unc_zu", "zu", np.eye(m))
    G.place("unc_y", "b", In)
    return G.array()


def assemble_design(cset: ConsistencySet, Q1_fixed: np.ndarray,
                    R_fixed: np.ndarray, h: float) -> LmiProblem:
    """Gain-design LMIs, convex in (K, Q2, Q3, lam1, lam2) for fixed Q1 and R.

    The gain enters the outer factors only against the fixed blocks, so the
    system stays affine in the declared variables (asserted by the probe).
    Q3 + Q3^T > 0 is carried as an extra constraint.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    Q1_fixed = np.atleast_2d(np.asarray(Q1_fixed, dtype=float))
    R_fixed = np.atleast_2d(np.asarray(R_fixed, dtype=float))
    n, m = cset.n, cset.m
    if Q1_fixed.shape != (n, n) or R_fixed.shape != (n, n):
        raise ValueError("Q1_fixed and R_fixed must be n x n")
    if np.linalg.eigvalsh(0.5 * (Q1_fixed + Q1_fixed.T)).min() <= 0:
        raise ValueError("Q1_fixed must be positive definite")
    if np.linalg.eigvalsh(0.5 * (R_fixed + R_fixed.T)).min() <= 0:
        raise ValueError("R_fixed must be positive definite")
    scale = np.linalg.norm(cset.Pc, 2)
    Pc = cset.Pc / scale
    R_inv = np.linalg.inv(R_fixed)
    R_inv = 0.5 * (R_inv + R_inv.T)
    Zn = np.zeros((n, n))

    def make_constraint(variant, lam_name, r_block):
        def build(v):
            G = _design_factor(v["K"], h, R_fixed, variant)
            top, unc = G[: 6 * n], G[6 * n:]
            Q = np.block([[Q1_fixed, Zn], [v["Q2"], v["Q3"]]])
            QR = np.block([
                [Q, np.zeros((2 * n, n))],
                [np.zeros((n, 2 * n)), r_block],
            ])
            mid = np.block([
                [np.zeros((3 * n, 3 * n)), QR.T],
                [QR, np.zeros((3 * n, 3 * n))],
            ])
            return top.T @ mid @ top + v[lam_name] * (unc.T @ Pc @ unc)

        return build

    def q3_definite(v):
        return -(v["Q3"] + v["Q3"].T)

    variables = (
        DecisionVariable("K", (m, n)),
        DecisionVariable("Q2", (n, n)),
        DecisionVariable("Q3", (n, n)),
        DecisionVariable("lam1", (), lower_bound=SCALAR_LOWER_BOUND),
        DecisionVariable("lam2", (), lower_bound=SCALAR_LOWER_BOUND),
    )
    constraints = (
        LmiConstraint("design_inv_h", 4 * n + m,
                      make_constraint("inv_h", "lam1", R_fixed)),
        LmiConstraint("design_scaled_h", 4 * n + m,
                      make_constraint("scaled_h", "lam2", R_inv)),
        LmiConstraint("q3_definite", n, q3_definite),
    )
    return LmiProblem(
        variables, constraints,
        metadata={"kind": "design", "h": h, "n": n, "m": m,
                  "multiplier_scale": scale,
                  "Q1_fixed": Q1_fixed, "R_fixed": R_fixed},
        homogeneous=False,
    )
