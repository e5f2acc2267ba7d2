"""JSON file formats: datasets, consistency sets, certificates, trajectories.

Numbers are written as IEEE-754 doubles in decimal (Python's shortest
round-trip representation), so save/load round trips are bit-exact.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import jsonschema
import numpy as np

from .consistency import ConsistencySet, DataSet, NoiseBound
from .lmi import AnalysisCertificate, DesignCertificate
from .system import Trajectory

_NUM_ROW = {"type": "array", "items": {"type": "number"}}
_NUM_MATRIX = {"type": "array", "items": _NUM_ROW}

DATASET_SCHEMA = {
    "type": "object",
    "required": ["n", "m", "m_d", "N", "tau", "X", "U", "Xdot", "Bd", "noise"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "m": {"type": "integer", "minimum": 0},
        "m_d": {"type": "integer", "minimum": 1},
        "N": {"type": "integer", "minimum": 1},
        "tau": _NUM_ROW,
        "X": _NUM_MATRIX,
        "U": _NUM_MATRIX,
        "Xdot": _NUM_MATRIX,
        "Bd": _NUM_MATRIX,
        "noise": {
            "type": "object",
            "required": ["Qd", "Sd", "Rd"],
            "properties": {"Qd": _NUM_MATRIX, "Sd": _NUM_MATRIX, "Rd": _NUM_MATRIX},
        },
        "meta": {"type": "object"},
    },
}


class SchemaError(ValueError):
    """A file does not match its declared schema; the message names the field."""


def _matrix(rows, name) -> np.ndarray:
    M = np.asarray(rows, dtype=float)
    if M.ndim == 1:
        M = M.reshape(1, -1) if M.size else M.reshape(0, 0)
    return M


def _validate(payload: dict, schema: dict, label: str) -> None:
    try:
        jsonschema.validate(payload, schema)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"{label}: invalid field '{path}': {exc.message}") from exc


def config_hash(obj) -> str:
    """Stable short hash of a JSON-able configuration object."""
    blob = json.dumps(obj, sort_keys=True, default=_default).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def _dump(payload: dict, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, default=_default)


def _load(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

def dataset_payload(data: DataSet, noise: NoiseBound) -> dict:
    return {
        "n": data.n,
        "m": data.m,
        "m_d": data.m_d,
        "N": data.N,
        "tau": data.tau.tolist(),
        "X": data.X.tolist(),
        "U": data.U.tolist(),
        "Xdot": data.Xdot.tolist(),
        "Bd": data.Bd.tolist(),
        "noise": {"Qd": noise.Qd.tolist(), "Sd": noise.Sd.tolist(),
                  "Rd": noise.Rd.tolist()},
        "meta": {**data.meta, **{f"noise_{k}": v for k, v in noise.meta.items()}},
    }


def save_dataset(path, data: DataSet, noise: NoiseBound) -> None:
    _dump(dataset_payload(data, noise), path)


def dataset_from_payload(payload: dict, label: str = "dataset"):
    _validate(payload, DATASET_SCHEMA, label)
    n, m, m_d, N = (payload[k] for k in ("n", "m", "m_d", "N"))
    X = _matrix(payload["X"], "X")
    U = _matrix(payload["U"], "U")
    Xdot = _matrix(payload["Xdot"], "Xdot")
    Bd = _matrix(payload["Bd"], "Bd")
    tau = np.asarray(payload["tau"], dtype=float)
    checks = [
        ("X", X.shape, (n, N)),
        ("U", U.shape, (m, N)),
        ("Xdot", Xdot.shape, (n, N)),
        ("Bd", Bd.shape, (n, m_d)),
        ("tau", (tau.size,), (N,)),
    ]
    for name, got, want in checks:
        if tuple(got) != tuple(want):
            raise SchemaError(
                f"{label}: field '{name}' has shape {tuple(got)}, "
                f"header declares {tuple(want)}"
            )
    noise = NoiseBound(
        Qd=_matrix(payload["noise"]["Qd"], "Qd"),
        Sd=_matrix(payload["noise"]["Sd"], "Sd"),
        Rd=_matrix(payload["noise"]["Rd"], "Rd"),
        meta={k[len("noise_"):]: v for k, v in payload.get("meta", {}).items()
              if k.startswith("noise_")},
    )
    if noise.N != N:
        raise SchemaError(f"{label}: field 'noise.Qd' is for N={noise.N}, header declares N={N}")
    if noise.m_d != m_d:
        raise SchemaError(f"{label}: field 'noise.Rd' is for m_d={noise.m_d}, "
                          f"header declares m_d={m_d}")
    data = DataSet(tau=tau, X=X, U=U, Xdot=Xdot, Bd=Bd,
                   meta={k: v for k, v in payload.get("meta", {}).items()
                         if not k.startswith("noise_")})
    return data, noise


def load_dataset(path):
    """Load a dataset file; returns (DataSet, NoiseBound)."""
    return dataset_from_payload(_load(path), label=str(path))


# ---------------------------------------------------------------------------
# consistency sets (cache between CLI invocations)
# ---------------------------------------------------------------------------

def save_consistency_set(path, cset: ConsistencySet) -> None:
    _dump({
        "Pc": cset.Pc.tolist(),
        "n": cset.n,
        "m": cset.m,
        "m_d": cset.m_d,
        "inertia": list(cset.inertia),
        "tol_eig": cset.tol_eig,
        "Pc_dual": None if cset.Pc_dual is None else cset.Pc_dual.tolist(),
        "dual_condition": cset.dual_condition,
        "meta": cset.meta,
    }, path)


def load_consistency_set(path) -> ConsistencySet:
    p = _load(path)
    return ConsistencySet(
        Pc=np.asarray(p["Pc"], dtype=float),
        n=int(p["n"]),
        m=int(p["m"]),
        m_d=int(p["m_d"]),
        inertia=tuple(p["inertia"]),
        tol_eig=float(p["tol_eig"]),
        Pc_dual=None if p.get("Pc_dual") is None else np.asarray(p["Pc_dual"], dtype=float),
        dual_condition=p.get("dual_condition"),
        meta=p.get("meta", {}),
    )


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

def save_analysis_certificate(path, cert: AnalysisCertificate, context: dict,
                              seed=None, config=None) -> None:
    """Certificate plus enough context (dataset or model) to re-verify it."""
    _dump({
        "kind": "analysis",
        "mode": cert.mode,
        "h": cert.h,
        "K": cert.gain.tolist(),
        "witnesses": {
            "P1": cert.P1.tolist(), "P2": cert.P2.tolist(),
            "P3": cert.P3.tolist(), "R": cert.R.tolist(),
            "lam1": cert.lam1, "lam2": cert.lam2,
        },
        "margin": cert.margin,
        "trace": cert.trace,
        "seed": seed,
        "config_hash": config_hash(config) if config is not None else None,
        "meta": cert.meta,
        "context": context,
    }, path)


def save_design_certificate(path, cert: DesignCertificate, context: dict,
                            seed=None, config=None) -> None:
    _dump({
        "kind": "design",
        "h": cert.h,
        "K": cert.K.tolist(),
        "witnesses": {
            "Q1": cert.Q1.tolist(), "Q2": cert.Q2.tolist(),
            "Q3": cert.Q3.tolist(), "R": cert.R.tolist(),
            "lam1": cert.lam1, "lam2": cert.lam2,
        },
        "margin": cert.margin,
        "trace": cert.trace,
        "seed": seed,
        "config_hash": config_hash(config) if config is not None else None,
        "meta": cert.meta,
        "context": context,
    }, path)


CERTIFICATE_SCHEMA = {
    "type": "object",
    "required": ["kind", "h", "K", "context"],
    "properties": {
        "kind": {"enum": ["analysis", "design"]},
        "h": {"type": "number"},
        "K": _NUM_MATRIX,
        "context": {"type": "object"},
    },
}


def load_certificate(path) -> dict:
    payload = _load(path)
    _validate(payload, CERTIFICATE_SCHEMA, str(path))
    return payload


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

def save_trajectory(path, traj: Trajectory) -> None:
    _dump({
        "grid": traj.grid.tolist(),
        "states": traj.states.tolist(),
        "inputs": traj.inputs.tolist(),
        "derivatives": None if traj.derivatives is None else traj.derivatives.tolist(),
        "meta": traj.meta,
    }, path)


def load_trajectory(path) -> Trajectory:
    p = _load(path)
    return Trajectory(
        grid=np.asarray(p["grid"], dtype=float),
        states=np.asarray(p["states"], dtype=float),
        inputs=np.asarray(p["inputs"], dtype=float),
        derivatives=None if p.get("derivatives") is None
        else np.asarray(p["derivatives"], dtype=float),
        meta=p.get("meta", {}),
    )
