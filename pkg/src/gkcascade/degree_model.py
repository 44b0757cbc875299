"""Node-type and edge-type distributions of the infinite random network.

A :class:`DegreeModel` holds two dense matrices over a finite degree support:

* ``P[j_idx, k_idx]`` -- probability that a node has in-degree ``in_degrees[j_idx]``
  and out-degree ``out_degrees[k_idx]``;
* ``Q[k_idx, j_idx]`` -- probability that an edge leaves a node of out-degree
  ``out_degrees[k_idx]`` and enters a node of in-degree ``in_degrees[j_idx]``.

Note the index order of ``Q`` is (out, in), matching the (k, j) edge-type label.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, NamedTuple

import numpy as np

from .errors import (
    DegenerateDegreeVariance,
    InconsistentMeanDegree,
    InconsistentModel,
    MissingOutDegreeMass,
    ModelError,
    ZeroMeanDegree,
)

NORM_TOL = 1e-12
CONSISTENCY_TOL = 1e-9


class Violation(NamedTuple):
    side: str  # "out" (Q+ vs k P+/z) or "in" (Q- vs j P-/z)
    degree: int
    residual: float

    def __str__(self):
        return f"{self.side}-degree {self.degree}: residual {self.residual:+.3e}"


def _check_support(degrees, name):
    degrees = tuple(int(d) for d in degrees)
    if not degrees:
        raise ModelError(f"{name} must be non-empty")
    if any(d < 0 for d in degrees):
        raise ModelError(f"{name} must be non-negative: {degrees}")
    if len(set(degrees)) != len(degrees):
        raise ModelError(f"{name} has duplicates: {degrees}")
    if list(degrees) != sorted(degrees):
        raise ModelError(f"{name} must be increasing: {degrees}")
    return degrees


def _check_dist(mat, name):
    if np.any(~np.isfinite(mat)) or np.any(mat < 0) or np.any(mat > 1):
        raise ModelError(f"{name} entries must lie in [0, 1]")
    total = float(mat.sum())
    if abs(total - 1.0) > NORM_TOL:
        raise ModelError(f"{name} sums to {total!r}, expected 1")


def node_marginals(P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(P_plus, P_minus)``: out-degree marginal and in-degree marginal."""
    return P.sum(axis=0), P.sum(axis=1)


def edge_marginals(Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(Q_plus, Q_minus)``: out-degree marginal and in-degree marginal."""
    return Q.sum(axis=1), Q.sum(axis=0)


def mean_degree(P: np.ndarray, in_degrees, out_degrees, tol: float = NORM_TOL) -> float:
    p_plus, p_minus = node_marginals(np.asarray(P, dtype=float))
    z_out = float(np.dot(np.asarray(out_degrees, dtype=float), p_plus))
    z_in = float(np.dot(np.asarray(in_degrees, dtype=float), p_minus))
    if abs(z_out - z_in) > tol:
        raise InconsistentMeanDegree(f"mean out-degree {z_out!r} != mean in-degree {z_in!r}")
    if z_out <= 0:
        raise ZeroMeanDegree("mean degree is zero")
    return z_out


@dataclass(frozen=True, eq=False)
class DegreeModel:
    in_degrees: tuple[int, ...]
    out_degrees: tuple[int, ...]
    P: np.ndarray
    Q: np.ndarray
    z: float = field(init=False)

    def __post_init__(self):
        in_deg = _check_support(self.in_degrees, "in_degrees")
        out_deg = _check_support(self.out_degrees, "out_degrees")
        P = np.array(self.P, dtype=float)
        Q = np.array(self.Q, dtype=float)
        if P.shape != (len(in_deg), len(out_deg)):
            raise ModelError(f"P has shape {P.shape}, expected {(len(in_deg), len(out_deg))}")
        if Q.shape != (len(out_deg), len(in_deg)):
            raise ModelError(f"Q has shape {Q.shape}, expected {(len(out_deg), len(in_deg))}")
        _check_dist(P, "P")
        _check_dist(Q, "Q")
        k = np.array(out_deg)[:, None]
        j = np.array(in_deg)[None, :]
        if np.any((Q > 0) & ((k < 1) | (j < 1))):
            raise ModelError("Q puts mass on an edge type with zero in- or out-degree")
        P.setflags(write=False)
        Q.setflags(write=False)
        object.__setattr__(self, "in_degrees", in_deg)
        object.__setattr__(self, "out_degrees", out_deg)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "z", mean_degree(P, in_deg, out_deg))

    @classmethod
    def from_entries(cls, P: Mapping, Q: Mapping, in_degrees=None, out_degrees=None):
        """Build from sparse ``{(j, k): p}`` and ``{(k, j): q}`` maps; absent pairs are zero."""
        if in_degrees is None:
            in_degrees = sorted({j for j, _ in P} | {j for _, j in Q})
        if out_degrees is None:
            out_degrees = sorted({k for _, k in P} | {k for k, _ in Q})
        jx = {d: i for i, d in enumerate(in_degrees)}
        kx = {d: i for i, d in enumerate(out_degrees)}
        Pm = np.zeros((len(in_degrees), len(out_degrees)))
        Qm = np.zeros((len(out_degrees), len(in_degrees)))
        try:
            for (j, k), p in P.items():
                Pm[jx[j], kx[k]] += float(p)
            for (k, j), q in Q.items():
                Qm[kx[k], jx[j]] += float(q)
        except KeyError as exc:
            raise ModelError(f"degree {exc.args[0]} is not in the support") from None
        return cls(tuple(in_degrees), tuple(out_degrees), Pm, Qm)

    # marginals as arrays aligned with the supports
    @property
    def p_plus(self) -> np.ndarray:
        return self.P.sum(axis=0)

    @property
    def p_minus(self) -> np.ndarray:
        return self.P.sum(axis=1)

    @property
    def q_plus(self) -> np.ndarray:
        return self.Q.sum(axis=1)

    @property
    def q_minus(self) -> np.ndarray:
        return self.Q.sum(axis=0)

    @property
    def j(self) -> np.ndarray:
        return np.array(self.in_degrees, dtype=float)

    @property
    def k(self) -> np.ndarray:
        return np.array(self.out_degrees, dtype=float)

    def node_types(self):
        """List of ``(j, k, p)`` for node types with positive probability."""
        return [(self.in_degrees[a], self.out_degrees[b], float(self.P[a, b]))
                for a, b in zip(*np.nonzero(self.P))]

    def edge_types(self):
        """List of ``(k, j, q)`` for edge types with positive probability."""
        return [(self.out_degrees[a], self.in_degrees[b], float(self.Q[a, b]))
                for a, b in zip(*np.nonzero(self.Q))]


def marginals(model: DegreeModel, dist: str = "P") -> tuple[dict, dict]:
    """Marginals of ``P`` or ``Q`` as ``(plus, minus)`` dicts keyed by degree."""
    if dist == "P":
        plus, minus = node_marginals(model.P)
    elif dist == "Q":
        plus, minus = edge_marginals(model.Q)
    else:
        raise ValueError(f"dist must be 'P' or 'Q', got {dist!r}")
    return (dict(zip(model.out_degrees, plus.tolist())),
            dict(zip(model.in_degrees, minus.tolist())))


def validate_consistency(model: DegreeModel, tol: float = CONSISTENCY_TOL) -> list[Violation]:
    """Check ``Q+_k = k P+_k / z`` and ``Q-_j = j P-_j / z`` for every degree.

    Violations are returned, not raised; an empty list means the model is consistent.
    """
    report = []
    out_res = model.q_plus - model.k * model.p_plus / model.z
    in_res = model.q_minus - model.j * model.p_minus / model.z
    for k, r in zip(model.out_degrees, out_res):
        if abs(r) > tol:
            report.append(Violation("out", k, float(r)))
    for j, r in zip(model.in_degrees, in_res):
        if abs(r) > tol:
            report.append(Violation("in", j, float(r)))
    return report


def ensure_consistent(model: DegreeModel, tol: float = CONSISTENCY_TOL) -> DegreeModel:
    violations = validate_consistency(model, tol)
    if violations:
        raise InconsistentModel(violations)
    return model


def joint_correlation(joint: np.ndarray, row_values, col_values) -> float:
    """Pearson correlation of the two coordinates of a joint pmf on a grid."""
    x = np.asarray(row_values, dtype=float)
    y = np.asarray(col_values, dtype=float)
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    # centred moments lose less precision than E[x^2] - E[x]^2
    x = x - px @ x
    y = y - py @ y
    var_x = float(px @ x**2)
    var_y = float(py @ y**2)
    scale = max(1.0, float(np.max(np.abs(x))) ** 2, float(np.max(np.abs(y))) ** 2)
    # relative guard: the variance of a point mass comes out as rounding noise
    if var_x <= 1e-14 * scale or var_y <= 1e-14 * scale:
        raise DegenerateDegreeVariance("a marginal has zero variance; correlation undefined")
    cov = float(x @ (joint - np.outer(px, py)) @ y)
    return float(np.clip(cov / np.sqrt(var_x * var_y), -1.0, 1.0))


def edge_assortativity(model: DegreeModel) -> float:
    """Degree correlation r_Q between the out-degree and in-degree ends of an edge."""
    return joint_correlation(model.Q, model.k, model.j)


def in_degree_joint(model: DegreeModel) -> np.ndarray:
    """``B[j, j']``: in-degrees of the source and target of a random edge.

    ``B_{jj'} = sum_k P_{jk} Q_{kj'} / P+_k``.
    """
    p_plus = model.p_plus
    edge_mass = model.q_plus
    missing = (p_plus == 0) & (edge_mass > 0)
    if np.any(missing):
        k = [model.out_degrees[i] for i in np.nonzero(missing)[0]]
        raise MissingOutDegreeMass(f"edges leave out-degree(s) {k} which have no node mass")
    cond = np.divide(model.P, p_plus, out=np.zeros_like(model.P), where=p_plus > 0)
    return cond @ model.Q


def graph_assortativity(model: DegreeModel) -> float:
    """In-degree correlation r of the two endpoints of a random edge."""
    return joint_correlation(in_degree_joint(model), model.j, model.j)


# --- model files -----------------------------------------------------------

def parse_prob(value) -> float:
    """Parse a probability given as a number, a decimal string or ``"num/den"``."""
    if isinstance(value, (int, float)):
        return float(value)
    try:
        return float(Fraction(str(value).strip()))
    except (ValueError, ZeroDivisionError):
        raise ModelError(f"cannot parse probability {value!r}") from None


def model_from_dict(doc: Mapping, check: bool = True) -> DegreeModel:
    try:
        P = {(int(e["j"]), int(e["k"])): parse_prob(e["p"]) for e in doc["P"]}
        Q = {(int(e["k"]), int(e["j"])): parse_prob(e["q"]) for e in doc["Q"]}
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed model document: {exc}") from None
    model = DegreeModel.from_entries(P, Q, doc.get("in_degrees"), doc.get("out_degrees"))
    return ensure_consistent(model) if check else model


def model_to_dict(model: DegreeModel) -> dict:
    def fmt(x):
        # exact short rationals survive a round trip; anything else as repr float
        frac = Fraction(x).limit_denominator(10**6)
        return f"{frac.numerator}/{frac.denominator}" if float(frac) == x else repr(x)

    return {
        "in_degrees": list(model.in_degrees),
        "out_degrees": list(model.out_degrees),
        "P": [{"j": j, "k": k, "p": fmt(p)} for j, k, p in model.node_types()],
        "Q": [{"k": k, "j": j, "q": fmt(q)} for k, j, q in model.edge_types()],
    }


def load_model(path, check: bool = True) -> DegreeModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh), check=check)


def save_model(model: DegreeModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n")
