"""Cascade condition, critical buffer and global-cascade frequency."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .balance_sheets import ReducedAccounting, ThresholdTable, thresholds
from .degree_model import DegreeModel
from .errors import MissingMass, NoBracket, NotConverged

log = logging.getLogger(__name__)

DENSE_CHECK_MAX_DIM = 8


def _divide(num, den, what):
    """num / den with 0/0 -> 0; a positive numerator over zero mass is an error."""
    num = np.asarray(num, dtype=float)
    den = np.broadcast_to(np.asarray(den, dtype=float), num.shape)
    if np.any((den == 0) & (num != 0)):
        raise MissingMass(f"conditioning on zero {what} mass")
    return np.divide(num, den, out=np.zeros_like(num), where=den != 0)


# --- spectral radius ---------------------------------------------------------

def _dense_radius(M: np.ndarray) -> float:
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def irreducible_blocks(M: np.ndarray) -> list[np.ndarray]:
    """Index sets of the strongly connected components of the pattern of M.

    Uses the boolean transitive closure by repeated squaring, which is ample
    for the small matrices indexed by degree classes.
    """
    n = M.shape[0]
    reach = (M > 0) | np.eye(n, dtype=bool)
    for _ in range(max(1, int(np.ceil(np.log2(max(n, 2)))))):
        reach = (reach.astype(np.int64) @ reach.astype(np.int64)) > 0
    mutual = reach & reach.T
    seen = np.zeros(n, dtype=bool)
    blocks = []
    for i in range(n):
        if not seen[i]:
            members = np.nonzero(mutual[i])[0]
            seen[members] = True
            blocks.append(members)
    return blocks


def _perron_irreducible(M: np.ndarray, tol: float, max_iter: int, restarts: int, rng):
    """Shifted power iteration on an irreducible block; None if it fails to settle.

    ``M + s I`` is primitive with the same Perron vector, so the Collatz-Wielandt
    bounds min/max (Bx)_i / x_i close around rho(M) + s.
    """
    n = M.shape[0]
    shift = float(M.max())
    B = M + shift * np.eye(n)
    x0 = np.ones(n)
    for _ in range(restarts + 1):
        x = x0 / x0.sum()
        for _ in range(max_iter):
            y = B @ x
            ratio = y / x
            lo, hi = float(ratio.min()), float(ratio.max())
            if hi - lo <= tol * hi:
                return 0.5 * (lo + hi) - shift
            x = y / y.sum()
        x0 = rng.random(n) + 0.1
    return None


def spectral_radius(M, tol: float = 1e-10, max_iter: int = 100_000, restarts: int = 3,
                    seed: int = 0) -> float:
    """Perron root of a non-negative square matrix.

    The radius of a non-negative matrix is the largest radius among its
    irreducible diagonal blocks, each found by shifted power iteration with
    random restarts. Matrices up to 8x8 are cross-checked against a dense
    eigensolve, which also backs up a power iteration that fails to settle.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if np.any(M < 0):
        raise ValueError("matrix must be non-negative")
    n = M.shape[0]
    if n == 0 or not np.any(M):
        return 0.0
    rng = np.random.default_rng(seed)
    estimate = 0.0
    failed = False
    for block in irreducible_blocks(M):
        sub = M[np.ix_(block, block)]
        if len(block) == 1 or not np.any(sub):
            estimate = max(estimate, float(sub[0, 0]) if len(block) == 1 else 0.0)
            continue
        r = _perron_irreducible(sub, tol, max_iter, restarts, rng)
        if r is None:
            failed = True
        else:
            estimate = max(estimate, r)
    if n <= DENSE_CHECK_MAX_DIM:
        dense = _dense_radius(M)
        if failed or abs(estimate - dense) > 1e-6 * max(1.0, dense):
            log.debug("power iteration %s disagrees with dense radius %s", estimate, dense)
            estimate = dense
            failed = False
    if failed:
        raise NotConverged(f"power iteration did not converge in {max_iter} steps")
    return max(0.0, estimate)


# --- trigger matrix ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TriggerMatrix:
    in_degrees: tuple[int, ...]  # rows/columns, in-degrees >= 1 only
    D: np.ndarray
    spectral_radius: float


def _edge_index(model):
    js = [i for i, j in enumerate(model.in_degrees) if j >= 1]
    ks = [i for i, k in enumerate(model.out_degrees) if k >= 1]
    return np.array(js, dtype=int), np.array(ks, dtype=int)


def trigger_matrix(model: DegreeModel, table: ThresholdTable) -> TriggerMatrix:
    """``D[j, j'] = sum_k j' Q_kj P_j'k Gamma_j'k / (Q-_j P+_k)`` over in-degrees >= 1.

    D[j, j'] is the expected number of in-degree-j' edges reached through a
    vulnerable node from one in-degree-j edge.
    """
    js, _ = _edge_index(model)
    Q = model.Q[:, js]                       # [k, j]
    P = model.P[js, :]                       # [j', k]
    G = table.Gamma[js, :].astype(float)
    jp = model.j[js]
    q_minus = model.q_minus[js]
    p_plus = model.p_plus
    # term[j, j', k]
    num = Q.T[:, None, :] * (jp[None, :, None] * P[None, :, :] * G[None, :, :])
    den = q_minus[:, None, None] * p_plus[None, None, :]
    D = _divide(num, den, "edge or node").sum(axis=2)
    return TriggerMatrix(tuple(model.in_degrees[i] for i in js), D, spectral_radius(D))


def cascade_condition(model: DegreeModel, acct: ReducedAccounting) -> tuple[bool, float]:
    """Whether an infinitesimal seed grows to a global cascade (radius > 1)."""
    radius = trigger_matrix(model, thresholds(acct)).spectral_radius
    return radius > 1.0, radius


def radius_at(model: DegreeModel, w, gamma: float) -> float:
    acct = ReducedAccounting.uniform(gamma, w, model.in_degrees, model.out_degrees)
    return trigger_matrix(model, thresholds(acct)).spectral_radius


def default_bracket(w) -> tuple[float, float]:
    """A uniform-buffer bracket spanning every vulnerability switch."""
    w = np.asarray(w, dtype=float)
    w = w[np.isfinite(w)]
    return 0.5 * float(w.min()), 2.0 * float(w.max())


def critical_gamma(model: DegreeModel, w, bracket=None, tol: float = 1e-12) -> float:
    """Largest uniform buffer at which the cascade condition still holds.

    The radius is a non-increasing step function of the buffer that can only jump
    just above a weight w_j (where type j stops being vulnerable), so after
    bisecting to width ``tol`` the crossing is snapped to that weight.
    """
    lo, hi = default_bracket(w) if bracket is None else map(float, bracket)
    if not 0 < lo < hi:
        raise ValueError(f"invalid bracket ({lo}, {hi})")
    r_lo, r_hi = radius_at(model, w, lo), radius_at(model, w, hi)
    if not (r_lo > 1.0 >= r_hi):
        raise NoBracket(f"radius {r_lo:.6g} at {lo:.6g} and {r_hi:.6g} at {hi:.6g} "
                        "do not straddle 1")
    a, b = lo, hi
    while b - a > tol:
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        if radius_at(model, w, mid) > 1.0:
            a = mid
        else:
            b = mid
    weights = sorted({float(x) for x in np.asarray(w, dtype=float) if np.isfinite(x)})
    candidates = [x for x in weights if lo <= x < hi and radius_at(model, w, x) > 1.0]
    if not candidates:
        return a
    return max(candidates)


# --- global cascade frequency ------------------------------------------------

def _downstream_weights(model: DegreeModel):
    """``T[k, j']``: probability the node one edge downstream of an out-degree-k node has in-degree j'."""
    q_plus = model.q_plus
    return _divide(model.Q, q_plus[:, None], "out-degree edge")


def frequency_map(c, model: DegreeModel, table: ThresholdTable) -> np.ndarray:
    """One application of h over out-degrees.

    ``h_k(c) = sum_{j',k'} (Gamma c_k'^k' + 1 - Gamma) P_j'k' Q_kj' / (P-_j' Q+_k)``;
    out-degrees with no edge mass map to 1 (their nodes are never reached).
    """
    c = np.asarray(c, dtype=float)
    G = table.Gamma.astype(float)
    safe = G * c[None, :] ** model.k[None, :] + (1.0 - G)        # [j', k']
    inner = _divide((safe * model.P).sum(axis=1), model.p_minus, "in-degree node")
    T = _downstream_weights(model)
    h = T @ inner
    return np.where(model.q_plus > 0, h, 1.0)


@dataclass(frozen=True, eq=False)
class FrequencyResult:
    c: np.ndarray          # least fixed point of h, per out-degree
    f: float               # probability a single random seed triggers a global cascade
    edge_reach: float      # sum_k (1 - c_k) P+_k
    trivial: bool
    radius: float
    n_iter: int


def cascade_frequency(model: DegreeModel, acct: ReducedAccounting, tol: float = 1e-10,
                      max_iter: int = 100_000) -> FrequencyResult:
    """Size of the in-component of the giant vulnerable cluster.

    Iterates c <- h(c) from 0 to the least fixed point. A seed of out-degree k
    escapes the in-component only if all k downstream neighbours do, so the
    frequency is ``sum_k (1 - c_k^k) P+_k``.
    """
    table = thresholds(acct)
    holds, radius = cascade_condition(model, acct)
    p_plus = model.p_plus
    if not holds:
        c = np.ones(len(model.out_degrees))
        return FrequencyResult(c, 0.0, 0.0, True, radius, 0)
    c = np.zeros(len(model.out_degrees))
    for it in range(1, max_iter + 1):
        c_new = frequency_map(c, model, table)
        delta = float(np.max(np.abs(c_new - c)))
        c = c_new
        if delta < tol:
            break
    else:
        raise NotConverged(f"frequency fixed point not reached in {max_iter} steps")
    trivial = bool(np.all(c >= 1.0 - 1e-9))
    if trivial:
        return FrequencyResult(np.ones_like(c), 0.0, 0.0, True, radius, it)
    f = float(np.sum((1.0 - c ** model.k) * p_plus))
    reach = float(np.sum((1.0 - c) * p_plus))
    return FrequencyResult(c, f, reach, False, radius, it)


# --- D versus D-tilde --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SimilarityFactors:
    A: np.ndarray       # [j, k]  Q_kj / Q-_j
    Bf: np.ndarray      # [k, j'] j' P_j'k Gamma_j'k / P+_k
    Lambda: np.ndarray  # diag(k P+_k)


def similarity_factors(model: DegreeModel, table: ThresholdTable) -> SimilarityFactors:
    js, ks = _edge_index(model)
    A = _divide(model.Q[np.ix_(ks, js)].T, model.q_minus[js][:, None], "in-degree edge")
    G = table.Gamma[np.ix_(js, ks)].astype(float)
    num = (model.j[js][:, None] * model.P[np.ix_(js, ks)] * G).T
    Bf = _divide(num, model.p_plus[ks][:, None], "out-degree node")
    Lam = np.diag(model.k[ks] * model.p_plus[ks])
    return SimilarityFactors(A, Bf, Lam)


def dtilde_direct(model: DegreeModel, table: ThresholdTable) -> np.ndarray:
    """``Dt[k, k'] = sum_j' k' Q_kj' P_j'k' Gamma_j'k' / (Q+_k P-_j')`` over out-degrees >= 1."""
    js, ks = _edge_index(model)
    Q = model.Q[np.ix_(ks, js)]              # [k, j']
    P = model.P[np.ix_(js, ks)]              # [j', k']
    G = table.Gamma[np.ix_(js, ks)].astype(float)
    kp = model.k[ks]
    num = Q[:, :, None] * (P * G * kp[None, :])[None, :, :]     # [k, j', k']
    den = model.q_plus[ks][:, None, None] * model.p_minus[js][None, :, None]
    return _divide(num, den, "edge or node").sum(axis=1)


def dtilde_from_factors(f: SimilarityFactors) -> np.ndarray:
    """``(Lambda Bf A Lambda^-1)^T``; rows/columns with zero Lambda are left at zero."""
    lam = np.diag(f.Lambda)
    inv = np.divide(1.0, lam, out=np.zeros_like(lam), where=lam > 0)
    return (np.diag(lam) @ f.Bf @ f.A @ np.diag(inv)).T


@dataclass(frozen=True, eq=False)
class SimilarityCheck:
    d_radius: float
    dtilde_radius: float
    factors: SimilarityFactors
    dtilde_direct: np.ndarray
    dtilde_similar: np.ndarray


def similarity_check(model: DegreeModel, table: ThresholdTable) -> SimilarityCheck:
    factors = similarity_factors(model, table)
    direct = dtilde_direct(model, table)
    similar = dtilde_from_factors(factors)
    return SimilarityCheck(trigger_matrix(model, table).spectral_radius,
                           spectral_radius(direct), factors, direct, similar)
