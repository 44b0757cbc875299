"""Infinite-network default cascade: the edge-default recursion a -> G(a).

Array conventions follow :mod:`gkcascade.degree_model`: node quantities are
indexed ``[j_idx, k_idx]``, edge-default probabilities ``sigma`` are stored per
out-degree only (they do not depend on the in-degree end), and ``a`` is indexed
by in-degree.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .balance_sheets import ReducedAccounting, ThresholdTable, thresholds
from .degree_model import DegreeModel
from .errors import MissingInDegreeMass, MissingOutDegreeMass, NotConverged

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000


@dataclass(frozen=True, eq=False)
class ShockSpec:
    """Initial default probability ``rho0[j_idx, k_idx]`` per node type."""
    rho0: np.ndarray

    def __post_init__(self):
        rho0 = np.array(self.rho0, dtype=float)
        if np.any(rho0 < 0) or np.any(rho0 > 1):
            raise ValueError("shock probabilities must lie in [0, 1]")
        rho0.setflags(write=False)
        object.__setattr__(self, "rho0", rho0)

    @classmethod
    def uniform(cls, model: DegreeModel, value: float) -> "ShockSpec":
        return cls(np.full(model.P.shape, float(value)))


# --- binomial tails ----------------------------------------------------------

@lru_cache(maxsize=None)
def _log_binom_row(n: int) -> np.ndarray:
    row = np.array([math.lgamma(n + 1) - math.lgamma(m + 1) - math.lgamma(n - m + 1)
                    for m in range(n + 1)])
    row.setflags(write=False)
    return row


def binomial_tails(n: int, p: float) -> np.ndarray:
    """``t[m] = P[X >= m]`` for X ~ Bin(n, p) and m = 0..n+1.

    Each pmf term is evaluated in log space (no factorial overflow); the tail is
    accumulated from m = n downwards so small tails keep full relative precision.
    """
    tails = np.zeros(n + 2)
    if p <= 0.0:
        tails[0] = 1.0
        return tails
    if p >= 1.0:
        tails[: n + 1] = 1.0
        return tails
    m = np.arange(n + 1)
    pmf = np.exp(_log_binom_row(n) + m * math.log(p) + (n - m) * math.log1p(-p))
    tails[: n + 1] = np.cumsum(pmf[::-1])[::-1]
    tails[0] = 1.0
    return np.minimum(tails, 1.0)


def binomial_tail(n: int, m, p: float) -> float:
    """P[X >= m] for X ~ Bin(n, p); ``m`` may be ``inf``."""
    if m <= 0:
        return 1.0
    if m > n:
        return 0.0
    return float(binomial_tails(n, p)[int(m)])


# --- the three update maps -------------------------------------------------

def edge_update(rho: np.ndarray, model: DegreeModel) -> np.ndarray:
    """Edge default probability per out-degree: ``sigma_k = sum_j rho_jk P_jk / P+_k``."""
    p_plus = model.p_plus
    missing = (p_plus == 0) & (model.q_plus > 0)
    if np.any(missing):
        ks = [model.out_degrees[i] for i in np.nonzero(missing)[0]]
        raise MissingOutDegreeMass(f"edges leave out-degree(s) {ks} with no node mass")
    num = (np.asarray(rho) * model.P).sum(axis=0)
    return np.divide(num, p_plus, out=np.zeros_like(num), where=p_plus > 0)


def sigma_view(sigma: np.ndarray, model: DegreeModel) -> np.ndarray:
    """The ``[k_idx, j_idx]`` edge-type view of a per-out-degree sigma."""
    return np.repeat(np.asarray(sigma)[:, None], len(model.in_degrees), axis=1)


def aggregate_a(sigma: np.ndarray, model: DegreeModel) -> np.ndarray:
    """Default probability of an edge entering in-degree j: ``sum_k Q_kj sigma_k / Q-_j``.

    ``sigma`` may be per out-degree (shape ``(n_out,)``) or the full ``[k, j]`` view.
    """
    q_minus = model.q_minus
    missing = (q_minus == 0) & (model.p_minus > 0) & (model.j >= 1)
    if np.any(missing):
        js = [model.in_degrees[i] for i in np.nonzero(missing)[0]]
        raise MissingInDegreeMass(f"in-degree(s) {js} have nodes but no edge mass")
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim == 1:
        num = model.Q.T @ sigma
    else:
        num = (model.Q * sigma).sum(axis=0)
    return np.divide(num, q_minus, out=np.zeros_like(num), where=q_minus > 0)


def node_update(a: np.ndarray, shock: ShockSpec, table: ThresholdTable) -> np.ndarray:
    """Probability a type-(j,k) node outside the seed set has >= M_jk defaulted in-edges."""
    rho = np.zeros(table.M.shape)
    for ji, j in enumerate(table.in_degrees):
        if j == 0:
            continue
        tails = binomial_tails(j, float(a[ji]))
        M = table.M[ji]
        ok = M <= j
        rho[ji, ok] = tails[M[ok].astype(int)]
    return (1.0 - shock.rho0) * rho


def initial_state(shock: ShockSpec, model: DegreeModel) -> tuple[np.ndarray, np.ndarray]:
    sigma0 = edge_update(shock.rho0, model)
    return sigma0, aggregate_a(sigma0, model)


def cascade_step(a_prev, sigma0, shock: ShockSpec, table: ThresholdTable, model: DegreeModel):
    """One application of G; returns ``(rho_n, sigma_n, a_n)``.

    The new edge probabilities add the seed contribution back in:
    ``a_j = sum_k Q_kj (sigma0_k + sigma_k) / Q-_j``.
    """
    rho = node_update(a_prev, shock, table)
    sigma = edge_update(rho, model)
    a = aggregate_a(sigma0 + sigma, model)
    return rho, sigma, a


# --- fixed-point solve ------------------------------------------------------

@dataclass
class CascadeStep:
    n: int
    rho: np.ndarray
    sigma: np.ndarray
    a: np.ndarray


@dataclass
class CascadeSolution:
    model: DegreeModel
    steps: list[CascadeStep] = field(repr=False)
    converged: bool
    n_steps: int
    a: np.ndarray
    rho: np.ndarray
    rho0: np.ndarray
    monotone: bool

    @property
    def default_prob(self) -> np.ndarray:
        """Final default probability per node type (seed plus triggered)."""
        return self.rho0 + self.rho

    @property
    def size(self) -> float:
        """Expected fraction of defaulted nodes."""
        return float((self.default_prob * self.model.P).sum())


def solve_cascade(model: DegreeModel, acct: ReducedAccounting, shock: ShockSpec,
                  tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                  record: bool = True, strict: bool = False) -> CascadeSolution:
    """Iterate ``a <- G(a)`` from the seed state until the sup-norm step is below ``tol``.

    A run that exhausts ``max_iter`` is returned with ``converged=False`` (and a
    warning), or raises :class:`NotConverged` carrying it when ``strict``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    table = thresholds(acct)
    sigma0, a = initial_state(shock, model)
    rho = np.zeros(model.P.shape)
    steps = [CascadeStep(0, shock.rho0.copy(), sigma0, a)] if record else []
    converged = False
    monotone = True
    n = 0
    while n < max_iter:
        n += 1
        rho, sigma, a_new = cascade_step(a, sigma0, shock, table, model)
        if np.any(a_new < a - 1e-15):
            monotone = False
        if record:
            steps.append(CascadeStep(n, rho, sigma, a_new))
        delta = float(np.max(np.abs(a_new - a))) if a.size else 0.0
        a = a_new
        if delta < tol:
            converged = True
            break
    sol = CascadeSolution(model, steps, converged, n, a, rho, shock.rho0.copy(), monotone)
    if not converged:
        if strict:
            raise NotConverged(f"no convergence after {max_iter} steps", partial=sol)
        warnings.warn(f"cascade recursion did not converge in {max_iter} steps", RuntimeWarning)
    return sol


def write_trajectory(sol: CascadeSolution, fh) -> None:
    """Long-format CSV: step, index, quantity, value."""
    m = sol.model
    out = csv.writer(fh, lineterminator="\n")
    out.writerow(["step", "index", "quantity", "value"])
    for st in sol.steps:
        for ji, j in enumerate(m.in_degrees):
            out.writerow([st.n, f"j={j}", "a", repr(float(st.a[ji]))])
        for ki, k in enumerate(m.out_degrees):
            for j in m.in_degrees:
                out.writerow([st.n, f"k={k};j={j}", "sigma", repr(float(st.sigma[ki]))])
        for ji, j in enumerate(m.in_degrees):
            for ki, k in enumerate(m.out_degrees):
                out.writerow([st.n, f"j={j};k={k}", "rho", repr(float(st.rho[ji, ki]))])
