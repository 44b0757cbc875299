"""Shared fixtures and hypothesis strategies.

Random consistent models are built by Sinkhorn scaling of random positive
matrices onto prescribed marginals: P gets node marginals with equal in- and
out-means, then Q gets the edge marginals those imply.
"""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import strategies as st

from gkcascade.balance_sheets import ReducedAccounting, gk_weights
from gkcascade.degree_model import DegreeModel


def sinkhorn(M, rows, cols, tol=1e-15, max_iter=20_000):
    M = np.array(M, dtype=float)
    for _ in range(max_iter):
        M *= (rows / M.sum(axis=1))[:, None]
        M *= (cols / M.sum(axis=0))[None, :]
        if np.max(np.abs(M.sum(axis=1) - rows)) < tol:
            break
    return M


def _same_mean_pair(rng, degrees):
    """Two positive distributions on ``degrees`` with equal means."""
    d = np.asarray(degrees, dtype=float)
    p = rng.dirichlet(np.ones(len(d)) * 2.0)
    if len(d) < 3:
        return p, p.copy()
    # direction orthogonal to both the all-ones vector and the degrees
    basis = np.linalg.svd(np.vstack([np.ones_like(d), d]))[2][2:]
    v = basis.T @ rng.normal(size=basis.shape[0])
    neg = v < 0
    t = 0.9 * np.min(p[neg] / -v[neg]) if neg.any() else 1.0
    q = p + rng.uniform(0, 1) * t * v
    q = np.clip(q, 1e-6, None)
    # restore the mean exactly by moving mass between the two extreme degrees
    q /= q.sum()
    gap = (p @ d - q @ d) / (d[-1] - d[0])
    q[-1] += gap
    q[0] -= gap
    return p, q


def random_model(rng, n_degrees=None, max_degree=12):
    """A random consistent DegreeModel with shared in/out degree support."""
    n_degrees = n_degrees or int(rng.integers(3, 6))
    degrees = np.sort(rng.choice(np.arange(1, max_degree + 1), size=n_degrees, replace=False))
    p_minus, p_plus = _same_mean_pair(rng, degrees)
    P = sinkhorn(rng.uniform(0.05, 1.0, (n_degrees, n_degrees)), p_minus, p_plus)
    P /= P.sum()
    # re-derive marginals from the scaled P so the edge marginals match it exactly
    p_minus, p_plus = P.sum(axis=1), P.sum(axis=0)
    d = degrees.astype(float)
    z = d @ p_plus
    Q = sinkhorn(rng.uniform(0.05, 1.0, (n_degrees, n_degrees)), d * p_plus / z, d * p_minus / z)
    Q /= Q.sum()
    return DegreeModel(tuple(int(x) for x in degrees), tuple(int(x) for x in degrees), P, Q)


def random_accounting(rng, model, p_vulnerable=0.5):
    """GK weights with per-type buffers chosen to make each type vulnerable at random."""
    w = gk_weights(model.in_degrees)
    vuln = rng.random(model.P.shape) < p_vulnerable
    scale = np.where(vuln, rng.uniform(0.1, 1.0, model.P.shape), rng.uniform(1.01, 3.5, model.P.shape))
    gamma = np.where(np.isfinite(w)[:, None], w[:, None] * scale, 0.05)
    return ReducedAccounting(model.in_degrees, model.out_degrees, gamma, w)


seeds = st.integers(min_value=0, max_value=2**32 - 1)


@st.composite
def models(draw):
    return random_model(np.random.default_rng(draw(seeds)))


@st.composite
def model_and_accounting(draw):
    rng = np.random.default_rng(draw(seeds))
    model = random_model(rng)
    return model, random_accounting(rng, model, draw(st.floats(0.0, 1.0)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
