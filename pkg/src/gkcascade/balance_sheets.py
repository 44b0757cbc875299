"""Reduced accounting data: buffers, exposure weights and default thresholds."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .degree_model import DegreeModel, parse_prob
from .errors import ModelError

NEVER = math.inf  # threshold for nodes without in-edges


@dataclass(frozen=True)
class FullBalanceSheet:
    external_assets: float
    external_liabilities: float
    in_edge_weights: Sequence[float] = ()
    out_edge_weights: Sequence[float] = ()

    def __post_init__(self):
        if any(w <= 0 for w in (*self.in_edge_weights, *self.out_edge_weights)):
            raise ValueError("edge weights must be strictly positive")


def net_worth(sheet: FullBalanceSheet) -> float:
    """Buffer: external assets plus interbank assets minus all liabilities."""
    return (math.fsum([sheet.external_assets, *sheet.in_edge_weights])
            - math.fsum([sheet.external_liabilities, *sheet.out_edge_weights]))


@dataclass(frozen=True, eq=False)
class ReducedAccounting:
    """Buffers ``gamma[j_idx, k_idx]`` and weights ``w[j_idx]`` over a degree support.

    ``w`` is NaN for in-degree 0, where no exposure exists.
    """
    in_degrees: tuple[int, ...]
    out_degrees: tuple[int, ...]
    gamma: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        gamma = np.array(self.gamma, dtype=float)
        w = np.array(self.w, dtype=float)
        if gamma.shape != (len(self.in_degrees), len(self.out_degrees)):
            raise ModelError(f"gamma has shape {gamma.shape}")
        if w.shape != (len(self.in_degrees),):
            raise ModelError(f"w has shape {w.shape}")
        if not np.all(gamma > 0):
            raise ModelError("buffers must be positive (system starts solvent)")
        has_edges = np.array(self.in_degrees) >= 1
        if not np.all(w[has_edges] > 0):
            raise ModelError("weights must be positive for every in-degree >= 1")
        w[~has_edges] = np.nan
        gamma.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "in_degrees", tuple(self.in_degrees))
        object.__setattr__(self, "out_degrees", tuple(self.out_degrees))
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "w", w)

    @classmethod
    def uniform(cls, gamma: float, w, in_degrees, out_degrees):
        return cls(tuple(in_degrees), tuple(out_degrees),
                   np.full((len(in_degrees), len(out_degrees)), float(gamma)), w)

    def with_gamma(self, gamma: float) -> "ReducedAccounting":
        """Same weights, uniform buffer ``gamma``."""
        return ReducedAccounting.uniform(gamma, self.w, self.in_degrees, self.out_degrees)


def gk_weights(in_degrees) -> np.ndarray:
    """w_j = 1 / (5 j); NaN for j = 0."""
    j = np.array(in_degrees, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(j >= 1, 1.0 / (5.0 * j), np.nan)


def gk_specification(gamma: float, in_degrees, out_degrees=None) -> ReducedAccounting:
    """Uniform buffer ``gamma`` with exposure weights 1/(5j)."""
    if gamma <= 0:
        raise ModelError("gamma must be positive")
    if out_degrees is None:
        out_degrees = in_degrees
    return ReducedAccounting.uniform(gamma, gk_weights(in_degrees), in_degrees, out_degrees)


def gk_for(model: DegreeModel, gamma: float) -> ReducedAccounting:
    return gk_specification(gamma, model.in_degrees, model.out_degrees)


@dataclass(frozen=True, eq=False)
class ThresholdTable:
    """``M[j_idx, k_idx]``: defaulted in-edges needed to default a node.

    Stored as floats so in-degree 0 can carry ``inf``. ``Gamma`` marks vulnerable types.
    """
    in_degrees: tuple[int, ...]
    out_degrees: tuple[int, ...]
    M: np.ndarray
    Gamma: np.ndarray


def default_threshold(gamma: float, w: float) -> int:
    """Smallest m >= 1 with m * w >= gamma, i.e. ceil(gamma / w).

    The ceiling is corrected against the float product so that the result
    agrees exactly with the loss test ``m * w >= gamma`` used in simulation.
    """
    m = max(1, math.ceil(gamma / w))
    while m > 1 and (m - 1) * w >= gamma:
        m -= 1
    while m * w < gamma:
        m += 1
    return m


def thresholds(acct: ReducedAccounting) -> ThresholdTable:
    n_in, n_out = acct.gamma.shape
    M = np.full((n_in, n_out), NEVER)
    for a, j in enumerate(acct.in_degrees):
        if j == 0:
            continue
        for b in range(n_out):
            M[a, b] = default_threshold(float(acct.gamma[a, b]), float(acct.w[a]))
    Gamma = (M == 1).astype(np.int8)
    M.setflags(write=False)
    Gamma.setflags(write=False)
    return ThresholdTable(acct.in_degrees, acct.out_degrees, M, Gamma)


def accounting_from_dict(doc: Mapping, model: DegreeModel) -> ReducedAccounting:
    """Parse ``{"gk": {"gamma": g}}`` or ``{"gamma": [{j,k,value}], "w": [{j,value}]}``."""
    if "gk" in doc:
        return gk_for(model, parse_prob(doc["gk"]["gamma"]))
    jx = {d: i for i, d in enumerate(model.in_degrees)}
    kx = {d: i for i, d in enumerate(model.out_degrees)}
    gamma = np.full((len(jx), len(kx)), np.nan)
    w = np.full(len(jx), np.nan)
    try:
        for e in doc["gamma"]:
            gamma[jx[int(e["j"])], kx[int(e["k"])]] = parse_prob(e["value"])
        for e in doc["w"]:
            w[jx[int(e["j"])]] = parse_prob(e["value"])
    except KeyError as exc:
        raise ModelError(f"malformed accounting document: missing {exc}") from None
    if np.any(np.isnan(gamma)):
        raise ModelError("a buffer is missing for some node type")
    if np.any(np.isnan(w[np.array(model.in_degrees) >= 1])):
        raise ModelError("a weight is missing for some in-degree")
    return ReducedAccounting(model.in_degrees, model.out_degrees, gamma, w)


def load_accounting(path, model: DegreeModel) -> ReducedAccounting:
    with open(path) as fh:
        return accounting_from_dict(json.load(fh), model)
