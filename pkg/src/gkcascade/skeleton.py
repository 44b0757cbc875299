"""Finite random directed multigraphs with prescribed node-type and edge-type statistics.

The construction follows the configuration-graph recipe:

1. draw node types (j, k) i.i.d. from P;
2. label every in-stub of an in-degree-j node with an out-degree k drawn from
   Q_kj / Q-_j;
3. glue every in-stub labelled k to a uniformly random unpaired out-stub of an
   out-degree-k node.

Step 3 only succeeds when, for each k, the number of in-stubs labelled k equals
the number of out-stubs on out-degree-k nodes. Finite samples almost never
satisfy this, so two repairs run in between: :func:`balance_stub_totals`
redraws a few node types until total in- and out-stubs agree, and :func:`clip`
relabels a minimal set of in-stubs to balance every class. Both perturbations
are O(sqrt(N)) and vanish relative to N.

Random streams come from numpy's ``Generator`` (PCG64). Ensemble realization
``i`` under master seed ``s`` uses ``SeedSequence(s, spawn_key=(i,))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import TextIO

import numpy as np

from .degree_model import DegreeModel, joint_correlation
from .errors import CascadeError, ClipBudgetExceeded, MissingInDegreeMass, WiringFailure


class RewireFailure(CascadeError):
    """Self-loops or multi-edges could not be removed within the attempt budget."""


@dataclass(frozen=True)
class GenerationConfig:
    seed: int = 0
    max_attempts: int = 100
    max_clip_swaps: int = 1_000_000
    allow_self_loops: bool = True
    allow_multi_edges: bool = True

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.max_clip_swaps < 1:
            raise ValueError("max_clip_swaps must be >= 1")


@dataclass(frozen=True, eq=False)
class SkeletonGraph:
    """Directed multigraph; edge ``e`` runs from ``src[e]`` to ``dst[e]``."""
    in_deg: np.ndarray
    out_deg: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.in_deg)

    @property
    def n_edges(self) -> int:
        return len(self.src)

    @property
    def node_type(self) -> np.ndarray:
        return np.column_stack([self.in_deg, self.out_deg])

    @cached_property
    def _out_csr(self):
        order = np.argsort(self.src, kind="stable")
        ptr = np.concatenate([[0], np.cumsum(np.bincount(self.src, minlength=self.n_nodes))])
        return ptr, order

    @cached_property
    def _in_csr(self):
        order = np.argsort(self.dst, kind="stable")
        ptr = np.concatenate([[0], np.cumsum(np.bincount(self.dst, minlength=self.n_nodes))])
        return ptr, order

    def out_edges(self, v: int) -> np.ndarray:
        ptr, order = self._out_csr
        return order[ptr[v]:ptr[v + 1]]

    def in_edges(self, v: int) -> np.ndarray:
        ptr, order = self._in_csr
        return order[ptr[v]:ptr[v + 1]]

    def check_degrees(self) -> bool:
        n = self.n_nodes
        return (np.array_equal(np.bincount(self.src, minlength=n), self.out_deg)
                and np.array_equal(np.bincount(self.dst, minlength=n), self.in_deg))

    def same_edges(self, other: "SkeletonGraph") -> bool:
        return (np.array_equal(self.in_deg, other.in_deg)
                and np.array_equal(self.out_deg, other.out_deg)
                and np.array_equal(self.src, other.src)
                and np.array_equal(self.dst, other.dst))


# --- construction steps ----------------------------------------------------------

def draw_node_types(n: int, model: DegreeModel, rng) -> np.ndarray:
    """``n`` i.i.d. node types as an ``(n, 2)`` int array of (j, k)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    flat = model.P.ravel()
    idx = rng.choice(flat.size, size=n, p=flat / flat.sum())
    ji, ki = np.unravel_index(idx, model.P.shape)
    return np.column_stack([np.array(model.in_degrees)[ji], np.array(model.out_degrees)[ki]]).astype(np.int64)


def balance_stub_totals(types: np.ndarray, model: DegreeModel, rng, max_tries: int | None = None):
    """Redraw random nodes' types from P until total in-stubs equal total out-stubs.

    A redraw is kept only if it shrinks the imbalance. Returns ``(types, n_redrawn)``.
    """
    types = types.copy()
    n = len(types)
    diff = int(types[:, 0].sum() - types[:, 1].sum())
    if diff == 0:
        return types, 0
    if n == 0:
        raise ClipBudgetExceeded("no nodes to rebalance")
    if max_tries is None:
        max_tries = 50 * n + 10_000
    flat = model.P.ravel() / model.P.sum()
    jd = np.array(model.in_degrees)
    kd = np.array(model.out_degrees)
    redrawn = tries = 0
    batch = 256
    while diff != 0:
        nodes = rng.integers(0, n, size=batch)
        ji, ki = np.unravel_index(rng.choice(flat.size, size=batch, p=flat), model.P.shape)
        for v, nj, nk in zip(nodes, jd[ji], kd[ki]):
            tries += 1
            new = diff - int(types[v, 0] - types[v, 1]) + int(nj - nk)
            if abs(new) < abs(diff):
                types[v] = (nj, nk)
                diff = new
                redrawn += 1
                if diff == 0:
                    break
            if tries >= max_tries:
                raise ClipBudgetExceeded(
                    f"stub totals still differ by {diff} after {tries} node redraws")
    return types, redrawn


def _in_stub_owners(types: np.ndarray) -> np.ndarray:
    return np.repeat(np.arange(len(types)), types[:, 0])


def assign_in_stub_types(types: np.ndarray, model: DegreeModel, rng) -> np.ndarray:
    """Out-degree label for every in-stub (in-stubs ordered by owner node)."""
    owners = _in_stub_owners(types)
    stub_j = types[owners, 0]
    labels = np.empty(len(owners), dtype=np.int64)
    kd = np.array(model.out_degrees)
    q_minus = model.q_minus
    for ji, j in enumerate(model.in_degrees):
        sel = np.nonzero(stub_j == j)[0]
        if len(sel) == 0:
            continue
        if q_minus[ji] <= 0:
            raise MissingInDegreeMass(f"in-degree {j} occurs but no edge enters it")
        cond = model.Q[:, ji] / q_minus[ji]
        labels[sel] = kd[rng.choice(len(kd), size=len(sel), p=cond)]
    return labels


def class_imbalance(types: np.ndarray, labels: np.ndarray) -> dict[int, int]:
    """``{k: in-stubs labelled k - out-stubs on out-degree-k nodes}`` for unbalanced k."""
    ks = np.union1d(np.unique(labels), np.unique(types[:, 1][types[:, 1] > 0]))
    out = {}
    for k in ks:
        d = int(np.count_nonzero(labels == k)) - int(k) * int(np.count_nonzero(types[:, 1] == k))
        if d:
            out[int(k)] = d
    return out


def wire(types: np.ndarray, labels: np.ndarray, config: GenerationConfig, rng) -> SkeletonGraph:
    """Pair each in-stub with a uniformly random out-stub of its labelled class."""
    imbalance = class_imbalance(types, labels)
    if imbalance:
        raise WiringFailure(imbalance)
    n = len(types)
    dst = _in_stub_owners(types)
    src = np.empty(len(dst), dtype=np.int64)
    out_owner = np.repeat(np.arange(n), types[:, 1])
    out_class = types[out_owner, 1]
    for k in np.unique(labels):
        slots = np.nonzero(labels == k)[0]
        src[slots] = rng.permutation(out_owner[out_class == k])
    graph = SkeletonGraph(types[:, 0].copy(), types[:, 1].copy(), src, dst)
    if not (config.allow_self_loops and config.allow_multi_edges):
        graph = _remove_bad_edges(graph, config, rng)
    return graph


def _bad_edges(src, dst, allow_loops, allow_multi, n):
    bad = np.zeros(len(src), dtype=bool)
    if not allow_loops:
        bad |= src == dst
    if not allow_multi:
        key = src * n + dst
        _, first = np.unique(key, return_index=True)
        dup = np.ones(len(src), dtype=bool)
        dup[first] = False
        bad |= dup
    return np.nonzero(bad)[0]


def _remove_bad_edges(graph: SkeletonGraph, config: GenerationConfig, rng) -> SkeletonGraph:
    """Swap targets between edges whose sources share an out-degree class.

    A swap keeps every node's degrees and every in-stub's label class intact.
    """
    src, dst = graph.src, graph.dst.copy()
    n = graph.n_nodes
    src_class = graph.out_deg[src]
    for _ in range(config.max_attempts):
        bad = _bad_edges(src, dst, config.allow_self_loops, config.allow_multi_edges, n)
        if len(bad) == 0:
            return SkeletonGraph(graph.in_deg, graph.out_deg, src, dst, dict(graph.meta))
        for e in bad:
            peers = np.nonzero(src_class == src_class[e])[0]
            f = peers[rng.integers(len(peers))]
            dst[e], dst[f] = dst[f], dst[e]
    raise RewireFailure(f"self-loops/multi-edges remain after {config.max_attempts} rounds")


def clip(types: np.ndarray, labels: np.ndarray, config: GenerationConfig, rng):
    """Relabel the fewest in-stubs needed so every out-degree class balances.

    For each surplus class, that many of its in-stubs are picked uniformly at
    random; they receive the deficit classes' labels in random order (so a
    deficit class is chosen with probability proportional to its deficit).
    Returns ``(labels, n_relabelled)``.
    """
    if len(labels) != int(types[:, 1].sum()):
        raise ValueError("total in-stubs and out-stubs differ; balance node types first")
    imbalance = class_imbalance(types, labels)
    n_moves = sum(d for d in imbalance.values() if d > 0)
    if n_moves == 0:
        return labels.copy(), 0
    if n_moves > config.max_clip_swaps:
        raise ClipBudgetExceeded(f"clipping needs {n_moves} relabels > {config.max_clip_swaps}")
    labels = labels.copy()
    picked = []
    for k, d in sorted(imbalance.items()):
        if d > 0:
            picked.append(rng.choice(np.nonzero(labels == k)[0], size=d, replace=False))
    slots = rng.permutation(np.concatenate(picked))
    new = np.repeat([k for k, d in sorted(imbalance.items()) if d < 0],
                    [-d for k, d in sorted(imbalance.items()) if d < 0])
    labels[slots] = rng.permutation(new)
    return labels, n_moves


def generate(n: int, model: DegreeModel, config: GenerationConfig | None = None,
             rng=None) -> SkeletonGraph:
    """Random graph on ``n`` nodes; deterministic given ``(n, model, config.seed)``.

    ``graph.meta`` records the repair work: ``n_redrawn`` node types,
    ``n_relabelled`` in-stub labels and ``n_stubs``.
    """
    config = config or GenerationConfig()
    if rng is None:
        rng = np.random.default_rng(config.seed)
    types = draw_node_types(n, model, rng)
    types, n_redrawn = balance_stub_totals(types, model, rng)
    labels = assign_in_stub_types(types, model, rng)
    n_relabelled = 0
    try:
        graph = wire(types, labels, config, rng)
    except WiringFailure:
        labels, n_relabelled = clip(types, labels, config, rng)
        graph = wire(types, labels, config, rng)
    graph.meta.update(n_redrawn=n_redrawn, n_relabelled=n_relabelled, n_stubs=len(labels))
    return graph


# --- empirical statistics -------------------------------------------------------

def _support_index(values, support):
    support = np.asarray(support)
    idx = np.searchsorted(support, values)
    if np.any(idx >= len(support)) or np.any(support[np.minimum(idx, len(support) - 1)] != values):
        raise ValueError("graph contains degrees outside the model support")
    return idx


def empirical_node_dist(graph: SkeletonGraph, model: DegreeModel) -> np.ndarray:
    ji = _support_index(graph.in_deg, model.in_degrees)
    ki = _support_index(graph.out_deg, model.out_degrees)
    counts = np.zeros(model.P.shape)
    np.add.at(counts, (ji, ki), 1)
    return counts / max(graph.n_nodes, 1)


def empirical_edge_dist(graph: SkeletonGraph, model: DegreeModel) -> np.ndarray:
    ki = _support_index(graph.out_deg[graph.src], model.out_degrees)
    ji = _support_index(graph.in_deg[graph.dst], model.in_degrees)
    counts = np.zeros(model.Q.shape)
    np.add.at(counts, (ki, ji), 1)
    return counts / max(graph.n_edges, 1)


def _edge_correlation(x, y) -> float:
    xs, xi = np.unique(x, return_inverse=True)
    ys, yi = np.unique(y, return_inverse=True)
    joint = np.zeros((len(xs), len(ys)))
    np.add.at(joint, (xi, yi), 1)
    return joint_correlation(joint / joint.sum(), xs, ys)


def measured_edge_assortativity(graph: SkeletonGraph) -> float:
    """Correlation of source out-degree and target in-degree over edges."""
    return _edge_correlation(graph.out_deg[graph.src], graph.in_deg[graph.dst])


def measured_graph_assortativity(graph: SkeletonGraph) -> float:
    """Correlation of source in-degree and target in-degree over edges."""
    return _edge_correlation(graph.in_deg[graph.src], graph.in_deg[graph.dst])


# --- text serialization ---------------------------------------------------------

def write_graph(graph: SkeletonGraph, fh: TextIO) -> None:
    fh.write(f"nodes {graph.n_nodes}\n")
    for v, (j, k) in enumerate(zip(graph.in_deg.tolist(), graph.out_deg.tolist())):
        fh.write(f"node {v} {j} {k}\n")
    for s, d in zip(graph.src.tolist(), graph.dst.tolist()):
        fh.write(f"edge {s} {d}\n")


def read_graph(fh: TextIO) -> SkeletonGraph:
    n = None
    in_deg = out_deg = None
    src, dst = [], []
    for lineno, line in enumerate(fh, 1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        tag = parts[0]
        try:
            if tag == "nodes":
                n = int(parts[1])
                in_deg = np.full(n, -1, dtype=np.int64)
                out_deg = np.full(n, -1, dtype=np.int64)
            elif tag == "node":
                v, j, k = map(int, parts[1:4])
                in_deg[v], out_deg[v] = j, k
            elif tag == "edge":
                s, d = map(int, parts[1:3])
                src.append(s)
                dst.append(d)
            else:
                raise ValueError(f"unknown record {tag!r}")
        except (IndexError, TypeError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if n is None:
        raise ValueError("missing 'nodes' header")
    if np.any(in_deg < 0):
        raise ValueError("some nodes have no 'node' record")
    graph = SkeletonGraph(in_deg, out_deg, np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64))
    if graph.n_edges and (graph.src.max() >= n or graph.dst.max() >= n or min(graph.src.min(), graph.dst.min()) < 0):
        raise ValueError("edge endpoint out of range")
    if not graph.check_degrees():
        raise ValueError("edge list does not match the declared node degrees")
    return graph
