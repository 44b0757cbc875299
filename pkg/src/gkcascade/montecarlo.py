"""Zero-recovery default cascades on finite graphs, and ensembles of them."""
from __future__ import annotations

import csv
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .balance_sheets import ReducedAccounting, ThresholdTable, thresholds
from .cascade import ShockSpec
from .degree_model import DegreeModel
from .errors import CascadeError
from .skeleton import GenerationConfig, SkeletonGraph, generate

GLOBAL_THRESHOLD = 0.05
SINGLE = "single"


def node_thresholds(graph: SkeletonGraph, table: ThresholdTable) -> np.ndarray:
    """Per-node default threshold (``inf`` for in-degree 0)."""
    ji = np.searchsorted(table.in_degrees, graph.in_deg)
    ki = np.searchsorted(table.out_degrees, graph.out_deg)
    return table.M[ji, ki]


def apply_shock(graph: SkeletonGraph, shock, rng, model: DegreeModel | None = None) -> np.ndarray:
    """Initial default set as a boolean node mask.

    ``shock`` is ``"single"`` (one node chosen uniformly) or a :class:`ShockSpec`,
    in which case each type-(j,k) node defaults independently with probability
    ``rho0[j, k]`` indexed over ``model``'s support.
    """
    n = graph.n_nodes
    if isinstance(shock, ShockSpec):
        if model is None:
            raise ValueError("a ShockSpec needs the model that indexes it")
        ji = np.searchsorted(model.in_degrees, graph.in_deg)
        ki = np.searchsorted(model.out_degrees, graph.out_deg)
        return rng.random(n) < shock.rho0[ji, ki]
    if shock != SINGLE:
        raise ValueError(f"unknown shock mode {shock!r}")
    if n == 0:
        raise ValueError("cannot shock an empty graph")
    mask = np.zeros(n, dtype=bool)
    mask[rng.integers(n)] = True
    return mask


def edge_update_set(graph: SkeletonGraph, defaulted: np.ndarray) -> np.ndarray:
    """Mask of edges whose source (the debtor) is in default."""
    return defaulted[graph.src]


def node_update_set(graph: SkeletonGraph, edges: np.ndarray, node_thr: np.ndarray,
                    seed: np.ndarray) -> np.ndarray:
    """Nodes outside the seed set with at least their threshold of defaulted in-edges.

    Parallel edges each count, since each carries its own exposure.
    """
    hits = np.bincount(graph.dst[edges], minlength=graph.n_nodes)
    return (hits >= node_thr) & ~seed


@dataclass
class CascadeRunResult:
    defaulted: np.ndarray          # node mask, seed included
    defaulted_edges: np.ndarray    # edge mask
    n_rounds: int
    default_fraction: float
    is_global: bool

    @property
    def defaulted_nodes(self) -> set[int]:
        return set(np.nonzero(self.defaulted)[0].tolist())


def run_cascade(graph: SkeletonGraph, seed: np.ndarray, table_or_thr,
                global_threshold: float = GLOBAL_THRESHOLD) -> CascadeRunResult:
    """Synchronous rounds: default every out-edge of defaulted nodes, then every node
    whose defaulted in-edges reach its threshold, until nothing changes.

    ``n_rounds`` counts the rounds in which the defaulted edge set grew.
    """
    thr = (node_thresholds(graph, table_or_thr) if isinstance(table_or_thr, ThresholdTable)
           else np.asarray(table_or_thr))
    seed = np.asarray(seed, dtype=bool)
    defaulted = seed.copy()
    edges = np.zeros(graph.n_edges, dtype=bool)
    rounds = 0
    while True:
        new_edges = edge_update_set(graph, defaulted)
        if np.array_equal(new_edges, edges):
            break
        edges = new_edges
        rounds += 1
        defaulted = seed | node_update_set(graph, edges, thr, seed)
    n = graph.n_nodes
    frac = float(defaulted.sum()) / n if n else 0.0
    return CascadeRunResult(defaulted, edges, rounds, frac, frac > global_threshold)


def run_cascade_sequential(graph: SkeletonGraph, seed: np.ndarray, thr: np.ndarray) -> np.ndarray:
    """Node-at-a-time scheduler; returns the final defaulted mask."""
    seed = np.asarray(seed, dtype=bool)
    defaulted = seed.copy()
    hits = np.zeros(graph.n_nodes, dtype=np.int64)
    queue = deque(np.nonzero(seed)[0].tolist())
    while queue:
        v = queue.popleft()
        for e in graph.out_edges(v):
            u = graph.dst[e]
            hits[u] += 1
            if not defaulted[u] and hits[u] >= thr[u]:
                defaulted[u] = True
                queue.append(u)
    return defaulted


# --- ensembles ------------------------------------------------------------------

@dataclass
class RealizationRecord:
    index: int
    n: int
    default_fraction: float
    n_rounds: int
    is_global: bool
    n_relabelled: int = 0
    n_redrawn: int = 0
    error: str = ""


@dataclass
class EnsembleStats:
    master_seed: int
    n_realizations: int          # completed runs
    n_failed: int
    global_frequency: float
    mean_global_size: float      # NaN when no run was global
    mean_size: float
    records: list[RealizationRecord] = field(repr=False, default_factory=list)


def _realization_rng(master_seed: int, index: int):
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


def _one_realization(args):
    (index, n, model, acct, shock, master_seed, global_threshold, config, fixed_graph) = args
    rng = _realization_rng(master_seed, index)
    try:
        graph = fixed_graph if fixed_graph is not None else generate(n, model, config, rng=rng)
    except CascadeError as exc:
        return RealizationRecord(index, n, float("nan"), 0, False, error=f"{type(exc).__name__}: {exc}")
    table = thresholds(acct)
    W0 = apply_shock(graph, shock, rng, model)
    res = run_cascade(graph, W0, table, global_threshold)
    return RealizationRecord(index, graph.n_nodes, res.default_fraction, res.n_rounds, res.is_global,
                             graph.meta.get("n_relabelled", 0), graph.meta.get("n_redrawn", 0))


def run_ensemble(n: int, model: DegreeModel, acct: ReducedAccounting, shock=SINGLE,
                 n_realizations: int = 500, master_seed: int = 0,
                 global_threshold: float = GLOBAL_THRESHOLD, config: GenerationConfig | None = None,
                 fresh_graph: bool = True, workers: int = 1) -> EnsembleStats:
    """Repeat (generate graph, shock, cascade) with per-realization seed streams.

    With ``fresh_graph=False`` one graph (drawn from stream ``n_realizations``)
    is reused and only the shock varies. Generation failures are recorded and
    excluded from the statistics.
    """
    if n_realizations < 1:
        raise ValueError("n_realizations must be >= 1")
    config = config or GenerationConfig(seed=master_seed)
    fixed = None
    if not fresh_graph:
        fixed = generate(n, model, config, rng=_realization_rng(master_seed, n_realizations))
    jobs = [(i, n, model, acct, shock, master_seed, global_threshold, config, fixed)
            for i in range(n_realizations)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_one_realization, jobs, chunksize=8))
    else:
        records = [_one_realization(job) for job in jobs]
    return summarize(records, master_seed)


def summarize(records, master_seed: int = 0) -> EnsembleStats:
    ok = [r for r in records if not r.error]
    n_ok = len(ok)
    sizes = np.array([r.default_fraction for r in ok])
    glob = np.array([r.is_global for r in ok], dtype=bool)
    freq = float(glob.mean()) if n_ok else float("nan")
    mean_global = float(sizes[glob].mean()) if glob.any() else float("nan")
    mean_size = float(sizes.mean()) if n_ok else float("nan")
    return EnsembleStats(master_seed, n_ok, len(records) - n_ok, freq, mean_global, mean_size,
                         list(records))


def write_ensemble_csv(stats: EnsembleStats, fh, params: dict | None = None) -> None:
    """One row per realization plus a summary row; master seed in the header."""
    fh.write(f"# master_seed={stats.master_seed}\n")
    for key, val in (params or {}).items():
        fh.write(f"# {key}={val}\n")
    out = csv.writer(fh, lineterminator="\n")
    out.writerow(["row", "realization", "n", "default_fraction", "n_rounds", "is_global",
                  "n_relabelled", "n_redrawn", "error"])
    for r in stats.records:
        out.writerow(["run", r.index, r.n, repr(r.default_fraction), r.n_rounds, int(r.is_global),
                      r.n_relabelled, r.n_redrawn, r.error])
    out.writerow(["summary", stats.n_realizations, "", repr(stats.mean_size), "",
                  repr(stats.global_frequency), "", "", f"mean_global_size={stats.mean_global_size!r};"
                  f"failed={stats.n_failed}"])
