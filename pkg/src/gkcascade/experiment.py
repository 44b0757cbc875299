"""Parameter sweeps over buffers and network families, emitted as flat tables."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from itertools import product

import numpy as np

from . import __version__
from .balance_sheets import ReducedAccounting, accounting_from_dict, gk_for
from .cascade import ShockSpec, solve_cascade
from .degree_model import (
    DegreeModel,
    edge_assortativity,
    graph_assortativity,
    model_from_dict,
)
from .errors import CascadeError, DegenerateDegreeVariance, NoBracket
from .montecarlo import run_ensemble
from .networks import four_class, two_class
from .stability import cascade_condition, cascade_frequency, critical_gamma, default_bracket, radius_at

ANALYTIC_OUTPUTS = ("radius", "gamma_c", "size", "frequency", "r_q", "r")
MC_OUTPUTS = ("mc_frequency", "mc_global_size", "mc_mean_size")
ALL_OUTPUTS = ANALYTIC_OUTPUTS + MC_OUTPUTS


def frange(lo: float, hi: float, step: float) -> list[float]:
    """Inclusive grid lo, lo+step, ..., hi built from integer multiples (no drift)."""
    if step <= 0:
        raise ValueError("step must be positive")
    count = int(math.floor((hi - lo) / step + 1e-9))
    return [round(lo + i * step, 12) for i in range(count + 1)]


def parse_range(text: str) -> list[float]:
    """``"lo:hi:step"`` or a comma list ``"x1,x2,..."``."""
    if ":" in text:
        lo, hi, step = (float(x) for x in text.split(":"))
        return frange(lo, hi, step)
    return [float(x) for x in text.split(",") if x.strip()]


@dataclass
class ExperimentSpec:
    builtin: str | None = "sec61"           # "sec61", "sec62" or None (model_doc)
    model_doc: dict | None = None
    a_values: list[float] = field(default_factory=lambda: [0.5])
    b_values: list[float] = field(default_factory=lambda: [0.16])
    q_points: list[tuple] = field(default_factory=lambda: [(0.25, 0.25, 0.25, 0.25)])
    gammas: list[float] = field(default_factory=lambda: [0.035])
    accounting_doc: dict | None = None      # explicit accounting; overrides gammas
    rho0: float = 1e-4
    outputs: list[str] = field(default_factory=lambda: list(ANALYTIC_OUTPUTS))
    n: int = 10_000
    realizations: int = 500
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        unknown = set(self.outputs) - set(ALL_OUTPUTS)
        if unknown:
            raise ValueError(f"unknown outputs {sorted(unknown)}; choose from {ALL_OUTPUTS}")
        if self.builtin not in ("sec61", "sec62", None):
            raise ValueError(f"unknown builtin {self.builtin!r}")
        if self.builtin is None and self.model_doc is None:
            raise ValueError("need a builtin family or a model document")

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()

    def param_names(self) -> list[str]:
        if self.builtin == "sec61":
            names = ["a", "b"]
        elif self.builtin == "sec62":
            names = ["q1", "q2", "q3", "q4"]
        else:
            names = []
        return names + (["gamma"] if self.accounting_doc is None else [])

    def points(self) -> list[tuple]:
        if self.builtin == "sec61":
            models = list(product(self.a_values, self.b_values))
        elif self.builtin == "sec62":
            models = [tuple(q) for q in self.q_points]
        else:
            models = [()]
        gammas = [()] if self.accounting_doc is not None else [(g,) for g in self.gammas]
        return [m + g for m, g in product(models, gammas)]


def build_model(spec: ExperimentSpec, params: tuple) -> DegreeModel:
    if spec.builtin == "sec61":
        return two_class(params[0], params[1])
    if spec.builtin == "sec62":
        return four_class(params[:4])
    return model_from_dict(spec.model_doc)


def build_accounting(spec: ExperimentSpec, model: DegreeModel, params: tuple) -> ReducedAccounting:
    if spec.accounting_doc is not None:
        return accounting_from_dict(spec.accounting_doc, model)
    return gk_for(model, params[-1])


def gamma_c_or_zero(model: DegreeModel, w) -> float:
    """Critical buffer, or 0.0 when no positive buffer admits global cascades."""
    try:
        return critical_gamma(model, w)
    except NoBracket:
        lo, _ = default_bracket(w)
        if radius_at(model, w, lo) <= 1.0:
            return 0.0
        raise


def evaluate_point(spec: ExperimentSpec, params: tuple) -> dict:
    row = dict(zip(spec.param_names(), params))
    errors = []
    try:
        model = build_model(spec, params)
        acct = build_accounting(spec, model, params)
    except CascadeError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    wanted = set(spec.outputs)
    for name in ANALYTIC_OUTPUTS:
        if name not in wanted:
            continue
        try:
            if name == "radius":
                row[name] = cascade_condition(model, acct)[1]
            elif name == "gamma_c":
                row[name] = gamma_c_or_zero(model, acct.w)
            elif name == "size":
                sol = solve_cascade(model, acct, ShockSpec.uniform(model, spec.rho0), record=False)
                row[name] = sol.size
                if not sol.converged:
                    errors.append("size: not converged")
            elif name == "frequency":
                row[name] = cascade_frequency(model, acct).f
            elif name == "r_q":
                row[name] = edge_assortativity(model)
            elif name == "r":
                row[name] = graph_assortativity(model)
        except (CascadeError, DegenerateDegreeVariance) as exc:
            row[name] = float("nan")
            errors.append(f"{name}: {type(exc).__name__}")
    if wanted & set(MC_OUTPUTS):
        stats = run_ensemble(spec.n, model, acct, n_realizations=spec.realizations,
                             master_seed=spec.seed)
        row["mc_frequency"] = stats.global_frequency
        row["mc_global_size"] = stats.mean_global_size
        row["mc_mean_size"] = stats.mean_size
        if stats.n_failed:
            errors.append(f"mc: {stats.n_failed} failed realizations")
    row["error"] = "; ".join(errors)
    return row


def _evaluate(args):
    return evaluate_point(*args)


def run_experiment(spec: ExperimentSpec) -> list[dict]:
    """Evaluate every grid point; rows come back in grid order."""
    jobs = [(spec, p) for p in spec.points()]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            return list(pool.map(_evaluate, jobs))
    return [_evaluate(job) for job in jobs]


def columns(spec: ExperimentSpec) -> list[str]:
    outs = [o for o in ALL_OUTPUTS if o in spec.outputs]
    return spec.param_names() + outs + ["error"]


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return "" if math.isnan(value) else repr(value)
    return "" if value is None else str(value)


def long_rows(spec: ExperimentSpec, rows: list[dict]) -> tuple[list[str], list[dict]]:
    """Reshape wide rows to one row per (grid point, quantity)."""
    params = spec.param_names()
    outs = [o for o in ALL_OUTPUTS if o in spec.outputs]
    cols = params + ["quantity", "value", "error"]
    out = []
    for r in rows:
        base = {p: r.get(p) for p in params}
        for q in outs:
            out.append({**base, "quantity": q, "value": r.get(q, float("nan")), "error": r.get("error", "")})
    return cols, out


def _plain(value):
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return None if math.isnan(value) else value
    if isinstance(value, np.integer):
        return int(value)
    return value


def write_table(spec: ExperimentSpec, rows: list[dict], fh, fmt: str = "csv",
                timestamp: str | None = None, layout: str = "wide") -> None:
    """CSV with ``#`` provenance lines (the ``generated`` line is the only time-dependent one).

    ``layout="long"`` writes one ``quantity,value`` row per requested output.
    """
    timestamp = timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds")
    meta = {"tool": f"gkcascade {__version__}", "spec_sha256": spec.digest(), "seed": spec.seed,
            "generated": timestamp}
    if layout == "long":
        cols, rows = long_rows(spec, rows)
    elif layout == "wide":
        cols = columns(spec)
    else:
        raise ValueError(f"unknown layout {layout!r}")
    if fmt == "json":
        clean = [{c: _plain(r.get(c, "")) for c in cols} for r in rows]
        json.dump({"meta": meta, "columns": cols, "rows": clean}, fh, indent=1)
        fh.write("\n")
        return
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    for key, val in meta.items():
        fh.write(f"# {key}={val}\n")
    out = csv.writer(fh, lineterminator="\n")
    out.writerow(cols)
    for r in rows:
        out.writerow([_fmt(r.get(c, "")) for c in cols])


def table_text(spec: ExperimentSpec, rows: list[dict], fmt: str = "csv", timestamp=None,
               layout: str = "wide") -> str:
    buf = io.StringIO()
    write_table(spec, rows, buf, fmt, timestamp, layout)
    return buf.getvalue()

