"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``[acceptance N] PASS|FAIL ...`` line before asserting,
so the verdicts are visible in a plain ``pytest -v`` run.
"""
import math
import time

import numpy as np
import pytest

import test_cascade
import test_montecarlo
import test_stability
from conftest import random_accounting, random_model
from gkcascade.balance_sheets import ThresholdTable, gk_for, gk_weights, thresholds
from gkcascade.cascade import ShockSpec, node_update, solve_cascade
from gkcascade.degree_model import edge_assortativity, graph_assortativity
from gkcascade.montecarlo import run_ensemble
from gkcascade.networks import four_class, two_class
from gkcascade.skeleton import (
    GenerationConfig,
    empirical_edge_dist,
    empirical_node_dist,
    generate,
    measured_edge_assortativity,
    measured_graph_assortativity,
)
from gkcascade.stability import (
    cascade_frequency,
    critical_gamma,
    dtilde_direct,
    dtilde_from_factors,
    similarity_factors,
    spectral_radius,
    trigger_matrix,
)
from oracles import subset_tail, two_class_radius

B_VALUES = (0.01, 0.05, 0.10, 0.16, 0.19)
MC_N = 10_000
MC_REALIZATIONS = 500
MC_SEED = 2024
MC_GAMMAS = (0.02, 0.04, 0.05, 0.06, 0.08)
THEORY_SHOCK = 1e-4


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance {number}] {'PASS' if ok else 'FAIL'} {detail}")
        return ok
    return emit


@pytest.fixture(scope="module")
def sec61_ensembles():
    """Single-seed ensembles at a = 1/2, b = 0.16, shared by criteria 5 and 6."""
    model = two_class(0.5, 0.16)
    return model, {g: run_ensemble(MC_N, model, gk_for(model, g), n_realizations=MC_REALIZATIONS,
                                   master_seed=MC_SEED)
                   for g in MC_GAMMAS}


def test_criterion_1_critical_buffer(report):
    targets = {0.16: 1 / 15, 0.19: 1 / 15, 0.01: 1 / 60}
    start = time.perf_counter()
    got = {}
    for b in targets:
        model = two_class(0.5, b)
        got[b] = critical_gamma(model, gk_weights(model.in_degrees))
    elapsed = time.perf_counter() - start
    worst = max(abs(got[b] - targets[b]) for b in targets)
    ok = worst <= 1e-12 and elapsed < 1.0
    report(1, ok, f"gamma_c={ {b: round(v, 6) for b, v in got.items()} } max_err={worst:.1e} time={elapsed:.3f}s")
    assert ok


def test_criterion_2_closed_form_radius(report):
    worst = 0.0
    cases = 0
    for b in B_VALUES:
        model = two_class(0.5, b)
        # gamma = 0.05: only in-degree 3 is vulnerable; gamma = 0.01: both are
        for gamma, both in ((0.05, False), (0.01, True)):
            radius = trigger_matrix(model, thresholds(gk_for(model, gamma))).spectral_radius
            worst = max(worst, abs(radius - two_class_radius(b, both)))
            cases += 1
    ok = worst < 1e-8
    report(2, ok, f"{cases} cases max_err={worst:.1e}")
    assert ok


def test_criterion_3_similarity_radius(report):
    rng = np.random.default_rng(31337)
    n_models = 120
    worst = 0.0
    start = time.perf_counter()
    for _ in range(n_models):
        model = random_model(rng)
        table = thresholds(random_accounting(rng, model, p_vulnerable=rng.uniform(0.2, 0.9)))
        d_radius = trigger_matrix(model, table).spectral_radius
        direct = spectral_radius(dtilde_direct(model, table))
        similar = spectral_radius(dtilde_from_factors(similarity_factors(model, table)))
        worst = max(worst, abs(d_radius - direct), abs(d_radius - similar))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-8 and elapsed < 10.0
    report(3, ok, f"{n_models} models max_gap={worst:.1e} time={elapsed:.2f}s")
    assert ok


def test_criterion_4_binomial_tail_oracle(report):
    shock = ShockSpec(np.zeros((1, 1)))
    worst, cases = 0.0, 0
    for j in range(1, 7):
        for M in range(0, j + 1):
            table = ThresholdTable((j,), (1,), np.array([[float(M)]]), np.array([[int(M == 1)]], dtype=np.int8))
            for step in range(11):
                a = step / 10
                got = float(node_update(np.array([a]), shock, table)[0, 0])
                worst = max(worst, abs(got - subset_tail(j, M, a)))
                cases += 1
    ok = worst <= 1e-12
    report(4, ok, f"{cases} cases max_err={worst:.1e}")
    assert ok


def test_criterion_5_theory_vs_simulation_size(report, sec61_ensembles):
    model, ensembles = sec61_ensembles
    gamma_c = critical_gamma(model, gk_weights(model.in_degrees))
    lines, ok = [], True
    for gamma in (0.02, 0.04, 0.06, 0.08):
        stats = ensembles[gamma]
        if abs(gamma - gamma_c) <= 0.005:
            lines.append(f"g={gamma}:skipped")
            continue
        if gamma > gamma_c:
            good = stats.global_frequency < 0.02
            lines.append(f"g={gamma}:freq={stats.global_frequency:.3f}")
        else:
            theory = solve_cascade(model, gk_for(model, gamma), ShockSpec.uniform(model, THEORY_SHOCK),
                                   record=False).size
            good = not math.isnan(stats.mean_global_size) and abs(stats.mean_global_size - theory) < 0.05
            lines.append(f"g={gamma}:mc={stats.mean_global_size:.4f},theory={theory:.4f}")
        ok &= good and stats.n_failed == 0
    report(5, ok, " ".join(lines))
    assert ok


def test_criterion_6_frequency_vs_simulation(report, sec61_ensembles):
    model, ensembles = sec61_ensembles
    f = cascade_frequency(model, gk_for(model, 0.05)).f
    empirical = ensembles[0.05].global_frequency
    ok = abs(empirical - f) < 0.05
    report(6, ok, f"f={f:.4f} mc={empirical:.4f} gap={abs(empirical - f):.4f}")
    assert ok


def test_criterion_7_assortativity(report):
    q1, q0 = four_class((1, 0, 0, 0)), four_class((0.25,) * 4)
    exact = [abs(edge_assortativity(q1) - 1), abs(edge_assortativity(q0)), abs(graph_assortativity(q1) - 1)]
    g1 = generate(MC_N, q1, GenerationConfig(seed=7))
    g0 = generate(MC_N, q0, GenerationConfig(seed=8))
    measured = [abs(measured_edge_assortativity(g1) - 1), abs(measured_edge_assortativity(g0)),
                abs(measured_graph_assortativity(g1) - 1)]
    ok = max(exact) <= 1e-12 and max(measured) < 0.02
    report(7, ok, f"analytic_err={max(exact):.1e} measured_err={max(measured):.4f}")
    assert ok


def test_criterion_8_generator_fidelity(report):
    model = two_class(0.5, 0.16)
    within = total = 0
    relabel = []
    for seed in range(50):
        g = generate(MC_N, model, GenerationConfig(seed=seed))
        for est, target, count in ((empirical_node_dist(g, model), model.P, g.n_nodes),
                                   (empirical_edge_dist(g, model), model.Q, g.n_edges)):
            se = np.sqrt(target * (1 - target) / count)
            within += int(np.sum(np.abs(est - target) <= 3 * se))
            total += target.size
        relabel.append(g.meta["n_relabelled"] / g.meta["n_stubs"])
    share, mean_relabel = within / total, float(np.mean(relabel))
    ok = share >= 0.95 and mean_relabel < 0.01
    report(8, ok, f"within_3se={share:.3f} mean_relabelled={mean_relabel:.4%}")
    assert ok


def test_criterion_9_invariant_suites(report):
    suites = {
        "orbit": test_cascade.test_orbit_is_monotone_and_bounded,
        "G": test_cascade.test_G_is_monotone,
        "h": test_stability.test_frequency_map_is_monotone,
        "W0": test_montecarlo.test_cascade_monotone_in_seed_set,
        "scheduler": test_montecarlo.test_scheduler_order_independence,
    }
    failed = []
    for name, suite in suites.items():
        assert suite._hypothesis_internal_use_settings.max_examples >= 200
        try:
            suite()
        except Exception as exc:  # report every suite, then fail
            failed.append(f"{name}: {type(exc).__name__}")
    ok = not failed
    report(9, ok, f"suites={','.join(suites)} (>=200 cases each)" + (f" failed={failed}" if failed else ""))
    assert ok
