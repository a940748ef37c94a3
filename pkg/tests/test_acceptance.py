"""End-to-end acceptance checks, one test per criterion.

Each test logs a PASS/FAIL line that is printed in the pytest summary.
Run just these with ``pytest tests/test_acceptance.py``.
"""

import json
import time

import numpy as np
import pytest

from conftest import experiment, record
from lspkit.cli import main
from lspkit.detector import alarm, alarms, train
from lspkit.hydraulics import LeakScenario, hazen_williams_headloss, mass_balance_residual, pipe_energy_residual, \
    run_eps, solve_steady_state
from lspkit.inp import parse_inp
from lspkit.search import GaConfig, SearchSpace, bisection_search, brute_force_lsp, genetic_search

EPS = 0.5
HANOI_AREA_MAX = 5000.0


@pytest.fixture(scope="module")
def hanoi():
    t0 = time.perf_counter()
    model, _, _, ctx = experiment("hanoi", rule="weighted_sum", area_max=HANOI_AREA_MAX)
    space = SearchSpace.full(ctx)
    oracle = brute_force_lsp(space, ctx)
    return model, ctx, space, oracle, time.perf_counter() - t0


def test_oracle_equivalence():
    t0 = time.perf_counter()
    details, ok = [], True
    for name, seed in [("toy3", 7), ("toy3", 8), ("toy3", 9), ("toy_grid", 7)]:
        model, _, _, ctx = experiment(name, seed=seed)
        assert model.num_nodes <= 12 and ctx.num_steps == 48 and ctx.K == 6
        space = SearchSpace.full(ctx)
        oracle = brute_force_lsp(space, ctx)
        found = bisection_search(space, ctx)
        same = found.lsp_node == oracle.lsp_node and abs(found.max_undetected_area - oracle.max_undetected_area) <= EPS
        ok &= same
        details.append(f"{name}/seed{seed} {found.lsp_node_id}={oracle.lsp_node_id} "
                       f"{found.max_undetected_area:.2f}~{oracle.max_undetected_area:.2f}")
    elapsed = time.perf_counter() - t0
    record("oracle equivalence", ok and elapsed < 120, f"{'; '.join(details)}; {elapsed:.0f}s < 120s")


def test_ga_reliability(hanoi):
    model, ctx, space, oracle, t_oracle = hanoi
    t0 = time.perf_counter()
    hits, runs = 0, []
    for variant in ("basic", "spectral"):
        for seed in range(5):
            out = genetic_search(space, ctx, GaConfig(seed=seed, variant=variant))
            hits += out.lsp_node == oracle.lsp_node
            runs.append(f"{variant[0]}{seed}:{out.lsp_node_id}")
    elapsed = t_oracle + time.perf_counter() - t0
    record("GA reliability", hits >= 9 and elapsed < 900,
           f"{hits}/10 trials found oracle node {oracle.lsp_node_id} ({' '.join(runs)}); {elapsed:.0f}s < 900s")


def test_source_proximity(hanoi):
    model, _, _, oracle, _ = hanoi
    dist = min(model.graph_distances(r.id)[oracle.lsp_node_id] for r in model.reservoirs)
    record("source proximity", dist <= 2,
           f"oracle LSP {oracle.lsp_node_id} ({oracle.max_undetected_area:.0f} cm2) is {dist} hop(s) from the reservoir")


SINGLE_PIPE = """
[JUNCTIONS]
J1 0 1.0
[RESERVOIRS]
R1 100
[PIPES]
P1 R1 J1 1000 100 110
[OPTIONS]
Units LPS
"""


def test_hydraulic_correctness():
    worst_mass = worst_energy = 0.0
    steps = 0
    for name in ("toy3", "toy_grid", "hanoi"):
        model, _, _, ctx = experiment(name)
        d = ctx.demand_matrix
        leaks = [None, LeakScenario(0, 20.0, 5, 6), LeakScenario(model.num_junctions - 1, 200.0, 20, 6)]
        for leak in leaks:
            res = run_eps(model, d, leak)
            assert res.converged.all()
            for k, state in enumerate(res.states):
                worst_mass = max(worst_mass, np.abs(mass_balance_residual(model, state, d[k])).max())
                worst_energy = max(worst_energy, np.abs(pipe_energy_residual(model, state)).max())
                steps += 1
    m = parse_inp(SINGLE_PIPE)
    head = solve_steady_state(m, [0.001]).heads[0]
    analytic = 100.0 - hazen_williams_headloss(0.001, 1000, 0.1, 110)
    ok = worst_mass <= 1e-6 and worst_energy <= 1e-4 and abs(head - analytic) <= 1e-3
    record("hydraulic correctness", ok,
           f"{steps} steps, max mass residual {worst_mass:.1e} m3/s, max energy residual {worst_energy:.1e} m, "
           f"single pipe |dh| {abs(head - analytic):.1e} m")


def test_detector_soundness():
    details, ok = [], True
    rng = np.random.default_rng(2024)
    for name in ("toy_grid", "hanoi"):
        _, meas, _, _ = experiment(name)
        tr, val = meas.slice(0, 240), meas.slice(240, 288)
        mt = train(tr, rule="max_threshold", c=1.5)
        ws = train(tr, val, rule="weighted_sum", gamma=1.1)
        n_tr, n_val = int(alarms(mt, tr).sum()), int(alarms(ws, val).sum())
        ok &= n_tr == 0 and n_val == 0
        bad = 0
        for det in (mt, ws):
            S = det.num_sensors
            scale = 3 * det.rule.tau if det is mt else 3 / (S * det.rule.q)
            for _ in range(1000):
                a, b = rng.uniform(0, scale), rng.uniform(0, scale)
                bad += alarm(det, np.minimum(a, b)) > alarm(det, np.maximum(a, b))
        ok &= bad == 0
        details.append(f"{name}: train alarms {n_tr}, val alarms {n_val}, monotonicity violations {bad}/2000")
    record("detector soundness", ok, "; ".join(details))


def test_pruning_soundness():
    details, ok = [], True
    for name in ("toy3", "toy_grid"):
        _, _, _, ctx = experiment(name)
        space = SearchSpace.full(ctx)
        a = bisection_search(space, ctx)
        b = bisection_search(space, ctx, pruning=False)
        same = a.lsp_node == b.lsp_node and abs(a.max_undetected_area - b.max_undetected_area) <= EPS
        ok &= same
        details.append(f"{name}: {a.lsp_node_id}/{a.max_undetected_area:.2f} ({a.evaluations} sims) vs "
                       f"{b.lsp_node_id}/{b.max_undetected_area:.2f} ({b.evaluations} sims)")
    record("pruning soundness", ok, "; ".join(details))


def test_determinism(tmp_path):
    def snapshot(d):
        return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.is_file()}

    cfg = tmp_path / "toy_grid.json"
    cfg.write_text(json.dumps({"network": "toy_grid", "seed": 7, "method": "ga-spectral", "generations": 10}))
    checked = []
    for threads in ("1", "1", "4"):
        out = tmp_path / f"run{len(checked)}"
        args = ["--output", str(out), "--threads", threads]
        for cmd in ("simulate", "train", "lsp"):
            assert main([cmd, str(cfg), *args]) == 0
        assert main(["lsp", str(cfg), "--method", "bisection", "--output", str(out / "bis"), "--threads", threads]) == 0
        assert main(["oracle-check", str(cfg), "--method", "bisection",
                     "--output", str(out / "check"), "--threads", threads]) == 0
        checked.append({**snapshot(out), **{"bis/" + k: v for k, v in snapshot(out / "bis").items()},
                        **{"check/" + k: v for k, v in snapshot(out / "check").items()}})
    same = checked[0] == checked[1] == checked[2]
    record("determinism", same, f"{len(checked[0])} output files byte-identical across 3 runs (threads 1, 1, 4)")
