import itertools
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import experiment
from lspkit.errors import SearchError
from lspkit.inp import node_index
from lspkit.search import (GaConfig, SearchContext, SearchSpace, bisection_search, brute_force_lsp, detection_matrix,
                           genetic_search, laplacian_embedding, max_undetected_area, nearest_node, prune,
                           spectral_embedding, _line_search)


class ThresholdContext:
    """Stand-in context where pair (n, t) is detected iff the area exceeds ``thr[n, t]``."""

    def __init__(self, thr, area_min=0.1, area_max=500.0, eps=0.5):
        self.thr = np.asarray(thr, dtype=float)
        self.area_min, self.area_max, self.eps = area_min, area_max, eps
        self.audit, self.threads, self.evaluations = False, 1, 0
        self.model = type("M", (), {"node_ids": tuple(f"n{i}" for i in range(self.thr.shape[0]))})()

    def window_detected(self, node, start, area):
        self.evaluations += 1
        return area > self.thr[node, start]


def space_of(thr):
    return SearchSpace(range(len(thr)), range(len(thr[0])))


@pytest.mark.parametrize("thr, expected, how", [
    (0.05, 0.0, "floor"),
    (600.0, 500.0, "unbounded"),
    (123.4, 123.4, "bisect"),
])
def test_line_search_exits(thr, expected, how):
    ctx = ThresholdContext([[thr]])
    area, path = _line_search(0, 0, ctx)
    assert path == how
    assert expected - ctx.eps <= area <= expected


def test_incumbent_shortcut():
    ctx = ThresholdContext([[100.0]])
    assert _line_search(0, 0, ctx, incumbent=150.0) == (0.0, "shortcut")
    area, how = _line_search(0, 0, ctx, incumbent=50.0)
    assert how == "bisect" and 99.5 <= area <= 100.0
    assert _line_search(0, 0, ctx, incumbent=900.0) == (0.0, "shortcut")


def test_pruning_example():
    # at the trial area only (node 1, start 0) stays undetected
    thr = [[1.0, 1.0], [300.0, 1.0]]
    M = np.array([[1, 1], [0, 1]], dtype=bool)
    assert prune([0, 1], [0, 1], M) == ([1], [0])
    out = bisection_search(space_of(thr), ThresholdContext(thr))
    assert (out.lsp_node, out.best_start) == (1, 0)
    assert 299.5 <= out.max_undetected_area <= 300.0


def test_single_pair_space():
    ctx = ThresholdContext([[42.0]])
    space = space_of([[42.0]])
    a = bisection_search(space, ctx).max_undetected_area
    b = brute_force_lsp(space, ctx).max_undetected_area
    assert a == b


def test_all_detected_and_unbounded():
    low = [[0.01, 0.02], [0.03, 0.01]]
    out = bisection_search(space_of(low), ThresholdContext(low))
    assert out.max_undetected_area == 0.0 and not out.unbounded
    high = [[10.0, 900.0], [700.0, 20.0]]
    out = bisection_search(space_of(high), ThresholdContext(high))
    assert out.unbounded and out.max_undetected_area == 500.0
    assert (out.lsp_node, out.best_start) == (0, 1)


_thr = st.lists(st.lists(st.floats(0.0, 600.0), min_size=3, max_size=3), min_size=1, max_size=4)


@settings(max_examples=150, deadline=None)
@given(_thr)
def test_bisection_matches_oracle_on_threshold_tables(thr):
    space, eps = space_of(thr), 0.5
    oracle = brute_force_lsp(space, ThresholdContext(thr))
    pruned = bisection_search(space, ThresholdContext(thr))
    plain = bisection_search(space, ThresholdContext(thr), pruning=False)
    assert abs(pruned.max_undetected_area - oracle.max_undetected_area) <= eps
    assert (pruned.lsp_node, pruned.best_start) == (plain.lsp_node, plain.best_start)
    assert pruned.max_undetected_area == plain.max_undetected_area
    assert pruned.evaluations <= plain.evaluations
    # the winning pair is genuinely undetected at the reported area
    if pruned.max_undetected_area > 0:
        assert pruned.max_undetected_area <= np.asarray(thr)[pruned.lsp_node, pruned.best_start]


def test_oracle_respects_tie_break():
    thr = [[600.0, 600.0], [600.0, 10.0]]
    out = brute_force_lsp(space_of(thr), ThresholdContext(thr))
    assert (out.lsp_node, out.best_start) == (0, 0)
    np.testing.assert_array_equal(out.pair_matrix, [[500, 500], [500, out.pair_matrix[1, 1]]])


def test_oracle_size_guard():
    ctx = ThresholdContext(np.zeros((101, 100)))
    with pytest.raises(SearchError, match="SPACE_TOO_LARGE"):
        brute_force_lsp(space_of(np.zeros((101, 100))), ctx)


def test_space_validation():
    with pytest.raises(SearchError, match="EMPTY_SPACE"):
        SearchSpace((), (0,))
    assert SearchSpace((3, 1, 2, 1), (5, 0)).nodes == (1, 2, 3)
    _, _, _, ctx = experiment("toy3")
    full = SearchSpace.full(ctx)
    assert full.starts == tuple(range(48 - 7 + 1))
    assert full.nodes == (0, 1)
    assert SearchSpace.full(ctx, exclude=["J1"]).nodes == (1,)
    with pytest.raises(SearchError, match="RANGE"):
        SearchSpace.full(ctx, starts=[45])


def test_context_validation():
    model, _, det, ctx = experiment("toy3")
    with pytest.raises(SearchError, match="BAD_BOUNDS"):
        SearchContext(model, ctx.demands, det, area_min=5, area_max=1)
    with pytest.raises(SearchError, match="SENSOR_MISMATCH"):
        SearchContext(model.with_sensors(["J1"]), ctx.demands, det)
    with pytest.raises(SearchError, match="RANGE"):
        ctx.window_detected(0, 45, 1.0)


@pytest.mark.parametrize("name", ["toy3", "toy_grid"])
def test_area_is_a_bracket(name):
    """The returned area is undetected and one eps above it is detected."""
    model, _, _, ctx = experiment(name)
    for node, start in [(0, 0), (model.num_junctions - 1, 20)]:
        a = max_undetected_area(node, start, ctx)
        if 0 < a < ctx.area_max:
            assert not ctx.window_detected(node, start, a)
            assert ctx.window_detected(node, start, a + ctx.eps)


def test_toy3_oracle_equivalence_and_pruning():
    _, _, _, ctx = experiment("toy3")
    space = SearchSpace.full(ctx)
    oracle = brute_force_lsp(space, ctx)
    pruned = bisection_search(space, ctx)
    plain = bisection_search(space, ctx, pruning=False)
    for out in (pruned, plain):
        assert out.lsp_node == oracle.lsp_node
        assert abs(out.max_undetected_area - oracle.max_undetected_area) <= ctx.eps


def test_detection_matrix_monotone_in_area():
    _, _, _, ctx = experiment("toy_grid")
    nodes, starts = [0, 5, 10], [0, 17, 33]
    small = detection_matrix(ctx, nodes, starts, 2.0)
    big = detection_matrix(ctx, nodes, starts, 20.0)
    assert np.all(big >= small)


def test_null_leak_window_matches_baseline():
    _, _, _, ctx = experiment("toy_grid")
    # the calibrated detector is quiet on the search day, and a zero-area leak changes nothing
    assert not ctx.baseline_alarms.any()
    assert not ctx.window_detected(3, 10, 0.0)


def star(n):
    A = np.zeros((n, n))
    A[0, 1:] = A[1:, 0] = 1
    return A


def path(n):
    A = np.zeros((n, n))
    for i in range(n - 1):
        A[i, i + 1] = A[i + 1, i] = 1
    return A


def test_star_eigenvalues():
    emb = laplacian_embedding(star(5))
    np.testing.assert_allclose(emb.eigenvalues, [1, 1, 1, 5], atol=1e-12)
    assert emb.vectors.shape == (5, 4)


def test_path_fiedler_vector():
    emb = laplacian_embedding(path(6))
    assert emb.eigenvalues[0] == pytest.approx(0.267949192431, abs=1e-12)
    fiedler = emb.vectors[:, 0]
    assert np.all(np.diff(fiedler) > 0) or np.all(np.diff(fiedler) < 0)
    # orthogonal to the constant first eigenvector
    np.testing.assert_allclose(emb.vectors.sum(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(emb.vectors.T @ emb.vectors, np.eye(4), atol=1e-12)


def test_embedding_errors():
    with pytest.raises(SearchError, match="TOO_SMALL"):
        laplacian_embedding(path(4))
    two = np.zeros((6, 6))
    two[:3, :3] = path(3)
    two[3:, 3:] = path(3)
    with pytest.raises(SearchError, match="DISCONNECTED"):
        laplacian_embedding(two)


def test_relabelling_permutes_embedding():
    rng = np.random.default_rng(3)
    A = path(8)
    A[0, 4] = A[4, 0] = A[2, 7] = A[7, 2] = 1   # no symmetry, distinct eigenvalues
    perm = rng.permutation(8)
    a = laplacian_embedding(A)
    b = laplacian_embedding(A[np.ix_(perm, perm)])
    np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, atol=1e-12)
    # eigenvectors agree up to sign per column
    np.testing.assert_allclose(np.abs(a.vectors[perm]), np.abs(b.vectors), atol=1e-9)


def test_nearest_node():
    emb = laplacian_embedding(path(6))
    for i in range(6):
        assert nearest_node(emb, emb.vectors[i]) == i
    assert nearest_node(emb, emb.vectors[0], candidates=[4, 3]) == 3
    mid = 0.5 * (emb.vectors[2] + emb.vectors[3])
    assert nearest_node(emb, mid, candidates=[3, 2]) in (2, 3)


def test_spectral_embedding_of_network():
    model, *_ = experiment("toy_grid")
    emb = spectral_embedding(model)
    assert emb.vectors.shape == (model.num_nodes, 4)
    assert np.all(emb.eigenvalues > 0)


def test_ga_config_validation():
    for bad in (dict(population=1), dict(mutation_rate=1.5), dict(variant="fancy"), dict(elitism=20),
                dict(mutation_sigma=-1)):
        with pytest.raises(SearchError, match="BAD_CONFIG"):
            GaConfig(**bad)


@pytest.fixture(scope="module")
def grid_oracle():
    _, _, _, ctx = experiment("toy_grid")
    space = SearchSpace.full(ctx)
    return space, ctx, brute_force_lsp(space, ctx)


@pytest.mark.parametrize("variant", ["basic", "spectral"])
def test_ga_deterministic_and_consistent(variant, grid_oracle):
    space, ctx, oracle = grid_oracle
    cfg = GaConfig(seed=3, variant=variant, population=10, generations=8)
    a = genetic_search(space, ctx, cfg)
    b = genetic_search(space, ctx, cfg)
    assert a.to_json() == b.to_json()
    assert a.method == f"ga-{variant}"
    # the shortcut never inflates the winner's area
    again = max_undetected_area(a.lsp_node, a.best_start, ctx)
    assert abs(again - a.max_undetected_area) <= ctx.eps
    assert a.max_undetected_area <= oracle.max_undetected_area + ctx.eps


def test_ga_thread_count_does_not_matter(grid_oracle):
    space, ctx, _ = grid_oracle
    cfg = GaConfig(seed=5, variant="spectral", population=10, generations=6)
    one = genetic_search(space, ctx, cfg)
    many = genetic_search(space, replace(ctx, threads=4), cfg)
    assert one.to_dict() | {"evaluations": 0} == many.to_dict() | {"evaluations": 0}


def test_ga_elitism_keeps_seeded_optimum(grid_oracle):
    space, ctx, oracle = grid_oracle
    init = [(oracle.lsp_node, oracle.best_start)] + [(space.nodes[-1], space.starts[-1])] * 9
    out = genetic_search(space, ctx, GaConfig(population=10, generations=3, seed=1), initial_population=init)
    assert out.max_undetected_area >= oracle.max_undetected_area - ctx.eps
    assert all(t["best_area"] >= oracle.max_undetected_area - ctx.eps for t in out.trace)


def test_ga_spectral_finds_grid_lsp(grid_oracle):
    space, ctx, oracle = grid_oracle
    hits = sum(genetic_search(space, ctx, GaConfig(seed=s, variant="spectral")).lsp_node == oracle.lsp_node
               for s in range(5))
    assert hits >= 4


def test_bisection_threads_and_enumeration_order(grid_oracle):
    space, ctx, oracle = grid_oracle
    shuffled = SearchSpace(tuple(reversed(space.nodes)), tuple(reversed(space.starts)))
    a = bisection_search(space, ctx)
    b = bisection_search(shuffled, replace(ctx, threads=3))
    assert a.to_dict() == b.to_dict()
    assert a.lsp_node == oracle.lsp_node
    assert node_index(ctx.model, a.lsp_node_id) == a.lsp_node
    assert list(itertools.islice(a.trace, 1))[0]["iteration"] == 0
