"""Least-sensitive-point search.

The least sensitive point is the node where the largest leak can run for a
window of ``K + 1`` steps without the detector raising an alarm. Four solvers
share one evaluation primitive, "is a leak of area a at node n starting at
step t detected inside its window?":

* :func:`max_undetected_area` - bisection over the area for one (node, start)
* :func:`brute_force_lsp` - the above for every pair (reference answer)
* :func:`bisection_search` - one shared area bisection over all pairs with
  node/start pruning
* :func:`genetic_search` - GA over (node, start), either on raw indices or on
  spectral node embeddings

All of them assume detection is monotone in the leak area.
"""

from __future__ import annotations

import json
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .detector import DetectorModel, alarms, residuals
from .errors import LspkitWarning, SearchError
from .hydraulics import LeakScenario, SimulationResult, SolverOptions, iter_eps, run_eps
from .inp import NetworkModel
from .measurement import DemandSeries

MAX_ORACLE_PAIRS = 10_000


@dataclass
class SearchContext:
    """Everything needed to decide whether a leak goes unnoticed.

    ``demands`` covers the search horizon only; step indices in a search are
    relative to its first row. The leak lasts ``duration_steps`` (default
    ``K``) and detection is checked on steps ``start .. start + K``.
    """

    model: NetworkModel
    demands: DemandSeries | np.ndarray
    detector: DetectorModel
    K: int = 6
    duration_steps: int | None = None
    area_min: float = 0.1
    area_max: float = 500.0
    eps: float = 0.5
    options: SolverOptions = field(default_factory=SolverOptions)
    threads: int = 1
    audit: bool = False
    evaluations: int = field(default=0, init=False)

    def __post_init__(self):
        if not 0 <= self.area_min < self.area_max:
            raise SearchError("BAD_BOUNDS", f"need 0 <= area_min < area_max, got {self.area_min}, {self.area_max}")
        if self.eps <= 0:
            raise SearchError("BAD_BOUNDS", "eps must be positive")
        if self.K < 0:
            raise SearchError("BAD_BOUNDS", "K must be >= 0")
        if self.duration_steps is None:
            self.duration_steps = self.K
        if tuple(self.detector.sensors) != tuple(self.model.sensors):
            raise SearchError("SENSOR_MISMATCH", "detector and model sensors differ")
        self._lock = threading.Lock()

    @property
    def demand_matrix(self) -> np.ndarray:
        return np.asarray(getattr(self.demands, "values", self.demands), dtype=float)

    @property
    def num_steps(self) -> int:
        return self.demand_matrix.shape[0]

    @cached_property
    def baseline(self) -> SimulationResult:
        return run_eps(self.model, self.demand_matrix, options=self.options)

    @cached_property
    def baseline_alarms(self) -> np.ndarray:
        return alarms(self.detector, self.baseline.pressures[:, self.model.sensor_indices])

    def window_detected(self, node: int, start: int, area: float) -> bool:
        """Simulate one leak and report whether any window step alarms."""
        with self._lock:
            self.evaluations += 1
        base = self.baseline
        model, sensors = self.model, self.model.sensor_indices
        stop = start + self.K + 1
        if stop > self.num_steps or start < 0:
            raise SearchError("RANGE", f"window {start}..{stop - 1} outside {self.num_steps} steps")
        leak = LeakScenario(node, area, start, self.duration_steps)
        # steps after the leak ends only differ from the baseline through tank levels
        sim_stop = stop if model.tanks else min(stop, start + self.duration_steps)
        for k, state, _ in iter_eps(model, self.demand_matrix, leak, first_step=start,
                                    num_steps=sim_stop - start, tank_levels=base.tank_levels[start],
                                    initial=base, options=self.options):
            if self.detector.rule.alarm(residuals(self.detector, state.pressures[sensors])):
                return True
        return bool(self.baseline_alarms[sim_stop:stop].any())


@dataclass(frozen=True)
class SearchSpace:
    """Candidate leak nodes and start steps (both kept sorted)."""

    nodes: tuple[int, ...]
    starts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(sorted(set(int(n) for n in self.nodes))))
        object.__setattr__(self, "starts", tuple(sorted(set(int(t) for t in self.starts))))
        if not self.nodes or not self.starts:
            raise SearchError("EMPTY_SPACE", "search space needs at least one node and one start")

    @classmethod
    def full(cls, ctx: SearchContext, exclude=(), starts=None) -> "SearchSpace":
        """All junctions not in ``exclude`` (ids or indices) and every start that fits a window."""
        model = ctx.model
        excluded = {model.node_ids.index(e) if isinstance(e, str) else int(e) for e in exclude}
        nodes = [i for i in range(model.num_junctions) if i not in excluded]
        last = ctx.num_steps - max(ctx.K + 1, ctx.duration_steps)
        if starts is None:
            starts = range(0, last + 1)
        bad = [t for t in starts if not 0 <= t <= last]
        if bad:
            raise SearchError("RANGE", f"start steps {bad[:3]} leave no room for the window")
        return cls(tuple(nodes), tuple(starts))

    @property
    def size(self) -> int:
        return len(self.nodes) * len(self.starts)


@dataclass
class SearchOutcome:
    method: str
    lsp_node: int
    lsp_node_id: str
    best_start: int
    max_undetected_area: float
    evaluations: int
    trace: list[dict] = field(default_factory=list)
    unbounded: bool = False
    node_areas: dict[int, float] = field(default_factory=dict)
    pair_matrix: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "lsp_node": self.lsp_node,
            "lsp_node_id": self.lsp_node_id,
            "best_start": self.best_start,
            "max_undetected_area": self.max_undetected_area,
            "evaluations": self.evaluations,
            "unbounded": self.unbounded,
            "trace": self.trace,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _pair_key(area: float, node: int, start: int):
    # larger area first, then smaller node, then smaller start
    return (-area, node, start)


def _pmap(ctx: SearchContext, fn, items):
    items = list(items)
    if ctx.threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=ctx.threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# ---------------------------------------------------------------------------
# line search on one pair
# ---------------------------------------------------------------------------

def _line_search(node: int, start: int, ctx: SearchContext, incumbent: float | None = None):
    """Return ``(area, how)`` where ``how`` names the exit path."""
    detected = lambda a: ctx.window_detected(node, start, a)  # noqa: E731
    lo, hi = ctx.area_min, ctx.area_max
    if incumbent is not None and incumbent > 0:
        probe = min(incumbent, hi)
        if detected(probe):
            return 0.0, "shortcut"
        lo = probe
    elif detected(lo):
        return 0.0, "floor"
    if lo >= hi or not detected(hi):
        return hi, "unbounded"
    while hi - lo > ctx.eps:
        mid = 0.5 * (lo + hi)
        if detected(mid):
            hi = mid
        else:
            lo = mid
    if ctx.audit:
        audit_monotone(node, start, ctx)
    return lo, "bisect"


def max_undetected_area(node: int, start: int, ctx: SearchContext, incumbent: float | None = None) -> float:
    """Largest leak area (cm², within ``ctx.eps``) that stays undetected.

    Returns 0 if even ``ctx.area_min`` is detected and ``ctx.area_max`` if
    that is still undetected. With an ``incumbent`` area the incumbent is
    tried first and a detection there short-circuits to 0.
    """
    return _line_search(node, start, ctx, incumbent)[0]


def audit_monotone(node: int, start: int, ctx: SearchContext, points: int = 17) -> bool:
    """Grid-check that detection never switches off as the area grows."""
    grid = np.linspace(ctx.area_min, ctx.area_max, points)
    flags = [ctx.window_detected(node, start, float(a)) for a in grid]
    seen = False
    for a, f in zip(grid, flags):
        if seen and not f:
            warnings.warn(LspkitWarning("NONMONOTONE", f"node {node} start {start}: undetected again at {a:.3g} cm²"),
                          stacklevel=2)
            return False
        seen = seen or f
    return True


# ---------------------------------------------------------------------------
# brute force reference
# ---------------------------------------------------------------------------

def brute_force_lsp(space: SearchSpace, ctx: SearchContext) -> SearchOutcome:
    """Evaluate every (node, start) pair; exact argmax with a fixed tie-break."""
    if space.size > MAX_ORACLE_PAIRS:
        raise SearchError("SPACE_TOO_LARGE", f"{space.size} pairs exceeds {MAX_ORACLE_PAIRS}")
    before = ctx.evaluations
    pairs = [(n, t) for n in space.nodes for t in space.starts]
    areas = _pmap(ctx, lambda p: max_undetected_area(p[0], p[1], ctx), pairs)
    matrix = np.array(areas).reshape(len(space.nodes), len(space.starts))
    best = min(zip(areas, pairs), key=lambda x: _pair_key(x[0], *x[1]))
    (area, (node, start)) = best
    node_areas = {n: float(matrix[i].max()) for i, n in enumerate(space.nodes)}
    return SearchOutcome("oracle", node, ctx.model.node_ids[node], start, float(area),
                         ctx.evaluations - before, trace=[], unbounded=area >= ctx.area_max,
                         node_areas=node_areas, pair_matrix=matrix)


# ---------------------------------------------------------------------------
# bisection with pruning
# ---------------------------------------------------------------------------

def detection_matrix(ctx: SearchContext, nodes, starts, area: float) -> np.ndarray:
    pairs = [(n, t) for n in nodes for t in starts]
    flags = _pmap(ctx, lambda p: ctx.window_detected(p[0], p[1], area), pairs)
    return np.array(flags, dtype=bool).reshape(len(nodes), len(starts))


def prune(nodes, starts, detected: np.ndarray):
    """Drop nodes detected at every start and starts detected at every node."""
    keep_n = ~detected.all(axis=1)
    keep_t = ~detected.all(axis=0)
    return ([n for n, k in zip(nodes, keep_n) if k], [t for t, k in zip(starts, keep_t) if k])


def bisection_search(space: SearchSpace, ctx: SearchContext, *, pruning: bool = True) -> SearchOutcome:
    """Shared bisection on the leak area over all surviving (node, start) pairs.

    Whenever some pair stays undetected at the trial area the lower bound
    moves up and, with ``pruning``, nodes/starts detected everywhere are
    dropped. The answer is the smallest (node, start) still undetected at the
    final lower bound. ``node_areas`` holds, per node, the largest trial
    area at which it was still undetected, a lower bound for pruned nodes.
    """
    before = ctx.evaluations
    nodes, starts = list(space.nodes), list(space.starts)
    node_areas = {n: 0.0 for n in nodes}
    trace = []

    def evaluate(area, it):
        M = detection_matrix(ctx, nodes, starts, area)
        trace.append({"iteration": it, "area": area, "nodes": len(nodes), "starts": len(starts),
                      "undetected": int((~M).sum())})
        return M

    def record(M, area):
        for i, n in enumerate(nodes):
            if not M[i].all():
                node_areas[n] = max(node_areas[n], area)
        return [(n, t) for i, n in enumerate(nodes) for j, t in enumerate(starts) if not M[i, j]]

    def finish(pairs, area, unbounded=False, matrix=None):
        node, start = min(pairs)
        return SearchOutcome("bisection", node, ctx.model.node_ids[node], start, float(area),
                             ctx.evaluations - before, trace, unbounded, node_areas, matrix)

    M = evaluate(ctx.area_min, 0)
    if M.all():
        return finish([(nodes[0], starts[0])], 0.0, matrix=M)
    lo, hi = ctx.area_min, ctx.area_max
    best = record(M, lo)
    if pruning:
        nodes, starts = prune(nodes, starts, M)
    M = evaluate(hi, 1)
    if not M.all():
        return finish(record(M, hi), hi, unbounded=True, matrix=M)
    it = 1
    while hi - lo > ctx.eps:
        it += 1
        mid = 0.5 * (lo + hi)
        M = evaluate(mid, it)
        if M.all():
            hi = mid
            continue
        lo = mid
        best = record(M, mid)
        if pruning:
            nodes, starts = prune(nodes, starts, M)
    return finish(best, lo, matrix=M)


# ---------------------------------------------------------------------------
# spectral embedding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NodeEmbedding:
    vectors: np.ndarray      # (N, dims)
    eigenvalues: np.ndarray  # (dims,), the 2nd.. eigenvalues

    def point(self, node: int) -> np.ndarray:
        return self.vectors[node]


def laplacian_embedding(adjacency, dims: int = 4) -> NodeEmbedding:
    """Eigenvectors 2..dims+1 of ``L = D - A`` (ascending eigenvalues).

    Each eigenvector is flipped so its largest-magnitude entry is positive.
    """
    A = np.asarray(adjacency, dtype=float)
    A = np.maximum(A, A.T)
    np.fill_diagonal(A, 0.0)
    N = A.shape[0]
    if N < dims + 1:
        raise SearchError("TOO_SMALL", f"need at least {dims + 1} nodes, got {N}")
    L = np.diag(A.sum(axis=1)) - A
    vals, vecs = np.linalg.eigh(L)
    if vals[1] <= 1e-9 * max(1.0, vals[-1]):
        raise SearchError("DISCONNECTED", "graph Laplacian has a repeated zero eigenvalue")
    sel = vecs[:, 1:dims + 1].copy()
    for c in range(dims):
        if sel[np.argmax(np.abs(sel[:, c])), c] < 0:
            sel[:, c] *= -1.0
    return NodeEmbedding(sel, vals[1:dims + 1].copy())


def spectral_embedding(model: NetworkModel, dims: int = 4) -> NodeEmbedding:
    """Embedding of every network node from the unweighted link graph."""
    A = np.zeros((model.num_nodes, model.num_nodes))
    for a, b in model.link_endpoints:
        A[a, b] = A[b, a] = 1.0
    return laplacian_embedding(A, dims)


def nearest_node(embedding: NodeEmbedding, point, candidates=None) -> int:
    """Candidate whose embedding is closest to ``point``; ties go to the smaller index."""
    idx = np.arange(embedding.vectors.shape[0]) if candidates is None else np.sort(np.asarray(candidates))
    d = np.sum((embedding.vectors[idx] - np.asarray(point)) ** 2, axis=1)
    return int(idx[np.argmin(d)])


# ---------------------------------------------------------------------------
# genetic algorithm
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaConfig:
    population: int = 20
    generations: int = 30
    tournament_size: int = 3
    mutation_rate: float = 0.1
    mutation_sigma: float = 0.2
    seed: int = 0
    variant: str = "basic"   # "basic" or "spectral"
    elitism: int = 1

    def __post_init__(self):
        if self.population < 2:
            raise SearchError("BAD_CONFIG", "population must be >= 2")
        if self.generations < 0 or self.tournament_size < 1:
            raise SearchError("BAD_CONFIG", "generations >= 0 and tournament_size >= 1 required")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise SearchError("BAD_CONFIG", "mutation_rate must lie in [0, 1]")
        if self.mutation_sigma < 0:
            raise SearchError("BAD_CONFIG", "mutation_sigma must be >= 0")
        if self.variant not in ("basic", "spectral"):
            raise SearchError("BAD_CONFIG", f"unknown variant {self.variant!r}")
        if not 0 <= self.elitism < self.population:
            raise SearchError("BAD_CONFIG", "elitism must be in [0, population)")


def genetic_search(space: SearchSpace, ctx: SearchContext, cfg: GaConfig = GaConfig(),
                   initial_population=None) -> SearchOutcome:
    """Genetic search over (node, start) with cached, incumbent-shortcut fitness.

    ``basic`` treats node and start as two genes. ``spectral`` replaces the
    node gene by its 4-d Laplacian embedding: coordinates are blended and
    mutated, then snapped back to the nearest candidate node. Fitness of a
    generation is evaluated against the best area known when it started, so
    results do not depend on ``ctx.threads``.
    """
    rng = np.random.default_rng(cfg.seed)
    nodes = np.array(space.nodes)
    starts = np.array(space.starts)
    before = ctx.evaluations
    emb = spectral_embedding(ctx.model) if cfg.variant == "spectral" else None

    if initial_population is not None:
        pop = [(int(n), int(t)) for n, t in initial_population]
        if len(pop) != cfg.population:
            raise SearchError("BAD_CONFIG", "initial population size differs from config")
    else:
        pop = [(int(rng.choice(nodes)), int(rng.choice(starts))) for _ in range(cfg.population)]

    cache: dict[tuple[int, int], float] = {}
    trace = []

    def incumbent():
        best = max(cache.values(), default=0.0)
        return best if best > 0 else None

    def evaluate(population):
        inc = incumbent()
        todo = sorted(set(p for p in population if p not in cache))
        vals = _pmap(ctx, lambda p: max_undetected_area(p[0], p[1], ctx, inc), todo)
        cache.update(zip(todo, vals))
        return [cache[p] for p in population]

    def tournament(fit):
        idx = rng.choice(len(pop), size=min(cfg.tournament_size, len(pop)), replace=False)
        return pop[min(idx, key=lambda i: _pair_key(fit[i], *pop[i]))]

    def child_basic(a, b):
        genes = [a[g] if rng.random() < 0.5 else b[g] for g in range(2)]
        if rng.random() < cfg.mutation_rate:
            genes[0] = int(rng.choice(nodes))
        if rng.random() < cfg.mutation_rate:
            genes[1] = int(rng.choice(starts))
        return (int(genes[0]), int(genes[1]))

    def child_spectral(a, b, spread):
        pa, pb = emb.vectors[a[0]], emb.vectors[b[0]]
        lo, hi = np.minimum(pa, pb), np.maximum(pa, pb)
        width = hi - lo
        point = rng.uniform(lo - 0.5 * width, hi + 0.5 * width)
        mutate = rng.random(point.shape) < cfg.mutation_rate
        point = point + mutate * rng.normal(0.0, 1.0, point.shape) * cfg.mutation_sigma * spread
        start = a[1] if rng.random() < 0.5 else b[1]
        if rng.random() < cfg.mutation_rate:
            start = int(rng.choice(starts))
        return (nearest_node(emb, point, nodes), int(start))

    fit = evaluate(pop)
    for gen in range(cfg.generations + 1):
        order = sorted(range(len(pop)), key=lambda i: _pair_key(fit[i], *pop[i]))
        top = pop[order[0]]
        trace.append({"generation": gen, "best_area": fit[order[0]], "best_node": top[0], "best_start": top[1],
                      "distinct": len(set(pop))})
        if gen == cfg.generations:
            break
        nxt = [pop[i] for i in order[: cfg.elitism]]
        if emb is not None:
            spread = emb.vectors[[p[0] for p in pop]].std(axis=0)
        while len(nxt) < cfg.population:
            a, b = tournament(fit), tournament(fit)
            nxt.append(child_basic(a, b) if emb is None else child_spectral(a, b, spread))
        pop = nxt
        fit = evaluate(pop)

    (node, start), area = min(cache.items(), key=lambda kv: _pair_key(kv[1], *kv[0]))
    node_areas: dict[int, float] = {}
    for (n, _), a in cache.items():
        node_areas[n] = max(node_areas.get(n, 0.0), a)
    return SearchOutcome(f"ga-{cfg.variant}", node, ctx.model.node_ids[node], start, float(area),
                         ctx.evaluations - before, trace, area >= ctx.area_max, dict(sorted(node_areas.items())))
