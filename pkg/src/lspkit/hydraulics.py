"""Demand-driven hydraulic solver with pressure-dependent leak outflow.

Each steady state is found by Newton iteration on the joint link/node system

    h_k(Q_k) - (H_from - H_to) = 0          (every open link)
    -sum_out Q + sum_in Q - d_i - leak_i(H_i) = 0   (every junction)

with reservoir and tank heads held fixed. Pipes follow Hazen-Williams, pumps
a power-law head curve, and pressure-reducing valves switch between
active/open/closed the way EPANET does. Extended-period runs chain steady
states and integrate tank levels explicitly between them.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import LspkitError, LspkitWarning, SimulationError
from .inp import NetworkModel

GRAVITY = 9.81
DEFAULT_DISCHARGE_COEFF = 0.75
MIN_LEAK_AREA = 1e-9   # cm²

HW_COEFF = 10.667
HW_EXP = 1.852
HW_DIAM_EXP = 4.871

CLOSED, OPEN, ACTIVE = 0, 1, 2
_PIPE, _PUMP, _VALVE, _LEAK = 0, 1, 2, 3


def hazen_williams_resistance(length, diameter, roughness):
    return HW_COEFF * np.power(roughness, -HW_EXP) * np.power(diameter, -HW_DIAM_EXP) * length


def hazen_williams_headloss(q, length, diameter, roughness):
    """Head loss (m) along a pipe carrying ``q`` m³/s; odd in ``q``."""
    r = hazen_williams_resistance(length, diameter, roughness)
    return r * np.sign(q) * np.power(np.abs(q), HW_EXP)


def leak_outflow(area, pressure_head, discharge_coeff=DEFAULT_DISCHARGE_COEFF):
    """Orifice outflow (m³/s) of a leak with ``area`` in cm².

    ``C_d * A * sqrt(2 g p)``; zero for non-positive pressure head.
    """
    if np.any(np.asarray(area) < 0):
        raise ValueError("leak area must be nonnegative")
    p = np.maximum(pressure_head, 0.0)
    return discharge_coeff * (np.asarray(area) * 1e-4) * np.sqrt(2.0 * GRAVITY * p)


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 100
    head_tol: float = 1e-8      # convergence target on link head balance, m
    mass_tol: float = 1e-10     # convergence target on junction continuity, m³/s
    damping: float = 0.5
    max_halvings: int = 8
    q_reg: float = 1e-6         # below this |q| the headloss slope is frozen
    valve_minor_loss: float = 0.1
    discharge_coeff: float = DEFAULT_DISCHARGE_COEFF
    max_status_rounds: int = 10


@dataclass(frozen=True)
class LeakScenario:
    """Single-node leak: ``area`` cm² at node ``node_index``, active for
    steps ``start_step <= k < start_step + duration_steps``."""

    node_index: int
    area: float
    start_step: int = 0
    duration_steps: int = 6

    def __post_init__(self):
        if not self.area >= 0:
            raise LspkitError("BAD_LEAK", f"leak area must be >= 0, got {self.area}")
        if self.start_step < 0 or self.duration_steps < 0:
            raise LspkitError("BAD_LEAK", "start_step and duration_steps must be >= 0")

    def active(self, step: int) -> bool:
        return self.start_step <= step < self.start_step + self.duration_steps


@dataclass
class HydraulicState:
    heads: np.ndarray       # per node, m
    pressures: np.ndarray   # per node, m
    flows: np.ndarray       # per link, m³/s
    leak_flows: np.ndarray  # per node, m³/s
    status: np.ndarray      # per link, CLOSED/OPEN/ACTIVE
    converged: bool = True
    iterations: int = 0


@dataclass
class SimulationResult:
    states: list[HydraulicState]
    times: np.ndarray
    tank_levels: np.ndarray        # (steps, tanks), level used at each step
    converged: np.ndarray
    tank_overflow: np.ndarray = field(default=None)
    tank_empty: np.ndarray = field(default=None)

    def __len__(self):
        return len(self.states)

    @property
    def pressures(self) -> np.ndarray:
        return np.array([s.pressures for s in self.states])

    @property
    def heads(self) -> np.ndarray:
        return np.array([s.heads for s in self.states])

    @property
    def flows(self) -> np.ndarray:
        return np.array([s.flows for s in self.states])

    @property
    def leak_flows(self) -> np.ndarray:
        return np.array([s.leak_flows for s in self.states])


class _Network:
    """Index arrays and constants derived once per model."""

    def __init__(self, model: NetworkModel, opts: SolverOptions):
        self.model = model
        self.nj = model.num_junctions
        self.nn = model.num_nodes
        links = model.links
        self.nl = len(links)
        ends = model.link_endpoints
        self.frm = ends[:, 0].copy()
        self.to = ends[:, 1].copy()
        self.kind = np.array([_PIPE] * len(model.pipes) + [_PUMP] * len(model.pumps)
                             + [_VALVE] * len(model.valves), dtype=int)
        self.r = np.zeros(self.nl)
        self.expo = np.full(self.nl, 2.0)
        self.h0 = np.zeros(self.nl)
        self.h_set = np.full(self.nl, np.nan)
        area = np.zeros(self.nl)
        for k, link in enumerate(links):
            if self.kind[k] == _PIPE:
                self.r[k] = hazen_williams_resistance(link.length, link.diameter, link.roughness)
                self.expo[k] = HW_EXP
                area[k] = math.pi * link.diameter**2 / 4
            elif self.kind[k] == _PUMP:
                self.r[k] = link.curve.r
                self.expo[k] = link.curve.n
                self.h0[k] = link.curve.h0
                area[k] = 0.1
            else:
                d = link.diameter
                self.r[k] = 8.0 * opts.valve_minor_loss / (GRAVITY * math.pi**2 * d**4)
                self.h_set[k] = model.elevations[self.to[k]] + link.setting
                area[k] = math.pi * d**2 / 4
                if self.to[k] >= self.nj:
                    raise SimulationError("BAD_VALVE", f"valve {link.id} must feed a junction")
        self.q_init = area * 1.0  # 1 m/s
        self.junction_elev = model.elevations[: self.nj].copy()
        self.reservoir_heads = np.array([r.total_head for r in model.reservoirs])
        self.tank_elev = np.array([t.elevation for t in model.tanks])
        # incidence restricted to junction rows: +1 at from-node, -1 at to-node
        self.A = np.zeros((self.nj, self.nl))
        for k in range(self.nl):
            if self.frm[k] < self.nj:
                self.A[self.frm[k], k] += 1.0
            if self.to[k] < self.nj:
                self.A[self.to[k], k] -= 1.0
        self.tank_in = np.zeros((len(model.tanks), self.nl))
        for t in range(len(model.tanks)):
            node = self.nj + len(model.reservoirs) + t
            self.tank_in[t, self.to == node] += 1.0
            self.tank_in[t, self.frm == node] -= 1.0


def _network(model: NetworkModel, opts: SolverOptions) -> _Network:
    cache = model.__dict__.setdefault("_hydraulic_cache", {})
    key = (opts.valve_minor_loss,)
    if key not in cache:
        cache[key] = _Network(model, opts)
    return cache[key]


def _link_terms(kind, r, expo, h0, q, head_diff, status, opts, q_floor):
    """Residual and slope of each link equation."""
    aq = np.abs(q)
    # headloss h(q) and slope, with the slope frozen below q_floor
    h = r * np.sign(q) * np.power(aq, expo)
    slope = expo * r * np.power(np.maximum(aq, q_floor), expo - 1.0)
    pump = kind == _PUMP
    h[pump] -= h0[pump]
    res = h - head_diff
    closed = status == CLOSED
    res[closed] = q[closed]
    slope[closed] = 1.0
    active = status == ACTIVE
    slope[active] = 0.0
    return res, slope, closed, active


def solve_steady_state(model: NetworkModel, step_demands, tank_heads=None, leak=None, *,
                       options: SolverOptions | None = None,
                       initial: HydraulicState | None = None) -> HydraulicState:
    """Solve one hydraulic snapshot.

    ``step_demands`` holds one value (m³/s) per junction. ``leak`` is an
    optional ``(node_index, area_cm2)`` pair; it is modelled as an extra
    link to atmosphere with head loss ``q|q| / k**2`` (``k = C_d A sqrt(2g)``)
    that closes instead of drawing air in, which reproduces
    ``leak_outflow`` at convergence without the infinite slope of
    ``sqrt(p)`` at zero pressure. ``initial`` warm-starts heads, flows and
    statuses. A non-converged solve returns its best iterate with
    ``converged=False``; a singular Newton matrix raises
    ``SimulationError('SINGULAR_SYSTEM')``.
    """
    opts = options or SolverOptions()
    net = _network(model, opts)
    nj, nl = net.nj, net.nl
    demand = np.asarray(step_demands, dtype=float)
    if demand.shape != (nj,):
        raise SimulationError("BAD_INPUT", f"expected {nj} junction demands, got shape {demand.shape}")
    if not np.all(np.isfinite(demand)) or np.any(demand < 0):
        raise SimulationError("BAD_INPUT", "demands must be finite and nonnegative")
    if tank_heads is None:
        tank_heads = net.tank_elev + np.array([t.init_level for t in model.tanks])
    fixed = np.concatenate([net.reservoir_heads, np.asarray(tank_heads, dtype=float)])

    frm, to, kind, r, expo, h0, h_set, A = net.frm, net.to, net.kind, net.r, net.expo, net.h0, net.h_set, net.A
    leak_node = None
    if leak is not None:
        node, area = leak
        if not 0 <= node < nj:
            raise SimulationError("BAD_LEAK", f"leaks must sit at junctions, got node index {node}")
        if area < 0:
            raise SimulationError("BAD_LEAK", "leak area must be >= 0")
        # below MIN_LEAK_AREA the orifice resistance overflows; such a leak carries no flow anyway
        if area >= MIN_LEAK_AREA:
            leak_node = int(node)
            k = opts.discharge_coeff * area * 1e-4 * math.sqrt(2.0 * GRAVITY)
            # virtual link from the leak node to an atmosphere node at its elevation
            frm = np.append(frm, leak_node)
            to = np.append(to, net.nn)
            kind = np.append(kind, _LEAK)
            r = np.append(r, 1.0 / k**2)
            expo = np.append(expo, 2.0)
            h0 = np.append(h0, 0.0)
            h_set = np.append(h_set, np.nan)
            A = np.column_stack([A, np.eye(nj, 1, -leak_node).ravel()])
            fixed = np.append(fixed, net.junction_elev[leak_node])
    nx = len(frm)
    links_from_j = frm < nj
    links_to_j = to < nj
    rows = np.arange(nx)
    q_floor = np.full(nx, opts.q_reg)
    if leak_node is not None:
        # a small orifice can carry less than q_reg; freeze its slope at 1 um of head instead
        q_floor[-1] = min(opts.q_reg, k * 1e-3)

    if initial is not None:
        H = initial.heads[:nj].copy()
        Q = initial.flows.copy()
        status = initial.status.copy()
    else:
        H = np.full(nj, fixed.max() if fixed.size else 0.0)
        Q = net.q_init.copy()
        status = np.where(net.kind == _VALVE, ACTIVE, OPEN)
    if leak_node is not None:
        p0 = max(H[leak_node] - net.junction_elev[leak_node], 0.0)
        Q = np.append(Q, k * math.sqrt(p0))
        status = np.append(status, OPEN)

    def residual(Q, H, status):
        heads = np.concatenate([H, fixed])
        diff = heads[frm] - heads[to]
        f1, slope, closed, active = _link_terms(kind, r, expo, h0, Q, diff, status, opts, q_floor)
        f1[active] = heads[to[active]] - h_set[active]
        f2 = -(A @ Q) - demand
        return f1, f2, slope, closed, active

    def merit(f1, f2):
        return float(np.sum(f1 * f1) + np.sum((f2 * 1e3) ** 2))

    jac = np.zeros((nx + nj, nx + nj))
    jac[nx:, :nx] = -A
    iters = 0
    converged = False
    rounds = 0
    f1, f2, slope, closed, active = residual(Q, H, status)
    current = merit(f1, f2)
    while iters < opts.max_iter:
        if np.max(np.abs(f1), initial=0.0) <= opts.head_tol and np.max(np.abs(f2), initial=0.0) <= opts.mass_tol:
            new_status = _update_status(kind, frm, to, h0, h_set, Q, np.concatenate([H, fixed]), status)
            if rounds < opts.max_status_rounds and not np.array_equal(new_status, status):
                status = new_status
                rounds += 1
                f1, f2, slope, closed, active = residual(Q, H, status)
                current = merit(f1, f2)
                continue
            converged = True
            break
        iters += 1
        jac[:nx, :] = 0.0
        jac[rows, rows] = slope
        open_links = ~(closed | active)
        # d f1 / d H: -1 at from-junction, +1 at to-junction for open links
        m = open_links & links_from_j
        jac[rows[m], nx + frm[m]] -= 1.0
        m = (open_links | active) & links_to_j
        jac[rows[m], nx + to[m]] += 1.0
        rhs = -np.concatenate([f1, f2])
        try:
            step = np.linalg.solve(jac, rhs)
        except np.linalg.LinAlgError:
            raise SimulationError("SINGULAR_SYSTEM", "Newton matrix is singular") from None
        if not np.all(np.isfinite(step)):
            raise SimulationError("SINGULAR_SYSTEM", "Newton step is not finite")
        scale = 1.0
        for _ in range(opts.max_halvings + 1):
            Qn = Q + scale * step[:nx]
            Hn = H + scale * step[nx:]
            trial = residual(Qn, Hn, status)
            new = merit(trial[0], trial[1])
            if new <= current or scale < opts.damping ** opts.max_halvings:
                break
            scale *= opts.damping
        Q, H = Qn, Hn
        f1, f2, slope, closed, active = trial
        current = new

    heads = np.concatenate([H, fixed[: net.nn - nj]])
    leak_flows = np.zeros(net.nn)
    if leak_node is not None:
        leak_flows[leak_node] = Q[nl]
    return HydraulicState(heads=heads, pressures=heads - model.elevations, flows=Q[:nl],
                          leak_flows=leak_flows, status=status[:nl], converged=converged,
                          iterations=iters)


def _update_status(kind, frm, to, h0, h_set, Q, heads, status):
    tol = 1e-6
    new = status.copy()
    hf, ht = heads[frm], heads[to]
    for k in np.flatnonzero(kind != _PIPE):
        if kind[k] == _PUMP:
            if status[k] == OPEN and Q[k] < -tol:
                new[k] = CLOSED
            elif status[k] == CLOSED and h0[k] > ht[k] - hf[k] + tol:
                new[k] = OPEN
        elif kind[k] == _LEAK:
            # behaves like a check valve: no inflow through the leak
            if status[k] == OPEN and Q[k] < 0:
                new[k] = CLOSED
            elif status[k] == CLOSED and hf[k] > ht[k]:
                new[k] = OPEN
        else:
            hs = h_set[k]
            if status[k] == ACTIVE:
                if Q[k] < -tol:
                    new[k] = CLOSED
                elif hf[k] < hs - tol:
                    new[k] = OPEN
            elif status[k] == OPEN:
                if Q[k] < -tol:
                    new[k] = CLOSED
                elif ht[k] > hs + tol:
                    new[k] = ACTIVE
            elif hf[k] > ht[k] + tol:
                new[k] = ACTIVE if hf[k] >= hs else OPEN
    return new


def _demand_matrix(demands) -> np.ndarray:
    return np.asarray(getattr(demands, "values", demands), dtype=float)


def iter_eps(model: NetworkModel, demands, leak: LeakScenario | None = None, *,
             first_step: int = 0, num_steps: int | None = None, tank_levels=None,
             initial: SimulationResult | None = None,
             options: SolverOptions | None = None) -> Iterator[tuple[int, HydraulicState, np.ndarray]]:
    """Yield ``(step, state, tank_levels_used)`` for consecutive steps.

    ``first_step``/``tank_levels`` start the run mid-horizon (levels default
    to the tanks' initial levels). ``initial`` supplies per-step warm starts
    indexed by absolute step.
    """
    opts = options or SolverOptions()
    D = _demand_matrix(demands)
    if num_steps is None:
        num_steps = D.shape[0] - first_step
    last = first_step + num_steps
    if D.ndim != 2 or D.shape[1] != model.num_junctions:
        raise SimulationError("BAD_INPUT", f"demand matrix must be (steps, {model.num_junctions})")
    if D.shape[0] < last:
        raise SimulationError("BAD_INPUT", f"demand series has {D.shape[0]} steps, need {last}")
    levels = np.array([t.init_level for t in model.tanks] if tank_levels is None else tank_levels,
                      dtype=float)
    tanks = model.tanks
    tank_area = np.array([t.area for t in tanks])
    lo = np.array([t.min_level for t in tanks])
    hi = np.array([t.max_level for t in tanks])
    elev = np.array([t.elevation for t in tanks])
    net = _network(model, opts)
    dt = model.hydraulic_timestep
    prev = None
    for k in range(first_step, last):
        if leak is not None and leak.active(k):
            leak_arg = (leak.node_index, leak.area)
        else:
            leak_arg = None
        warm = initial.states[k] if initial is not None else prev
        try:
            state = solve_steady_state(model, D[k], elev + levels, leak_arg, options=opts, initial=warm)
        except SimulationError as exc:
            raise SimulationError(exc.code, exc.message, step=k) from exc
        yield k, state, levels
        prev = state
        if len(tanks):
            inflow = net.tank_in @ state.flows
            levels = np.clip(levels + inflow * dt / tank_area, lo, hi)


def run_eps(model: NetworkModel, demands, leak: LeakScenario | None = None, *,
            options: SolverOptions | None = None, **kwargs) -> SimulationResult:
    """Extended-period simulation over the demand series horizon.

    The leak, if given, is active only for its step window. Extra keyword
    arguments are forwarded to :func:`iter_eps`.
    """
    D = _demand_matrix(demands)
    if leak is not None:
        if not 0 <= leak.node_index < model.num_junctions:
            raise SimulationError("BAD_LEAK", f"leaks must sit at junctions, got {leak.node_index}")
        if leak.start_step + leak.duration_steps > D.shape[0]:
            raise SimulationError("BAD_LEAK", "leak window exceeds the simulation horizon")
    states, levels, steps = [], [], []
    for k, state, lv in iter_eps(model, D, leak, options=options, **kwargs):
        states.append(state)
        levels.append(lv)
        steps.append(k)
    nt = len(model.tanks)
    lv = np.array(levels).reshape(len(states), nt)
    lo = np.array([t.min_level for t in model.tanks])
    hi = np.array([t.max_level for t in model.tanks])
    converged = np.array([s.converged for s in states], dtype=bool)
    if not converged.all():
        bad = np.flatnonzero(~converged)
        warnings.warn(LspkitWarning("NO_CONVERGENCE", f"{bad.size} step(s) did not converge, first {steps[bad[0]]}"),
                      stacklevel=2)
    return SimulationResult(
        states=states,
        times=np.array(steps, dtype=float) * model.hydraulic_timestep,
        tank_levels=lv,
        converged=converged,
        tank_overflow=lv >= hi,
        tank_empty=lv <= lo,
    )


def write_result_csv(result: SimulationResult, model: NetworkModel, path):
    """One row per step: ``time_s``, heads, pressures, link flows, leak flows."""
    cols = (["time_s"] + [f"head_{n}" for n in model.node_ids] + [f"pressure_{n}" for n in model.node_ids]
            + [f"flow_{l}" for l in model.link_ids] + [f"leak_flow_{n}" for n in model.node_ids])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for t, s in zip(result.times, result.states):
            w.writerow([repr(float(t))] + [repr(float(x)) for x in
                                           np.concatenate([s.heads, s.pressures, s.flows, s.leak_flows])])


def mass_balance_residual(model: NetworkModel, state: HydraulicState, step_demands) -> np.ndarray:
    """Per-junction ``inflow - outflow - demand - leak`` (m³/s)."""
    nj = model.num_junctions
    net = _network(model, SolverOptions())
    return -(net.A @ state.flows) - np.asarray(step_demands) - state.leak_flows[:nj]


def pipe_energy_residual(model: NetworkModel, state: HydraulicState) -> np.ndarray:
    """Per-pipe ``head(from) - head(to) - headloss(q)`` (m)."""
    ends = model.link_endpoints[: len(model.pipes)]
    out = np.empty(len(model.pipes))
    for k, p in enumerate(model.pipes):
        hl = hazen_williams_headloss(state.flows[k], p.length, p.diameter, p.roughness)
        out[k] = state.heads[ends[k, 0]] - state.heads[ends[k, 1]] - hl
    return out
