"""Reader and writer for a subset of the EPANET INP text format.

Supported sections: ``[TITLE] [JUNCTIONS] [RESERVOIRS] [TANKS] [PIPES]
[PUMPS] [VALVES] [DEMANDS] [PATTERNS] [CURVES] [TIMES] [COORDINATES]
[OPTIONS]``. Anything else is skipped with a warning. Files must declare
``Units LPS`` (metric, litres per second); values are normalised to SI on
read (m, m³/s, s) and converted back on write.

Sensor locations are not part of INP. They come from a JSON sidecar of the
form ``{"sensors": ["id", ...]}`` and are attached with
:meth:`NetworkModel.with_sensors`.
"""

from __future__ import annotations

import json
import math
import re
import warnings
from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import InpError, LspkitError, LspkitWarning

SUPPORTED_SECTIONS = (
    "TITLE", "JUNCTIONS", "RESERVOIRS", "TANKS", "PIPES", "PUMPS", "VALVES",
    "DEMANDS", "PATTERNS", "CURVES", "TIMES", "COORDINATES", "OPTIONS", "END",
)

# INP column units -> SI
_MM = 1000.0   # diameters in mm
_LPS = 1000.0  # flows in L/s


@dataclass(frozen=True)
class Issue:
    code: str
    message: str
    location: str = ""


@dataclass
class ValidationReport:
    errors: list[Issue] = field(default_factory=list)
    warnings: list[Issue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def error(self, code, message, location=""):
        self.errors.append(Issue(code, message, location))

    def warn(self, code, message, location=""):
        self.warnings.append(Issue(code, message, location))


@dataclass(frozen=True)
class Junction:
    id: str
    elevation: float
    base_demand: float  # m³/s
    pattern_id: str | None = None


@dataclass(frozen=True)
class Reservoir:
    id: str
    total_head: float


@dataclass(frozen=True)
class Tank:
    id: str
    elevation: float
    init_level: float
    min_level: float
    max_level: float
    diameter: float

    @property
    def area(self) -> float:
        return math.pi * self.diameter**2 / 4.0


@dataclass(frozen=True)
class Pipe:
    id: str
    from_node: str
    to_node: str
    length: float
    diameter: float
    roughness: float  # Hazen-Williams C


@dataclass(frozen=True)
class PumpCurve:
    """Head gain ``h0 - r * q**n`` for ``q >= 0``."""

    h0: float
    r: float
    n: float = 2.0


@dataclass(frozen=True)
class Pump:
    id: str
    from_node: str
    to_node: str
    curve: PumpCurve


@dataclass(frozen=True)
class Valve:
    id: str
    from_node: str
    to_node: str
    diameter: float
    setting: float  # downstream pressure head, m
    kind: str = "PRV"


@dataclass(frozen=True)
class NetworkModel:
    """Immutable network description.

    Node order is junctions, then reservoirs, then tanks, each in file order.
    Link order is pipes, then pumps, then valves. Construction checks every
    structural invariant and raises :class:`InpError` if one fails.
    """

    junctions: tuple[Junction, ...]
    reservoirs: tuple[Reservoir, ...] = ()
    tanks: tuple[Tank, ...] = ()
    pipes: tuple[Pipe, ...] = ()
    pumps: tuple[Pump, ...] = ()
    valves: tuple[Valve, ...] = ()
    patterns: dict[str, tuple[float, ...]] = field(default_factory=dict)
    sensors: tuple[str, ...] = ()
    hydraulic_timestep: int = 1800
    pattern_timestep: int = 3600
    duration: int = 0
    title: str = ""
    coordinates: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        report = ValidationReport()
        _check_model(self, report)
        if report.errors:
            raise InpError(report)

    # -- node bookkeeping -------------------------------------------------
    @cached_property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in (*self.junctions, *self.reservoirs, *self.tanks))

    @cached_property
    def link_ids(self) -> tuple[str, ...]:
        return tuple(l.id for l in self.links)

    @cached_property
    def links(self) -> tuple:
        return (*self.pipes, *self.pumps, *self.valves)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {nid: i for i, nid in enumerate(self.node_ids)}

    @property
    def num_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def num_junctions(self) -> int:
        return len(self.junctions)

    @cached_property
    def elevations(self) -> np.ndarray:
        z = [j.elevation for j in self.junctions]
        z += [r.total_head for r in self.reservoirs]
        z += [t.elevation for t in self.tanks]
        out = np.array(z, dtype=float)
        out.flags.writeable = False
        return out

    @cached_property
    def sensor_indices(self) -> np.ndarray:
        out = np.array([self._index[s] for s in self.sensors], dtype=int)
        out.flags.writeable = False
        return out

    @cached_property
    def link_endpoints(self) -> np.ndarray:
        """``(num_links, 2)`` array of node indices (from, to)."""
        out = np.array([(self._index[l.from_node], self._index[l.to_node]) for l in self.links],
                       dtype=int).reshape(-1, 2)
        out.flags.writeable = False
        return out

    def num_steps(self) -> int:
        return self.duration // self.hydraulic_timestep + 1

    def with_sensors(self, sensors) -> "NetworkModel":
        return replace(self, sensors=tuple(sensors))

    def adjacency(self) -> dict[int, set[int]]:
        adj = {i: set() for i in range(self.num_nodes)}
        for a, b in self.link_endpoints:
            adj[int(a)].add(int(b))
            adj[int(b)].add(int(a))
        return adj

    def graph_distances(self, source: str) -> dict[str, int]:
        """Hop counts from ``source`` over the undirected link graph."""
        adj = self.adjacency()
        start = node_index(self, source)
        dist = {start: 0}
        todo = deque([start])
        while todo:
            i = todo.popleft()
            for j in sorted(adj[i]):
                if j not in dist:
                    dist[j] = dist[i] + 1
                    todo.append(j)
        return {self.node_ids[i]: d for i, d in dist.items()}


def node_index(model: NetworkModel, node_id: str) -> int:
    try:
        return model._index[node_id]
    except KeyError:
        raise LspkitError("UNKNOWN_NODE", f"no node with id {node_id!r}") from None


def _check_model(m: NetworkModel, report: ValidationReport):
    seen: set[str] = set()
    for node in (*m.junctions, *m.reservoirs, *m.tanks):
        if node.id in seen:
            report.error("DUP_ID", f"duplicate node id {node.id!r}", f"node {node.id}")
        seen.add(node.id)
    link_seen: set[str] = set()
    for link in (*m.pipes, *m.pumps, *m.valves):
        if link.id in link_seen:
            report.error("DUP_ID", f"duplicate link id {link.id!r}", f"link {link.id}")
        link_seen.add(link.id)
        for end in (link.from_node, link.to_node):
            if end not in seen:
                report.error("UNKNOWN_NODE", f"link {link.id!r} references unknown node {end!r}",
                             f"link {link.id}")
        if link.from_node == link.to_node:
            report.error("BAD_VALUE", f"link {link.id!r} connects a node to itself", f"link {link.id}")
    if not m.reservoirs and not m.tanks:
        report.error("NO_SOURCE", "network needs at least one reservoir or tank")
    if not m.junctions:
        report.error("BAD_VALUE", "network has no junctions")

    def positive(value, what, where):
        if not (value > 0 and math.isfinite(value)):
            report.error("BAD_VALUE", f"{what} must be positive, got {value}", where)

    for p in m.pipes:
        positive(p.length, "length", f"pipe {p.id}")
        positive(p.diameter, "diameter", f"pipe {p.id}")
        positive(p.roughness, "roughness", f"pipe {p.id}")
    for v in m.valves:
        positive(v.diameter, "diameter", f"valve {v.id}")
        if v.kind != "PRV":
            report.error("BAD_VALUE", f"unsupported valve type {v.kind}", f"valve {v.id}")
    for p in m.pumps:
        positive(p.curve.h0, "shutoff head", f"pump {p.id}")
        positive(p.curve.r, "curve coefficient", f"pump {p.id}")
        positive(p.curve.n, "curve exponent", f"pump {p.id}")
    for t in m.tanks:
        positive(t.diameter, "diameter", f"tank {t.id}")
        if not (0 <= t.min_level <= t.init_level <= t.max_level):
            report.error("BAD_VALUE", "tank levels must satisfy 0 <= min <= init <= max", f"tank {t.id}")
    for j in m.junctions:
        if not (j.base_demand >= 0 and math.isfinite(j.base_demand)):
            report.error("BAD_VALUE", f"demand must be >= 0, got {j.base_demand}", f"junction {j.id}")
        if j.pattern_id is not None and j.pattern_id not in m.patterns:
            report.error("UNKNOWN_PATTERN", f"pattern {j.pattern_id!r} is not defined", f"junction {j.id}")
    for name, mults in m.patterns.items():
        if not mults or any(x < 0 for x in mults):
            report.error("BAD_VALUE", "pattern needs nonnegative multipliers", f"pattern {name}")
    if m.hydraulic_timestep <= 0 or m.pattern_timestep <= 0 or m.duration < 0:
        report.error("BAD_VALUE", "time steps must be positive and duration nonnegative", "[TIMES]")

    junction_ids = {j.id for j in m.junctions}
    if len(set(m.sensors)) != len(m.sensors):
        report.error("BAD_SENSOR", "sensor ids must be distinct", "sensors")
    for s in m.sensors:
        if s not in junction_ids:
            report.error("BAD_SENSOR", f"sensor {s!r} is not a junction", "sensors")

    if report.errors:
        return
    # connectivity over the undirected node/link graph
    ids = [n.id for n in (*m.junctions, *m.reservoirs, *m.tanks)]
    adj: dict[str, list[str]] = {i: [] for i in ids}
    for link in (*m.pipes, *m.pumps, *m.valves):
        adj[link.from_node].append(link.to_node)
        adj[link.to_node].append(link.from_node)
    reached = {ids[0]}
    todo = [ids[0]]
    while todo:
        for nb in adj[todo.pop()]:
            if nb not in reached:
                reached.add(nb)
                todo.append(nb)
    if len(reached) != len(ids):
        missing = [i for i in ids if i not in reached]
        report.error("DISCONNECTED", f"{len(missing)} node(s) unreachable, e.g. {missing[0]!r}")


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_SECTION_RE = re.compile(r"^\[([A-Za-z_]+)\]$")


def _parse_time(tokens) -> float:
    """EPANET clock value in seconds: ``h:mm[:ss]`` or a number with optional unit."""
    text = tokens[0]
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        while len(parts) < 3:
            parts.append(0.0)
        return parts[0] * 3600 + parts[1] * 60 + parts[2]
    value = float(text)
    unit = tokens[1].upper() if len(tokens) > 1 else "HOURS"
    scale = {"SEC": 1, "SECONDS": 1, "MIN": 60, "MINUTES": 60, "HOUR": 3600, "HOURS": 3600,
             "DAY": 86400, "DAYS": 86400}.get(unit)
    if scale is None:
        raise ValueError(unit)
    return value * scale


def validate_inp(text: str) -> tuple[NetworkModel | None, ValidationReport]:
    """Parse ``text`` and return ``(model or None, report)`` without raising."""
    report = ValidationReport()
    rows: dict[str, list[tuple[int, list[str]]]] = {}
    title: list[str] = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        match = _SECTION_RE.match(line)
        if match:
            section = match.group(1).upper()
            if section not in SUPPORTED_SECTIONS:
                report.warn("UNSUPPORTED_SECTION", f"section [{section}] ignored", f"line {lineno}")
            continue
        if section is None:
            report.warn("NO_SECTION", "text before first section ignored", f"line {lineno}")
        elif section == "TITLE":
            title.append(line)
        elif section in SUPPORTED_SECTIONS:
            rows.setdefault(section, []).append((lineno, line.split()))

    def num(tok, lineno, what):
        try:
            value = float(tok)
        except ValueError:
            report.error("BAD_NUMBER", f"cannot read {what} from {tok!r}", f"line {lineno}")
            return math.nan
        if not math.isfinite(value):
            report.error("BAD_NUMBER", f"{what} is not finite", f"line {lineno}")
        return value

    def columns(section, count):
        for lineno, toks in rows.get(section, []):
            if len(toks) < count:
                report.error("MISSING_FIELD", f"[{section}] row needs {count} columns, got {len(toks)}",
                             f"line {lineno}")
                continue
            yield lineno, toks

    # options first: units decide whether the rest makes sense
    units = None
    for lineno, toks in rows.get("OPTIONS", []):
        key = toks[0].upper()
        if key == "UNITS" and len(toks) > 1:
            units = toks[1].upper()
        elif key == "HEADLOSS" and len(toks) > 1 and toks[1].upper() != "H-W":
            report.error("BAD_UNITS", f"only Hazen-Williams headloss supported, got {toks[1]}",
                         f"line {lineno}")
    if units != "LPS":
        report.error("BAD_UNITS", f"flow units must be LPS, got {units or 'none (GPM default)'}",
                     "[OPTIONS]")

    patterns: dict[str, list[float]] = {}
    for lineno, toks in columns("PATTERNS", 2):
        patterns.setdefault(toks[0], []).extend(num(t, lineno, "multiplier") for t in toks[1:])

    curves: dict[str, list[tuple[float, float]]] = {}
    for lineno, toks in columns("CURVES", 3):
        curves.setdefault(toks[0], []).append(
            (num(toks[1], lineno, "curve flow") / _LPS, num(toks[2], lineno, "curve head")))

    junctions = []
    for lineno, toks in columns("JUNCTIONS", 2):
        demand = num(toks[2], lineno, "demand") / _LPS if len(toks) > 2 else 0.0
        pattern = toks[3] if len(toks) > 3 else None
        junctions.append(Junction(toks[0], num(toks[1], lineno, "elevation"), demand, pattern))

    demand_override: dict[str, list[tuple[float, str | None]]] = {}
    for lineno, toks in columns("DEMANDS", 2):
        demand_override.setdefault(toks[0], []).append(
            (num(toks[1], lineno, "demand") / _LPS, toks[2] if len(toks) > 2 else None))
    if demand_override:
        known = {j.id for j in junctions}
        for jid in demand_override:
            if jid not in known:
                report.error("UNKNOWN_NODE", f"[DEMANDS] references unknown junction {jid!r}", "[DEMANDS]")
        updated = []
        for j in junctions:
            if j.id in demand_override:
                entries = demand_override[j.id]
                if len(entries) > 1:
                    report.warn("MULTI_DEMAND", "demand categories summed, first pattern kept",
                                f"junction {j.id}")
                pattern = next((p for _, p in entries if p), j.pattern_id)
                j = replace(j, base_demand=sum(d for d, _ in entries), pattern_id=pattern)
            updated.append(j)
        junctions = updated

    reservoirs = []
    for lineno, toks in columns("RESERVOIRS", 2):
        if len(toks) > 2:
            report.warn("UNSUPPORTED", "reservoir head patterns are ignored", f"line {lineno}")
        reservoirs.append(Reservoir(toks[0], num(toks[1], lineno, "head")))

    tanks = []
    for lineno, toks in columns("TANKS", 6):
        if len(toks) > 7 and toks[7] not in ("*",):
            report.warn("UNSUPPORTED", "tank volume curves are ignored", f"line {lineno}")
        tanks.append(Tank(toks[0], *(num(t, lineno, "tank field") for t in toks[1:5]),
                          num(toks[5], lineno, "diameter")))

    pipes = []
    for lineno, toks in columns("PIPES", 6):
        if len(toks) > 7 and toks[7].upper() != "OPEN":
            report.warn("UNSUPPORTED", f"pipe status {toks[7]} ignored, pipe treated as open",
                        f"line {lineno}")
        pipes.append(Pipe(toks[0], toks[1], toks[2], num(toks[3], lineno, "length"),
                          num(toks[4], lineno, "diameter") / _MM, num(toks[5], lineno, "roughness")))

    pumps = []
    for lineno, toks in columns("PUMPS", 3):
        opts = {toks[i].upper(): toks[i + 1] for i in range(3, len(toks) - 1, 2)}
        if "HEAD" not in opts:
            report.error("UNSUPPORTED_PUMP", "pumps need a HEAD curve", f"line {lineno}")
            continue
        points = curves.get(opts["HEAD"])
        if not points:
            report.error("UNKNOWN_CURVE", f"curve {opts['HEAD']!r} is not defined", f"line {lineno}")
            continue
        if len(points) > 1:
            report.warn("UNSUPPORTED", "multi-point pump curve reduced to its first point",
                        f"line {lineno}")
        q1, h1 = points[0]
        pumps.append(Pump(toks[0], toks[1], toks[2], _single_point_curve(q1, h1)))

    valves = []
    for lineno, toks in columns("VALVES", 6):
        kind = toks[4].upper()
        if kind != "PRV":
            report.warn("UNSUPPORTED", f"{kind} valve {toks[0]} dropped", f"line {lineno}")
            continue
        valves.append(Valve(toks[0], toks[1], toks[2], num(toks[3], lineno, "diameter") / _MM,
                            num(toks[5], lineno, "setting")))

    times = {"HYDRAULIC TIMESTEP": 1800.0, "PATTERN TIMESTEP": 3600.0, "DURATION": 0.0}
    for lineno, toks in rows.get("TIMES", []):
        upper = [t.upper() for t in toks]
        for key in times:
            width = len(key.split())
            if upper[:width] == key.split() and len(toks) > width:
                try:
                    times[key] = _parse_time(toks[width:])
                except ValueError:
                    report.error("BAD_NUMBER", f"cannot read time from {' '.join(toks[width:])!r}",
                                 f"line {lineno}")
                break

    coordinates = {}
    for lineno, toks in columns("COORDINATES", 3):
        coordinates[toks[0]] = (num(toks[1], lineno, "x"), num(toks[2], lineno, "y"))

    # line-level checks that need file positions
    seen_nodes: dict[str, int] = {}
    for section in ("JUNCTIONS", "RESERVOIRS", "TANKS"):
        for lineno, toks in rows.get(section, []):
            if toks[0] in seen_nodes:
                report.error("DUP_ID", f"node id {toks[0]!r} already defined on line {seen_nodes[toks[0]]}",
                             f"line {lineno}")
            seen_nodes.setdefault(toks[0], lineno)
    seen_links: dict[str, int] = {}
    for section in ("PIPES", "PUMPS", "VALVES"):
        for lineno, toks in rows.get(section, []):
            if toks[0] in seen_links:
                report.error("DUP_ID", f"link id {toks[0]!r} already defined on line {seen_links[toks[0]]}",
                             f"line {lineno}")
            seen_links.setdefault(toks[0], lineno)
            for end in toks[1:3]:
                if end not in seen_nodes:
                    report.error("UNKNOWN_NODE", f"link {toks[0]!r} references unknown node {end!r}",
                                 f"line {lineno}")

    if report.errors:
        return None, report
    try:
        model = NetworkModel(
            junctions=tuple(junctions), reservoirs=tuple(reservoirs), tanks=tuple(tanks),
            pipes=tuple(pipes), pumps=tuple(pumps), valves=tuple(valves),
            patterns={k: tuple(v) for k, v in patterns.items()},
            hydraulic_timestep=int(round(times["HYDRAULIC TIMESTEP"])),
            pattern_timestep=int(round(times["PATTERN TIMESTEP"])),
            duration=int(round(times["DURATION"])),
            title="\n".join(title), coordinates=coordinates,
        )
    except InpError as exc:
        report.errors.extend(exc.report.errors)
        return None, report
    return model, report


def parse_inp(text: str) -> NetworkModel:
    """Parse INP ``text`` into a :class:`NetworkModel`.

    Raises :class:`InpError` (carrying the full :class:`ValidationReport`) on
    any error. Warnings are re-emitted as :class:`LspkitWarning`.
    """
    model, report = validate_inp(text)
    for w in report.warnings:
        warnings.warn(LspkitWarning(w.code, f"{w.message} [{w.location}]"), stacklevel=2)
    if model is None:
        raise InpError(report)
    return model


def _single_point_curve(q1: float, h1: float) -> PumpCurve:
    # EPANET one-point curve: shutoff head 4/3 of design head, zero head at 2 * q1
    h0 = 4.0 * h1 / 3.0
    return PumpCurve(h0=h0, r=(h0 - h1) / q1**2, n=2.0)


def read_network(path, sensors=None) -> NetworkModel:
    """Read an INP file and attach sensors.

    ``sensors`` may be a list of ids or a path to a JSON sidecar. When omitted,
    ``<stem>.sensors.json`` next to the INP file is used if it exists.
    """
    path = Path(path)
    model = parse_inp(path.read_text(encoding="utf-8"))
    if sensors is None:
        sidecar = path.with_name(path.stem + ".sensors.json")
        if sidecar.exists():
            sensors = sidecar
    if sensors is None:
        return model
    if isinstance(sensors, (str, Path)):
        sensors = load_sensors(sensors)
    return model.with_sensors(sensors)


def load_sensors(path) -> list[str]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict) or not isinstance(data.get("sensors"), list):
        raise LspkitError("BAD_SENSOR", f"{path}: expected {{\"sensors\": [ids]}}")
    return [str(s) for s in data["sensors"]]


def save_sensors(ids, path):
    Path(path).write_text(json.dumps({"sensors": list(ids)}, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# writing
# ---------------------------------------------------------------------------

def _scaled(value: float, scale: float = 1.0) -> str:
    """Shortest text ``s`` with ``float(s) / scale == value`` (exact round trip)."""
    guess = value * scale
    if float(repr(guess)) / scale == value:
        return repr(guess)
    lo = hi = guess
    for _ in range(64):
        lo, hi = np.nextafter(lo, -np.inf), np.nextafter(hi, np.inf)
        for cand in (float(lo), float(hi)):
            if cand / scale == value:
                return repr(cand)
    return repr(guess)


def _clock(seconds: int) -> str:
    h, rest = divmod(int(seconds), 3600)
    m, s = divmod(rest, 60)
    return f"{h}:{m:02d}:{s:02d}"


def write_inp(model: NetworkModel) -> str:
    """Serialise ``model`` to INP text; ``parse_inp`` of the result reproduces it.

    Sensors are not written (they live in the JSON sidecar).
    """
    out = ["[TITLE]"]
    out += model.title.splitlines()
    out += ["", "[JUNCTIONS]", ";ID  Elev  Demand  Pattern"]
    for j in model.junctions:
        row = [j.id, repr(j.elevation), _scaled(j.base_demand, _LPS)]
        if j.pattern_id is not None:
            row.append(j.pattern_id)
        out.append(" ".join(row))
    out += ["", "[RESERVOIRS]", ";ID  Head"]
    out += [f"{r.id} {r.total_head!r}" for r in model.reservoirs]
    out += ["", "[TANKS]", ";ID  Elev  InitLvl  MinLvl  MaxLvl  Diam"]
    out += [f"{t.id} {t.elevation!r} {t.init_level!r} {t.min_level!r} {t.max_level!r} {t.diameter!r}"
            for t in model.tanks]
    out += ["", "[PIPES]", ";ID  Node1  Node2  Length  Diam  Roughness"]
    out += [f"{p.id} {p.from_node} {p.to_node} {p.length!r} {_scaled(p.diameter, _MM)} {p.roughness!r}"
            for p in model.pipes]
    curves = []
    out += ["", "[PUMPS]"]
    for p in model.pumps:
        # invert the one-point curve: h1 = 3/4 h0, q1 = sqrt((h0 - h1) / r)
        h1 = 0.75 * p.curve.h0
        q1 = math.sqrt((p.curve.h0 - h1) / p.curve.r)
        curves.append(f"C_{p.id} {_scaled(q1, _LPS)} {h1!r}")
        out.append(f"{p.id} {p.from_node} {p.to_node} HEAD C_{p.id}")
    out += ["", "[CURVES]", *curves]
    out += ["", "[VALVES]", ";ID  Node1  Node2  Diam  Type  Setting  MinorLoss"]
    out += [f"{v.id} {v.from_node} {v.to_node} {_scaled(v.diameter, _MM)} {v.kind} {v.setting!r} 0"
            for v in model.valves]
    out += ["", "[PATTERNS]"]
    for name, mults in model.patterns.items():
        for i in range(0, len(mults), 6):
            out.append(" ".join([name, *(repr(x) for x in mults[i:i + 6])]))
    out += ["", "[TIMES]",
            f"Duration {_clock(model.duration)}",
            f"Hydraulic Timestep {_clock(model.hydraulic_timestep)}",
            f"Pattern Timestep {_clock(model.pattern_timestep)}"]
    out += ["", "[OPTIONS]", "Units LPS", "Headloss H-W"]
    out += ["", "[COORDINATES]"]
    out += [f"{nid} {x!r} {y!r}" for nid, (x, y) in model.coordinates.items()]
    out += ["", "[END]", ""]
    return "\n".join(out)


def data_path(name: str) -> Path:
    """Path of a bundled network file (``toy3.inp``, ``toy_grid.inp``, ``hanoi.inp``)."""
    return Path(__file__).parent / "data" / name


def load_bundled(name: str) -> NetworkModel:
    return read_network(data_path(name if name.endswith(".inp") else name + ".inp"))
