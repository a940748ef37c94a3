"""Command line runner for the simulate / train / search experiment protocol.

Usage::

    lspkit simulate CONFIG.json
    lspkit train CONFIG.json
    lspkit lsp CONFIG.json [--method ga-spectral] [--seed 3] [--exclude-nodes 2,3]
    lspkit oracle-check CONFIG.json [--golden outcome.json]

``CONFIG.json`` holds flat keys mirroring :class:`ExperimentConfig`; relative
paths in it are resolved against the config file's directory. Every run
writes ``manifest.json`` (config plus SHA-256 of the inputs) next to its
outputs. Exit status is 0 on success, 1 when ``oracle-check`` finds a
mismatch and 2 on any input or model error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .detector import DetectorModel, alarms, train
from .errors import LspkitError
from .inp import data_path, read_network
from .measurement import (generate_demands, measure, read_measurements_csv, write_demands_csv,
                          write_measurements_csv)
from .search import (GaConfig, SearchContext, SearchOutcome, SearchSpace, bisection_search, brute_force_lsp,
                     genetic_search)

METHODS = ("bisection", "ga-basic", "ga-spectral", "oracle")
RULES = ("weighted_sum", "max_threshold")
# settings that change how a run executes but never what it produces
_EXECUTION_KEYS = ("output", "threads")


@dataclass(frozen=True)
class ExperimentConfig:
    network: str = "toy_grid"        # INP path or bundled name
    sensors: str | None = None       # sensors JSON; default is the INP's sidecar
    seed: int = 0
    train_days: int = 5
    val_days: int = 1
    search_days: int = 1
    timestep: int | None = None      # seconds; default is the INP hydraulic timestep
    rule: str = "max_threshold"
    c: float = 1.5
    gamma: float = 1.1
    K_hours: float = 3.0
    area_min: float = 0.1
    area_max: float = 500.0
    eps: float = 0.5
    method: str = "bisection"
    population: int = 20
    generations: int = 30
    tournament_size: int = 3
    mutation_rate: float = 0.1
    mutation_sigma: float = 0.2
    exclude: tuple[str, ...] = ()
    output: str = "out"
    threads: int = 1
    base_dir: str = field(default=".", compare=False, repr=False)

    def __post_init__(self):
        for name in ("train_days", "val_days", "search_days"):
            if getattr(self, name) < 1:
                raise LspkitError("BAD_CONFIG", f"{name} must be >= 1")
        if self.method not in METHODS:
            raise LspkitError("BAD_CONFIG", f"method must be one of {', '.join(METHODS)}")
        if self.rule not in RULES:
            raise LspkitError("BAD_CONFIG", f"rule must be one of {', '.join(RULES)}")
        if self.K_hours < 0:
            raise LspkitError("BAD_CONFIG", "K_hours must be >= 0")
        if self.threads < 1:
            raise LspkitError("BAD_CONFIG", "threads must be >= 1")

    @classmethod
    def from_dict(cls, data: dict, base_dir=".") -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)} - {"base_dir"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise LspkitError("BAD_CONFIG", f"unknown config keys: {', '.join(unknown)}")
        data = dict(data)
        if "exclude" in data:
            data["exclude"] = tuple(str(x) for x in data["exclude"])
        return cls(**data, base_dir=str(base_dir))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise LspkitError("BAD_CONFIG", f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise LspkitError("BAD_CONFIG", f"{path}: expected a JSON object")
        return cls.from_dict(data, path.parent)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        d["exclude"] = list(self.exclude)
        return d

    def resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else Path(self.base_dir) / path

    @property
    def network_path(self) -> Path:
        path = self.resolve(self.network)
        if path.exists():
            return path
        bundled = data_path(self.network if self.network.endswith(".inp") else self.network + ".inp")
        if bundled.exists():
            return bundled
        raise LspkitError("NOT_FOUND", f"network {self.network!r} is neither a file nor a bundled network")

    @property
    def sensors_path(self) -> Path:
        if self.sensors is not None:
            return self.resolve(self.sensors)
        return self.network_path.with_name(self.network_path.stem + ".sensors.json")

    @property
    def output_dir(self) -> Path:
        return Path(os.path.normpath(self.resolve(self.output)))


# ---------------------------------------------------------------------------
# shared run state
# ---------------------------------------------------------------------------

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Run:
    """Lazily builds the model, demands, measurements and detector for a config."""

    def __init__(self, cfg: ExperimentConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.out = cfg.output_dir
        self.out.mkdir(parents=True, exist_ok=True)
        sensors = cfg.sensors_path
        model = read_network(cfg.network_path, sensors if sensors.exists() else None)
        if cfg.timestep is not None:
            model = dataclasses.replace(model, hydraulic_timestep=int(cfg.timestep))
        self.model = model
        dt = model.hydraulic_timestep
        if 86400 % dt:
            raise LspkitError("BAD_CONFIG", f"timestep {dt} s does not divide a day")
        self.per_day = 86400 // dt
        self.K = int(round(cfg.K_hours * 3600 / dt))
        self.bounds = np.cumsum([0, cfg.train_days, cfg.val_days, cfg.search_days]) * self.per_day
        self._demands = None
        self._measurements = None

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self._config_json().encode()).hexdigest()

    def _config_json(self) -> str:
        d = {k: v for k, v in self.cfg.to_dict().items() if k not in _EXECUTION_KEYS}
        return json.dumps(d, sort_keys=True)

    def write_manifest(self, outputs):
        inputs = {"network": {"name": self.cfg.network_path.name, "sha256": _sha256(self.cfg.network_path)}}
        if self.cfg.sensors_path.exists():
            inputs["sensors"] = {"name": self.cfg.sensors_path.name, "sha256": _sha256(self.cfg.sensors_path)}
        manifest = {
            "command": self.command,
            "config": json.loads(self._config_json()),
            "config_hash": self.config_hash,
            "inputs": inputs,
            "outputs": {name: _sha256(self.out / name) for name in sorted(outputs)},
            "version": __version__,
        }
        name = f"manifest.{self.command}.json" if self.command != "simulate" else "manifest.json"
        _write_text(self.out / name, json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    @property
    def demands(self):
        if self._demands is None:
            self._demands = generate_demands(self.model, self.cfg.seed, int(self.bounds[-1]))
        return self._demands

    @property
    def measurements(self):
        if self._measurements is None:
            cached = self.out / "measurements.csv"
            if cached.exists() and self._manifest_hash("manifest.json") == self.config_hash:
                self._measurements = read_measurements_csv(cached)
            else:
                self._measurements = measure(self.model, self.demands)
        return self._measurements

    def _manifest_hash(self, name):
        try:
            return json.loads((self.out / name).read_text(encoding="utf-8"))["config_hash"]
        except (OSError, ValueError, KeyError):
            return None

    def detector(self) -> DetectorModel:
        cached = self.out / "detector.json"
        if cached.exists() and self._manifest_hash("manifest.train.json") == self.config_hash:
            return DetectorModel.load(cached)
        return self.train_detector()

    def train_detector(self) -> DetectorModel:
        b = self.bounds
        m = self.measurements
        tr, val = m.slice(b[0], b[1]), m.slice(b[1], b[2])
        return train(tr, val, self.cfg.rule, c=self.cfg.c, gamma=self.cfg.gamma,
                     metadata={"config_hash": self.config_hash, "train_rows": int(b[1]), "val_rows": int(b[2] - b[1])})

    def context(self, detector) -> SearchContext:
        b = self.bounds
        return SearchContext(self.model, self.demands.slice(b[2], b[3]), detector, K=self.K,
                             area_min=self.cfg.area_min, area_max=self.cfg.area_max, eps=self.cfg.eps,
                             threads=self.cfg.threads)

    def search(self, ctx, method):
        space = SearchSpace.full(ctx, exclude=self.cfg.exclude)
        if method == "oracle":
            return brute_force_lsp(space, ctx)
        if method == "bisection":
            return bisection_search(space, ctx)
        ga = GaConfig(population=self.cfg.population, generations=self.cfg.generations,
                      tournament_size=self.cfg.tournament_size, mutation_rate=self.cfg.mutation_rate,
                      mutation_sigma=self.cfg.mutation_sigma, seed=self.cfg.seed,
                      variant=method.removeprefix("ga-"))
        return genetic_search(space, ctx, ga)


def _write_text(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_trace(outcome: SearchOutcome, path: Path):
    keys = list(outcome.trace[0]) if outcome.trace else ["iteration"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for row in outcome.trace:
            w.writerow([repr(row[k]) if isinstance(row[k], float) else row[k] for k in keys])


def _write_node_areas(outcome: SearchOutcome, run: Run, path: Path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "max_undetected_area_cm2"])
        for n, a in outcome.node_areas.items():
            w.writerow([run.model.node_ids[n], repr(float(a))])


def _write_pairs(outcome: SearchOutcome, run: Run, space: SearchSpace, path: Path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", *space.starts])
        for n, row in zip(space.nodes, outcome.pair_matrix):
            w.writerow([run.model.node_ids[n], *(repr(float(a)) for a in row)])


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(run: Run) -> int:
    write_demands_csv(run.demands, run.out / "demands.csv")
    meas = measure(run.model, run.demands)
    write_measurements_csv(meas, run.out / "measurements.csv")
    run.write_manifest(["demands.csv", "measurements.csv"])
    print(f"simulated {run.demands.num_steps} steps on {run.model.num_nodes} nodes -> {run.out}")
    return 0


def cmd_train(run: Run) -> int:
    det = run.train_detector()
    det.save(run.out / "detector.json")
    b, m = run.bounds, run.measurements
    tr_alarms = int(alarms(det, m.slice(b[0], b[1])).sum())
    val_alarms = int(alarms(det, m.slice(b[1], b[2])).sum())
    run.write_manifest(["detector.json"])
    print(f"{det.rule.kind}: {tr_alarms} training alarms, {val_alarms} validation alarms")
    return 0


def cmd_lsp(run: Run) -> int:
    ctx = run.context(run.detector())
    outcome = run.search(ctx, run.cfg.method)
    _write_text(run.out / "outcome.json", outcome.to_json())
    _write_trace(outcome, run.out / "trace.csv")
    _write_node_areas(outcome, run, run.out / "node_areas.csv")
    outputs = ["outcome.json", "trace.csv", "node_areas.csv"]
    if outcome.pair_matrix is not None and outcome.method == "oracle":
        _write_pairs(outcome, run, SearchSpace.full(ctx, exclude=run.cfg.exclude), run.out / "pair_areas.csv")
        outputs.append("pair_areas.csv")
    run.write_manifest(outputs)
    flag = " (area_max reached)" if outcome.unbounded else ""
    print(f"{outcome.method}: LSP {outcome.lsp_node_id} start {outcome.best_start} "
          f"area {outcome.max_undetected_area:.3f} cm2{flag}, {outcome.evaluations} simulations")
    return 0


def _matches(a: dict, b: dict, eps: float) -> bool:
    return a["lsp_node_id"] == b["lsp_node_id"] and abs(a["max_undetected_area"] - b["max_undetected_area"]) <= eps


def cmd_oracle_check(run: Run, golden: Path | None = None) -> int:
    ctx = run.context(run.detector())
    method = run.cfg.method if run.cfg.method != "oracle" else "bisection"
    oracle = run.search(ctx, "oracle")
    found = run.search(ctx, method)
    report = {"method": method, "eps": ctx.eps, "oracle": oracle.to_dict(), "found": found.to_dict()}
    for d in (report["oracle"], report["found"]):
        d.pop("trace")
    report["match"] = _matches(report["oracle"], report["found"], ctx.eps)
    if golden is not None:
        ref = json.loads(Path(golden).read_text(encoding="utf-8"))
        report["golden_match"] = _matches(report["oracle"], ref, ctx.eps)
    _write_text(run.out / "oracle_check.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    run.write_manifest(["oracle_check.json"])
    ok = report["match"] and report.get("golden_match", True)
    print(f"oracle {oracle.lsp_node_id} ({oracle.max_undetected_area:.3f}) vs {method} {found.lsp_node_id} "
          f"({found.max_undetected_area:.3f}): {'match' if ok else 'MISMATCH'}")
    return 0 if ok else 1


COMMANDS = {"simulate": cmd_simulate, "train": cmd_train, "lsp": cmd_lsp, "oracle-check": cmd_oracle_check}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lspkit", description="Least-sensitive-point experiments on water networks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("config", help="experiment config (JSON)")
        s.add_argument("--seed", type=int)
        s.add_argument("--method", choices=METHODS)
        s.add_argument("--exclude-nodes", help="comma separated node ids")
        s.add_argument("--threads", type=int, help="worker threads (default: $LSPKIT_THREADS or 1)")
        s.add_argument("--output", help="output directory")
        if name == "oracle-check":
            s.add_argument("--golden", help="reference oracle outcome.json to compare against")
    return p


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.method is not None:
        over["method"] = args.method
    if args.exclude_nodes is not None:
        over["exclude"] = tuple(x for x in args.exclude_nodes.split(",") if x)
    if args.output is not None:
        over["output"] = str(Path(args.output).resolve())
    threads = args.threads if args.threads is not None else os.environ.get("LSPKIT_THREADS")
    if threads is not None:
        try:
            over["threads"] = int(threads)
        except ValueError:
            raise LspkitError("BAD_CONFIG", f"threads must be an integer, got {threads!r}") from None
    return dataclasses.replace(cfg, **over)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        warnings.showwarning = lambda msg, *a, **k: print(f"warning: {msg}", file=sys.stderr)
        try:
            run = Run(load_config(args), args.command)
            if args.command == "oracle-check":
                return cmd_oracle_check(run, args.golden)
            return COMMANDS[args.command](run)
        except LspkitError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2


if __name__ == "__main__":
    sys.exit(main())
