"""Synthetic demands and the sensor measurement function.

``measure`` maps a (single-node) leak scenario and a demand series to the
pressure heads seen by the network's sensors, one row per hydraulic step.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import LspkitError
from .hydraulics import LeakScenario, SimulationResult, run_eps
from .inp import NetworkModel

SECONDS_PER_DAY = 86400

# Two-peak daily profile: morning and evening use on top of a night minimum.
_MORNING = (7.5, 1.5, 0.75)   # (hour, width h, amplitude)
_EVENING = (19.5, 2.0, 0.55)
_BASE = 0.45
WEEKLY = (1.0, 1.0, 1.0, 1.0, 1.0, 0.93, 0.88)


def _raw_diurnal(hours):
    h = np.asarray(hours, dtype=float) % 24.0
    out = np.full_like(h, _BASE)
    for centre, width, amp in (_MORNING, _EVENING):
        # wrap around midnight
        d = np.minimum(np.abs(h - centre), 24.0 - np.abs(h - centre))
        out = out + amp * np.exp(-0.5 * (d / width) ** 2)
    return out


_DIURNAL_MEAN = float(np.mean(_raw_diurnal(np.linspace(0.0, 24.0, 24 * 3600, endpoint=False))))


def diurnal_factor(seconds):
    """Daily demand multiplier with mean 1 over a day."""
    return _raw_diurnal(np.asarray(seconds, dtype=float) / 3600.0) / _DIURNAL_MEAN


def weekly_factor(seconds):
    day = (np.asarray(seconds, dtype=float) // SECONDS_PER_DAY).astype(int) % 7
    return np.asarray(WEEKLY)[day]


@dataclass(frozen=True)
class DemandSeries:
    values: np.ndarray          # (num_steps, num_junctions), m³/s
    junction_ids: tuple[str, ...]
    seed: int
    timestep: int

    @property
    def num_steps(self) -> int:
        return self.values.shape[0]

    def slice(self, start: int, stop: int) -> "DemandSeries":
        return DemandSeries(self.values[start:stop], self.junction_ids, self.seed, self.timestep)


def generate_demands(model: NetworkModel, seed: int, num_steps: int | None = None, *,
                     noise_sigma: float = 0.1, timestep: int | None = None) -> DemandSeries:
    """Deterministic synthetic demand series.

    Each junction draws ``base_demand * pattern * weekly * noise``, where the
    pattern is the junction's INP pattern if it has one and the built-in
    two-peak daily profile otherwise, and noise is mean-one lognormal with
    log-standard-deviation ``noise_sigma``. The noise stream for junction
    ``j`` is seeded by ``(seed, j)`` so series are prefix-stable in
    ``num_steps``.
    """
    if num_steps is None:
        num_steps = model.num_steps()
    if num_steps < 1:
        raise LspkitError("BAD_INPUT", "num_steps must be >= 1")
    dt = model.hydraulic_timestep if timestep is None else timestep
    t = np.arange(num_steps) * float(dt)
    daily = diurnal_factor(t)
    week = weekly_factor(t)
    values = np.empty((num_steps, model.num_junctions))
    for j, junction in enumerate(model.junctions):
        if junction.pattern_id is not None:
            mults = np.asarray(model.patterns[junction.pattern_id])
            shape = mults[(t // model.pattern_timestep).astype(int) % len(mults)]
        else:
            shape = daily
        z = np.random.default_rng([seed, j]).standard_normal(num_steps)
        noise = np.exp(noise_sigma * z - 0.5 * noise_sigma**2)
        values[:, j] = junction.base_demand * shape * week * noise
    values.flags.writeable = False
    return DemandSeries(values, tuple(j.id for j in model.junctions), int(seed), int(dt))


def write_demands_csv(series: DemandSeries, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", *series.junction_ids])
        for k, row in enumerate(series.values):
            w.writerow([k, *(repr(float(x)) for x in row)])


def read_demands_csv(path, *, seed: int = 0, timestep: int = 1800) -> DemandSeries:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    values = np.array([[float(x) for x in r[1:]] for r in body]).reshape(len(body), len(header) - 1)
    return DemandSeries(values, tuple(header[1:]), seed, timestep)


@dataclass(frozen=True)
class MeasurementSeries:
    values: np.ndarray   # (T, S) pressure heads at sensors, m
    sensors: tuple[str, ...]
    times: np.ndarray    # seconds

    def __len__(self):
        return self.values.shape[0]

    def slice(self, start: int, stop: int) -> "MeasurementSeries":
        return MeasurementSeries(self.values[start:stop], self.sensors, self.times[start:stop])


def project(model: NetworkModel, result: SimulationResult) -> MeasurementSeries:
    """Sensor columns of a simulation, in sensor-list order."""
    values = result.pressures[:, model.sensor_indices]
    return MeasurementSeries(values, tuple(model.sensors), result.times.copy())


def measure(model: NetworkModel, demands, leak: LeakScenario | None = None, **kwargs) -> MeasurementSeries:
    """Sensor pressures under ``demands`` with an optional single-node leak."""
    if not model.sensors:
        raise LspkitError("BAD_SENSOR", "model has no sensors attached")
    return project(model, run_eps(model, demands, leak, **kwargs))


def write_measurements_csv(series: MeasurementSeries, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_s", *series.sensors])
        for t, row in zip(series.times, series.values):
            w.writerow([repr(float(t)), *(repr(float(x)) for x in row)])


def read_measurements_csv(path) -> MeasurementSeries:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in r] for r in body]).reshape(len(body), len(header))
    return MeasurementSeries(data[:, 1:], tuple(header[1:]), data[:, 0])
