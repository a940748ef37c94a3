"""Residual-based leak detector.

Every sensor is predicted linearly from all the others; the absolute
prediction errors (residuals) feed one of two alarm rules:

* ``WeightedSum``: alarm iff ``sum_s q_s * r_s > 1``, with ``q`` calibrated
  on a validation series;
* ``MaxThreshold``: alarm iff some ``r_s`` exceeds its threshold ``tau_s``,
  a multiple of the largest training residual.

Both comparisons are strict, so a residual exactly on the boundary is quiet.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DetectorError, LspkitWarning
from .measurement import MeasurementSeries

RIDGE = 1e-8
RESIDUAL_FLOOR = 1e-9


@dataclass(frozen=True)
class WeightedSum:
    q: np.ndarray
    gamma: float = 1.1
    kind = "weighted_sum"

    def __post_init__(self):
        if not np.all(self.q > 0):
            raise DetectorError("BAD_RULE", "residual weights must be positive")

    def alarm(self, r) -> np.ndarray:
        return np.asarray(r) @ self.q > 1.0

    def params(self):
        return {"q": self.q.tolist(), "gamma": self.gamma}


@dataclass(frozen=True)
class MaxThreshold:
    tau: np.ndarray
    c: float = 1.5
    kind = "max_threshold"

    def __post_init__(self):
        if not np.all(self.tau > 0):
            raise DetectorError("BAD_RULE", "thresholds must be positive")

    def alarm(self, r) -> np.ndarray:
        return np.any(np.asarray(r) > self.tau, axis=-1)

    def params(self):
        return {"tau": self.tau.tolist(), "c": self.c}


RULES = {"weighted_sum": WeightedSum, "max_threshold": MaxThreshold}


@dataclass(frozen=True)
class DetectorModel:
    sensors: tuple[str, ...]
    weights: np.ndarray   # (S, S-1): weights of sensor s on the others, in sensor order
    biases: np.ndarray    # (S,)
    rule: WeightedSum | MaxThreshold
    metadata: dict = field(default_factory=dict)

    @property
    def num_sensors(self) -> int:
        return len(self.sensors)

    def coupling(self) -> np.ndarray:
        """Square (S, S) form of the weights with a zero diagonal."""
        S = self.num_sensors
        W = np.zeros((S, S))
        for s in range(S):
            W[s, np.arange(S) != s] = self.weights[s]
        return W

    def to_dict(self) -> dict:
        return {
            "sensors": list(self.sensors),
            "weights": self.weights.tolist(),
            "biases": self.biases.tolist(),
            "rule": {"kind": self.rule.kind, **self.rule.params()},
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DetectorModel":
        rule = dict(data["rule"])
        kind = rule.pop("kind")
        if kind == "weighted_sum":
            r = WeightedSum(np.array(rule["q"], dtype=float), rule.get("gamma", 1.1))
        elif kind == "max_threshold":
            r = MaxThreshold(np.array(rule["tau"], dtype=float), rule.get("c", 1.5))
        else:
            raise DetectorError("BAD_RULE", f"unknown rule {kind!r}")
        S = len(data["sensors"])
        return cls(tuple(data["sensors"]), np.array(data["weights"], dtype=float).reshape(S, S - 1),
                   np.array(data["biases"], dtype=float), r, dict(data.get("metadata", {})))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "DetectorModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _fit_sensor(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float, bool]:
    xm, ym = X.mean(axis=0), y.mean()
    Xc, yc = X - xm, y - ym
    if X.shape[1] == 0:
        return np.zeros(0), float(ym), False
    w, _, rank, _ = np.linalg.lstsq(Xc, yc, rcond=None)
    deficient = rank < X.shape[1]
    if deficient:
        w = np.linalg.solve(Xc.T @ Xc + RIDGE * np.eye(X.shape[1]), Xc.T @ yc)
    return w, float(ym - xm @ w), deficient


def _values(m) -> np.ndarray:
    return np.asarray(m.values if isinstance(m, MeasurementSeries) else m, dtype=float)


def train(train_data, val_data=None, rule: str = "max_threshold", *, c: float = 1.5,
          gamma: float = 1.1, sensors=None, metadata: dict | None = None) -> DetectorModel:
    """Fit per-sensor least-squares predictors and calibrate an alarm rule.

    ``weighted_sum`` sets ``q_s = 1 / (S * gamma * max_t r_val[t, s])`` so that
    no validation row can alarm when ``gamma > 1``; ``max_threshold`` sets
    ``tau_s = c * max_t r_train[t, s]``.
    """
    Y = _values(train_data)
    if Y.ndim != 2:
        raise DetectorError("DIM_MISMATCH", "training data must be a (T, S) matrix")
    T, S = Y.shape
    if sensors is None:
        sensors = train_data.sensors if isinstance(train_data, MeasurementSeries) else tuple(
            f"s{i}" for i in range(S))
    if T < S + 1:
        raise DetectorError("TOO_FEW_ROWS", f"need at least {S + 1} training rows, got {T}")
    weights = np.zeros((S, S - 1))
    biases = np.zeros(S)
    deficient = []
    for s in range(S):
        others = np.arange(S) != s
        weights[s], biases[s], bad = _fit_sensor(Y[:, others], Y[:, s])
        if bad:
            deficient.append(s)
    if deficient:
        warnings.warn(LspkitWarning("RANK_DEFICIENT", f"ridge fallback for sensor(s) {deficient}"),
                      stacklevel=2)
    placeholder = MaxThreshold(np.ones(S))
    model = DetectorModel(tuple(sensors), weights, biases, placeholder, dict(metadata or {}))

    if rule == "weighted_sum":
        if val_data is None:
            raise DetectorError("NEEDS_VALIDATION", "weighted_sum calibration needs validation data")
        peak = _peak_residual(model, _values(val_data))
        built = WeightedSum(1.0 / (S * gamma * peak), gamma)
    elif rule == "max_threshold":
        peak = _peak_residual(model, Y)
        built = MaxThreshold(c * peak, c)
    else:
        raise DetectorError("BAD_RULE", f"unknown rule {rule!r}")
    return DetectorModel(model.sensors, weights, biases, built, model.metadata)


def _peak_residual(model: DetectorModel, Y: np.ndarray) -> np.ndarray:
    peak = residuals(model, Y).max(axis=0)
    if np.any(peak <= 0):
        warnings.warn(LspkitWarning("ZERO_RESIDUAL", f"residual floor {RESIDUAL_FLOOR} m applied"),
                      stacklevel=3)
        peak = np.maximum(peak, RESIDUAL_FLOOR)
    return peak


def predict(model: DetectorModel, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != model.num_sensors:
        raise DetectorError("DIM_MISMATCH", f"expected {model.num_sensors} sensor values, got {y.shape[-1]}")
    return y @ model.coupling().T + model.biases


def residuals(model: DetectorModel, y) -> np.ndarray:
    """``|prediction - y|`` per sensor; works on a vector or a (T, S) matrix."""
    y = np.asarray(y, dtype=float)
    return np.abs(predict(model, y) - y)


def alarm(model: DetectorModel, r) -> int:
    """Alarm decision from a residual vector."""
    return int(model.rule.alarm(np.asarray(r, dtype=float)))


def detect(model: DetectorModel, y) -> int:
    """1 if the pressure vector ``y`` raises an alarm, else 0."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise DetectorError("DIM_MISMATCH", "detect takes a single pressure vector")
    return alarm(model, residuals(model, y))


def alarms(model: DetectorModel, m) -> np.ndarray:
    """Per-row alarm flags for a measurement series or (T, S) matrix."""
    return np.asarray(model.rule.alarm(residuals(model, _values(m))), dtype=bool)


def detect_window(model: DetectorModel, m, start_step: int, K: int) -> int:
    """1 if any of the steps ``start_step .. start_step + K`` (inclusive) alarms."""
    Y = _values(m)
    if start_step < 0 or K < 0 or start_step + K >= Y.shape[0]:
        raise DetectorError("RANGE", f"window {start_step}..{start_step + K} outside {Y.shape[0]} rows")
    return int(alarms(model, Y[start_step:start_step + K + 1]).any())
