"""Utility measures for privatized gaze: positional MSE against the
original recording, and short-horizon gaze prediction with a recurrent
network (predict the position 60 ms ahead from the recent history).

The predictor consumes per-step position and first-difference velocity
and outputs the displacement from the last observed sample to the
forecast horizon, so absolute position bias cancels. Prediction error is
the Euclidean distance between forecast and actual future position, in
degrees.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .nn import (
    AdamState,
    ParameterSet,
    adam_step,
    backward,
    constant,
    initial_state,
    linear,
    lstm_arrays,
    mse,
    recurrent_cell_step,
    glorot_uniform,
)
from .signal import GazeSignal

POSITION_SCALE_DEG = 90.0
VELOCITY_SCALE_DEG = 2.0  # per-sample step of a vigorous saccade at 250 Hz


def signal_mse(raw: GazeSignal, privatized: GazeSignal) -> float:
    """Mean squared positional difference in deg^2, over valid sample pairs.

    Averages the squared difference over both channels; samples invalid in
    either signal are excluded.
    """
    if len(raw) != len(privatized):
        raise ValueError(f"signal lengths differ: {len(raw)} vs {len(privatized)}")
    if np.any(np.abs(raw.timestamps - privatized.timestamps) > 1e-6):
        raise ValueError("signals must share identical timestamps")
    both = raw.valid & privatized.valid
    if not both.any():
        raise ValueError("no sample is valid in both signals")
    dx = raw.x[both] - privatized.x[both]
    dy = raw.y[both] - privatized.y[both]
    return float((dx * dx + dy * dy).mean() / 2.0)


@dataclass(frozen=True)
class PredictorConfig:
    history: int = 25
    horizon_ms: float = 60.0
    hidden: int = 32
    epochs: int = 6
    learning_rate: float = 3e-3
    batch_size: int = 256
    train_stride: int = 25
    max_sequences: Optional[int] = None


@dataclass
class PredictorModel:
    params: ParameterSet  # lstm gate weights plus the displacement head
    history: int
    horizon_samples: int
    hidden: int
    sample_rate: float
    metadata: Dict = field(default_factory=dict)


def _step_inputs(positions: np.ndarray) -> List[np.ndarray]:
    """Scale a (B, h, 2) history into per-step (B, 4) network inputs."""
    vel = np.zeros_like(positions)
    vel[:, 1:] = positions[:, 1:] - positions[:, :-1]
    feats = np.concatenate([positions / POSITION_SCALE_DEG, vel / VELOCITY_SCALE_DEG], axis=2)
    return [feats[:, t, :] for t in range(positions.shape[1])]


def _forward(model: PredictorModel, positions: np.ndarray):
    """Displacement tensor (B, 2) in degrees for a (B, h, 2) history batch."""
    state = initial_state(positions.shape[0], model.hidden)
    for step in _step_inputs(positions):
        state, out = recurrent_cell_step(model.params, constant(step), state)
    return linear(out, model.params["head_w"], model.params["head_b"])


def _gather_sequences(
    recordings: Sequence[GazeSignal], history: int, horizon: int, stride: int
) -> Tuple[np.ndarray, np.ndarray]:
    """All fully valid (history, target) pairs, strided along each recording."""
    xs: List[np.ndarray] = []
    ys: List[np.ndarray] = []
    for sig in recordings:
        n = len(sig)
        pos = sig.positions()
        last = n - history - horizon
        if last < 0:
            continue
        for s in range(0, last + 1, stride):
            hist_valid = sig.valid[s : s + history]
            target_idx = s + history - 1 + horizon
            if not (hist_valid.all() and sig.valid[target_idx]):
                continue
            xs.append(pos[s : s + history])
            ys.append(pos[target_idx] - pos[s + history - 1])
    if not xs:
        return np.zeros((0, history, 2)), np.zeros((0, 2))
    return np.stack(xs), np.stack(ys)


def train_predictor(
    recordings: Sequence[GazeSignal],
    config: PredictorConfig = PredictorConfig(),
    seed: int = 0,
) -> PredictorModel:
    """Train the displacement forecaster on fully valid history windows."""
    if not recordings:
        raise ValueError("no training recordings")
    rate = recordings[0].sample_rate
    for sig in recordings:
        if abs(sig.sample_rate - rate) > 1e-9:
            raise ValueError("all training recordings must share one sample rate")
    horizon = int(round(config.horizon_ms / 1000.0 * rate))
    if horizon < 1:
        raise ValueError(f"horizon {config.horizon_ms} ms is below one sample at {rate} Hz")

    X, Y = _gather_sequences(recordings, config.history, horizon, config.train_stride)
    if len(X) == 0:
        raise ValueError("recordings contain no fully valid training windows")
    rng = np.random.default_rng(seed)
    if config.max_sequences is not None and len(X) > config.max_sequences:
        pick = rng.choice(len(X), size=config.max_sequences, replace=False)
        X, Y = X[pick], Y[pick]

    arrays = lstm_arrays(rng, 4, config.hidden)
    arrays["head_w"] = glorot_uniform(rng, 2, config.hidden)
    arrays["head_b"] = np.zeros(2)
    model = PredictorModel(
        params=ParameterSet(arrays),
        history=config.history,
        horizon_samples=horizon,
        hidden=config.hidden,
        sample_rate=rate,
    )
    adam = AdamState.for_params(model.params, config.learning_rate)
    history_log: List[float] = []
    for _ in range(config.epochs):
        order = rng.permutation(len(X))
        total, steps = 0.0, 0
        for start in range(0, len(X), config.batch_size):
            idx = order[start : start + config.batch_size]
            model.params.zero_grad()
            loss = mse(_forward(model, X[idx]), constant(Y[idx]))
            backward(loss)
            adam_step(model.params, adam)
            total += loss.item()
            steps += 1
        history_log.append(total / steps)
    model.metadata = {
        "epochs": config.epochs,
        "learning_rate": config.learning_rate,
        "seed": seed,
        "n_sequences": len(X),
        "loss_history": history_log,
        "horizon_ms": config.horizon_ms,
    }
    return model


def predict(model: PredictorModel, history_positions: np.ndarray) -> np.ndarray:
    """Forecast the gaze position (deg) one horizon past the history's end."""
    positions = np.asarray(history_positions, dtype=np.float64)
    if positions.shape != (model.history, 2):
        raise ValueError(f"expected a ({model.history}, 2) history, got {positions.shape}")
    if not np.all(np.isfinite(positions)):
        raise ValueError("history contains non-finite samples")
    disp = _forward(model, positions[None]).data[0]
    return positions[-1] + disp


@dataclass(frozen=True)
class ErrorCdf:
    """Sorted prediction errors with cumulative fractions ending at 1."""

    errors: np.ndarray
    fractions: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "errors", np.asarray(self.errors, dtype=np.float64))
        object.__setattr__(self, "fractions", np.asarray(self.fractions, dtype=np.float64))
        if self.errors.size == 0:
            raise ValueError("error CDF needs at least one sample")
        if np.any(np.diff(self.errors) < 0) or np.any(np.diff(self.fractions) < 0):
            raise ValueError("CDF must be non-decreasing")
        if abs(self.fractions[-1] - 1.0) > 1e-12:
            raise ValueError("CDF must end at fraction 1")

    @property
    def mean_error(self) -> float:
        return float(self.errors.mean())

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.errors, q))

    @staticmethod
    def from_errors(errors: np.ndarray) -> "ErrorCdf":
        errors = np.sort(np.asarray(errors, dtype=np.float64))
        fractions = np.arange(1, len(errors) + 1) / len(errors)
        return ErrorCdf(errors=errors, fractions=fractions)


def prediction_error_cdf(
    model: Optional[PredictorModel],
    recordings: Sequence[GazeSignal],
    history: Optional[int] = None,
    horizon_samples: Optional[int] = None,
    stride: int = 1,
    batch_size: int = 2048,
) -> Tuple[ErrorCdf, float]:
    """Distribution of per-sample forecast errors over the recordings.

    With ``model=None`` the zero-displacement baseline is evaluated
    (forecast = last observed position); then ``history`` and
    ``horizon_samples`` must be given. Samples whose history window or
    future target contain invalid data are excluded.
    """
    if model is not None:
        history = model.history
        horizon_samples = model.horizon_samples
    if history is None or horizon_samples is None:
        raise ValueError("baseline evaluation needs explicit history and horizon_samples")
    X, Y = _gather_sequences(recordings, history, horizon_samples, stride)
    if len(X) == 0:
        raise ValueError("recordings contain no admissible prediction windows")
    if model is None:
        errors = np.hypot(Y[:, 0], Y[:, 1])
    else:
        chunks = []
        for start in range(0, len(X), batch_size):
            disp = _forward(model, X[start : start + batch_size]).data
            diff = disp - Y[start : start + batch_size]
            chunks.append(np.hypot(diff[:, 0], diff[:, 1]))
        errors = np.concatenate(chunks)
    cdf = ErrorCdf.from_errors(errors)
    return cdf, cdf.mean_error
