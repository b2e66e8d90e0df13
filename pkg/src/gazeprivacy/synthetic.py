"""Synthetic multi-subject gaze generator.

Recordings alternate fixations and saccades: fixation durations follow a
per-subject gamma distribution with slow AR(1) drift as positional
jitter, and saccades move ballistically along a raised-cosine velocity
profile whose duration follows the main-sequence relation
``duration_ms = slope * amplitude_deg + intercept``. Subjects differ in
jitter texture, fixation tempo, saccade vigor and amplitude preference;
those differences are what the re-identification attacker exploits.

Positions stay within +-30 degrees of the primary position by
construction, well inside the +-90 degree physiological bound.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import List, Tuple

import numpy as np

from .signal import GazeSignal

POSITION_BOX_DEG = 28.0
POSITION_HARD_LIMIT_DEG = 29.95


@dataclass(frozen=True)
class SubjectParams:
    """Per-subject generator settings; the subject's biometric signature."""

    fixation_shape: float = 6.0
    fixation_scale_ms: float = 50.0
    jitter_std_deg: float = 0.08
    jitter_rho: float = 0.95
    saccade_amp_mean_deg: float = 6.0
    saccade_amp_std_deg: float = 2.0
    main_seq_slope_ms_per_deg: float = 2.2
    main_seq_intercept_ms: float = 21.0
    bias_x_deg: float = 0.0
    bias_y_deg: float = 0.0
    dropout_prob: float = 0.0

    def __post_init__(self):
        for name in ("fixation_shape", "fixation_scale_ms", "main_seq_slope_ms_per_deg", "main_seq_intercept_ms"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.jitter_std_deg < 0 or self.saccade_amp_std_deg < 0:
            raise ValueError("spread parameters must be non-negative")
        if not 0 <= self.jitter_rho < 1:
            raise ValueError("jitter_rho must lie in [0, 1)")
        if not 0 <= self.dropout_prob < 1:
            raise ValueError("dropout_prob must lie in [0, 1)")
        if max(abs(self.bias_x_deg), abs(self.bias_y_deg)) > 10:
            raise ValueError("bias offsets beyond +-10 deg would crowd the position box")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "SubjectParams":
        return SubjectParams(**d)


def sample_subject_params(rng: np.random.Generator, dropout_prob: float = 0.0) -> SubjectParams:
    """Draw a distinct subject signature.

    Jitter texture and saccade vigor vary strongly across subjects (the
    fine-grained identity the autoencoder tends to wash out); fixation
    tempo and amplitude preference vary moderately, with overlap.
    """
    shape = float(rng.uniform(4.0, 10.0))
    mean_fixation_ms = float(rng.uniform(180.0, 420.0))
    return SubjectParams(
        fixation_shape=shape,
        fixation_scale_ms=mean_fixation_ms / shape,
        jitter_std_deg=float(np.exp(rng.uniform(np.log(0.02), np.log(0.22)))),
        jitter_rho=float(rng.uniform(0.90, 0.975)),
        saccade_amp_mean_deg=float(rng.uniform(4.0, 9.0)),
        saccade_amp_std_deg=float(rng.uniform(1.0, 2.5)),
        main_seq_slope_ms_per_deg=float(rng.uniform(1.9, 2.6)),
        main_seq_intercept_ms=float(rng.uniform(16.0, 26.0)),
        bias_x_deg=float(rng.uniform(-8.0, 8.0)),
        bias_y_deg=float(rng.uniform(-8.0, 8.0)),
        dropout_prob=dropout_prob,
    )


@dataclass(frozen=True)
class GazeEvent:
    kind: str  # "fixation" or "saccade"
    start: int  # sample index, inclusive
    end: int  # sample index, exclusive
    amplitude_deg: float = 0.0

    @property
    def n_samples(self) -> int:
        return self.end - self.start


def generate_subject_events(
    params: SubjectParams,
    duration_s: float,
    sample_rate: float,
    seed: int,
) -> Tuple[GazeSignal, List[GazeEvent]]:
    """Generate one recording plus its ground-truth event script."""
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    n = int(round(duration_s * sample_rate))
    dt_ms = 1000.0 / sample_rate
    rng = np.random.default_rng(seed)
    bias = np.array([params.bias_x_deg, params.bias_y_deg])
    center = bias + rng.uniform(-8.0, 8.0, size=2)

    innovation = params.jitter_std_deg * math.sqrt(1.0 - params.jitter_rho**2)
    jitter = np.zeros(2)

    xs = np.empty(n)
    ys = np.empty(n)
    events: List[GazeEvent] = []
    i = 0
    while i < n:
        # fixation
        start = i
        dur_ms = rng.gamma(params.fixation_shape, params.fixation_scale_ms)
        n_fix = max(1, int(round(dur_ms / dt_ms)))
        for _ in range(n_fix):
            if i >= n:
                break
            jitter = params.jitter_rho * jitter + rng.normal(0.0, innovation, size=2)
            xs[i], ys[i] = center + jitter
            i += 1
        events.append(GazeEvent("fixation", start, i))
        if i >= n:
            break

        # saccade toward a new target inside the position box
        amp = float(np.clip(rng.normal(params.saccade_amp_mean_deg, params.saccade_amp_std_deg), 0.5, 25.0))
        target = None
        for _ in range(20):
            theta = rng.uniform(0.0, 2.0 * math.pi)
            cand = center + amp * np.array([math.cos(theta), math.sin(theta)])
            if np.all(np.abs(cand) <= POSITION_BOX_DEG):
                target = cand
                break
        if target is None:
            direction = -center / max(np.linalg.norm(center), 1e-9)
            target = center + amp * direction
        origin = np.array([xs[i - 1], ys[i - 1]])
        displacement = target - origin
        realized_amp = float(np.linalg.norm(displacement))
        dur_sacc_ms = params.main_seq_slope_ms_per_deg * realized_amp + params.main_seq_intercept_ms
        n_sacc = max(2, int(round(dur_sacc_ms / dt_ms)))
        start = i
        for k in range(1, n_sacc + 1):
            if i >= n:
                break
            tau = k / n_sacc
            frac = tau - math.sin(2.0 * math.pi * tau) / (2.0 * math.pi)
            xs[i], ys[i] = origin + displacement * frac
            i += 1
        events.append(GazeEvent("saccade", start, i, amplitude_deg=realized_amp))
        center = target

    np.clip(xs, -POSITION_HARD_LIMIT_DEG, POSITION_HARD_LIMIT_DEG, out=xs)
    np.clip(ys, -POSITION_HARD_LIMIT_DEG, POSITION_HARD_LIMIT_DEG, out=ys)
    valid = None
    if params.dropout_prob > 0:
        valid = rng.uniform(size=n) >= params.dropout_prob
    signal = GazeSignal.from_arrays(xs, ys, sample_rate, valid=valid)
    return signal, events


def generate_subject(
    params: SubjectParams,
    duration_s: float,
    sample_rate: float,
    seed: int,
) -> GazeSignal:
    """Generate one recording for a subject; deterministic per seed."""
    signal, _ = generate_subject_events(params, duration_s, sample_rate, seed)
    return signal
