"""Gaze signal representation and preprocessing.

A gaze signal is a uniformly sampled sequence of horizontal/vertical gaze
positions in degrees of visual angle, with an explicit per-sample validity
mask (tracker dropouts, blinks). Preprocessing covers boxcar downsampling,
the trigonometric scaling that maps physiologically possible angles
(|angle| <= 90 deg) onto [-1, 1], splitting into fixed-length windows for
the autoencoder, and reassembling windows back into a signal.

All types are immutable after construction; the operations are pure
functions and safe to call concurrently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

MAX_ANGLE_DEG = 90.0
DEFAULT_WINDOW_LEN = 64

_DEG2RAD = math.pi / 180.0


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class GazeSignal:
    """Uniformly sampled gaze positions in degrees of visual angle.

    ``timestamps`` are milliseconds and must be strictly increasing with
    spacing consistent with ``sample_rate``. Invalid samples are marked in
    ``valid``; their stored x/y values carry no meaning but are kept so that
    indices stay aligned.
    """

    timestamps: np.ndarray
    x: np.ndarray
    y: np.ndarray
    sample_rate: float
    valid: Optional[np.ndarray] = None

    def __post_init__(self):
        t = _frozen_array(self.timestamps, np.float64)
        x = _frozen_array(self.x, np.float64)
        y = _frozen_array(self.y, np.float64)
        if self.valid is None:
            v = np.ones(len(t), dtype=bool)
            v.flags.writeable = False
        else:
            v = _frozen_array(self.valid, bool)
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "valid", v)

        if not (len(t) == len(x) == len(y) == len(v)):
            raise ValueError("timestamps, x, y and valid must have equal length")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if len(t) > 1:
            dt = np.diff(t)
            if np.any(dt <= 0):
                raise ValueError("timestamps must be strictly increasing")
            expected = 1000.0 / self.sample_rate
            if np.any(np.abs(dt - expected) > 1e-6 * expected):
                raise ValueError(
                    f"timestamp spacing inconsistent with sample_rate {self.sample_rate} Hz "
                    f"(expected {expected} ms, observed range "
                    f"[{dt.min()}, {dt.max()}] ms)"
                )
        vx, vy = x[v], y[v]
        if vx.size and (np.any(np.abs(vx) > MAX_ANGLE_DEG) or np.any(np.abs(vy) > MAX_ANGLE_DEG)):
            raise ValueError(f"valid gaze samples must stay within +-{MAX_ANGLE_DEG} deg")

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def duration_s(self) -> float:
        if len(self) < 2:
            return 0.0
        return (self.timestamps[-1] - self.timestamps[0]) / 1000.0

    def positions(self) -> np.ndarray:
        """Stacked (n, 2) array of x/y positions in degrees."""
        return np.stack([self.x, self.y], axis=1)

    @staticmethod
    def from_arrays(x, y, sample_rate: float, valid=None, t0_ms: float = 0.0) -> "GazeSignal":
        """Build a signal with synthetic uniform timestamps."""
        x = np.asarray(x, dtype=np.float64)
        t = t0_ms + np.arange(len(x)) * (1000.0 / sample_rate)
        return GazeSignal(timestamps=t, x=x, y=y, sample_rate=sample_rate, valid=valid)


@dataclass(frozen=True)
class Window:
    """One fixed-length window of sine-scaled gaze values."""

    values: np.ndarray  # (window_len, 2), in [-1, 1]
    valid: np.ndarray  # (window_len,) bool
    recording_id: str
    start: int  # sample index of the first sample within the source recording

    def __post_init__(self):
        values = _frozen_array(self.values, np.float64)
        valid = _frozen_array(self.valid, bool)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)
        if values.ndim != 2 or values.shape[1] != 2:
            raise ValueError(f"window values must have shape (n, 2), got {values.shape}")
        if valid.shape != (values.shape[0],):
            raise ValueError("window validity mask must match the number of samples")
        if np.any(np.abs(values) > 1.0):
            raise ValueError("window values must lie in [-1, 1]")

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def is_clean(self) -> bool:
        return bool(self.valid.all())


@dataclass(frozen=True)
class WindowBatch:
    """A stack of equally sized windows, optionally labelled by subject.

    May be empty (a signal shorter than one window yields an empty batch);
    consumers that need data, such as training, reject empty batches.
    """

    values: np.ndarray  # (n_windows, window_len, 2)
    valid: np.ndarray  # (n_windows, window_len) bool
    recording_ids: tuple
    starts: np.ndarray  # (n_windows,) int
    subjects: Optional[tuple] = None

    def __post_init__(self):
        values = _frozen_array(self.values, np.float64)
        valid = _frozen_array(self.valid, bool)
        starts = _frozen_array(self.starts, np.int64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "recording_ids", tuple(self.recording_ids))
        n = values.shape[0]
        if values.ndim != 3 or values.shape[2] != 2:
            raise ValueError(f"batch values must have shape (n, len, 2), got {values.shape}")
        if valid.shape != values.shape[:2]:
            raise ValueError("batch validity mask shape mismatch")
        if len(self.recording_ids) != n or len(starts) != n:
            raise ValueError("per-window origin metadata must match the window count")
        if self.subjects is not None:
            object.__setattr__(self, "subjects", tuple(self.subjects))
            if len(self.subjects) != n:
                raise ValueError("per-window subject labels must match the window count")
        if n and np.any(np.abs(values) > 1.0):
            raise ValueError("window values must lie in [-1, 1]")

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def window_len(self) -> int:
        return self.values.shape[1]

    def __getitem__(self, i: int) -> Window:
        return Window(
            values=self.values[i],
            valid=self.valid[i],
            recording_id=self.recording_ids[i],
            start=int(self.starts[i]),
        )

    @property
    def clean_mask(self) -> np.ndarray:
        """True for windows without any invalid sample."""
        return self.valid.all(axis=1)

    @staticmethod
    def concatenate(batches: Sequence["WindowBatch"]) -> "WindowBatch":
        batches = [b for b in batches if len(b)]
        if not batches:
            raise ValueError("cannot concatenate empty batch list")
        subjects = None
        if all(b.subjects is not None for b in batches):
            subjects = tuple(s for b in batches for s in b.subjects)
        return WindowBatch(
            values=np.concatenate([b.values for b in batches]),
            valid=np.concatenate([b.valid for b in batches]),
            recording_ids=tuple(r for b in batches for r in b.recording_ids),
            starts=np.concatenate([b.starts for b in batches]),
            subjects=subjects,
        )


class ReassembledSignal(NamedTuple):
    signal: GazeSignal
    covered: int  # number of leading samples reconstructed from windows


def downsample(signal: GazeSignal, factor: int) -> GazeSignal:
    """Reduce the sample rate by averaging groups of ``factor`` samples.

    Boxcar averaging rather than sample picking; a group containing any
    invalid sample yields an invalid output sample. The output timestamp is
    the first timestamp of each group.
    """
    if len(signal) == 0:
        raise ValueError("cannot downsample an empty signal")
    if factor < 1 or int(factor) != factor:
        raise ValueError(f"downsample factor must be a positive integer, got {factor}")
    factor = int(factor)
    if len(signal) < factor:
        raise ValueError(f"signal of length {len(signal)} is shorter than factor {factor}")
    if factor == 1:
        return signal
    m = len(signal) // factor
    cut = m * factor
    x = signal.x[:cut].reshape(m, factor).mean(axis=1)
    y = signal.y[:cut].reshape(m, factor).mean(axis=1)
    valid = signal.valid[:cut].reshape(m, factor).all(axis=1)
    t = signal.timestamps[:cut:factor]
    return GazeSignal(timestamps=t, x=x, y=y, sample_rate=signal.sample_rate / factor, valid=valid)


def sin_scale_values(degrees: np.ndarray) -> np.ndarray:
    """Map degrees in [-90, 90] to sin(angle) in [-1, 1]."""
    degrees = np.asarray(degrees, dtype=np.float64)
    if np.any(np.abs(degrees) > MAX_ANGLE_DEG):
        raise ValueError(f"gaze angles beyond +-{MAX_ANGLE_DEG} deg cannot be sine-scaled")
    return np.sin(degrees * _DEG2RAD)


def arcsin_unscale(values: np.ndarray) -> np.ndarray:
    """Invert :func:`sin_scale_values`: map [-1, 1] back to degrees.

    Values overshooting the unit interval by at most 1e-9 (floating-point
    slack) are clamped; anything further out is an error.
    """
    values = np.asarray(values, dtype=np.float64)
    if np.any(np.abs(values) > 1.0 + 1e-9):
        bad = values[np.abs(values) > 1.0 + 1e-9]
        raise ValueError(f"values outside [-1, 1] cannot be arcsin-unscaled (e.g. {bad.flat[0]})")
    clipped = np.clip(values, -1.0, 1.0)
    return np.arcsin(clipped) / _DEG2RAD


def sin_scale(signal: GazeSignal) -> np.ndarray:
    """Sine-scale a signal's positions; returns an (n, 2) array in [-1, 1].

    Invalid samples stay at whatever their stored position maps to (or 0 if
    out of range) and remain flagged through ``signal.valid``.
    """
    x = np.where(signal.valid, signal.x, np.clip(signal.x, -MAX_ANGLE_DEG, MAX_ANGLE_DEG))
    y = np.where(signal.valid, signal.y, np.clip(signal.y, -MAX_ANGLE_DEG, MAX_ANGLE_DEG))
    return np.stack([sin_scale_values(x), sin_scale_values(y)], axis=1)


def window_split(
    signal: GazeSignal,
    window_len: int = DEFAULT_WINDOW_LEN,
    drop_invalid: bool = False,
    recording_id: str = "",
) -> WindowBatch:
    """Sine-scale a signal and split it into non-overlapping windows.

    With ``drop_invalid`` (training), windows containing any invalid sample
    are excluded. Without it (evaluation), such windows are kept and their
    mask travels with them. A signal shorter than one window yields an
    empty batch.
    """
    if window_len < 1:
        raise ValueError(f"window_len must be positive, got {window_len}")
    n = len(signal) // window_len
    scaled = sin_scale(signal)
    values = scaled[: n * window_len].reshape(n, window_len, 2)
    valid = signal.valid[: n * window_len].reshape(n, window_len)
    starts = np.arange(n, dtype=np.int64) * window_len
    if drop_invalid and n:
        keep = valid.all(axis=1)
        values, valid, starts = values[keep], valid[keep], starts[keep]
    return WindowBatch(
        values=values,
        valid=valid,
        recording_ids=(recording_id,) * values.shape[0],
        starts=starts,
    )


def reassemble(batch: WindowBatch, reference: GazeSignal) -> ReassembledSignal:
    """Concatenate a contiguous window batch back into a full-length signal.

    The batch must cover a prefix of ``reference`` (origins 0, L, 2L, ...
    from a single recording). Windows are arcsin-unscaled; tail samples not
    covered by a full window are passed through from ``reference``
    unmodified, with the covered length reported alongside.
    """
    if len(batch) == 0:
        return ReassembledSignal(signal=reference, covered=0)
    if len(set(batch.recording_ids)) > 1:
        raise ValueError(f"cannot reassemble windows from mixed recordings: {sorted(set(batch.recording_ids))}")
    L = batch.window_len
    expected = np.arange(len(batch), dtype=np.int64) * L
    if not np.array_equal(batch.starts, expected):
        raise ValueError("window origins must be contiguous from the start of the recording")
    covered = len(batch) * L
    if covered > len(reference):
        raise ValueError("window batch covers more samples than the reference signal")
    flat = batch.values.reshape(covered, 2)
    degrees = arcsin_unscale(flat)
    x = reference.x.copy()
    y = reference.y.copy()
    valid = reference.valid.copy()
    head_valid = batch.valid.reshape(covered)
    x[:covered] = np.where(head_valid, degrees[:, 0], reference.x[:covered])
    y[:covered] = np.where(head_valid, degrees[:, 1], reference.y[:covered])
    valid[:covered] = head_valid & reference.valid[:covered]
    out = GazeSignal(
        timestamps=reference.timestamps,
        x=x,
        y=y,
        sample_rate=reference.sample_rate,
        valid=valid,
    )
    return ReassembledSignal(signal=out, covered=covered)
