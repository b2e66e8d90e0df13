"""The privacy mechanism: a bottleneck autoencoder over gaze windows with
Gaussian noise injected into a Tanh-bounded latent code.

The encoder flattens a two-channel window (window_len * 2 values) through
three ELU hidden layers into a 32-value latent bounded to [-1, 1]; the
decoder mirrors the stack and Tanh-bounds its output, so reconstructions
always map back to physiologically possible angles. Privacy strength is
the standard deviation of the latent noise: training ramps it from 0 up
to a maximum after a warmup, and privatization applies a chosen level.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from .errors import NumericalError
from .losses import LossConfig, composite_loss
from .nn import AdamState, ParameterSet, Tensor, adam_step, add, backward, constant, dense_stack, elu, linear, tanh_act
from .signal import GazeSignal, Window, WindowBatch, reassemble, window_split

DEFAULT_HIDDEN = (96, 64, 48)
DEFAULT_LATENT = 32


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-epoch latent noise scale: zero during warmup, then a linear ramp
    that reaches ``final_sigma`` exactly at the last epoch."""

    warmup_epochs: int = 10
    final_sigma: float = 0.1

    def __post_init__(self):
        if self.warmup_epochs < 0:
            raise ValueError("warmup_epochs must be non-negative")
        if self.final_sigma < 0:
            raise ValueError("final_sigma must be non-negative")

    def sigma_at(self, epoch: int, total_epochs: int) -> float:
        if epoch < 0 or epoch >= total_epochs:
            raise ValueError(f"epoch {epoch} outside [0, {total_epochs})")
        if epoch < self.warmup_epochs or self.final_sigma == 0:
            return 0.0
        last = total_epochs - 1
        if last <= self.warmup_epochs:
            return self.final_sigma
        return self.final_sigma * (epoch - self.warmup_epochs) / (last - self.warmup_epochs)


_CANONICAL_LEVELS = {"AE-None": 0.0, "AE-0.1": 0.1, "AE-0.2": 0.2}


@dataclass(frozen=True)
class PrivacyLevel:
    """A named latent-noise scale; the canonical names pin their sigma."""

    name: str
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"noise scale must be non-negative, got {self.sigma}")
        expected = _CANONICAL_LEVELS.get(self.name)
        if expected is not None and abs(self.sigma - expected) > 1e-12:
            raise ValueError(f"level '{self.name}' requires sigma={expected}, got {self.sigma}")


AE_NONE = PrivacyLevel("AE-None", 0.0)
AE_01 = PrivacyLevel("AE-0.1", 0.1)
AE_02 = PrivacyLevel("AE-0.2", 0.2)


@dataclass
class AutoencoderModel:
    params: ParameterSet
    window_len: int = 64
    latent_dim: int = DEFAULT_LATENT
    hidden: Tuple[int, ...] = DEFAULT_HIDDEN
    metadata: Dict = field(default_factory=dict)

    @property
    def input_dim(self) -> int:
        return self.window_len * 2

    def encoder_dims(self) -> Tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.latent_dim)

    def decoder_dims(self) -> Tuple[int, ...]:
        return (self.latent_dim, *reversed(self.hidden), self.input_dim)

    def encode_t(self, x: Tensor) -> Tensor:
        h = x
        n_layers = len(self.hidden) + 1
        for i in range(n_layers):
            h = linear(h, self.params[f"enc{i}_w"], self.params[f"enc{i}_b"])
            h = elu(h) if i < n_layers - 1 else tanh_act(h)
        return h

    def decode_t(self, z: Tensor) -> Tensor:
        h = z
        n_layers = len(self.hidden) + 1
        for i in range(n_layers):
            h = linear(h, self.params[f"dec{i}_w"], self.params[f"dec{i}_b"])
            h = elu(h) if i < n_layers - 1 else tanh_act(h)
        return h


def new_model(
    window_len: int = 64,
    latent_dim: int = DEFAULT_LATENT,
    hidden: Tuple[int, ...] = DEFAULT_HIDDEN,
    seed: int = 0,
) -> AutoencoderModel:
    rng = np.random.default_rng(seed)
    model = AutoencoderModel(params=ParameterSet({}), window_len=window_len, latent_dim=latent_dim, hidden=tuple(hidden))
    arrays = dense_stack(rng, model.encoder_dims(), "enc")
    arrays.update(dense_stack(rng, model.decoder_dims(), "dec"))
    model.params = ParameterSet(arrays)
    model.metadata = {"seed": seed}
    return model


def _as_flat_batch(model: AutoencoderModel, window: Union[Window, np.ndarray]) -> Tuple[np.ndarray, bool]:
    """Coerce a window (L,2), flat (L*2,), or batch thereof to (B, L*2)."""
    values = window.values if isinstance(window, Window) else np.asarray(window, dtype=np.float64)
    d = model.input_dim
    if values.ndim == 1 and values.shape[0] == d:
        return values[None, :], True
    if values.ndim == 2 and values.shape == (model.window_len, 2):
        return values.reshape(1, d), True
    if values.ndim == 2 and values.shape[1] == d:
        return values, False
    if values.ndim == 3 and values.shape[1:] == (model.window_len, 2):
        return values.reshape(values.shape[0], d), False
    raise ValueError(f"window values of shape {values.shape} do not fit a {model.window_len}-sample window")


def encode(model: AutoencoderModel, window: Union[Window, np.ndarray]) -> np.ndarray:
    """Deterministic latent code(s) in (-1, 1); shape (32,) or (B, 32)."""
    flat, single = _as_flat_batch(model, window)
    z = model.encode_t(constant(flat)).data
    return z[0] if single else z


def decode(model: AutoencoderModel, latent: np.ndarray) -> np.ndarray:
    """Decode latent(s) to sine-scaled window values in (-1, 1).

    Latents may lie outside [-1, 1] (after noise injection); the decoder
    accepts them unchanged. Returns (window_len, 2) or (B, window_len, 2).
    """
    latent = np.asarray(latent, dtype=np.float64)
    single = latent.ndim == 1
    z = latent[None, :] if single else latent
    if z.ndim != 2 or z.shape[1] != model.latent_dim:
        raise ValueError(f"latent of shape {latent.shape} does not match latent_dim {model.latent_dim}")
    out = model.decode_t(constant(z)).data.reshape(-1, model.window_len, 2)
    return out[0] if single else out


def inject_noise(latent: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Add iid Gaussian(0, sigma) noise per coordinate; no re-clamping."""
    if sigma < 0:
        raise ValueError(f"noise scale must be non-negative, got {sigma}")
    latent = np.asarray(latent, dtype=np.float64)
    if sigma == 0:
        return latent.copy()
    return latent + rng.normal(0.0, sigma, size=latent.shape)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    sigma: float
    mse_term: float
    dtw_term: float
    fgsm_term: float


def train(
    dataset: WindowBatch,
    epochs: int = 50,
    learning_rate: float = 3e-4,
    batch_size: int = 256,
    schedule: NoiseSchedule = NoiseSchedule(),
    loss_config: LossConfig = LossConfig(),
    seed: int = 0,
    hidden: Tuple[int, ...] = DEFAULT_HIDDEN,
    latent_dim: int = DEFAULT_LATENT,
    log_fn: Optional[Callable[[EpochStats], None]] = None,
) -> AutoencoderModel:
    """Train the autoencoder on clean windows.

    Each step encodes a shuffled batch, injects the epoch's scheduled
    noise into the latent codes, decodes, and applies one Adam update of
    the composite loss. The same noise draw is shared by the plain and
    adversarial forward passes of a step, so the run is fully determined
    by the seed. Per-epoch term means are recorded in
    ``model.metadata['loss_history']``.
    """
    if len(dataset) == 0:
        raise ValueError("training dataset is empty")
    if not dataset.clean_mask.all():
        raise ValueError("training windows must be valid; split with drop_invalid=True")
    if epochs < 1:
        raise ValueError("epochs must be positive")

    rng = np.random.default_rng(seed)
    model = new_model(window_len=dataset.window_len, latent_dim=latent_dim, hidden=hidden, seed=seed)
    adam = AdamState.for_params(model.params, learning_rate)
    flat = dataset.values.reshape(len(dataset), model.input_dim)

    history: List[EpochStats] = []
    for epoch in range(epochs):
        sigma = schedule.sigma_at(epoch, epochs)
        order = rng.permutation(len(dataset))
        sums = np.zeros(3)
        steps = 0
        for start in range(0, len(dataset), batch_size):
            idx = order[start : start + batch_size]
            x = flat[idx]
            noise = constant(rng.normal(0.0, sigma, size=(len(idx), latent_dim))) if sigma > 0 else None

            def model_fn(t: Tensor) -> Tensor:
                z = model.encode_t(t)
                if noise is not None:
                    z = add(z, noise)
                return model.decode_t(z)

            model.params.zero_grad()
            comp = composite_loss(model_fn, x, loss_config, dataset.window_len)
            if not np.isfinite(comp.total.item()):
                raise NumericalError(
                    f"non-finite training loss at epoch {epoch}, step {steps} "
                    f"(mse={comp.mse_term}, dtw={comp.dtw_term}, fgsm={comp.fgsm_term})"
                )
            backward(comp.total)
            adam_step(model.params, adam)
            sums += (comp.mse_term, comp.dtw_term, comp.fgsm_term)
            steps += 1
        for name, t in model.params.items():
            if not np.all(np.isfinite(t.data)):
                raise NumericalError(f"parameter '{name}' became non-finite after epoch {epoch}")
        stats = EpochStats(epoch, sigma, *(sums / steps))
        history.append(stats)
        if log_fn is not None:
            log_fn(stats)

    model.metadata.update(
        {
            "epochs": epochs,
            "learning_rate": learning_rate,
            "batch_size": batch_size,
            "seed": seed,
            "noise_warmup_epochs": schedule.warmup_epochs,
            "noise_final_sigma": schedule.final_sigma,
            "loss_config": {
                "dtw_gamma": loss_config.dtw_gamma,
                "fgsm_epsilon": loss_config.fgsm_epsilon,
                "weight_mse": loss_config.weight_mse,
                "weight_dtw": loss_config.weight_dtw,
                "weight_fgsm": loss_config.weight_fgsm,
            },
            "n_windows": len(dataset),
            "loss_history": [asdict(h) for h in history],
        }
    )
    return model


def privatize(
    model: AutoencoderModel,
    signal: GazeSignal,
    level: PrivacyLevel,
    seed: int = 0,
) -> GazeSignal:
    """Privatize a whole recording at the given noise level.

    Windows containing invalid samples bypass the model untouched and stay
    marked invalid; tail samples beyond the last full window pass through
    unchanged. Output timestamps, length and validity layout match the
    input, and every reconstructed position stays within +-90 degrees.
    """
    batch = window_split(signal, window_len=model.window_len, drop_invalid=False, recording_id="privatize")
    if len(batch):
        clean = batch.clean_mask
        values = np.array(batch.values)
        if clean.any():
            flat = values[clean].reshape(-1, model.input_dim)
            z = encode(model, flat)
            if level.sigma > 0:
                z = inject_noise(z, level.sigma, np.random.default_rng(seed))
            values[clean] = decode(model, z)
        batch = WindowBatch(
            values=values,
            valid=batch.valid,
            recording_ids=batch.recording_ids,
            starts=batch.starts,
        )
    return reassemble(batch, signal).signal
