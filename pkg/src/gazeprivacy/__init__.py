"""Privacy-enhancing transformation of eye-tracking gaze signals.

A latent-noise autoencoder perturbs gaze recordings so that biometric
re-identification degrades while the signal stays usable for benign tasks
such as short-horizon gaze prediction. The package bundles the signal
preprocessing, the autoencoder and its training losses, a feature-based
re-identification attacker with verification metrics (EER, Rank-1 IR,
ROC), utility probes, a synthetic multi-subject gaze generator, and a CLI
pipeline that ties the stages together into privacy-utility reports.
"""

__version__ = "0.1.0"

from .autoencoder import (
    AE_NONE,
    AE_01,
    AE_02,
    AutoencoderModel,
    NoiseSchedule,
    PrivacyLevel,
    decode,
    encode,
    inject_noise,
    privatize,
    train,
)
from .losses import LossConfig, composite_loss, fgsm_loss, mse_loss, soft_dtw
from .signal import (
    GazeSignal,
    Window,
    WindowBatch,
    arcsin_unscale,
    downsample,
    reassemble,
    sin_scale,
    sin_scale_values,
    window_split,
)

__all__ = [
    "AE_NONE",
    "AE_01",
    "AE_02",
    "AutoencoderModel",
    "GazeSignal",
    "LossConfig",
    "NoiseSchedule",
    "PrivacyLevel",
    "Window",
    "WindowBatch",
    "arcsin_unscale",
    "composite_loss",
    "decode",
    "downsample",
    "encode",
    "fgsm_loss",
    "inject_noise",
    "mse_loss",
    "privatize",
    "reassemble",
    "sin_scale",
    "sin_scale_values",
    "soft_dtw",
    "train",
    "window_split",
]
