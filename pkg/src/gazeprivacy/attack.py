"""Biometric re-identification attacker and verification metrics.

The attacker summarizes each 5-second stretch of gaze into a fixed vector
of velocity and event statistics, embeds it with a small classification
network trained on attacker-side subjects, and matches unit-norm
embeddings by cosine similarity against per-subject enrollment templates.
Verification quality is measured by the equal error rate and the ROC of
genuine-versus-imposter scores; identification by the Rank-1 rate.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .nn import (
    AdamState,
    ParameterSet,
    adam_step,
    backward,
    constant,
    elu,
    glorot_uniform,
    l2_normalize_rows,
    linear,
    softmax_cross_entropy,
    tanh_act,
)
from .signal import GazeSignal

FEATURE_NAMES = (
    "vx_mean",
    "vx_std",
    "vx_skew",
    "vx_kurt",
    "vy_mean",
    "vy_std",
    "vy_skew",
    "vy_kurt",
    "vmag_mean",
    "vmag_std",
    "fixation_rate",
    "saccade_rate",
    "saccade_amplitude_mean",
    "fixation_dispersion_mean",
)
FEATURE_DIM = len(FEATURE_NAMES)

VELOCITY_THRESHOLD_DEG_S = 30.0


def _skewness(v: np.ndarray) -> float:
    if v.size < 2:
        return 0.0
    s = v.std()
    if s < 1e-12:
        return 0.0
    return float(np.mean(((v - v.mean()) / s) ** 3))


def _excess_kurtosis(v: np.ndarray) -> float:
    if v.size < 2:
        return 0.0
    s = v.std()
    if s < 1e-12:
        return 0.0
    return float(np.mean(((v - v.mean()) / s) ** 4) - 3.0)


def _runs(mask: np.ndarray) -> List[Tuple[int, int]]:
    """Inclusive (start, end) index pairs of contiguous True stretches."""
    out: List[Tuple[int, int]] = []
    start = None
    for i, m in enumerate(mask):
        if m and start is None:
            start = i
        elif not m and start is not None:
            out.append((start, i - 1))
            start = None
    if start is not None:
        out.append((start, len(mask) - 1))
    return out


def extract_features(
    signal: GazeSignal,
    subsequence_s: float = 5.0,
    velocity_threshold: float = VELOCITY_THRESHOLD_DEG_S,
    max_invalid_frac: float = 0.5,
) -> np.ndarray:
    """Per-subsequence statistical descriptors, one row per 5 s stretch.

    Velocities are first differences times the sample rate; samples above
    the velocity threshold form saccades, the rest fixations (I-VT).
    Invalid samples are excluded from the statistics and break event runs;
    subsequences with more than half their samples invalid are skipped.
    Returns an (n, 14) array (possibly empty for short signals).
    """
    n_sub = int(round(subsequence_s * signal.sample_rate))
    n_chunks = len(signal) // n_sub
    rows: List[np.ndarray] = []
    for k in range(n_chunks):
        sl = slice(k * n_sub, (k + 1) * n_sub)
        valid = signal.valid[sl]
        if valid.mean() < 1.0 - max_invalid_frac:
            continue
        x = signal.x[sl]
        y = signal.y[sl]
        vx = np.diff(x) * signal.sample_rate
        vy = np.diff(y) * signal.sample_rate
        v_ok = valid[:-1] & valid[1:]
        if not v_ok.any():
            continue
        vxo, vyo = vx[v_ok], vy[v_ok]
        vmag = np.hypot(vx, vy)
        vmag_ok = vmag[v_ok]

        saccade = v_ok & (vmag > velocity_threshold)
        fixation = v_ok & (vmag <= velocity_threshold)
        sacc_runs = _runs(saccade)
        fix_runs = _runs(fixation)

        amplitudes = [float(np.hypot(x[j + 1] - x[i], y[j + 1] - y[i])) for i, j in sacc_runs]
        dispersions = []
        for i, j in fix_runs:
            px, py = x[i : j + 2], y[i : j + 2]
            cx, cy = px.mean(), py.mean()
            dispersions.append(float(np.hypot(px - cx, py - cy).mean()))

        rows.append(
            np.array(
                [
                    vxo.mean(),
                    vxo.std(),
                    _skewness(vxo),
                    _excess_kurtosis(vxo),
                    vyo.mean(),
                    vyo.std(),
                    _skewness(vyo),
                    _excess_kurtosis(vyo),
                    vmag_ok.mean(),
                    vmag_ok.std(),
                    len(fix_runs) / subsequence_s,
                    len(sacc_runs) / subsequence_s,
                    float(np.mean(amplitudes)) if amplitudes else 0.0,
                    float(np.mean(dispersions)) if dispersions else 0.0,
                ]
            )
        )
    if not rows:
        return np.zeros((0, FEATURE_DIM))
    return np.stack(rows)


@dataclass(frozen=True)
class AttackerConfig:
    hidden: int = 32
    embedding_dim: int = 16
    epochs: int = 300
    learning_rate: float = 3e-3
    subsequence_s: float = 5.0
    velocity_threshold: float = VELOCITY_THRESHOLD_DEG_S


@dataclass
class AttackerModel:
    """Embedding network plus the training-set feature normalization."""

    params: ParameterSet
    feat_mean: np.ndarray
    feat_std: np.ndarray
    subjects: Tuple[str, ...]
    config: AttackerConfig
    seed: int
    train_accuracy: float = float("nan")


def _embed_t(params: ParameterSet, z: np.ndarray):
    h = elu(linear(constant(z), params["w1"], params["b1"]))
    return l2_normalize_rows(tanh_act(linear(h, params["w2"], params["b2"])))


def embed_features(attacker: AttackerModel, features: np.ndarray) -> np.ndarray:
    """Unit-norm embeddings for raw (n, 14) feature rows."""
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if features.shape[1] != FEATURE_DIM:
        raise ValueError(f"expected {FEATURE_DIM}-dim features, got shape {features.shape}")
    z = (features - attacker.feat_mean) / attacker.feat_std
    return _embed_t(attacker.params, z).data


def _features_of(signal: GazeSignal, config: AttackerConfig) -> np.ndarray:
    return extract_features(
        signal, subsequence_s=config.subsequence_s, velocity_threshold=config.velocity_threshold
    )


def train_attacker(
    recordings: Sequence[Tuple[str, GazeSignal]],
    config: AttackerConfig = AttackerConfig(),
    seed: int = 0,
) -> AttackerModel:
    """Train the embedding network to classify attacker-side subjects.

    ``recordings`` are (subject_id, signal) pairs; the subjects must be
    disjoint from the population later enrolled for evaluation. The
    softmax head is only used for training; evaluation keeps the
    embedding layer.
    """
    feats: List[np.ndarray] = []
    labels: List[str] = []
    for subject, sig in recordings:
        f = _features_of(sig, config)
        if len(f):
            feats.append(f)
            labels.extend([str(subject)] * len(f))
    if not feats:
        raise ValueError("no usable feature vectors in the training recordings")
    X = np.concatenate(feats)
    subjects = tuple(sorted(set(labels)))
    if len(subjects) < 2:
        raise ValueError(f"attacker training needs at least 2 subjects, got {len(subjects)}")
    index = {s: i for i, s in enumerate(subjects)}
    y = np.array([index[s] for s in labels], dtype=np.int64)

    mean = X.mean(axis=0)
    std = np.maximum(X.std(axis=0), 1e-8)
    Z = (X - mean) / std

    rng = np.random.default_rng(seed)
    params = ParameterSet(
        {
            "w1": glorot_uniform(rng, config.hidden, FEATURE_DIM),
            "b1": np.zeros(config.hidden),
            "w2": glorot_uniform(rng, config.embedding_dim, config.hidden),
            "b2": np.zeros(config.embedding_dim),
            "head_w": glorot_uniform(rng, len(subjects), config.embedding_dim),
            "head_b": np.zeros(len(subjects)),
        }
    )
    adam = AdamState.for_params(params, config.learning_rate)
    for _ in range(config.epochs):
        params.zero_grad()
        emb = _embed_t(params, Z)
        logits = linear(emb, params["head_w"], params["head_b"])
        loss = softmax_cross_entropy(logits, y)
        backward(loss)
        adam_step(params, adam)

    emb = _embed_t(params, Z)
    logits = emb.data @ params["head_w"].data.T + params["head_b"].data
    accuracy = float((logits.argmax(axis=1) == y).mean())
    return AttackerModel(
        params=params,
        feat_mean=mean,
        feat_std=std,
        subjects=subjects,
        config=config,
        seed=seed,
        train_accuracy=accuracy,
    )


def _recording_embedding(attacker: AttackerModel, signals: Sequence[GazeSignal]) -> Optional[np.ndarray]:
    """Unit-normalized mean embedding over all feature vectors of the signals."""
    feats = [f for sig in signals for f in _features_of(sig, attacker.config)]
    if not feats:
        return None
    emb = embed_features(attacker, np.stack(feats))
    mean = emb.mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm < 1e-12:
        return None
    return mean / norm


def enroll(attacker: AttackerModel, recordings_by_subject: Mapping[str, Sequence[GazeSignal]]) -> Dict[str, np.ndarray]:
    """One unit-norm template per subject from their enrollment recordings."""
    templates: Dict[str, np.ndarray] = {}
    for subject, signals in recordings_by_subject.items():
        t = _recording_embedding(attacker, list(signals))
        if t is None:
            raise ValueError(f"subject '{subject}' has no usable enrollment data")
        templates[str(subject)] = t
    if not templates:
        raise ValueError("enrollment produced no templates")
    return templates


@dataclass(frozen=True)
class ScoreSet:
    """Cosine similarity scores split into genuine and imposter trials."""

    genuine: np.ndarray
    imposter: np.ndarray
    genuine_pairs: Tuple[Tuple[str, str], ...] = ()
    imposter_pairs: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "genuine", np.asarray(self.genuine, dtype=np.float64))
        object.__setattr__(self, "imposter", np.asarray(self.imposter, dtype=np.float64))
        for arr in (self.genuine, self.imposter):
            if arr.size and np.any(np.abs(arr) > 1.0 + 1e-9):
                raise ValueError("similarity scores must lie in [-1, 1]")

    def csv_rows(self):
        """Rows of (kind, template_subject, probe_subject, score)."""
        gp = self.genuine_pairs or tuple(("", "") for _ in self.genuine)
        ip = self.imposter_pairs or tuple(("", "") for _ in self.imposter)
        for (t, p), s in zip(gp, self.genuine):
            yield ("genuine", t, p, float(s))
        for (t, p), s in zip(ip, self.imposter):
            yield ("imposter", t, p, float(s))


def _probe_embeddings(
    attacker: AttackerModel, probes: Sequence[Tuple[str, GazeSignal]]
) -> List[Tuple[str, np.ndarray]]:
    out = []
    for subject, sig in probes:
        emb = _recording_embedding(attacker, [sig])
        if emb is None:
            warnings.warn(f"probe recording for subject '{subject}' yielded no features; skipped")
            continue
        out.append((str(subject), emb))
    return out


def score(
    attacker: AttackerModel,
    templates: Mapping[str, np.ndarray],
    probes: Sequence[Tuple[str, GazeSignal]],
) -> ScoreSet:
    """Genuine and imposter cosine scores of probe recordings vs templates."""
    genuine: List[float] = []
    imposter: List[float] = []
    gp: List[Tuple[str, str]] = []
    ip: List[Tuple[str, str]] = []
    for subject, emb in _probe_embeddings(attacker, probes):
        if subject not in templates:
            warnings.warn(f"probe subject '{subject}' has no enrollment template; skipped")
            continue
        for tmpl_subject, tmpl in templates.items():
            s = float(np.clip(np.dot(tmpl, emb), -1.0, 1.0))
            if tmpl_subject == subject:
                genuine.append(s)
                gp.append((tmpl_subject, subject))
            else:
                imposter.append(s)
                ip.append((tmpl_subject, subject))
    return ScoreSet(
        genuine=np.array(genuine),
        imposter=np.array(imposter),
        genuine_pairs=tuple(gp),
        imposter_pairs=tuple(ip),
    )


class EerResult(NamedTuple):
    eer: float
    threshold: float


def _sweep_thresholds(scores: ScoreSet) -> np.ndarray:
    """All distinct scores plus a sentinel above the maximum."""
    all_scores = np.concatenate([scores.genuine, scores.imposter])
    thr = np.unique(all_scores)
    return np.concatenate([thr, [thr[-1] + 1.0]])


def _far_frr(scores: ScoreSet, thresholds: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    gen = np.sort(scores.genuine)
    imp = np.sort(scores.imposter)
    far = (len(imp) - np.searchsorted(imp, thresholds, side="left")) / len(imp)
    frr = np.searchsorted(gen, thresholds, side="left") / len(gen)
    return far, frr


def compute_eer(scores: ScoreSet) -> EerResult:
    """Equal error rate of the genuine/imposter score sets.

    Sweeps every distinct score as an acceptance threshold
    (accept iff score >= t; FAR = imposter fraction accepted, FRR =
    genuine fraction rejected) and linearly interpolates the crossing of
    FAR and FRR between bracketing thresholds.
    """
    if scores.genuine.size == 0 or scores.imposter.size == 0:
        raise ValueError("EER needs non-empty genuine and imposter score lists")
    thr = _sweep_thresholds(scores)
    far, frr = _far_frr(scores, thr)
    d = far - frr  # non-increasing; starts at +1, ends at -1
    k = int(np.where(d >= 0)[0][-1])
    if d[k] == 0.0:
        return EerResult(eer=float(far[k]), threshold=float(thr[k]))
    k2 = k + 1
    alpha = d[k] / (d[k] - d[k2])
    eer = far[k] + alpha * (far[k2] - far[k])
    threshold = thr[k] + alpha * (thr[k2] - thr[k])
    return EerResult(eer=float(eer), threshold=float(threshold))


def roc_points(scores: ScoreSet) -> np.ndarray:
    """(FAR, TAR) pairs, one per distinct threshold, FAR ascending.

    Includes the (1, 1) accept-everything endpoint and the reject-
    everything endpoint at FAR 0.
    """
    if scores.genuine.size == 0 or scores.imposter.size == 0:
        raise ValueError("ROC needs non-empty genuine and imposter score lists")
    thr = _sweep_thresholds(scores)
    far, frr = _far_frr(scores, thr)
    tar = 1.0 - frr
    return np.stack([far[::-1], tar[::-1]], axis=1)


def compute_rank1(
    attacker: AttackerModel,
    templates: Mapping[str, np.ndarray],
    probes: Sequence[Tuple[str, GazeSignal]],
) -> float:
    """Fraction of probes whose most-similar template is their own subject.

    Ties break toward the lowest subject identifier. Probes of subjects
    without a template are skipped with a warning.
    """
    if len(templates) < 2:
        raise ValueError(f"identification needs at least 2 templates, got {len(templates)}")
    subjects = sorted(templates)
    T = np.stack([templates[s] for s in subjects])
    correct = 0
    total = 0
    for subject, emb in _probe_embeddings(attacker, probes):
        if subject not in templates:
            warnings.warn(f"probe subject '{subject}' has no enrollment template; skipped")
            continue
        sims = T @ emb
        best = subjects[int(np.argmax(sims))]  # argmax takes the first (lowest id) on ties
        correct += best == subject
        total += 1
    if total == 0:
        raise ValueError("no probes could be scored against the templates")
    return correct / total
