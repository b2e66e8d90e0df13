"""Dataset ingestion, subject-disjoint splitting, corpus generation on
disk, and checkpoint persistence.

Recordings live in CSV files with columns ``n`` (timestamp, ms), ``x``
and ``y`` (degrees); empty or non-numeric position fields mark invalid
samples. Subject, session and task are parsed from the
``S_<subject>_S<session>_<task>.csv`` filename convention when present.
Checkpoints are single JSON documents with hexadecimal floats, so a
save/load round trip is bit-exact.
"""
from __future__ import annotations

import csv
import json
import re
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .attack import AttackerConfig, AttackerModel
from .autoencoder import AutoencoderModel
from .errors import CheckpointError, DataError
from .nn import ParameterSet
from .signal import GazeSignal
from .synthetic import SubjectParams, generate_subject, sample_subject_params
from .utility import PredictorModel

CHECKPOINT_VERSION = 1
MANIFEST_VERSION = 1

_NAME_RE = re.compile(r"^S_(?P<subject>[^_]+)_S(?P<session>\d+)_(?P<task>[^_.]+)\.csv$")


def derive_seed(master: int, *parts: Union[int, str]) -> int:
    """Stable child seed from a master seed and context labels."""
    entropy = [int(master) & 0xFFFFFFFF]
    for p in parts:
        if isinstance(p, str):
            entropy.append(zlib.crc32(p.encode("utf-8")))
        else:
            entropy.append(int(p) & 0xFFFFFFFF)
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint32)[0])


@dataclass(frozen=True)
class Recording:
    signal: GazeSignal
    subject: str
    session: int
    task: str
    path: Optional[str] = None

    @property
    def recording_id(self) -> str:
        return f"S_{self.subject}_S{self.session}_{self.task}"


def parse_recording_name(filename: str) -> Optional[Tuple[str, int, str]]:
    m = _NAME_RE.match(Path(filename).name)
    if not m:
        return None
    return m.group("subject"), int(m.group("session")), m.group("task")


def load_csv(
    path: Union[str, Path],
    subject: Optional[str] = None,
    session: Optional[int] = None,
    task: Optional[str] = None,
) -> Recording:
    """Load one recording; metadata comes from the filename unless given."""
    path = Path(path)
    parsed = parse_recording_name(path.name)
    if parsed is not None:
        p_subject, p_session, p_task = parsed
        subject = subject if subject is not None else p_subject
        session = session if session is not None else p_session
        task = task if task is not None else p_task
    if subject is None or session is None or task is None:
        raise DataError(f"{path}: subject/session/task not derivable from filename; pass them explicitly")

    with open(path, newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        required = ("n", "x", "y")
        if any(col not in header for col in required):
            raise DataError(f"{path}: header must contain columns {required}, found {header}")
        idx = {col: header.index(col) for col in required}
        ts: List[float] = []
        xs: List[float] = []
        ys: List[float] = []
        valid: List[bool] = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                t = float(row[idx["n"]])
            except (ValueError, IndexError):
                raise DataError(f"{path}:{line_no}: timestamp column 'n' must be numeric") from None
            ok = True
            pos = []
            for col in ("x", "y"):
                cell = row[idx[col]].strip() if idx[col] < len(row) else ""
                try:
                    v = float(cell)
                    if not np.isfinite(v):
                        raise ValueError
                except ValueError:
                    v, ok = 0.0, False
                pos.append(v)
            ts.append(t)
            xs.append(pos[0])
            ys.append(pos[1])
            valid.append(ok)
    if not ts:
        raise DataError(f"{path}: no data rows")
    t_arr = np.array(ts)
    dt = np.diff(t_arr)
    if len(t_arr) > 1 and np.any(dt <= 0):
        raise DataError(f"{path}: timestamps must be strictly increasing")
    rate = 1000.0 / float(np.median(dt)) if len(t_arr) > 1 else 1000.0
    try:
        sig = GazeSignal(timestamps=t_arr, x=np.array(xs), y=np.array(ys), sample_rate=rate, valid=np.array(valid))
    except ValueError as e:
        raise DataError(f"{path}: {e}") from None
    return Recording(signal=sig, subject=str(subject), session=int(session), task=str(task), path=str(path))


def save_csv(path: Union[str, Path], signal: GazeSignal) -> None:
    """Write a recording; invalid samples get empty position fields."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "x", "y"])
        for t, x, y, ok in zip(signal.timestamps, signal.x, signal.y, signal.valid):
            if ok:
                writer.writerow([repr(float(t)), repr(float(x)), repr(float(y))])
            else:
                writer.writerow([repr(float(t)), "", ""])


@dataclass(frozen=True)
class DatasetSplit:
    """Subject-disjoint train/validation/test partition."""

    train: Tuple[str, ...]
    val: Tuple[str, ...]
    test: Tuple[str, ...]

    def __post_init__(self):
        parts = [set(self.train), set(self.val), set(self.test)]
        total = sum(len(p) for p in parts)
        if len(parts[0] | parts[1] | parts[2]) != total:
            raise ValueError("split partitions must be pairwise disjoint")

    def partition_of(self, subject: str) -> str:
        for name in ("train", "val", "test"):
            if subject in getattr(self, name):
                return name
        raise KeyError(f"subject '{subject}' not covered by the split")


def make_split(
    subject_ids: Sequence[str],
    fractions: Tuple[float, float, float] = (0.6, 0.2, 0.2),
    seed: int = 0,
) -> DatasetSplit:
    """Deterministic subject-level split; fractions must sum to 1."""
    ids = sorted(str(s) for s in subject_ids)
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate subject ids")
    if len(ids) < 3:
        raise ValueError(f"need at least 3 subjects to split, got {len(ids)}")
    if len(fractions) != 3 or min(fractions) < 0 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must be 3 non-negative values summing to 1, got {fractions}")
    n = len(ids)
    raw = [f * n for f in fractions]
    counts = [int(np.floor(r)) for r in raw]
    remainders = [r - c for r, c in zip(raw, counts)]
    while sum(counts) < n:
        i = int(np.argmax(remainders))
        counts[i] += 1
        remainders[i] = -1.0
    order = np.random.default_rng(seed).permutation(n)
    shuffled = [ids[i] for i in order]
    train = tuple(sorted(shuffled[: counts[0]]))
    val = tuple(sorted(shuffled[counts[0] : counts[0] + counts[1]]))
    test = tuple(sorted(shuffled[counts[0] + counts[1] :]))
    return DatasetSplit(train=train, val=val, test=test)


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(path: Union[str, Path], kind: str, arrays: Mapping[str, np.ndarray], meta: dict) -> None:
    """Write a self-describing JSON checkpoint with hex-encoded floats."""
    doc = {
        "schema_version": CHECKPOINT_VERSION,
        "kind": kind,
        "meta": meta,
        "shapes": {name: list(np.asarray(a).shape) for name, a in arrays.items()},
        "arrays": {name: [float.hex(float(v)) for v in np.asarray(a, dtype=np.float64).reshape(-1)] for name, a in arrays.items()},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path: Union[str, Path], expected_kind: Optional[str] = None) -> Tuple[str, Dict[str, np.ndarray], dict]:
    path = Path(path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}") from None
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{path}: corrupt checkpoint (invalid JSON: {e})") from None
    for key in ("schema_version", "kind", "meta", "shapes", "arrays"):
        if key not in doc:
            raise CheckpointError(f"{path}: corrupt checkpoint (missing field '{key}')")
    if doc["schema_version"] != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint version {doc['schema_version']} not supported (expected {CHECKPOINT_VERSION})"
        )
    if expected_kind is not None and doc["kind"] != expected_kind:
        raise CheckpointError(f"{path}: checkpoint holds a '{doc['kind']}' model, expected '{expected_kind}'")
    arrays: Dict[str, np.ndarray] = {}
    for name, shape in doc["shapes"].items():
        flat = doc["arrays"].get(name)
        if flat is None:
            raise CheckpointError(f"{path}: corrupt checkpoint (array '{name}' missing)")
        expected_size = int(np.prod(shape)) if shape else 1
        if len(flat) != expected_size:
            raise CheckpointError(
                f"{path}: array '{name}' has {len(flat)} values but declared shape {shape}"
            )
        try:
            values = np.array([float.fromhex(v) for v in flat])
        except (ValueError, TypeError) as e:
            raise CheckpointError(f"{path}: corrupt checkpoint (array '{name}': {e})") from None
        arrays[name] = values.reshape(shape)
    return doc["kind"], arrays, doc["meta"]


def save_autoencoder(path: Union[str, Path], model: AutoencoderModel) -> None:
    meta = {
        "window_len": model.window_len,
        "latent_dim": model.latent_dim,
        "hidden": list(model.hidden),
        "training": model.metadata,
    }
    save_checkpoint(path, "autoencoder", model.params.arrays(), meta)


def load_autoencoder(path: Union[str, Path]) -> AutoencoderModel:
    _, arrays, meta = load_checkpoint(path, expected_kind="autoencoder")
    model = AutoencoderModel(
        params=ParameterSet({}),
        window_len=int(meta["window_len"]),
        latent_dim=int(meta["latent_dim"]),
        hidden=tuple(meta["hidden"]),
        metadata=meta.get("training", {}),
    )
    dims_enc = model.encoder_dims()
    dims_dec = model.decoder_dims()
    expected = {}
    for i in range(len(dims_enc) - 1):
        expected[f"enc{i}_w"] = (dims_enc[i + 1], dims_enc[i])
        expected[f"enc{i}_b"] = (dims_enc[i + 1],)
        expected[f"dec{i}_w"] = (dims_dec[i + 1], dims_dec[i])
        expected[f"dec{i}_b"] = (dims_dec[i + 1],)
    for name, shape in expected.items():
        if name not in arrays:
            raise CheckpointError(f"{path}: autoencoder checkpoint missing parameter '{name}'")
        if arrays[name].shape != shape:
            raise CheckpointError(
                f"{path}: parameter '{name}' has shape {arrays[name].shape}, architecture expects {shape}"
            )
    model.params = ParameterSet(arrays)
    return model


def save_attacker(path: Union[str, Path], model: AttackerModel) -> None:
    arrays = model.params.arrays()
    arrays["feat_mean"] = model.feat_mean
    arrays["feat_std"] = model.feat_std
    meta = {
        "subjects": list(model.subjects),
        "seed": model.seed,
        "train_accuracy": model.train_accuracy,
        "config": {
            "hidden": model.config.hidden,
            "embedding_dim": model.config.embedding_dim,
            "epochs": model.config.epochs,
            "learning_rate": model.config.learning_rate,
            "subsequence_s": model.config.subsequence_s,
            "velocity_threshold": model.config.velocity_threshold,
        },
    }
    save_checkpoint(path, "attacker", arrays, meta)


def load_attacker(path: Union[str, Path]) -> AttackerModel:
    _, arrays, meta = load_checkpoint(path, expected_kind="attacker")
    try:
        feat_mean = arrays.pop("feat_mean")
        feat_std = arrays.pop("feat_std")
        config = AttackerConfig(**meta["config"])
    except (KeyError, TypeError) as e:
        raise CheckpointError(f"{path}: corrupt attacker checkpoint ({e})") from None
    return AttackerModel(
        params=ParameterSet(arrays),
        feat_mean=feat_mean,
        feat_std=feat_std,
        subjects=tuple(meta["subjects"]),
        config=config,
        seed=int(meta["seed"]),
        train_accuracy=float(meta["train_accuracy"]),
    )


def save_predictor(path: Union[str, Path], model: PredictorModel) -> None:
    meta = {
        "history": model.history,
        "horizon_samples": model.horizon_samples,
        "hidden": model.hidden,
        "sample_rate": model.sample_rate,
        "training": model.metadata,
    }
    save_checkpoint(path, "predictor", model.params.arrays(), meta)


def load_predictor(path: Union[str, Path]) -> PredictorModel:
    _, arrays, meta = load_checkpoint(path, expected_kind="predictor")
    return PredictorModel(
        params=ParameterSet(arrays),
        history=int(meta["history"]),
        horizon_samples=int(meta["horizon_samples"]),
        hidden=int(meta["hidden"]),
        sample_rate=float(meta["sample_rate"]),
        metadata=meta.get("training", {}),
    )


# ---------------------------------------------------------------------------
# synthetic corpus on disk

@dataclass(frozen=True)
class CorpusManifest:
    seed: int
    sample_rate: float
    duration_s: float
    task: str
    subjects: Tuple[dict, ...]
    files: Tuple[dict, ...]

    @property
    def subject_ids(self) -> Tuple[str, ...]:
        return tuple(s["id"] for s in self.subjects)

    def to_json(self) -> str:
        doc = {
            "schema_version": MANIFEST_VERSION,
            "seed": self.seed,
            "sample_rate": self.sample_rate,
            "duration_s": self.duration_s,
            "task": self.task,
            "subjects": list(self.subjects),
            "files": list(self.files),
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def load_manifest(path: Union[str, Path]) -> CorpusManifest:
    path = Path(path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
        return CorpusManifest(
            seed=doc["seed"],
            sample_rate=doc["sample_rate"],
            duration_s=doc["duration_s"],
            task=doc["task"],
            subjects=tuple(doc["subjects"]),
            files=tuple(doc["files"]),
        )
    except FileNotFoundError:
        raise DataError(f"corpus manifest not found: {path}") from None
    except (json.JSONDecodeError, KeyError) as e:
        raise DataError(f"{path}: corrupt corpus manifest ({e})") from None


def build_corpus(
    out_dir: Union[str, Path],
    n_subjects: int,
    sessions: int = 2,
    duration_s: float = 60.0,
    sample_rate: float = 1000.0,
    seed: int = 0,
    dropout_prob: float = 0.0,
    task: str = "RAN",
) -> CorpusManifest:
    """Generate a multi-subject corpus of CSV recordings plus a manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    param_rng = np.random.default_rng(derive_seed(seed, "subject-params"))
    subjects = []
    files = []
    for k in range(n_subjects):
        sid = f"{k + 1:03d}"
        params = sample_subject_params(param_rng, dropout_prob=dropout_prob)
        subjects.append({"id": sid, "params": params.to_dict()})
        for session in range(1, sessions + 1):
            rec_seed = derive_seed(seed, sid, session)
            signal = generate_subject(params, duration_s, sample_rate, rec_seed)
            name = f"S_{sid}_S{session}_{task}.csv"
            save_csv(out_dir / name, signal)
            files.append({"path": name, "subject": sid, "session": session, "task": task, "seed": rec_seed})
    manifest = CorpusManifest(
        seed=seed,
        sample_rate=sample_rate,
        duration_s=duration_s,
        task=task,
        subjects=tuple(subjects),
        files=tuple(files),
    )
    with open(out_dir / "manifest.json", "w") as fh:
        fh.write(manifest.to_json())
    return manifest


def load_corpus(data_dir: Union[str, Path]) -> Tuple[CorpusManifest, List[Recording]]:
    """Read a corpus directory back as (manifest, recordings)."""
    data_dir = Path(data_dir)
    manifest = load_manifest(data_dir / "manifest.json")
    recordings = []
    for entry in manifest.files:
        rec = load_csv(data_dir / entry["path"], subject=entry["subject"], session=entry["session"], task=entry["task"])
        recordings.append(rec)
    return manifest, recordings
