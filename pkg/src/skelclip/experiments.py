"""End-to-end experiment runner: splits, pipeline, evaluation, reports.

A run takes a dataset (manifest plus a way to load each entry's sequences),
partitions it by the chosen protocol, pushes every sequence through
clip generation -> frozen feature extraction -> (optional train-set
standardization) -> classifier training, and evaluates each requested mode
on the held-out side. Recordings that contain several skeletons contribute
one training sample per skeleton and are scored at test time by averaging
the samples' class probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .clips import CROP_SIZE, ClipOptions, augment_crops, generate_clips
from .errors import ParseError, StageError
from .features import ExtractorSpec, build_time_step_features, stack_time_step_features
from .multitask import (
    MODES,
    MtlnParams,
    TASK_COUNT,
    TrainConfig,
    baseline_inputs,
    predict_multi_sample,
    train,
)
from .skeleton_io import DatasetManifest, SkeletonSequence, load_sequences

# ---------------------------------------------------------------------------
# Split protocols


@dataclass(frozen=True)
class SplitProtocol:
    kind: str  # cross-subject | cross-view | k-fold
    train_ids: frozenset[int] | None = None
    test_ids: frozenset[int] | None = None
    fold_count: int = 0

    def __post_init__(self):
        if self.kind in ("cross-subject", "cross-view"):
            if not self.train_ids or not self.test_ids:
                raise ValueError(f"{self.kind} needs non-empty train_ids and test_ids")
            if self.train_ids & self.test_ids:
                raise ValueError("train and test ID sets overlap")
        elif self.kind == "k-fold":
            if self.fold_count < 2:
                raise ValueError("k-fold needs fold_count >= 2")
        else:
            raise ValueError(f"unknown protocol kind {self.kind!r}")


def make_splits(
    manifest: DatasetManifest, protocol: SplitProtocol, seed: int = 0
) -> list[tuple[DatasetManifest, DatasetManifest]]:
    """Deterministic (train, test) manifest pairs; one pair per fold.

    Cross-subject and cross-view filter by ID lists; k-fold shuffles once
    with the seeded generator and cuts contiguous folds.
    """
    entries = manifest.entries
    if protocol.kind in ("cross-subject", "cross-view"):
        attr = "subject_id" if protocol.kind == "cross-subject" else "camera_id"
        ids = [getattr(e, attr) for e in entries]
        if any(v is None for v in ids):
            raise ValueError(f"{protocol.kind} split needs {attr} on every entry")
        train = [e for e, v in zip(entries, ids) if v in protocol.train_ids]
        test = [e for e, v in zip(entries, ids) if v in protocol.test_ids]
        pairs = [(train, test)]
    else:
        order = np.random.default_rng(seed).permutation(len(entries))
        k = protocol.fold_count
        if k > len(entries):
            raise ValueError(f"cannot cut {k} folds from {len(entries)} entries")
        base, extra = divmod(len(entries), k)
        folds, start = [], 0
        for i in range(k):
            size = base + (1 if i < extra else 0)
            folds.append([entries[j] for j in order[start:start + size]])
            start += size
        pairs = [
            ([e for j, f in enumerate(folds) if j != i for e in f], folds[i])
            for i in range(k)
        ]
    for train, test in pairs:
        if not train or not test:
            raise ValueError("split produced an empty train or test side")
    return [
        (
            DatasetManifest(entries=train, class_count=manifest.class_count, layout=manifest.layout),
            DatasetManifest(entries=test, class_count=manifest.class_count, layout=manifest.layout),
        )
        for train, test in pairs
    ]


# ---------------------------------------------------------------------------
# Pipeline configuration


@dataclass(frozen=True)
class PipelineConfig:
    clip_options: ClipOptions = ClipOptions()
    extractor: ExtractorSpec = ExtractorSpec()
    train: TrainConfig = TrainConfig()
    augment_count: int = 0        # training-set crops per sequence; 0 disables
    augment_seed: int = 0
    standardize: bool = True      # center/scale features with train-set statistics
    test_average_crops: bool = False

    def __post_init__(self):
        if self.augment_count < 0:
            raise ValueError("augment_count must be >= 0")


@dataclass(frozen=True)
class FeatureScaler:
    """Train-set standardization: per-slot mean, one global scale."""

    mean: np.ndarray  # (K, d)
    scale: float

    @classmethod
    def fit(cls, x: np.ndarray) -> "FeatureScaler":
        mean = x.mean(axis=0)
        spread = float(x.std())
        return cls(mean=mean, scale=spread if spread > 0 else 1.0)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.scale

    @classmethod
    def identity(cls, k: int, d: int) -> "FeatureScaler":
        return cls(mean=np.zeros((k, d)), scale=1.0)


# ---------------------------------------------------------------------------
# Evaluation report


@dataclass
class ModeResult:
    mode: str
    fold_accuracies: list[float]
    confusions: list[np.ndarray]     # one matrix per trained net, rows = true class
    loss_curves: list[list[float]]   # one curve per trained net per fold

    @property
    def accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))


@dataclass
class EvalReport:
    class_count: int
    modes: list[ModeResult]

    def mode(self, name: str) -> ModeResult:
        for m in self.modes:
            if m.mode == name:
                return m
        raise KeyError(name)


# ---------------------------------------------------------------------------
# Feature preparation


SequenceLoader = Callable[[str], list[SkeletonSequence]]


def directory_loader(root: str | Path, manifest: DatasetManifest) -> SequenceLoader:
    """Load manifest entries relative to ``root`` via the standard readers."""
    root = Path(root)

    def load(path: str) -> list[SkeletonSequence]:
        return load_sequences(root / path, manifest.layout)

    return load


def sequence_table_loader(
    manifest: DatasetManifest, sequences: Sequence[SkeletonSequence]
) -> SequenceLoader:
    """Serve pre-built sequences (e.g. synthetic data) keyed by manifest path."""
    table = {e.path: [s] for e, s in zip(manifest.entries, sequences)}
    return lambda path: table[path]


def _stage(name: str):
    class _Guard:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, StageError):
                raise StageError(name, str(exc)) from exc
            return False

    return _Guard()


def compute_features(
    manifest: DatasetManifest,
    loader: SequenceLoader,
    config: PipelineConfig,
) -> dict[str, dict[str, list[np.ndarray]]]:
    """Per-entry feature arrays: ``plain`` holds one (4, d) array per skeleton
    in the recording; ``crops`` holds augment_count arrays per skeleton."""
    if config.augment_count > 0 and config.clip_options.size != CROP_SIZE:
        raise ValueError(
            f"crop augmentation is defined for {CROP_SIZE}x{CROP_SIZE} clips; "
            f"got size {config.clip_options.size}"
        )
    out: dict[str, dict[str, list[np.ndarray]]] = {}
    for entry in manifest.entries:
        with _stage("load"):
            bodies = loader(entry.path)
        plain: list[np.ndarray] = []
        crops: list[np.ndarray] = []
        for body in bodies:
            with _stage("clips"):
                cs = generate_clips(body, config.clip_options)
            with _stage("features"):
                plain.append(
                    stack_time_step_features(build_time_step_features(cs, config.extractor))
                )
                if config.augment_count > 0:
                    for crop in augment_crops(cs, config.augment_count, config.augment_seed):
                        crops.append(
                            stack_time_step_features(
                                build_time_step_features(crop, config.extractor)
                            )
                        )
        out[entry.path] = {"plain": plain, "crops": crops}
    return out


# ---------------------------------------------------------------------------
# Mode training and evaluation


def _mode_task_inputs(mode: str, x: np.ndarray) -> list[np.ndarray]:
    """(N, 4, d) -> list of per-net (N, K', d') input tensors for a mode."""
    if mode == "mtln":
        return [x]
    if mode == "frame":
        return [x[:, k:k + 1, :] for k in range(TASK_COUNT)]
    if mode == "concat":
        return [x.reshape(len(x), 1, -1)]
    if mode == "maxpool":
        return [x.max(axis=1, keepdims=True)]
    raise ValueError(f"unknown mode {mode!r}")


def _mode_sample_input(mode: str, feats: np.ndarray, net_index: int) -> np.ndarray:
    frame_index = net_index if mode == "frame" else None
    return baseline_inputs(mode if mode != "frame" else "frame", feats, frame_index)


def train_mode(
    mode: str,
    train_x: np.ndarray,
    train_y: np.ndarray,
    cfg: TrainConfig,
    n_classes: int,
) -> tuple[list[MtlnParams], list[list[float]]]:
    """Train the nets a mode needs (four for ``frame``, one otherwise)."""
    models, curves = [], []
    for i, inputs in enumerate(_mode_task_inputs(mode, train_x)):
        net_cfg = replace(cfg, mode=mode, seed=cfg.seed + i)
        params, curve = train(inputs, net_cfg, n_classes, labels=train_y)
        models.append(params)
        curves.append(curve)
    return models, curves


def evaluate_mode(
    mode: str,
    models: list[MtlnParams],
    test_groups: list[tuple[int, list[np.ndarray]]],
    n_classes: int,
) -> tuple[float, list[np.ndarray]]:
    """Accuracy and per-net confusion matrices over grouped test samples.

    Each group is one recording: (label, feature arrays of its samples).
    The frame baseline reports the mean of its four nets' accuracies.
    """
    confusions = [np.zeros((n_classes, n_classes), dtype=np.int64) for _ in models]
    for label, samples in test_groups:
        for i, params in enumerate(models):
            inputs = [_mode_sample_input(mode, f, i) for f in samples]
            pred, _ = predict_multi_sample(params, inputs)
            confusions[i][label, pred] += 1
    accs = [np.trace(c) / c.sum() for c in confusions]
    return float(np.mean(accs)), confusions


def run_experiment(
    manifest: DatasetManifest,
    loader: SequenceLoader,
    protocol: SplitProtocol,
    config: PipelineConfig,
    modes: Sequence[str] = ("mtln",),
    split_seed: int = 0,
) -> EvalReport:
    """Run every requested mode through every fold of the protocol.

    Features are computed once per entry and shared by all modes. When crop
    augmentation is enabled it applies to training samples only; test
    recordings are scored on their un-augmented representation unless
    ``test_average_crops`` is set.
    """
    if not modes:
        raise ValueError("need at least one mode")
    for mode in modes:
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}; choose from {MODES}")

    with _stage("split"):
        splits = make_splits(manifest, protocol, seed=split_seed)
    features = compute_features(manifest, loader, config)

    results = {mode: ModeResult(mode, [], [], []) for mode in modes}
    for train_manifest, test_manifest in splits:
        train_x, train_y = [], []
        for entry in train_manifest.entries:
            per_body = features[entry.path]
            samples = per_body["crops"] if config.augment_count > 0 else per_body["plain"]
            for feats in samples:
                train_x.append(feats)
                train_y.append(entry.label)
        train_x = np.stack(train_x)
        train_y = np.array(train_y, dtype=np.intp)

        scaler = (
            FeatureScaler.fit(train_x)
            if config.standardize
            else FeatureScaler.identity(train_x.shape[1], train_x.shape[2])
        )
        train_x = scaler.apply(train_x)

        test_groups = []
        for entry in test_manifest.entries:
            per_body = features[entry.path]
            samples = list(per_body["plain"])
            if config.test_average_crops and per_body["crops"]:
                samples = samples + list(per_body["crops"])
            test_groups.append((entry.label, [scaler.apply(f) for f in samples]))

        for mode in modes:
            with _stage("train"):
                models, curves = train_mode(
                    mode, train_x, train_y, config.train, manifest.class_count
                )
            with _stage("evaluate"):
                acc, confusions = evaluate_mode(
                    mode, models, test_groups, manifest.class_count
                )
            res = results[mode]
            res.fold_accuracies.append(acc)
            res.loss_curves.extend(curves)
            if res.confusions:
                for total, fold in zip(res.confusions, confusions):
                    total += fold
            else:
                res.confusions = confusions
    return EvalReport(class_count=manifest.class_count, modes=[results[m] for m in modes])


# ---------------------------------------------------------------------------
# Report rendering


def render_table(report: EvalReport) -> str:
    """Aligned text table of modes and accuracies (two-decimal percentages)."""
    if not report.modes:
        raise ValueError("report has no modes")
    width = max(len(m.mode) for m in report.modes)
    lines = [f"{'mode'.ljust(width)}  accuracy"]
    for m in report.modes:
        lines.append(f"{m.mode.ljust(width)}  {m.accuracy * 100:.2f}%")
    return "\n".join(lines) + "\n"


def render_results(report: EvalReport) -> str:
    """Machine-readable key-value dump; floats use repr so parsing is exact."""
    if not report.modes:
        raise ValueError("report has no modes")
    pairs: list[tuple[str, str]] = [
        ("classes", str(report.class_count)),
        ("modes", ",".join(m.mode for m in report.modes)),
    ]
    for m in report.modes:
        pairs.append((f"{m.mode}.accuracy", repr(m.accuracy)))
        pairs.append((f"{m.mode}.folds", str(len(m.fold_accuracies))))
        for i, acc in enumerate(m.fold_accuracies):
            pairs.append((f"{m.mode}.fold{i}.accuracy", repr(float(acc))))
        pairs.append((f"{m.mode}.nets", str(len(m.confusions))))
        for i, conf in enumerate(m.confusions):
            rows = ";".join(",".join(str(v) for v in row) for row in conf)
            pairs.append((f"{m.mode}.net{i}.confusion", rows))
        for i, curve in enumerate(m.loss_curves):
            pairs.append((f"{m.mode}.curve{i}", ",".join(repr(float(v)) for v in curve)))
    return "".join(f"{k} = {v}\n" for k, v in pairs)


def parse_results(text: str) -> EvalReport:
    """Inverse of render_results."""
    from .config import parse_kv

    kv = parse_kv(text)
    try:
        class_count = int(kv["classes"])
        modes = []
        for name in kv["modes"].split(","):
            folds = int(kv[f"{name}.folds"])
            fold_acc = [float(kv[f"{name}.fold{i}.accuracy"]) for i in range(folds)]
            nets = int(kv[f"{name}.nets"])
            confusions = []
            for i in range(nets):
                rows = kv[f"{name}.net{i}.confusion"].split(";")
                confusions.append(
                    np.array([[int(v) for v in row.split(",")] for row in rows], dtype=np.int64)
                )
            curves = []
            i = 0
            while f"{name}.curve{i}" in kv:
                curves.append([float(v) for v in kv[f"{name}.curve{i}"].split(",")])
                i += 1
            modes.append(
                ModeResult(
                    mode=name,
                    fold_accuracies=fold_acc,
                    confusions=confusions,
                    loss_curves=curves,
                )
            )
    except KeyError as exc:
        raise ParseError(f"results file missing key {exc}") from None
    return EvalReport(class_count=class_count, modes=modes)
