"""Shared-weight multi-task classifier trained with plain SGD.

One two-layer network (FC -> ReLU -> FC -> softmax) processes the four
time-step features in parallel; the four tasks share every parameter and
the training loss is the sum of the per-task cross-entropy losses. At test
time the four tasks' softmax probabilities are averaged. The ablation
baselines reuse the same network on transformed inputs: a single time-step
feature ("frame"), the four features concatenated ("concat"), or their
elementwise maximum ("maxpool").
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ParseError, TrainingDivergedError
from .tensorio import read_tensor, write_tensor

MODES = ("mtln", "frame", "concat", "maxpool")
TASK_COUNT = 4

DEFAULT_HIDDEN = 512


@dataclass
class MtlnParams:
    """Two-layer weights shared by all tasks. W1: (d, h), W2: (h, n_classes)."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        self.W1 = np.asarray(self.W1, dtype=np.float64)
        self.b1 = np.asarray(self.b1, dtype=np.float64)
        self.W2 = np.asarray(self.W2, dtype=np.float64)
        self.b2 = np.asarray(self.b2, dtype=np.float64)
        d, h = self.W1.shape
        h2, n = self.W2.shape
        if h != h2 or self.b1.shape != (h,) or self.b2.shape != (n,):
            raise ValueError("inconsistent parameter shapes")
        for arr in (self.W1, self.b1, self.W2, self.b2):
            if not np.isfinite(arr).all():
                raise ValueError("parameters contain non-finite values")

    @property
    def input_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def class_count(self) -> int:
        return self.W2.shape[1]


@dataclass(frozen=True)
class TaskScores:
    """Per-task logits (K, n_classes) and their softmax probabilities."""

    z: np.ndarray
    probabilities: np.ndarray


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 100
    epochs: int = 35
    seed: int = 0
    mode: str = "mtln"
    hidden: int = DEFAULT_HIDDEN

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.hidden < 1:
            raise ValueError("hidden must be >= 1")


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax over the last axis."""
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def forward(params: MtlnParams, features: np.ndarray) -> TaskScores:
    """Apply the shared network to each row of a (K, d) feature array."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != params.input_dim:
        raise ValueError(
            f"features must be (K, {params.input_dim}), got {features.shape}"
        )
    hidden = np.maximum(features @ params.W1 + params.b1, 0.0)
    z = hidden @ params.W2 + params.b2
    return TaskScores(z=z, probabilities=softmax(z))


def _check_one_hot(y: np.ndarray, n: int) -> int:
    y = np.asarray(y)
    if y.shape != (n,) or not np.all((y == 0) | (y == 1)) or y.sum() != 1:
        raise ValueError(f"y must be one-hot of length {n}, got {y!r}")
    return int(np.argmax(y))


def task_loss(z_k: np.ndarray, y: np.ndarray) -> float:
    """Cross entropy of one task: log-sum-exp(z) minus the true-class logit,
    computed with the max-shifted formulation."""
    z_k = np.asarray(z_k, dtype=np.float64)
    true = _check_one_hot(y, z_k.shape[0])
    zmax = z_k.max()
    lse = zmax + np.log(np.exp(z_k - zmax).sum())
    return float(lse - z_k[true])


def total_loss(scores: TaskScores, y: np.ndarray) -> float:
    """Sum of the per-task losses."""
    return float(sum(task_loss(z_k, y) for z_k in scores.z))


@dataclass
class Gradients:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray


def backward(params: MtlnParams, features: np.ndarray, y: np.ndarray) -> Gradients:
    """Analytic gradient of the summed task losses w.r.t. the shared params.

    Softmax cross-entropy delta is softmax(z_k) - y per task; the per-task
    contributions accumulate into the shared parameters. The ReLU
    subgradient at exactly 0 is taken as 0.
    """
    features = np.asarray(features, dtype=np.float64)
    scores = forward(params, features)
    _check_one_hot(y, params.class_count)
    pre = features @ params.W1 + params.b1
    hidden = np.maximum(pre, 0.0)
    delta = scores.probabilities - np.asarray(y, dtype=np.float64)[None, :]  # (K, n)
    g_hidden = (delta @ params.W2.T) * (pre > 0)
    return Gradients(
        W1=features.T @ g_hidden,
        b1=g_hidden.sum(axis=0),
        W2=hidden.T @ delta,
        b2=delta.sum(axis=0),
    )


# ---------------------------------------------------------------------------
# Baseline input transforms


def baseline_inputs(mode: str, features: np.ndarray, frame_index: int | None = None) -> np.ndarray:
    """Map a (4, d) feature array to the task inputs of a mode.

    mtln keeps all four tasks; frame selects one time-step; concat joins the
    four vectors in time-step order; maxpool takes their elementwise maximum.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] != TASK_COUNT:
        raise ValueError(f"features must be ({TASK_COUNT}, d), got {features.shape}")
    if mode == "mtln":
        return features
    if mode == "frame":
        if frame_index is None or not 0 <= frame_index < TASK_COUNT:
            raise ValueError("frame mode needs frame_index in 0..3")
        return features[frame_index:frame_index + 1]
    if mode == "concat":
        return features.reshape(1, -1)
    if mode == "maxpool":
        return features.max(axis=0, keepdims=True)
    raise ValueError(f"unknown mode {mode!r}")


def baseline_forward(
    mode: str, params: MtlnParams, features: np.ndarray, frame_index: int | None = None
) -> TaskScores:
    return forward(params, baseline_inputs(mode, features, frame_index))


# ---------------------------------------------------------------------------
# Training


def init_params(d: int, hidden: int, n_classes: int, rng: np.random.Generator) -> MtlnParams:
    """Symmetric-uniform init with fan-based scale; biases zero."""
    a1 = np.sqrt(6.0 / (d + hidden))
    a2 = np.sqrt(6.0 / (hidden + n_classes))
    return MtlnParams(
        W1=rng.uniform(-a1, a1, size=(d, hidden)),
        b1=np.zeros(hidden),
        W2=rng.uniform(-a2, a2, size=(hidden, n_classes)),
        b2=np.zeros(n_classes),
    )


def _forward_batch(params: MtlnParams, x: np.ndarray):
    b, k, d = x.shape
    flat = x.reshape(b * k, d)
    pre = flat @ params.W1 + params.b1
    hidden = np.maximum(pre, 0.0)
    z = hidden @ params.W2 + params.b2
    return flat, pre, hidden, z.reshape(b, k, -1)


def _batch_mean_loss(z: np.ndarray, labels: np.ndarray) -> float:
    # z: (B, K, n); per-sample loss sums over tasks
    zmax = z.max(axis=-1, keepdims=True)
    lse = (zmax[..., 0] + np.log(np.exp(z - zmax).sum(axis=-1)))  # (B, K)
    picked = np.take_along_axis(z, labels[:, None, None], axis=-1)[..., 0]  # (B, K)
    return float((lse - picked).sum(axis=-1).mean())


def dataset_mean_loss(params: MtlnParams, x: np.ndarray, labels: np.ndarray) -> float:
    """Mean over samples of the summed task losses (no parameter update)."""
    _, _, _, z = _forward_batch(params, x)
    return _batch_mean_loss(z, labels)


def train(
    samples: Sequence[tuple[np.ndarray, int]] | np.ndarray,
    cfg: TrainConfig,
    n_classes: int,
    labels: np.ndarray | None = None,
) -> tuple[MtlnParams, list[float]]:
    """Mini-batch SGD on the batch-mean of the summed task losses.

    ``samples`` is either a sequence of ((K, d) array, label) pairs or an
    (N, K, d) array with ``labels`` given separately. Data is reshuffled
    every epoch with the seeded generator; updates are plain
    p <- p - lr * g. Returns the final parameters and a loss curve whose
    first entry is the dataset mean loss at initialization followed by one
    mean training loss per epoch. Raises TrainingDivergedError if the loss
    stops being finite.
    """
    if labels is None:
        x = np.stack([np.asarray(f, dtype=np.float64) for f, _ in samples])
        y = np.array([label for _, label in samples], dtype=np.intp)
    else:
        x = np.asarray(samples, dtype=np.float64)
        y = np.asarray(labels, dtype=np.intp)
    if x.ndim != 3 or len(x) == 0:
        raise ValueError(f"need a non-empty (N, K, d) feature array, got {x.shape}")
    if y.shape != (len(x),):
        raise ValueError("one label per sample required")
    if y.min() < 0 or y.max() >= n_classes:
        raise ValueError("labels out of range")

    n_samples, _, d = x.shape
    rng = np.random.default_rng(cfg.seed)
    params = init_params(d, cfg.hidden, n_classes, rng)
    onehot = np.eye(n_classes)

    curve = [dataset_mean_loss(params, x, y)]
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n_samples)
        epoch_loss = 0.0
        for start in range(0, n_samples, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            xb, yb = x[idx], y[idx]
            b, k = xb.shape[0], xb.shape[1]
            flat, pre, hidden, z = _forward_batch(params, xb)
            batch_loss = _batch_mean_loss(z, yb)
            if not np.isfinite(batch_loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch + 1}, sample offset {start}"
                )
            epoch_loss += batch_loss * b

            probs = softmax(z.reshape(b * k, -1))
            delta = (probs - np.repeat(onehot[yb], k, axis=0)) / b
            g_hidden = (delta @ params.W2.T) * (pre > 0)
            params.W2 -= cfg.learning_rate * (hidden.T @ delta)
            params.b2 -= cfg.learning_rate * delta.sum(axis=0)
            params.W1 -= cfg.learning_rate * (flat.T @ g_hidden)
            params.b1 -= cfg.learning_rate * g_hidden.sum(axis=0)
        curve.append(epoch_loss / n_samples)
    return params, curve


# ---------------------------------------------------------------------------
# Prediction


def predict(params: MtlnParams, features: np.ndarray) -> tuple[int, np.ndarray]:
    """Average the tasks' softmax probabilities; ties break to the lowest index."""
    scores = forward(params, features)
    probs = scores.probabilities.mean(axis=0)
    return int(np.argmax(probs)), probs


def predict_multi_sample(
    params: MtlnParams, sample_features: Sequence[np.ndarray]
) -> tuple[int, np.ndarray]:
    """Average probabilities over several samples of one recording (and over
    tasks), e.g. the two skeletons of an interaction or augmentation crops."""
    if len(sample_features) == 0:
        raise ValueError("need at least one sample")
    probs = np.mean(
        [forward(params, f).probabilities.mean(axis=0) for f in sample_features], axis=0
    )
    return int(np.argmax(probs)), probs


# ---------------------------------------------------------------------------
# Checkpoints: plain-text header, then named tensors as concatenated SKTF
# blobs in header order.


_CHECKPOINT_MAGIC = "skelclip-model 1"


def save_checkpoint(
    path: str | Path,
    models: dict[str, MtlnParams],
    mode: str,
    seed: int,
    extra_tensors: dict[str, np.ndarray] | None = None,
) -> None:
    """Write one or more parameter sets (keyed by name prefix) plus metadata.

    A single-model checkpoint stores tensors W1 b1 W2 b2; multi-model
    checkpoints (the per-frame baseline) prefix each name with the model key.
    """
    if not models:
        raise ValueError("need at least one model to save")
    names: list[str] = []
    tensors: list[np.ndarray] = []
    first = next(iter(models.values()))
    for key, params in models.items():
        prefix = f"{key}." if len(models) > 1 or key != "model" else ""
        for tname, arr in (("W1", params.W1), ("b1", params.b1),
                           ("W2", params.W2), ("b2", params.b2)):
            names.append(prefix + tname)
            tensors.append(arr)
    for tname, arr in (extra_tensors or {}).items():
        names.append(tname)
        tensors.append(np.asarray(arr))
    header = (
        f"{_CHECKPOINT_MAGIC}\n"
        f"mode {mode}\n"
        f"d {first.input_dim}\n"
        f"h {first.hidden_dim}\n"
        f"n_classes {first.class_count}\n"
        f"seed {seed}\n"
        f"tensors {' '.join(names)}\n"
        "end\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for arr in tensors:
            write_tensor(fh, arr.astype(np.float32))


def load_checkpoint(path: str | Path):
    """Returns (models dict, meta dict, extra tensors dict)."""
    with open(path, "rb") as fh:
        meta: dict[str, str] = {}
        first = fh.readline().decode("ascii", errors="replace").rstrip("\n")
        if first != _CHECKPOINT_MAGIC:
            raise ParseError(f"not a model checkpoint: {first!r}")
        names: list[str] = []
        while True:
            line = fh.readline().decode("ascii", errors="replace").rstrip("\n")
            if line == "end":
                break
            if not line:
                raise ParseError("unterminated checkpoint header")
            key, _, value = line.partition(" ")
            if key == "tensors":
                names = value.split()
            else:
                meta[key] = value
        tensors = {name: read_tensor(fh).astype(np.float64) for name in names}

    groups: dict[str, dict[str, np.ndarray]] = {}
    extra: dict[str, np.ndarray] = {}
    for name, arr in tensors.items():
        prefix, dot, leaf = name.rpartition(".")
        key = prefix if dot else "model"
        if leaf in ("W1", "b1", "W2", "b2"):
            groups.setdefault(key, {})[leaf] = arr
        else:
            extra[name] = arr
    models = {
        key: MtlnParams(W1=parts["W1"], b1=parts["b1"], W2=parts["W2"], b2=parts["b2"])
        for key, parts in groups.items()
    }
    return models, meta, extra
