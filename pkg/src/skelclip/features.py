"""Frozen convolutional feature extraction and temporal mean pooling.

The builtin extractor stands in for a pretrained network used purely as a
feature extractor: a fixed stack of 3x3 conv / ReLU / 2x2 max-pool stages
whose weights are drawn once from a seeded splitmix64 generator and never
trained. 224 x 224 inputs pass through four stages (224 -> 112 -> 56 -> 28
-> 14), ending in 14 x 14 x C feature maps. Temporal mean pooling averages
the rectified activations of each feature map over the row (time) axis and
concatenates the per-map results map-major into a W*C vector; with C = 512
this is the 7168-dimensional representation of one clip frame.

Externally computed feature maps (e.g. from a real pretrained model) can be
ingested through the tensor files handled by ``load_feature_maps`` /
``load_feature_map_stack`` instead of the builtin extractor.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .clips import ClipSet, GrayFrame
from .errors import TensorFormatError
from .tensorio import read_tensor, write_tensor

DEFAULT_STAGE_WIDTHS = (8, 16, 32)  # leading stages; the final stage has `channels` maps


@dataclass(frozen=True)
class FeatureMaps:
    """H x W x C activations from the frozen extractor."""

    maps: np.ndarray

    def __post_init__(self):
        maps = np.asarray(self.maps, dtype=np.float64)
        if maps.ndim != 3 or min(maps.shape) < 1:
            raise ValueError(f"maps must be (H, W, C) with all dims >= 1, got {maps.shape}")
        if not np.isfinite(maps).all():
            raise ValueError("feature maps contain non-finite values")
        object.__setattr__(self, "maps", maps)


@dataclass(frozen=True)
class PooledFeature:
    """Temporal mean pooled feature: length W*C, map-major."""

    values: np.ndarray
    dims: tuple[int, int]  # (W, C)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        w, c = self.dims
        if values.shape != (w * c,):
            raise ValueError(f"expected length {w * c}, got shape {values.shape}")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class TimeStepFeature:
    """Concatenation of one time-step's three channel features, channel order
    fixed to the clip order (radius, azimuth, height)."""

    values: np.ndarray
    time_step: int

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if not 0 <= self.time_step < 4:
            raise ValueError(f"time_step must be in 0..3, got {self.time_step}")


@dataclass(frozen=True)
class ExtractorSpec:
    """Immutable description of the frozen extractor.

    ``stage_widths`` are the channel widths of the leading stages; one more
    stage of width ``channels`` is appended, so the default builds the
    (8, 16, 32, C) stack. Identical spec and seed give bit-identical weights.
    """

    kind: str = "builtin"  # or "precomputed"
    channels: int = 64
    seed: int = 0
    stage_widths: tuple[int, ...] = DEFAULT_STAGE_WIDTHS
    in_channels: int = 1

    def __post_init__(self):
        if self.kind not in ("builtin", "precomputed"):
            raise ValueError(f"kind must be builtin or precomputed, got {self.kind!r}")
        if self.channels < 1 or self.in_channels < 1:
            raise ValueError("channel counts must be >= 1")
        if any(w < 1 for w in self.stage_widths):
            raise ValueError("stage widths must be >= 1")

    @property
    def widths(self) -> tuple[int, ...]:
        return (*self.stage_widths, self.channels)


# ---------------------------------------------------------------------------
# Seeded deterministic weights


_MASK64 = (1 << 64) - 1


def _splitmix64(seed: int, count: int) -> np.ndarray:
    """First ``count`` outputs of the splitmix64 stream for ``seed``."""
    idx = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK64) + idx * np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def seeded_normals(seed: int, count: int) -> np.ndarray:
    """Standard normals from splitmix64 via Box-Muller, fixed draw order."""
    pairs = (count + 1) // 2
    bits = _splitmix64(seed, 2 * pairs)
    # u1 in (0, 1] so the log is finite; u2 in [0, 1)
    u1 = ((bits[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
    u2 = (bits[1::2] >> np.uint64(11)).astype(np.float64) * 2.0**-53
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    out = np.empty(2 * pairs, dtype=np.float64)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:count]


@lru_cache(maxsize=8)
def extractor_weights(spec: ExtractorSpec) -> tuple[np.ndarray, ...]:
    """Per-stage conv kernels (C_out, C_in, 3, 3); biases are zero.

    One normal stream per spec, consumed stage by stage in row-major kernel
    order and scaled by sqrt(2 / fan_in). Built once and shared read-only.
    """
    if spec.kind != "builtin":
        raise ValueError("only builtin extractors have weights")
    total = 0
    cin = spec.in_channels
    shapes = []
    for cout in spec.widths:
        shapes.append((cout, cin, 3, 3))
        total += cout * cin * 9
        cin = cout
    stream = seeded_normals(spec.seed, total)
    weights = []
    offset = 0
    for shape in shapes:
        n = int(np.prod(shape))
        fan_in = shape[1] * 9
        w = stream[offset:offset + n].reshape(shape) * np.sqrt(2.0 / fan_in)
        w.setflags(write=False)
        weights.append(w)
        offset += n
    return tuple(weights)


# ---------------------------------------------------------------------------
# Forward pass


def _conv3x3(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """3x3 convolution, zero padding 1, stride 1, on (B, H, W, C_in).

    Patches are laid out channel-major in ascending index order and reduced
    with one matrix product per stage.
    """
    b, h, wd, cin = x.shape
    xp = np.zeros((b, h + 2, wd + 2, cin), dtype=np.float64)
    xp[:, 1:-1, 1:-1, :] = x
    win = sliding_window_view(xp, (3, 3), axis=(1, 2))  # (B, H, W, C_in, 3, 3)
    col = np.ascontiguousarray(win).reshape(b * h * wd, cin * 9)
    wmat = w.reshape(w.shape[0], cin * 9).T
    return (col @ wmat).reshape(b, h, wd, w.shape[0])


def _maxpool2(x: np.ndarray) -> np.ndarray:
    b, h, w, c = x.shape
    return x.reshape(b, h // 2, 2, w // 2, 2, c).max(axis=(2, 4))


def _extract_batch(frames: np.ndarray, spec: ExtractorSpec) -> np.ndarray:
    """(B, H, W, C_in) pixel batch in [0, 1] -> (B, H', W', C) activations."""
    x = frames
    for w in extractor_weights(spec):
        h, wd = x.shape[1], x.shape[2]
        if h % 2 or wd % 2 or h < 2 or wd < 2:
            raise ValueError(
                f"frame size {h}x{wd} not halvable through {len(spec.widths)} stages"
            )
        x = _maxpool2(np.maximum(_conv3x3(x, w), 0.0))
    return x


def builtin_extract(frame: GrayFrame, spec: ExtractorSpec = ExtractorSpec()) -> FeatureMaps:
    """Run one gray frame through the frozen stack; pixels map to [0, 1]."""
    if spec.in_channels != 1:
        raise ValueError("builtin_extract takes single-channel frames; see color-clip path")
    x = frame.pixels.astype(np.float64)[None, :, :, None] / 255.0
    return FeatureMaps(maps=_extract_batch(x, spec)[0])


def temporal_mean_pool(fm: FeatureMaps) -> PooledFeature:
    """Mean of rectified activations over the row (time) axis per map,
    concatenated map-major: all W columns of map 1, then map 2, ..."""
    rectified = np.maximum(fm.maps, 0.0)
    pooled = rectified.mean(axis=0)  # (W, C)
    w, c = pooled.shape
    return PooledFeature(values=pooled.T.reshape(w * c), dims=(w, c))


def build_time_step_features(
    cs: ClipSet, spec: ExtractorSpec = ExtractorSpec()
) -> list[TimeStepFeature]:
    """Extract and pool all 12 frames, then concatenate per time-step.

    Returns four vectors of length 3*W*C, one per reference joint, channel
    blocks in clip order.
    """
    if spec.kind != "builtin" or spec.in_channels != 1:
        raise ValueError("time-step features need a single-channel builtin spec")
    frames = cs.as_array()  # (3, 4, H, W)
    h, wd = frames.shape[2], frames.shape[3]
    batch = frames.reshape(12, h, wd, 1).astype(np.float64) / 255.0
    maps = _extract_batch(batch, spec)  # (12, H', W', C)
    pooled = np.maximum(maps, 0.0).mean(axis=1)  # (12, W', C)
    n = pooled.shape[1] * pooled.shape[2]
    flat = pooled.transpose(0, 2, 1).reshape(3, 4, n)  # map-major per frame
    return [
        TimeStepFeature(values=np.concatenate([flat[0, r], flat[1, r], flat[2, r]]), time_step=r)
        for r in range(4)
    ]


def build_color_clip_features(
    cs: ClipSet, spec: ExtractorSpec
) -> list[PooledFeature]:
    """Ablation path: stack the three channel frames of each time-step as one
    3-channel input, giving a single W*C feature per time-step."""
    if spec.in_channels != 3:
        raise ValueError("color-clip extraction needs a spec with in_channels=3")
    frames = cs.as_array()  # (3, 4, H, W)
    batch = frames.transpose(1, 2, 3, 0).astype(np.float64) / 255.0  # (4, H, W, 3)
    maps = _extract_batch(batch, spec)
    pooled = np.maximum(maps, 0.0).mean(axis=1)  # (4, W', C)
    w, c = pooled.shape[1], pooled.shape[2]
    return [PooledFeature(values=pooled[r].T.reshape(w * c), dims=(w, c)) for r in range(4)]


def stack_time_step_features(features: list[TimeStepFeature]) -> np.ndarray:
    """(4, d) array in time-step order, the classifier's input layout."""
    if sorted(f.time_step for f in features) != [0, 1, 2, 3]:
        raise ValueError("need exactly one feature per time-step 0..3")
    ordered = sorted(features, key=lambda f: f.time_step)
    return np.stack([f.values for f in ordered])


# ---------------------------------------------------------------------------
# Feature map files


def store_feature_maps(fm: FeatureMaps, path: str | Path) -> None:
    write_tensor(path, fm.maps.astype(np.float32))


def load_feature_maps(path: str | Path) -> FeatureMaps:
    arr = read_tensor(path)
    if arr.ndim != 3:
        raise TensorFormatError(f"feature maps must be rank 3, got rank {arr.ndim}")
    if min(arr.shape) < 1:
        raise TensorFormatError(f"feature map dims must be >= 1, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise TensorFormatError("feature map payload contains non-finite values")
    return FeatureMaps(maps=arr.astype(np.float64))


def load_feature_map_stack(path: str | Path) -> list[TimeStepFeature]:
    """Ingest a precomputed (3, 4, H, W, C) feature-map stack for one sequence
    and pool it into the four time-step features."""
    arr = read_tensor(path)
    if arr.ndim != 5 or arr.shape[:2] != (3, 4):
        raise TensorFormatError(
            f"feature-map stack must have shape (3, 4, H, W, C), got {arr.shape}"
        )
    if not np.isfinite(arr).all():
        raise TensorFormatError("feature-map stack contains non-finite values")
    out = []
    for r in range(4):
        parts = [temporal_mean_pool(FeatureMaps(maps=arr[c, r].astype(np.float64))).values
                 for c in range(3)]
        out.append(TimeStepFeature(values=np.concatenate(parts), time_step=r))
    return out
