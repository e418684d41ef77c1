"""Skeleton sequence -> three clips of four gray frames.

For each of the four reference joints, the positions of the remaining
joints (in chain order) are taken relative to it, giving an (m-1) x t array
of 3D vectors per reference joint. Vectors are expressed in cylindrical
coordinates (radius, azimuth, height) by default, or left Cartesian for the
ablation. Each coordinate channel of each array becomes a gray image with
rows = time and columns = joints, linearly scaled to 0..255 and resized to
S x S. Grouping the four images of one channel yields one clip; the three
channels yield three clips, independent of the sequence length.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .skeleton_io import SkeletonSequence

CYLINDRICAL_CHANNELS = ("radius", "azimuth", "height")
CARTESIAN_CHANNELS = ("x", "y", "z")

# Augmentation constants: frames are blown up to 250x250 and 224x224
# patches are cropped, so offsets range over [0, 26].
AUGMENT_SIZE = 250
CROP_SIZE = 224
MAX_OFFSET = AUGMENT_SIZE - CROP_SIZE


@dataclass(frozen=True)
class GrayFrame:
    """H x W image of uint8 pixels, tagged with its (reference, channel) source."""

    pixels: np.ndarray
    source: tuple[int, str] | None = None

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"pixels must be a non-empty 2D array, got shape {px.shape}")
        if px.dtype != np.uint8:
            raise ValueError(f"pixels must be uint8, got {px.dtype}")
        object.__setattr__(self, "pixels", px)


@dataclass(frozen=True)
class ClipSet:
    """3 clips x 4 frames; clip index = coordinate channel, frame index =
    reference joint position in the layout's reference list."""

    clips: tuple[tuple[GrayFrame, ...], ...]
    channels: tuple[str, str, str] = CYLINDRICAL_CHANNELS

    def __post_init__(self):
        if len(self.clips) != 3 or any(len(c) != 4 for c in self.clips):
            raise ValueError("a ClipSet holds exactly 3 clips of 4 frames")
        shapes = {f.pixels.shape for clip in self.clips for f in clip}
        if len(shapes) != 1:
            raise ValueError(f"all frames must share dimensions, got {shapes}")

    @property
    def size(self) -> tuple[int, int]:
        return self.clips[0][0].pixels.shape

    def as_array(self) -> np.ndarray:
        """(3, 4, H, W) uint8 view of the frames."""
        return np.stack([np.stack([f.pixels for f in clip]) for clip in self.clips])


@dataclass(frozen=True)
class ClipOptions:
    coords: str = "cylindrical"       # or "cartesian"
    scale_scope: str = "frame"        # or "clip": min/max over the four arrays of a channel
    size: int = 224

    def __post_init__(self):
        if self.coords not in ("cylindrical", "cartesian"):
            raise ValueError(f"coords must be cylindrical or cartesian, got {self.coords!r}")
        if self.scale_scope not in ("frame", "clip"):
            raise ValueError(f"scale_scope must be frame or clip, got {self.scale_scope!r}")
        if self.size < 1:
            raise ValueError("size must be >= 1")


def relative_positions(seq: SkeletonSequence, ref: int) -> np.ndarray:
    """(m-1, t, 3) positions of the non-reference joints relative to ``ref``.

    Rows follow the layout's chain order with the reference joint removed.
    """
    m = seq.layout.joint_count
    if not 0 <= ref < m:
        raise ValueError(f"reference joint {ref} not in layout (m={m})")
    order = [j for j in seq.layout.chain_order if j != ref]
    rel = seq.frames[:, order, :] - seq.frames[:, ref:ref + 1, :]
    return rel.transpose(1, 0, 2)


def cartesian_to_cylindrical(v: np.ndarray) -> np.ndarray:
    """Map vectors (..., 3) to (radius, azimuth, height).

    radius = sqrt(x^2 + y^2); azimuth = atan2(y, x) in (-pi, pi], defined as
    0 when radius is 0; height = z.
    """
    v = np.asarray(v, dtype=np.float64)
    x, y = v[..., 0], v[..., 1]
    radius = np.hypot(x, y)
    azimuth = np.arctan2(y, x)
    azimuth = np.where(azimuth == -np.pi, np.pi, azimuth)
    azimuth = np.where(radius == 0.0, 0.0, azimuth)
    return np.stack([radius, azimuth, v[..., 2]], axis=-1)


def cylindrical_to_cartesian(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    r, az = c[..., 0], c[..., 1]
    return np.stack([r * np.cos(az), r * np.sin(az), c[..., 2]], axis=-1)


def _round_half_up(values: np.ndarray) -> np.ndarray:
    # round-half-away-from-zero for non-negative values, pinned for
    # bit-reproducibility (np.round would round half to even)
    return np.floor(values + 0.5)


def scale_to_gray(
    values: np.ndarray,
    bounds: tuple[float, float] | None = None,
    source: tuple[int, str] | None = None,
) -> GrayFrame:
    """Linearly map an array to 0..255 pixels.

    ``bounds`` fixes the (min, max) of the linear map; by default the
    array's own range is used. A degenerate range yields an all-zero image.
    """
    values = np.asarray(values, dtype=np.float64)
    if not np.isfinite(values).all():
        raise ValueError("cannot scale non-finite values")
    vmin, vmax = bounds if bounds is not None else (values.min(), values.max())
    if vmax == vmin:
        pixels = np.zeros(values.shape, dtype=np.uint8)
    else:
        scaled = 255.0 * (values - vmin) / (vmax - vmin)
        pixels = _round_half_up(scaled).astype(np.uint8)
    return GrayFrame(pixels=pixels, source=source)


def resize_bilinear(frame: GrayFrame, out_h: int, out_w: int) -> GrayFrame:
    """Bilinear resize with half-pixel-center sampling.

    Source coordinate = (dst + 0.5) * (src / dst) - 0.5, clamped to the
    valid range; results round half away from zero.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output dims must be >= 1, got {out_h}x{out_w}")
    src = frame.pixels.astype(np.float64)
    h, w = src.shape
    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    out = (
        src[np.ix_(y0, x0)] * (1.0 - wy) * (1.0 - wx)
        + src[np.ix_(y0, x1)] * (1.0 - wy) * wx
        + src[np.ix_(y1, x0)] * wy * (1.0 - wx)
        + src[np.ix_(y1, x1)] * wy * wx
    )
    pixels = np.clip(_round_half_up(out), 0, 255).astype(np.uint8)
    return GrayFrame(pixels=pixels, source=frame.source)


def generate_clips(seq: SkeletonSequence, options: ClipOptions = ClipOptions()) -> ClipSet:
    """Encode a whole sequence as a ClipSet of 3 x 4 S x S gray frames."""
    channels = CYLINDRICAL_CHANNELS if options.coords == "cylindrical" else CARTESIAN_CHANNELS
    refs = seq.layout.reference_joints

    # arrays[r][c]: (t, m-1) image values for reference slot r, channel c
    # (relative positions transposed so that rows = time, columns = joints)
    arrays = []
    for ref in refs:
        rel = relative_positions(seq, ref)  # (m-1, t, 3)
        if options.coords == "cylindrical":
            rel = cartesian_to_cylindrical(rel)
        arrays.append([rel[:, :, c].T for c in range(3)])

    clips = []
    for c, channel in enumerate(channels):
        if options.scale_scope == "clip":
            lo = min(arrays[r][c].min() for r in range(4))
            hi = max(arrays[r][c].max() for r in range(4))
            bounds = (lo, hi)
        else:
            bounds = None
        frames = []
        for r in range(4):
            gray = scale_to_gray(arrays[r][c], bounds=bounds, source=(r, channel))
            frames.append(resize_bilinear(gray, options.size, options.size))
        clips.append(tuple(frames))
    return ClipSet(clips=tuple(clips), channels=channels)


def augment_crops(cs: ClipSet, n: int, seed: int) -> list[ClipSet]:
    """n cropped variants: frames resized to 250x250, one (dx, dy) offset in
    [0, 26]^2 drawn per variant and applied to all 12 frames."""
    if n < 1:
        raise ValueError("crop count must be >= 1")
    enlarged = [
        [resize_bilinear(f, AUGMENT_SIZE, AUGMENT_SIZE) for f in clip] for clip in cs.clips
    ]
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        dx, dy = rng.integers(0, MAX_OFFSET + 1, size=2)
        clips = tuple(
            tuple(
                GrayFrame(
                    pixels=f.pixels[dy:dy + CROP_SIZE, dx:dx + CROP_SIZE],
                    source=f.source,
                )
                for f in clip
            )
            for clip in enlarged
        )
        out.append(ClipSet(clips=clips, channels=cs.channels))
    return out


def write_pgm(frame: GrayFrame, path: str | Path) -> None:
    """Binary PGM (P5, maxval 255) export for visual inspection."""
    h, w = frame.pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(frame.pixels.tobytes())
