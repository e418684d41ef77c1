"""Desk-scale synthetic action dataset.

Each class moves every joint along a seeded sinusoid: joint j of class c
follows base_j + A[c, j] * sin(2*pi*f_c * tau + phi[c, j]) with tau = i/t,
so the trajectory shape is independent of the drawn frame count. Classes
differ in frequency (f_c = 2c + 1 cycles per sequence) and in their
amplitude and phase tables; the reference joints get tiny amplitudes so
they stay nearly still, like the shoulders and hips they model. Gaussian
noise is added per coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layouts import JointLayout
from .skeleton_io import DatasetManifest, ManifestEntry, SkeletonSequence

AMPLITUDE_RANGE = (0.2, 1.0)
REFERENCE_DAMPING = 0.02


@dataclass(frozen=True)
class SynthConfig:
    layout: JointLayout
    n_classes: int = 5
    t_min: int = 20
    t_max: int = 60
    sigma: float = 0.05
    samples_per_class: int = 60
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.t_min < 2 or self.t_max < self.t_min:
            raise ValueError("need 2 <= t_min <= t_max")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be >= 1")


def class_frequency(c: int) -> float:
    return float(2 * c + 1)


def generate_synthetic(cfg: SynthConfig) -> tuple[DatasetManifest, list[SkeletonSequence]]:
    """Build the manifest and sequences; entry order matches sequence order.

    subject_id is the draw index within the class (so a cross-subject split
    on subjects 0..k-1 takes the first k draws of every class) and camera_id
    cycles through 0..2.
    """
    m = cfg.layout.joint_count
    refs = list(cfg.layout.reference_joints)
    rng = np.random.default_rng(cfg.seed)

    base = rng.uniform(-0.5, 0.5, size=(m, 3))
    amplitude = rng.uniform(*AMPLITUDE_RANGE, size=(cfg.n_classes, m, 3))
    amplitude[:, refs, :] *= REFERENCE_DAMPING
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(cfg.n_classes, m, 3))

    entries: list[ManifestEntry] = []
    sequences: list[SkeletonSequence] = []
    for c in range(cfg.n_classes):
        freq = class_frequency(c)
        for s in range(cfg.samples_per_class):
            t = int(rng.integers(cfg.t_min, cfg.t_max + 1))
            tau = (np.arange(t, dtype=np.float64) / t)[:, None, None]
            frames = base + amplitude[c] * np.sin(2.0 * np.pi * freq * tau + phase[c])
            if cfg.sigma > 0:
                frames = frames + rng.normal(0.0, cfg.sigma, size=(t, m, 3))
            entry = ManifestEntry(
                path=f"synth_c{c:02d}_s{s:03d}.json",
                label=c,
                subject_id=s,
                camera_id=s % 3,
            )
            entries.append(entry)
            sequences.append(
                SkeletonSequence(
                    layout=cfg.layout,
                    frames=frames,
                    label=c,
                    subject_id=entry.subject_id,
                    camera_id=entry.camera_id,
                )
            )
    manifest = DatasetManifest(entries=entries, class_count=cfg.n_classes, layout=cfg.layout)
    return manifest, sequences
