"""Skeleton sequence parsing and the canonical interchange format.

Two on-disk representations are supported: the NTU ``.skeleton`` plain-text
layout, and a canonical JSON document with fields ``layout`` (layout name),
``label`` and ``frames`` (t lists of m ``[x, y, z]`` triples). Optional
``subject_id`` / ``camera_id`` keys round-trip when present.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError
from .layouts import BUILTIN_LAYOUTS, JointLayout


@dataclass(eq=False)
class SkeletonSequence:
    """t frames of m joints in 3D Cartesian coordinates, dataset-native units."""

    layout: JointLayout
    frames: np.ndarray  # (t, m, 3) float64
    label: int | None = None
    subject_id: int | None = None
    camera_id: int | None = None

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 3 or frames.shape[2] != 3:
            raise ValueError(f"frames must have shape (t, m, 3), got {frames.shape}")
        if frames.shape[0] < 1:
            raise ValueError("sequence must contain at least one frame")
        if frames.shape[1] != self.layout.joint_count:
            raise ValueError(
                f"frames have {frames.shape[1]} joints, layout "
                f"{self.layout.name!r} expects {self.layout.joint_count}"
            )
        if not np.isfinite(frames).all():
            raise ValueError("frames contain non-finite coordinates")
        self.frames = frames

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, SkeletonSequence):
            return NotImplemented
        return (
            self.layout == other.layout
            and self.label == other.label
            and self.subject_id == other.subject_id
            and self.camera_id == other.camera_id
            and self.frames.shape == other.frames.shape
            and bool(np.all(self.frames == other.frames))
        )


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: int
    subject_id: int | None = None
    camera_id: int | None = None


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    class_count: int
    layout: JointLayout

    def __post_init__(self):
        if self.class_count < 1:
            raise ValueError("class_count must be positive")
        paths = [e.path for e in self.entries]
        if len(set(paths)) != len(paths):
            raise ValueError("manifest paths must be distinct")
        for e in self.entries:
            if not 0 <= e.label < self.class_count:
                raise ValueError(f"label {e.label} out of range for {self.class_count} classes")


# ---------------------------------------------------------------------------
# NTU .skeleton format


class _Lines:
    def __init__(self, text: str):
        self._lines = text.splitlines()
        self.lineno = 0

    def next(self) -> str:
        while self.lineno < len(self._lines):
            line = self._lines[self.lineno]
            self.lineno += 1
            if line.strip():
                return line
        raise ParseError("unexpected end of file", line=self.lineno)

    def exhausted(self) -> bool:
        return all(not line.strip() for line in self._lines[self.lineno:])


def _parse_count(lines: _Lines, what: str) -> int:
    line = lines.next()
    try:
        return int(line.strip())
    except ValueError:
        raise ParseError(f"malformed {what} {line.strip()!r}", line=lines.lineno) from None


def parse_ntu_skeleton(text: str, layout: JointLayout) -> list[SkeletonSequence]:
    """Parse an NTU-style ``.skeleton`` document into one sequence per body.

    Format: first line is the frame count; each frame holds a body-count
    line, then per body a metadata line (first token is the body ID), a
    joint-count line, and one whitespace-separated line per joint whose
    first three fields are x y z. Frames where a body is absent are dropped
    from that body's sequence. Extra per-joint fields are ignored.
    """
    lines = _Lines(text)
    frame_count = _parse_count(lines, "frame count")
    if frame_count < 1:
        raise ParseError(f"frame count must be >= 1, got {frame_count}", line=lines.lineno)

    bodies: dict[str, list[np.ndarray]] = {}
    for _ in range(frame_count):
        body_count = _parse_count(lines, "body count")
        if body_count < 0:
            raise ParseError(f"body count must be >= 0, got {body_count}", line=lines.lineno)
        for _ in range(body_count):
            meta = lines.next().split()
            if not meta:
                raise ParseError("empty body metadata line", line=lines.lineno)
            body_id = meta[0]
            joint_count = _parse_count(lines, "joint count")
            if joint_count != layout.joint_count:
                raise ParseError(
                    f"joint count {joint_count} does not match layout "
                    f"{layout.name!r} ({layout.joint_count})",
                    line=lines.lineno,
                )
            joints = np.empty((joint_count, 3), dtype=np.float64)
            for j in range(joint_count):
                fields = lines.next().split()
                if len(fields) < 3:
                    raise ParseError(
                        f"joint line has {len(fields)} fields, need at least 3",
                        line=lines.lineno,
                    )
                try:
                    joints[j] = [float(fields[0]), float(fields[1]), float(fields[2])]
                except ValueError:
                    raise ParseError(
                        f"non-numeric coordinate in {fields[:3]}", line=lines.lineno
                    ) from None
                if not np.isfinite(joints[j]).all():
                    raise ParseError("non-finite coordinate", line=lines.lineno)
            bodies.setdefault(body_id, []).append(joints)
    if not lines.exhausted():
        raise ParseError("trailing content after final frame", line=lines.lineno + 1)
    if not bodies:
        raise ParseError("no bodies found in any frame")

    return [
        SkeletonSequence(layout=layout, frames=np.stack(frames))
        for frames in bodies.values()
    ]


# ---------------------------------------------------------------------------
# Canonical JSON format


def write_canonical(seq: SkeletonSequence) -> str:
    doc = {"layout": seq.layout.name, "label": seq.label}
    if seq.subject_id is not None:
        doc["subject_id"] = seq.subject_id
    if seq.camera_id is not None:
        doc["camera_id"] = seq.camera_id
    doc["frames"] = seq.frames.tolist()
    return json.dumps(doc)


def parse_canonical(
    text: str, layouts: dict[str, JointLayout] | None = None
) -> SkeletonSequence:
    """Parse a canonical document; layout names resolve against the built-ins
    unless an explicit mapping is supplied."""
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid document: {exc}", line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise ParseError("document root must be an object")
    for field in ("layout", "label", "frames"):
        if field not in doc:
            raise ParseError(f"missing field {field!r}")
    table = BUILTIN_LAYOUTS if layouts is None else layouts
    name = doc["layout"]
    if name not in table:
        raise ParseError(f"unknown layout {name!r}")
    layout = table[name]
    frames = doc["frames"]
    if not isinstance(frames, list) or not frames:
        raise ParseError("frames must be a non-empty array")
    lengths = {len(f) if isinstance(f, list) else -1 for f in frames}
    if lengths != {layout.joint_count}:
        raise ParseError(
            f"ragged or wrong-size frames: joint counts {sorted(lengths)}, "
            f"expected {layout.joint_count}"
        )
    for frame in frames:
        for joint in frame:
            if not (isinstance(joint, list) and len(joint) == 3
                    and all(isinstance(v, (int, float)) for v in joint)
                    and all(math.isfinite(v) for v in joint)):
                raise ParseError(f"bad joint entry {joint!r}")
    label = doc["label"]
    if label is not None and not isinstance(label, int):
        raise ParseError(f"label must be an integer or null, got {label!r}")
    try:
        return SkeletonSequence(
            layout=layout,
            frames=np.asarray(frames, dtype=np.float64),
            label=label,
            subject_id=doc.get("subject_id"),
            camera_id=doc.get("camera_id"),
        )
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def _reject_constant(name: str):
    raise ParseError(f"non-finite constant {name!r} not allowed")


def load_sequences(path: str | Path, layout: JointLayout) -> list[SkeletonSequence]:
    """Load sequences from disk; `.skeleton` files parse as NTU, others as canonical."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".skeleton":
        return parse_ntu_skeleton(text, layout)
    return [parse_canonical(text, layouts={**BUILTIN_LAYOUTS, layout.name: layout})]


# ---------------------------------------------------------------------------
# Manifest files: one record per line: path label subject_id camera_id
# ("-" marks a missing id).


def write_manifest(manifest: DatasetManifest) -> str:
    lines = []
    for e in manifest.entries:
        sid = "-" if e.subject_id is None else str(e.subject_id)
        cid = "-" if e.camera_id is None else str(e.camera_id)
        lines.append(f"{e.path} {e.label} {sid} {cid}")
    return "\n".join(lines) + "\n"


def parse_manifest(
    text: str, layout: JointLayout, class_count: int | None = None
) -> DatasetManifest:
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 4:
            raise ParseError(f"expected 4 fields, got {len(fields)}", line=lineno)
        path, label, sid, cid = fields
        try:
            entries.append(
                ManifestEntry(
                    path=path,
                    label=int(label),
                    subject_id=None if sid == "-" else int(sid),
                    camera_id=None if cid == "-" else int(cid),
                )
            )
        except ValueError:
            raise ParseError(f"malformed record {line!r}", line=lineno) from None
    if not entries:
        raise ParseError("manifest contains no records")
    if class_count is None:
        class_count = max(e.label for e in entries) + 1
    return DatasetManifest(entries=entries, class_count=class_count, layout=layout)
