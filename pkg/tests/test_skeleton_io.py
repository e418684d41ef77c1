import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skelclip import (
    DatasetManifest,
    JointLayout,
    ManifestEntry,
    ParseError,
    SkeletonSequence,
    load_layout,
    parse_canonical,
    parse_manifest,
    parse_ntu_skeleton,
    write_canonical,
    write_manifest,
)
from skelclip.layouts import BUILTIN_LAYOUTS


# ---------------------------------------------------------------------------
# Layouts


def test_builtin_figure2_16():
    layout = load_layout("figure2-16")
    assert layout.joint_count == 16
    assert layout.reference_joints == (4, 7, 10, 13)
    assert layout.chain_order == tuple(range(16))


@pytest.mark.parametrize("name,m", [("ntu-25", 25), ("sbu-15", 15), ("cmu-31", 31)])
def test_builtin_layouts_valid(name, m):
    layout = load_layout(name)
    assert layout.joint_count == m
    assert sorted(layout.chain_order) == list(range(m))
    assert len(set(layout.reference_joints)) == 4


def test_layout_from_mapping():
    layout = load_layout(
        {"name": "demo", "joint_count": "6", "chain": "5,4,3,2,1,0", "reference_joints": "0,1,2,3"}
    )
    assert layout.chain_order == (5, 4, 3, 2, 1, 0)


def test_layout_from_file(tmp_path):
    cfg = tmp_path / "layout.cfg"
    cfg.write_text(
        "name = demo\njoint_count = 6\nchain = 0-5\nreference_joints = 1,2,3,4\n"
    )
    assert load_layout(cfg).reference_joints == (1, 2, 3, 4)


def test_layout_three_references_rejected():
    with pytest.raises(ValueError, match="reference"):
        JointLayout(name="bad", joint_count=6, chain_order=tuple(range(6)),
                    reference_joints=(0, 1, 2))


def test_layout_reference_out_of_range():
    with pytest.raises(ValueError, match="out of range"):
        JointLayout(name="bad", joint_count=6, chain_order=tuple(range(6)),
                    reference_joints=(0, 1, 2, 6))


def test_layout_duplicate_chain_rejected():
    with pytest.raises(ValueError, match="permutation"):
        JointLayout(name="bad", joint_count=6, chain_order=(0, 1, 2, 3, 4, 4),
                    reference_joints=(0, 1, 2, 3))


def test_unknown_layout_name():
    with pytest.raises(ValueError, match="unknown layout"):
        load_layout("no-such-layout")


@given(st.permutations(list(range(8))), st.integers(0, 7))
def test_layout_rejects_corrupted_permutation(perm, corrupt_at):
    # duplicating one entry always breaks the permutation property
    bad = list(perm)
    bad[corrupt_at] = bad[(corrupt_at + 1) % len(bad)]
    with pytest.raises(ValueError):
        JointLayout(name="bad", joint_count=8, chain_order=tuple(bad),
                    reference_joints=(0, 1, 2, 3))


# ---------------------------------------------------------------------------
# Sequence validation


def test_sequence_rejects_empty(fig16):
    with pytest.raises(ValueError, match="at least one frame"):
        SkeletonSequence(layout=fig16, frames=np.zeros((0, 16, 3)))


def test_sequence_rejects_wrong_joint_count(fig16):
    with pytest.raises(ValueError, match="joints"):
        SkeletonSequence(layout=fig16, frames=np.zeros((2, 15, 3)))


def test_sequence_rejects_non_finite(fig16):
    frames = np.zeros((2, 16, 3))
    frames[1, 3, 0] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        SkeletonSequence(layout=fig16, frames=frames)


# ---------------------------------------------------------------------------
# NTU parser


def ntu_text(frames_per_body, joint_count=25, body_ids=("72057594037931101",)):
    """Build an NTU-style document; frames_per_body[i][f] is an (m, 3) array."""
    t = len(frames_per_body[0])
    lines = [str(t)]
    for f in range(t):
        present = [i for i, fr in enumerate(frames_per_body) if fr[f] is not None]
        lines.append(str(len(present)))
        for i in present:
            lines.append(f"{body_ids[i]} 0 0 0 0 0 0 0 0 2")
            lines.append(str(joint_count))
            for joint in frames_per_body[i][f]:
                x, y, z = (float(v) for v in joint)
                lines.append(f"{x!r} {y!r} {z!r} 0 0 0 0 0 0 0 0 2")
    return "\n".join(lines) + "\n"


def test_ntu_single_body_shape():
    layout = load_layout("ntu-25")
    frames = [np.zeros((25, 3)), np.ones((25, 3))]
    seqs = parse_ntu_skeleton(ntu_text([frames]), layout)
    assert len(seqs) == 1
    assert seqs[0].frames.shape == (2, 25, 3)


def test_ntu_zero_frames_rejected():
    layout = load_layout("ntu-25")
    with pytest.raises(ParseError, match="frame count"):
        parse_ntu_skeleton("0\n", layout)


def test_ntu_known_coordinates_exact():
    # hand-written 3-frame file: coordinates must round-trip exactly
    layout = load_layout("ntu-25")
    rng = np.random.default_rng(7)
    frames = [rng.uniform(-2, 2, size=(25, 3)) for _ in range(3)]
    seqs = parse_ntu_skeleton(ntu_text([frames]), layout)
    assert np.array_equal(seqs[0].frames, np.stack(frames))


def test_ntu_two_bodies_split():
    layout = load_layout("ntu-25")
    a = [np.full((25, 3), 1.0), np.full((25, 3), 2.0), np.full((25, 3), 3.0)]
    b = [np.full((25, 3), -1.0), None, np.full((25, 3), -3.0)]  # absent in frame 1
    seqs = parse_ntu_skeleton(ntu_text([a, b], body_ids=("100", "200")), layout)
    assert len(seqs) == 2
    assert seqs[0].frames.shape == (3, 25, 3)
    assert seqs[1].frames.shape == (2, 25, 3)  # missing frame dropped
    assert np.array_equal(seqs[1].frames[1], np.full((25, 3), -3.0))


def test_ntu_wrong_joint_count_names_line():
    layout = load_layout("ntu-25")
    text = "1\n1\n100 0 0 0 0 0 0 0 0 2\n24\n" + "0 0 0\n" * 24
    with pytest.raises(ParseError, match="line 4"):
        parse_ntu_skeleton(text, layout)


def test_ntu_non_numeric_coordinate_names_line():
    layout = load_layout("ntu-25")
    joints = "\n".join("0 0 0" for _ in range(24))
    text = f"1\n1\n100 0\n25\n{joints}\n0 oops 0\n"
    with pytest.raises(ParseError, match="line 29"):
        parse_ntu_skeleton(text, layout)


def test_ntu_truncated_file():
    layout = load_layout("ntu-25")
    with pytest.raises(ParseError, match="end of file"):
        parse_ntu_skeleton("2\n1\n100 0\n25\n0 0 0\n", layout)


# ---------------------------------------------------------------------------
# Canonical format


def test_canonical_round_trip_exact(fig16, rng):
    frames = rng.uniform(-3, 3, size=(5, 16, 3))
    seq = SkeletonSequence(layout=fig16, frames=frames, label=2, subject_id=7, camera_id=1)
    assert parse_canonical(write_canonical(seq)) == seq


def test_canonical_ragged_frames_rejected(fig16):
    doc = '{"layout": "figure2-16", "label": 0, "frames": [[[0,0,0]]]}'
    with pytest.raises(ParseError, match="ragged|wrong-size"):
        parse_canonical(doc)


def test_canonical_empty_frames_rejected():
    doc = '{"layout": "figure2-16", "label": 0, "frames": []}'
    with pytest.raises(ParseError, match="non-empty"):
        parse_canonical(doc)


def test_canonical_missing_field_rejected():
    with pytest.raises(ParseError, match="missing field"):
        parse_canonical('{"layout": "figure2-16", "frames": [[[0,0,0]]]}')


def test_canonical_unknown_layout():
    with pytest.raises(ParseError, match="unknown layout"):
        parse_canonical('{"layout": "nope", "label": 0, "frames": [[[0,0,0]]]}')


@settings(max_examples=25, deadline=None)
@given(
    t=st.integers(1, 6),
    label=st.one_of(st.none(), st.integers(0, 10)),
    seed=st.integers(0, 2**31),
)
def test_canonical_round_trip_property(t, label, seed):
    layout = BUILTIN_LAYOUTS["figure2-16"]
    rng = np.random.default_rng(seed)
    seq = SkeletonSequence(
        layout=layout,
        frames=rng.uniform(-1e3, 1e3, size=(t, 16, 3)),
        label=label,
    )
    assert parse_canonical(write_canonical(seq)) == seq


# ---------------------------------------------------------------------------
# Manifests


def test_manifest_round_trip(fig16):
    manifest = DatasetManifest(
        entries=[
            ManifestEntry("a.json", 0, subject_id=1, camera_id=0),
            ManifestEntry("b.json", 2, subject_id=None, camera_id=None),
        ],
        class_count=3,
        layout=fig16,
    )
    back = parse_manifest(write_manifest(manifest), fig16, class_count=3)
    assert back.entries == manifest.entries
    assert back.class_count == 3


def test_manifest_duplicate_paths_rejected(fig16):
    with pytest.raises(ValueError, match="distinct"):
        DatasetManifest(
            entries=[ManifestEntry("a", 0), ManifestEntry("a", 1)],
            class_count=2,
            layout=fig16,
        )


def test_manifest_label_out_of_range(fig16):
    with pytest.raises(ValueError, match="label"):
        DatasetManifest(entries=[ManifestEntry("a", 5)], class_count=3, layout=fig16)


def test_manifest_class_count_inferred(fig16):
    m = parse_manifest("a.json 4 - -\nb.json 0 - -\n", fig16)
    assert m.class_count == 5
