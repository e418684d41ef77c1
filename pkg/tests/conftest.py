import numpy as np
import pytest

from skelclip import JointLayout, SkeletonSequence, load_layout


@pytest.fixture
def fig16():
    return load_layout("figure2-16")


@pytest.fixture
def tiny_layout():
    # 6 joints keeps brute-force oracles cheap
    return JointLayout(
        name="tiny-6",
        joint_count=6,
        chain_order=(0, 1, 2, 3, 4, 5),
        reference_joints=(1, 2, 3, 4),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_sequence(layout, t, rng, label=None):
    frames = rng.uniform(-1.0, 1.0, size=(t, layout.joint_count, 3))
    return SkeletonSequence(layout=layout, frames=frames, label=label)


@pytest.fixture
def make_sequence():
    return random_sequence
