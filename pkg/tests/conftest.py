import numpy as np
import pytest

from botdna.core import BehaviourSequence, all_blocks


def make_seq(account_id, blocks):
    return BehaviourSequence(account_id, tuple(blocks))


@pytest.fixture
def vocab():
    return all_blocks()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
