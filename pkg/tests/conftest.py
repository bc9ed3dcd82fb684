import numpy as np
import pytest

from relate.features import FoneConfig
from relate.perceiver import PerceiverConfig
from relate.synth import SyntheticDbSpec, generate_synthetic_db
from relate.text import TokenTable


SMALL_PERCEIVER = PerceiverConfig(d=16, latents=4, heads=2, layers=2, dropout=0.0)


@pytest.fixture(scope="session")
def tiny_token_table():
    rng = np.random.default_rng(99)
    words = (
        "users products orders id age segment bio snapshot signup price category name amount ts note "
        "label good fast alpha beta gamma delta tools games books garden audio"
    ).split()
    entries = {w: rng.standard_normal(12) / np.sqrt(12) for w in words}
    return TokenTable(dim=12, entries=entries, fallback_buckets=64)


@pytest.fixture(scope="session")
def small_db_task():
    spec = SyntheticDbSpec(seed=3, label_rule="user_mean_order_amount", n_users=40, n_products=8, missing_rate=0.05)
    return generate_synthetic_db(spec)


def small_perceiver():
    return SMALL_PERCEIVER


def small_fone():
    return FoneConfig()
