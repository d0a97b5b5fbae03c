"""Pytest fixtures for cfma tests."""

import numpy as np
import pytest

from cfma.channel import db_to_linear, random_channel, sum_capacity
from cfma.models import CapacityResult, ChannelPair, SweepConfig, Uniform


@pytest.fixture
def table1_channel() -> ChannelPair:
    """The fixed 2×2 channel pair of the SCS/PCS comparison table."""
    return ChannelPair(
        h1=np.array([[1.3, 1.2], [1.3, 1.8]]),
        h2=np.array([[1.4, 1.2], [1.2, 1.9]]),
    )


@pytest.fixture
def table1_capacity_0db(table1_channel: ChannelPair) -> CapacityResult:
    """Sum capacity of the table channel at 0 dB."""
    return sum_capacity(table1_channel, db_to_linear(0.0))


@pytest.fixture
def simo_channel() -> ChannelPair:
    """Two single-antenna users seen by two receive antennas."""
    return ChannelPair(h1=np.array([[1.2], [1.5]]), h2=np.array([[1.7], [1.1]]))


@pytest.fixture
def random_mimo() -> ChannelPair:
    """A seeded generic 2×2 realization."""
    return random_channel(2, 2, Uniform(0.0, 1.0), seed=7, index=3)


@pytest.fixture
def sample_sweep_dict() -> dict:
    """Raw sweep configuration (before validation)."""
    return {
        "scenario": "simo",
        "r": 2,
        "t": 1,
        "dist": {"kind": "uniform", "lo": 1.0, "hi": 2.0},
        "power_grid_db": [0.0, 4.0, 8.0],
        "realizations": 6,
        "seed": 11,
        "schemes": ["scs"],
    }


@pytest.fixture
def sample_sweep(sample_sweep_dict: dict) -> SweepConfig:
    """Validated small SIMO sweep."""
    from cfma.validator import validate_sweep_config

    return validate_sweep_config(sample_sweep_dict)
