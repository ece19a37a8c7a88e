from __future__ import annotations

import pytest

from spinepop.core import Channel, Constant, LogisticDeath, ModelSpec, RateKernel


def single_type(channels, v=1, capacity=None):
    kernel = RateKernel(1, tuple(Channel(0, (k,), rate) for k, rate in channels), capacity)
    return ModelSpec.from_composition(("x",), kernel, (v,))


@pytest.fixture
def logistic_kernel():
    return RateKernel(1, (Channel(0, (2,), Constant(1.0)), Channel(0, (0,), LogisticDeath(0.5))))


@pytest.fixture
def pure_death():
    return single_type([(0, Constant(1.0))])


@pytest.fixture
def yule():
    return single_type([(2, Constant(1.0))])
