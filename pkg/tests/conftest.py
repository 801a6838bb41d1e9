import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nefro import coexsim as cs
from nefro import modelsel as ms

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def seed0_datasets():
    return {c.scenario_id: cs.simulate_scenario(c) for c in cs.all_scenarios(0)}


@pytest.fixture(scope="session")
def seed0_reports(seed0_datasets):
    return {sid: ms.select_model(d, seed=0) for sid, d in seed0_datasets.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
