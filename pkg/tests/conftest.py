import os

import pytest
from hypothesis import HealthCheck, settings

from csbp_height.mechanism import BranchingMechanism, JumpMeasure

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def feller():
    return BranchingMechanism(0.0, 1.0, JumpMeasure.none())


@pytest.fixture
def atom_mech():
    return BranchingMechanism(0.0, 1.0, JumpMeasure.atomic([(1.0, 1.0)]))


@pytest.fixture
def stable_mech():
    return BranchingMechanism(0.0, 1.0, JumpMeasure.power_law(1.0, 1.5))


@pytest.fixture
def tempered_mech():
    return BranchingMechanism(0.0, 1.0, JumpMeasure.tempered(1.0, 1.5, 1.0))
