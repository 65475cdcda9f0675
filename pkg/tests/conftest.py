import numpy as np
import pytest

from thermopix.envelope import EnvelopeFit
from thermopix.physics import ActuatorGeometry, AmbientState
from thermopix.thermal import reference_model


@pytest.fixture
def geom8():
    return ActuatorGeometry.from_mm(8, 6)


@pytest.fixture
def ambient():
    return AmbientState()


@pytest.fixture
def published():
    return EnvelopeFit.published()


@pytest.fixture
def ref_model():
    return reference_model()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
