import numpy as np
import pytest

from mdmest import (
    InitialCondition,
    LtvModel,
    NoiseStructure,
)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def scalar_lti_model():
    """1-D time-invariant model with an input."""
    one = np.array([[1.0]])
    return LtvModel.create(n_x=1, n_w=1, n_v=1, tau=50,
                           F=np.array([[0.9]]), G=one, E=one, H=one, D=one)


@pytest.fixture
def scalar_structure():
    one = np.array([[1.0]])
    zero = np.array([[0.0]])
    return NoiseStructure.from_pairs([(one, zero), (zero, one)])


def make_ge_equal_model(tau=60):
    """Model with G == E, so unknown-input mode loses all Q information."""
    f = np.array([[0.9, 0.1], [0.0, 0.8]])
    ge = np.array([[1.0], [0.5]])
    return LtvModel.create(n_x=2, n_w=1, n_v=2, tau=tau,
                           F=f, G=ge, E=ge, H=np.eye(2), D=np.eye(2))


def make_ge_equal_structure():
    zero2 = np.zeros((2, 2))
    return NoiseStructure.from_pairs([
        (np.array([[1.0]]), zero2),
        (np.array([[0.0]]), np.eye(2)),
    ])


@pytest.fixture
def ge_equal_model():
    return make_ge_equal_model()


@pytest.fixture
def ge_equal_structure():
    return make_ge_equal_structure()


@pytest.fixture
def default_init():
    return InitialCondition.default(1)
