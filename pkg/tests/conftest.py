import warnings

import numpy as np
import pytest


@pytest.fixture(autouse=True)
def _quiet_optimizer_warnings():
    """The pipelines emit advisory warnings (lambda below a threshold hint,
    SLSQP bound clipping); tests assert on results, not on warning text."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
