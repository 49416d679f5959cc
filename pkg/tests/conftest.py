import numpy as np
import pytest

import bstskit


@pytest.fixture(scope="session", autouse=True)
def warm_numba():
    """Trigger the jit compilation once so timed tests measure steady state."""
    model = bstskit.assemble([bstskit.LocalLevel(1.0)], sigma2_eps=1.0)
    y = np.array([1.0, 2.0, 3.0])
    filt = bstskit.kalman_filter(model, y)
    bstskit.kalman_smoother(model, filt)
    bstskit.simulate_states(model, y, rng=0)
