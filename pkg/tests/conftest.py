import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# JIT compilation of the numba backend can take seconds on first call; keep
# hypothesis from flagging warmup as a slow test.
settings.register_profile(
    "sparsesum",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("sparsesum")


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    from sparsesum import kernels

    Y = np.arange(12.0).reshape(3, 4)
    kernels.thresholded_sums(Y, np.array([1.0, 9.0]))
    kernels.lepski_select(Y, np.full(4, 100.0), 2)
    kernels.lower_half_mean(Y, 2)
