import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mcsched.network import NetworkInstance

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def make_instance(distances, groups=None, a=3.0, noise=0.1) -> NetworkInstance:
    distances = np.asarray(distances, dtype=float)
    if groups is None:
        n, m = distances.shape
        d = m // n
        groups = tuple(tuple(range(i * d, (i + 1) * d)) for i in range(n))
    return NetworkInstance(groups=groups, distances=distances,
                           path_loss_exponent=a, noise_power=noise)


@pytest.fixture
def conflict_instance() -> NetworkInstance:
    """Two sources with two destinations each.

    Source 0 sits next to source 1's second destination (global id 3), so
    that destination cannot decode while source 0 transmits.  Everything
    else tolerates concurrency at 90 mW.
    """
    return make_instance([
        [0.1, 0.1, 1.0, 0.06],
        [1.0, 1.0, 0.1, 0.2],
    ])
