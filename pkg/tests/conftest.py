import numpy as np
import pytest

from betasphere import _backend


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def _available_backends():
    names = ["python"]
    try:
        _backend.get("cython")
        names.append("cython")
    except ImportError:
        pass
    return names


BACKENDS = _available_backends()


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def random_unit(n, rng):
    g = rng.standard_normal((n, 3))
    return g / np.linalg.norm(g, axis=1, keepdims=True)
