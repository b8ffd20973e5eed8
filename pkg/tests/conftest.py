import os

# Allow several numba workers even on a single-core runner so the
# determinism tests exercise real thread splits. Must precede numba import.
os.environ.setdefault("NUMBA_NUM_THREADS", str(max(4, os.cpu_count() or 1)))

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from mmsar.mesh import box_mesh, cylinder_mesh, icosphere  # noqa: E402
from mmsar.radar import Waveform, make_planar_aperture  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def cube():
    return box_mesh()


@pytest.fixture(scope="session")
def fine_cube():
    return box_mesh(subdivisions=4)


@pytest.fixture(scope="session")
def sphere():
    return icosphere(0.05, 2, center=(0.0, 0.0, 0.0))


@pytest.fixture(scope="session")
def can():
    # can lying on its side, axis along y
    rot = np.array([[1.0, 0, 0], [0, 0, 1], [0, -1, 0]])
    return cylinder_mesh(0.033, 0.1, segments=32, rings=8).transformed(rotation=rot)


@pytest.fixture
def small_waveform():
    return Waveform(77e9, 4e9, 32)


@pytest.fixture
def small_aperture():
    return make_planar_aperture((0.0, 0.0, 0.3), 0.1, 0.1, 0.025)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        terminalreporter.write_line(results[key])
