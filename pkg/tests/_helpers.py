import pytest

from mmsar import _backend

needs_numba = pytest.mark.skipif(not _backend.HAS_NUMBA,
                                 reason="numba disabled (MMSAR_BACKEND=numpy) or missing")

BACKENDS = [pytest.param("numba", marks=needs_numba), "numpy"]
