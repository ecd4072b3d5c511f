import numpy as np
import pytest

from gltiling import _kernels_py


def compiled_kernels():
    try:
        from gltiling import _kernels
    except ImportError:
        return None
    return _kernels


BACKENDS = [pytest.param(_kernels_py, id="python"),
            pytest.param(compiled_kernels(), id="cython",
                         marks=pytest.mark.skipif(compiled_kernels() is None, reason="extension not built"))]


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


# one summary line per acceptance criterion, shown after the run
CRITERIA: dict = {}


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for key in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[key])
