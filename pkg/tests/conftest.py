import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spikelth.kernels import available_backends  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(params=available_backends())
def backend(request):
    from spikelth.kernels import get_backend

    return get_backend(request.param)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
