import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from audioeval.metrics import _align_py  # noqa: E402
from audioeval.mocklalm import MockBehavior, serve  # noqa: E402

try:
    from audioeval.metrics import _align_ext
except ImportError:  # extension not built
    _align_ext = None

KERNELS = [pytest.param(_align_py, id="python")]
if _align_ext is not None:
    KERNELS.append(pytest.param(_align_ext, id="cython"))


@pytest.fixture(params=KERNELS)
def kernel(request):
    """Each alignment kernel that is available in this build."""
    return request.param


@pytest.fixture
def mock_server():
    """Factory starting mock endpoints that are closed at teardown."""
    servers = []

    def start(**behavior):
        srv = serve(MockBehavior(**behavior))
        servers.append(srv)
        return srv

    yield start
    for srv in servers:
        srv.close()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in results:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
