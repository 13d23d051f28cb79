import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import TEST_SPECS  # noqa: E402
from armchair.potential import parse_potential  # noqa: E402


@pytest.fixture(scope="session")
def potentials():
    return {name: parse_potential(text) for name, text in TEST_SPECS.items()}


@pytest.fixture(params=sorted(TEST_SPECS))
def any_q(request):
    return request.param, parse_potential(TEST_SPECS[request.param])


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None) if mod else None
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
