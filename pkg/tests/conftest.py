import pytest

from qmapcodec.codec import prepare_image
from qmapcodec.synthetic import make_fixture


@pytest.fixture(scope="session")
def natural():
    return make_fixture("natural", 128, 128)


@pytest.fixture(scope="session")
def natural_prepared(natural):
    return prepare_image(natural)


ACCEPTANCE_LINES = []


@pytest.fixture()
def verdict(capsys):
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def check(number, ok, detail):
        line = "criterion %2d: %s  %s" % (number, "PASS" if ok else "FAIL", detail)
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
