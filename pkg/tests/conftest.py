import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_density(dim, rng, rank=None):
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the test fails if any check fails."""

    class Recorder:
        def __init__(self):
            self.notes = []
            self.ok = True

        def check(self, cond, note):
            self.notes.append(("ok " if cond else "BAD ") + note)
            self.ok = self.ok and bool(cond)

    rec = Recorder()
    yield rec
    number = request.node.get_closest_marker("criterion").args[0]
    line = f"criterion {number}: {'PASS' if rec.ok else 'FAIL'} | " + "; ".join(rec.notes)
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
