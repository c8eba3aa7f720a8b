import pytest

import hierbandit.cli as cli
import hierbandit.engine as engine
import hierbandit.experiments as experiments
from _helpers import ACCEPTANCE_LINES, TRACES_CHECKED, assert_conserved


@pytest.fixture(autouse=True, scope="session")
def _check_every_run():
    """Wrap the engine so every simulated trace in the suite is checked."""
    original = engine.run

    def checked(*args, **kwargs):
        trace = original(*args, **kwargs)
        assert_conserved(trace)
        TRACES_CHECKED["count"] += 1
        return trace

    mp = pytest.MonkeyPatch()
    mp.setattr(engine, "run", checked)
    mp.setattr(experiments, "run", checked)
    mp.setattr(cli, "run", checked)
    yield
    mp.undo()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
        terminalreporter.write_line(f"traces checked for conservation: {TRACES_CHECKED['count']}")
