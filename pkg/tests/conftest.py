from pathlib import Path

import pytest

from provlabel.analysis import analyze
from provlabel.io import load_grammar, load_view
from provlabel.model import default_view
from provlabel.run import read_log, replay

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def fig2():
    g, deps = load_grammar(FIXTURES / "fig2.json")
    an = analyze(g, deps)
    return g, deps, an


@pytest.fixture(scope="session")
def fig2_views(fig2):
    g, deps, _ = fig2
    return default_view(g, deps), load_view(FIXTURES / "fig2_view_u2.json", g)


@pytest.fixture(scope="session")
def fig2_run(fig2):
    g, _, an = fig2
    return replay(g, an.cycles, read_log(FIXTURES / "fig2_run.jsonl"))


# acceptance report ----------------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    n, title = mark.args
    detail = getattr(item, "criterion_detail", "")
    if rep.failed:
        msg = str(rep.longrepr.reprcrash.message) if hasattr(rep.longrepr, "reprcrash") else "failed"
        detail = msg.splitlines()[0][:160]
    _CRITERIA[n] = ("PASS" if rep.passed else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[n]
        line = f"criterion {n} {status}: {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
