import numpy as np
import pytest
from hypothesis import settings

from fracmfe.fractional import build_fractional
from fracmfe.graph import complete_graph, cycle_graph, path_graph, random_connected_graph, star_graph
from fracmfe.spectral import eigendecompose

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def named_graphs():
    return {
        "K2": complete_graph(2),
        "P3": path_graph(3),
        "C5": cycle_graph(5),
        "K5": complete_graph(5),
        "K14": star_graph(4),
    }


def random_graphs(count=20, seed=2024, n_max=12):
    rng = np.random.default_rng(seed)
    return [random_connected_graph(int(rng.integers(2, n_max + 1)), rng) for _ in range(count)]


def all_test_graphs():
    return list(named_graphs().values()) + random_graphs()


@pytest.fixture(scope="session")
def p3_half():
    return build_fractional(eigendecompose(path_graph(3)), 0.5)


@pytest.fixture(scope="session")
def k2_half():
    return build_fractional(eigendecompose(complete_graph(2)), 0.5)


# one PASS/FAIL line per acceptance criterion
_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    num, title = mark.args
    entry = _criteria.setdefault(num, {"title": title, "passed": True, "tests": 0})
    if rep.when == "call":
        entry["tests"] += 1
    if rep.failed:
        entry["passed"] = False


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        e = _criteria[num]
        verdict = "PASS" if e["passed"] and e["tests"] else "FAIL"
        terminalreporter.write_line(f"criterion {num}: {verdict}  {e['title']} ({e['tests']} checks)")
