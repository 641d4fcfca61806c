import itertools

import pytest

from mpmdl.model import (
    GeneratorConfig,
    PrecedenceGraph,
    fig4_instance,
    generate_instance,
    make_instance,
    make_line,
)

PAR2_EDGES = ((1, 2), (1, 3), (2, 4), (3, 4))

# the eight published Pareto vectors, in their published order
TABLE2 = [
    (40, 27, 3241),
    (39, 25, 3297),
    (36, 27, 3460),
    (37, 26, 3409),
    (38, 26, 3341),
    (41, 24, 3204),
    (34, 29, 3641),
    (35, 28, 3553),
]


def permutation_orders(n, edges):
    """Independent oracle: every permutation of 1..n that respects ``edges``."""
    out = []
    for perm in itertools.permutations(range(1, n + 1)):
        pos = {t: i for i, t in enumerate(perm)}
        if all(pos[a] < pos[b] for a, b in edges):
            out.append(perm)
    return out


@pytest.fixture
def fig4():
    return fig4_instance()


@pytest.fixture
def par2_graph():
    return PrecedenceGraph.from_edges(4, PAR2_EDGES)


@pytest.fixture
def two_side_instance():
    """fig4 on line 1 and a par2-shaped line on line 3; deterministic decoding."""
    from mpmdl.model import fig4_line

    line3 = make_line(3, [210, 160, 160, 300], PAR2_EDGES, energy=[1, 2, 2, 1], high_value=[2])
    return make_instance([fig4_line(1), line3])


@pytest.fixture
def mixed_instance():
    cfg = GeneratorConfig(tasks_per_line=(5, 4, 5), edge_density=0.35, time_range=(80, 400))
    return generate_instance(cfg, 0)


@pytest.fixture(scope="session")
def small_instance():
    return generate_instance(GeneratorConfig.preset("small"), 7)


# acceptance reporting: one line per criterion, printed even when output is captured

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        status = "PASS" if rep.passed else "FAIL"
        detail = getattr(item, "criterion_detail", "")
        _CRITERIA[number] = (title, status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status, detail = _CRITERIA[number]
        line = f"criterion {number:2d} [{status}] {title}"
        terminalreporter.write_line(f"{line} -- {detail}" if detail else line)
