import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hubsolve.instance import cab10_text, parse_cab  # noqa: E402


@pytest.fixture(scope="session")
def cab10():
    """The bundled 10-node table with alpha 0.8, MA, no setup costs."""
    return parse_cab(cab10_text(), 10, 0.8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


# Worked example on the 10-node table (0-based labels; the published labels are 1-based).
EX1_S = (2, 4, 5, 6, 7, 9)
EX1_ALLOC = [(i, 4) for i in (2, 5, 6, 7, 9)] + [(i, 3) for i in (0, 1, 8)]


@pytest.fixture(scope="session")
def ex1_s1():
    """Hubs 3 and 4 with edge (3, 4) and single allocations (mirrored distribution)."""
    from hubsolve.model import DesignSolution
    return DesignSolution.build(10, [3, 4], [(3, 4)], EX1_ALLOC)


@pytest.fixture(scope="session")
def ex1_s2():
    """Hubs 4 and 8, edge (4, 8); some nodes allocated to both hubs."""
    from hubsolve.model import DesignSolution
    only4, only8, both = (6, 9), (1, 3), (0, 2, 5, 7)
    acc = [(i, 4) for i in only4] + [(i, 8) for i in only8] + \
        [(i, k) for i in both for k in (4, 8)]
    return DesignSolution.build(10, [4, 8], [(4, 8)], acc)


def fixed_design_lp(m, s):
    """LP of ``m`` with every design column pinned to ``s``."""
    from hubsolve.model import lp_solve
    x = m.vi.pack(s, None)
    return lp_solve(m, {j: x[j] for j in range(m.vi.num_design)})


@pytest.fixture(scope="session")
def ex1_f1(cab10, ex1_s1):
    """Cheapest flow over the relaxed domain of s1 with no aggregated demand rows."""
    from hubsolve.model import build_model
    m = build_model(cab10, seed=False)
    out = fixed_design_lp(m, ex1_s1)
    return m.vi.unpack(out.x)[1], out.objective


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[num])
