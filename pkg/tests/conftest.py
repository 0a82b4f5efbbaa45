import re

import numpy as np
import pytest

from confluence.family import coupled_family, euler_family
from confluence.stokes import stokes_for_family

T3_GRID = [0.4 * 2.0 ** -k for k in range(7)]

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE = {}


def record(key, ok, detail):
    ACCEPTANCE[key] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(re.match(r"\d+", k).group()), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"CRITERION {key}: {'PASS' if ok else 'FAIL'} | {detail}")


@pytest.fixture(scope="session")
def euler():
    return euler_family()


@pytest.fixture(scope="session")
def t2():
    return coupled_family(0.3)


@pytest.fixture(scope="session")
def t3():
    return coupled_family(0.3, 0.3)


@pytest.fixture(scope="session")
def typical():
    return coupled_family(0.3, 0.2)


@pytest.fixture(scope="session")
def t3_stokes(t3):
    return stokes_for_family(t3)


@pytest.fixture(scope="session")
def t3_sweep(t3, t3_stokes):
    """T3 on eps = 0.4 * 2^-k, k = 0..6, both base points; with its wall time."""
    import time

    from confluence.monodromy import sweep

    Z0 = t3_stokes.bases[0].at(-0.5 + 0j)
    t = time.perf_counter()
    pts = sweep(t3, T3_GRID, -0.5, 0.4, 0.4, reference=Z0, right=True)
    return pts, time.perf_counter() - t


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
