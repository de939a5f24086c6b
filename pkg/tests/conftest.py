import numpy as np
import pytest

from thermal_enclosure import Ball, ConductivitySpec, Discretization, FluxSpec, InclusionScene, build_grid, \
    solve_forward

_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance():
    """Record one summary line per acceptance criterion; printed at the end of the run."""
    def record(number, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2}: {detail}"
        _ACCEPTANCE.append((number, line))
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def disk_scene():
    return InclusionScene(Ball([0.0, 0.0], 1.0), Ball([0.2, 0.0], 0.3))


@pytest.fixture(scope="session")
def a2():
    return ConductivitySpec.scalar(2.0, 2, "A2")


@pytest.fixture(scope="session")
def a1():
    return ConductivitySpec.scalar(0.5, 2, "A1")


@pytest.fixture(scope="session")
def bench(disk_scene, a2):
    """Benchmark grid (n=128, N_t=256), discretizations and the constant-flux forward solve."""
    grid = build_grid(disk_scene.domain, 128, 1.0, 256)
    disc = Discretization(grid, a2, disk_scene)
    background = Discretization(grid, None, disk_scene, fractions=disc.fractions)
    trace, state = solve_forward(grid, disc, FluxSpec.constant(1.0), transform_taus=[25.0])
    return {"grid": grid, "disc": disc, "background": background, "trace": trace, "state": state,
            "scene": disk_scene, "cond": a2}


@pytest.fixture
def rng():
    return np.random.default_rng(0)
