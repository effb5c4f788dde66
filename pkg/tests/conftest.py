import numpy as np
import pytest

from njcm.model import ModelParams, PhasePoint
from njcm.quantum import QuantumSystem

# reference initial conditions (momenta rounded to six decimals)
ORBIT1 = PhasePoint(0.0, 2.261, 0.0, 3.423276)
ORBIT2 = PhasePoint(0.0, -3.577, 0.0, 5.221656)
ORBIT_E35 = PhasePoint(0.0, 1.4175, 0.0, 7.888904)
CIRCULAR = PhasePoint(0.0, 2.47675, 0.0, 3.563642)
C1 = PhasePoint(-4.0, 0.0, 0.0, 3.162278)
C2 = PhasePoint(1.57, -2.0, 0.0, 5.680465)
C3 = PhasePoint(3.0, 2.0, 0.0, 2.942413)

_criterion_lines: list[str] = []


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def params_rw():
    """Integrable rotating-wave limit G' = 0."""
    return ModelParams(Gprime=0.0)


@pytest.fixture(scope="session")
def system(params):
    return QuantumSystem.build(params, 120)


@pytest.fixture(scope="session")
def system_rw(params_rw):
    return QuantumSystem.build(params_rw, 120)


@pytest.fixture(scope="session")
def system_ref(params):
    return QuantumSystem.build(params, 140)


@pytest.fixture(scope="session")
def obs_orbit1(system):
    return system.observables(ORBIT1, 50.0, 0.01)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def criterion_report():
    """Collects one PASS/FAIL line per acceptance criterion."""

    def record(number, passed, detail):
        _criterion_lines.append(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.write_line(line)
