import pytest

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE = []

from bicdyn.spectral import CavityModel, ReservoirModel


def scenario(detuning, eta, xi00=0.0):
    """Model and cavity in internal units (xi0 = 1)."""
    model = ReservoirModel(eta=eta, xi00=xi00)
    return model, CavityModel.from_detuning(detuning, model)


@pytest.fixture
def make():
    return scenario


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda l: int(l.split()[1])):
            terminalreporter.write_line(line)
