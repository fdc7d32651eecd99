import numpy as np
import pytest

from fdisac.arrays import SPEED_OF_LIGHT, ArrayGeometry
from fdisac.config import ScenarioConfig


CARRIER = 28e9
WAVELENGTH = SPEED_OF_LIGHT / CARRIER


def ula(n, offset=0.0):
    return ArrayGeometry(n, WAVELENGTH / 2, WAVELENGTH, offset)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def small_config(**changes) -> ScenarioConfig:
    """A scaled-down scenario that runs in well under a second per subframe."""
    base = dict(
        n_tx=32, n_rx=32, n_rf_tx=4, n_rf_rx=4, n_tx_sub=8, n_rx_sub=8,
        n_users=2, n_user_antennas=1, n_targets=2, n_subcarriers=64, n_symbols=2,
        n_subframes=3, n_taps=4, grid_step_deg=0.05,
    )
    base.update(changes)
    return ScenarioConfig(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES: list[str] = []


def report(criterion: str, passed: bool, detail: str) -> None:
    """Record and print one acceptance verdict line."""
    line = f"{'PASS' if passed else 'FAIL'} {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
