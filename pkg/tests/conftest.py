import numpy as np
import pytest

from simofdma.config import load_config

# acceptance tests append (criterion, passed, detail) here; printed at the end of the run
ACCEPTANCE = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def desk():
    return load_config(profile="desk")


@pytest.fixture
def tiny(tmp_path):
    """A config small enough for end-to-end runs in a couple of seconds."""
    return load_config(profile="desk").with_overrides({
        "system.num_users": 2,
        "system.num_subcarriers": 4,
        "system.meta_cols": 2,
        "system.meta_rows": 3,
        "system.layers": 2,
        "system.num_scatterers": 10,
        "optimizer.ao_iterations": 4,
        "experiment.runs": 2,
        "experiment.nmse_kc": [2, 3, 4],
        "experiment.ber_kc": 3,
        "experiment.single_kc": 3,
        "experiment.ber_powers_dbm": [-40.0, -20.0, 0.0],
        "experiment.ber_symbols": 300,
        "experiment.out_dir": str(tmp_path / "out"),
    })


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
