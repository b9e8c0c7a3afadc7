import numpy as np
import pytest

from pcdm.dictionary import extract_signals, ksvd_train
from pcdm.mosaic import synthesize_scene, training_suite
from pcdm.patches import remove_mean


def _train(stacks, kind, atoms, channel=None):
    Y, _ = remove_mean(extract_signals(stacks, kind, 3000, seed=0, channel=channel))
    return ksvd_train(Y, atoms=atoms, sparsity=4, sweeps=3, lam=1e-4, seed=0, kind=kind)[0]


@pytest.fixture(scope="session")
def small_stacks():
    return [synthesize_scene(s) for s in training_suite(count=4, size=32, seed=3)]


@pytest.fixture(scope="session")
def small_dicts(small_stacks):
    """Quickly trained D_pol, D_rgb and 12 channel dictionaries (test-sized)."""
    return {
        "pol": _train(small_stacks, "pol", 64),
        "rgb": _train(small_stacks, "rgb", 96),
        "channels": [_train(small_stacks, "channel", 24, channel=c) for c in range(12)],
    }


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES
