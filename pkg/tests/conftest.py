import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from crowdseg.masks import PixelMask


def random_mask(rng, height, width, density=0.5, nonempty=False) -> PixelMask:
    while True:
        m = PixelMask(rng.random((height, width)) < density)
        if not nonempty or not m.is_empty():
            return m


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
