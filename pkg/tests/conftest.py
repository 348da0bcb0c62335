import numpy as np
import pytest

from altp.model import ImageBuffer

SQUARE = (100, 180, 60)  # top, left, side in pixels on a 336x336 canvas


def noisy_square_image(seed, size=336, square=SQUARE, background=0.5):
    """Flat gray canvas with one uniform-noise square."""
    rng = np.random.default_rng(seed)
    data = np.full((size, size, 3), background)
    top, left, side = square
    data[top : top + side, left : left + side] = rng.random((side, side, 3))
    return ImageBuffer(data)


def square_tokens(grid, square=SQUARE):
    """Token indices whose patch overlaps the square."""
    top, left, side = square
    rows = range(top // grid.patch_height, (top + side - 1) // grid.patch_height + 1)
    cols = range(left // grid.patch_width, (left + side - 1) // grid.patch_width + 1)
    return {r * grid.grid_cols + c for r in rows for c in cols}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "REPORT", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
