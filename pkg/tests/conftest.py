import numpy as np
import pytest

from hexsr import optics as O
from hexsr.sampling import hex_pitch_from_rect


@pytest.fixture(scope="session")
def channels():
    return O.default_channels()


@pytest.fixture(scope="session")
def det_rect():
    return O.DetectorShape.rectangle(4.0)


@pytest.fixture(scope="session")
def det_hex():
    t1 = hex_pitch_from_rect(4.0)
    return O.DetectorShape.hexagon(t1, np.sqrt(3.0) * t1)


@pytest.fixture(scope="session")
def green_otf_rect(channels, det_rect):
    ch = channels["green"]
    return O.combined_otf(ch, det_rect, O.frequency_grid(ch.cutoff_frequency, 65))


@pytest.fixture(scope="session")
def psf_green_rect(green_otf_rect):
    # 33-tap kernel with a loosened tail gate: fast enough for unit tests,
    # the acceptance suite exercises the strict default
    return O.impulse_invariant_psf(green_otf_rect, 1.0, 33, tail_tol=1e-4)
