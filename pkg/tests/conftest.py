import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sitadda.image import Domain, Image


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def raw_image(values) -> Image:
    return Image(np.asarray(values, dtype=np.float64), Domain.RAW_0_255)


def norm_image(values) -> Image:
    return Image(np.asarray(values, dtype=np.float64), Domain.NORM_NEG1_1)


def random_raw(rng, h=64, w=64) -> Image:
    return raw_image(rng.uniform(0, 255, size=(h, w)))
