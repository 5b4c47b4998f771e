import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mri_forge.imgcore import ImageBuf


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def random_image(rng, height, width, channels=3):
    return ImageBuf(rng.uniform(0.0, 255.0, size=(height, width, channels)))


def random_u8_image(rng, height, width, channels=3):
    return ImageBuf(
        rng.integers(0, 256, size=(height, width, channels)).astype(np.float64)
    )
