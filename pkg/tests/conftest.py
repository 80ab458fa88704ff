import numpy as np
import pytest
from skimage import color, data, util

# natural grayscale test images shipped with scikit-image
NATURAL = ["camera", "moon", "astronaut", "coffee", "chelsea", "brick", "grass", "gravel", "rocket"]


def natural_image(name: str) -> np.ndarray:
    im = getattr(data, name)()
    if im.ndim == 3:
        im = util.img_as_ubyte(color.rgb2gray(im[..., :3]))
    h, w = (s // 8 * 8 for s in im.shape)
    return np.ascontiguousarray(im[:h, :w])


@pytest.fixture(scope="session")
def images():
    return {name: natural_image(name) for name in NATURAL}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def key():
    return bytes(range(16))
