from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).parent / "data"


def data_image(name: str) -> Path:
    return DATA / f"{name}.pgm"


@pytest.fixture(scope="session")
def lena():
    from mixdenoise.image_core import load_pgm

    path = data_image("lena")
    if not path.exists():
        pytest.skip("lena.pgm not available")
    return load_pgm(path)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
