import numpy as np
import pytest

from bayesteach.models import fit_model, make_synthetic


@pytest.fixture(scope="session")
def blobs3():
    return make_synthetic(
        {"generator": "gaussian-blobs", "classes": 3, "dim": 2, "per_class": 8, "separation": 6.0},
        seed=1,
    )


@pytest.fixture(scope="session")
def blobs2():
    return make_synthetic(
        {"generator": "gaussian-blobs", "classes": 2, "dim": 4, "per_class": 20, "separation": 5.0},
        seed=2,
    )


@pytest.fixture(scope="session")
def grid_image():
    return make_synthetic(
        {"generator": "grid-image", "classes": 2, "side": 6, "motif_size": 2, "per_class": 30},
        seed=2,
    )


@pytest.fixture(scope="session")
def moons():
    return make_synthetic({"generator": "two-moons", "n": 200, "noise": 0.1}, seed=3)


@pytest.fixture(scope="session")
def plda3(blobs3):
    return fit_model("plda", blobs3, seed=0)


@pytest.fixture(scope="session")
def logistic2(blobs2):
    return fit_model("logistic", blobs2, seed=0)


@pytest.fixture(scope="session")
def logistic_grid(grid_image):
    return fit_model("logistic", grid_image, seed=0)


@pytest.fixture(scope="session")
def linear_fixture():
    data = make_synthetic(
        {"generator": "gaussian-blobs", "classes": 2, "dim": 3, "per_class": 25, "separation": 4.0},
        seed=5,
    )
    return data, fit_model("linear", data, seed=0)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
