import numpy as np
import pytest
from importlib import resources

from xairec.data import load_csv, standardize
from xairec.models import train_mlp

DIABETES_PATH = str(resources.files("xairec").joinpath("resources/diabetes.csv"))


@pytest.fixture(scope="session")
def diabetes_ds():
    return standardize(load_csv(DIABETES_PATH, "target", "regression"))


@pytest.fixture(scope="session")
def small_ds(diabetes_ds):
    return diabetes_ds.subset(range(60))


@pytest.fixture(scope="session")
def mlp_small(small_ds):
    return train_mlp(small_ds, hidden_width=16, max_epochs=30, seed=0)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
