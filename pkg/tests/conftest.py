import numpy as np
import pytest

from rnagp import FitOptions, KernelKind, RnaEmulator, get_problem, make_dataset


@pytest.fixture(scope="session")
def perd_dataset():
    return make_dataset(get_problem("perdikaris"), (13, 8), seed=0)


@pytest.fixture(scope="session")
def perd_emulator(perd_dataset):
    return RnaEmulator.fit(perd_dataset, KernelKind.SQEXP,
                           FitOptions(restarts=3))


@pytest.fixture(scope="session")
def branin_dataset():
    return make_dataset(get_problem("branin"), (20, 15, 10), seed=0)


@pytest.fixture(scope="session")
def branin_emulator(branin_dataset):
    return RnaEmulator.fit(branin_dataset, KernelKind.SQEXP,
                           FitOptions(restarts=3))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
