import os

# Pin BLAS threading before numpy loads: the test box has few cores and the
# deterministic-reduction contract wants fixed-order sums anyway.
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import numpy as np
import pytest

from trisim import data as data_mod
from trisim import fixtures

MNIST_NAMES = (fixtures.TRAIN_IMAGES, fixtures.TRAIN_LABELS,
               fixtures.TEST_IMAGES, fixtures.TEST_LABELS)


def locate_real_mnist():
    """Directory with the official IDX files, if one is configured."""
    candidates = []
    env = os.environ.get("MNIST_DIR")
    if env:
        candidates.append(env)
    candidates.append(os.path.join(os.path.dirname(__file__), "..", "data", "mnist"))
    for cand in candidates:
        if not cand or not os.path.isdir(cand):
            continue
        try:
            for name in MNIST_NAMES:
                if not (os.path.exists(os.path.join(cand, name))
                        or os.path.exists(os.path.join(cand, name + ".gz"))):
                    raise FileNotFoundError(name)
            return os.path.abspath(cand)
        except FileNotFoundError:
            continue
    return None


@pytest.fixture(scope="session")
def desk_corpus(tmp_path_factory):
    """Desk-scale corpus directory: real MNIST when available, otherwise the
    rendered synthetic digits (6000 train / 1000 test, class balanced)."""
    real = locate_real_mnist()
    if real is not None:
        return {"dir": real, "real": True}
    path = tmp_path_factory.mktemp("digits")
    fixtures.write_idx_corpus(str(path), train_per_class=600,
                              test_per_class=100, seed=7)
    return {"dir": str(path), "real": False}


@pytest.fixture(scope="session")
def micro_corpus(tmp_path_factory):
    """A very small rendered corpus for CLI and smoke tests."""
    path = tmp_path_factory.mktemp("digits_micro")
    fixtures.write_idx_corpus(str(path), train_per_class=12, test_per_class=4,
                              seed=11)
    return str(path)


def find_file(dirpath, name):
    for cand in (name, name + ".gz"):
        p = os.path.join(dirpath, cand)
        if os.path.exists(p):
            return p
    raise FileNotFoundError(f"{name} not in {dirpath}")


@pytest.fixture(scope="session")
def desk_datasets(desk_corpus):
    d = desk_corpus["dir"]
    train = data_mod.load_idx(find_file(d, fixtures.TRAIN_IMAGES),
                              find_file(d, fixtures.TRAIN_LABELS), "train")
    test = data_mod.load_idx(find_file(d, fixtures.TEST_IMAGES),
                             find_file(d, fixtures.TEST_LABELS), "test")
    if desk_corpus["real"]:
        # trim the official 60000/10000 down to the desk-scale subset
        train = data_mod.select_subset(train, per_class=600, seed=7)
        test = data_mod.select_subset(test, per_class=100, seed=7)
    return train, test


@pytest.fixture(scope="session")
def tiny20(desk_datasets):
    """20 samples, 2 per class, for tiny-scale experiments."""
    train, _ = desk_datasets
    return data_mod.select_subset(train, per_class=2, seed=3)
