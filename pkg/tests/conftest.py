import numpy as np
import pytest

from votebound import Dataset, LabelSpace


def multiclass_dataset(targets, q, weights=None):
    targets = np.asarray(targets)
    return Dataset(LabelSpace.multiclass(q), np.zeros((len(targets), 1)), targets, weights)


def multilabel_dataset(targets, weights=None):
    targets = np.atleast_2d(np.asarray(targets))
    return Dataset(LabelSpace.multilabel(targets.shape[1]), np.zeros((len(targets), 1)), targets, weights)


def binary_dataset(targets, weights=None):
    targets = np.asarray(targets)
    return Dataset(LabelSpace.binary(), np.zeros((len(targets), 1)), targets, weights)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "CRITERIA", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
