"""Per-example margins of a weighted majority vote.

Every function takes the vote profiles returned by :func:`votebound.core.aggregate`
and the dataset they were computed on, and returns one float per example.
"""

import itertools

import numpy as np

from .core import BINARY, MULTICLASS, MULTILABEL
from .errors import ConfigError

MULTILABEL_QMAX = 20
_ENUMERATION_QMAX = 10


def _require(dataset, kind, profiles):
    if dataset.kind != kind:
        raise ConfigError(f"expected a {kind} dataset, got {dataset.kind}")
    profiles = np.asarray(profiles, dtype=float)
    if kind == BINARY:
        expected = (dataset.n_examples,)
    else:
        expected = (dataset.n_examples, dataset.n_classes)
    if profiles.shape != expected:
        raise ConfigError(f"vote profiles have shape {profiles.shape}, expected {expected}")
    return profiles


def _true_class_mass(profiles, dataset):
    rows = np.arange(dataset.n_examples)
    return profiles[rows, dataset.targets - 1]


def binary_margin(profiles, dataset):
    """``y * E[h(x)]``."""
    profiles = _require(dataset, BINARY, profiles)
    return dataset.targets * profiles


def multiclass_margin(profiles, dataset):
    """Vote mass of the true class minus the largest competing mass."""
    profiles = _require(dataset, MULTICLASS, profiles)
    rows = np.arange(dataset.n_examples)
    cols = dataset.targets - 1
    others = profiles.copy()
    others[rows, cols] = -np.inf
    return profiles[rows, cols] - others.max(axis=1)


def strength_margin(profiles, dataset, c):
    """Vote mass of the true class minus the vote mass of the fixed class ``c``."""
    profiles = _require(dataset, MULTICLASS, profiles)
    if int(c) != c or not 1 <= c <= dataset.n_classes:
        raise ConfigError(f"class must lie in 1..{dataset.n_classes}, got {c!r}")
    return _true_class_mass(profiles, dataset) - profiles[:, int(c) - 1]


def omega_margin(profiles, dataset, omega):
    """Vote mass of the true class minus the threshold ``1/omega`` (``omega >= 1``)."""
    profiles = _require(dataset, MULTICLASS, profiles)
    omega = float(omega)
    if not omega >= 1.0:
        raise ConfigError(f"omega must be >= 1, got {omega!r}")
    return _true_class_mass(profiles, dataset) - 1.0 / omega


def all_label_vectors(q):
    """Every vector of ``{0,1}^q`` as rows, in lexicographic order."""
    return np.array(list(itertools.product((0, 1), repeat=q)), dtype=np.int64)


def _multilabel_margin_enumerated(centered, targets):
    q = targets.shape[1]
    candidates = all_label_vectors(q)
    scores = centered @ (candidates - 0.5).T
    # lexicographic order means the row index of a label vector is its binary value
    target_index = targets @ (1 << np.arange(q - 1, -1, -1))
    rows = np.arange(targets.shape[0])
    own = np.einsum("ij,ij->i", centered, targets - 0.5)
    scores[rows, target_index] = -np.inf
    return own - scores.max(axis=1)


def _multilabel_margin_closed_form(centered, targets):
    # v.(y - c) over c != y: if y already agrees in sign with v everywhere, the
    # runner-up flips the cheapest bit; otherwise the best competitor is the
    # coordinatewise optimum and the gap is the mass of the disagreeing bits.
    magnitude = np.abs(centered)
    wrong = np.where(targets == 1, centered < 0, centered > 0)
    return np.where(wrong.any(axis=1), -(magnitude * wrong).sum(axis=1), magnitude.min(axis=1))


def multilabel_margin(profiles, dataset, method="auto"):
    """Score of the true label vector minus the best score of any other vector.

    Scores are ``(conf - 1/2) . (c - 1/2)``. ``method`` is ``"enumerate"``
    (explicit max over all ``2^Q - 1`` competitors), ``"closed-form"`` or
    ``"auto"`` (enumeration up to Q=10).
    """
    profiles = _require(dataset, MULTILABEL, profiles)
    q = dataset.n_classes
    if q > MULTILABEL_QMAX:
        raise ConfigError(f"multi-label margin is limited to Q <= {MULTILABEL_QMAX}, got Q={q}")
    centered = profiles - 0.5
    if method == "auto":
        method = "enumerate" if q <= _ENUMERATION_QMAX else "closed-form"
    if method == "enumerate":
        return _multilabel_margin_enumerated(centered, dataset.targets)
    if method == "closed-form":
        return _multilabel_margin_closed_form(centered, dataset.targets)
    raise ConfigError(f"unknown method {method!r}")


def two_margin(profiles, dataset, i=1):
    """Signed test of the confidence vector against the hyperplane through the
    half-flipped label vectors, ``(conf - y_{i->1/2}) . (y - 1/2)``.

    The value does not depend on ``i`` (1-based); it equals
    ``1/4 - (1/2) * sum_j |conf_j - y_j|``.
    """
    profiles = _require(dataset, MULTILABEL, profiles)
    q = dataset.n_classes
    if int(i) != i or not 1 <= i <= q:
        raise ConfigError(f"coordinate must lie in 1..{q}, got {i!r}")
    targets = dataset.targets.astype(float)
    half_flipped = targets.copy()
    half_flipped[:, int(i) - 1] = 0.5
    normal = targets - 0.5
    return np.einsum("ij,ij->i", (profiles - 0.5) - (half_flipped - 0.5), normal)
