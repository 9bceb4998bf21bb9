"""Datasets, voters, posteriors and the weighted majority vote.

A :class:`Dataset` is a finite weighted sample that plays the role of the data
distribution: every probability and expectation computed by the package is an
exact finite sum over its example weights.

Class labels are 1-based (``1..Q``) for multiclass problems, ``-1``/``+1`` for
binary problems and 0/1 bit vectors of length ``Q`` for multi-label problems.
Vote profiles are plain numpy arrays: shape ``(m,)`` for binary, ``(m, Q)``
otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import ConfigError

BINARY = "binary"
MULTICLASS = "multiclass"
MULTILABEL = "multilabel"
LABEL_KINDS = (BINARY, MULTICLASS, MULTILABEL)

SIMPLEX_TOL = 1e-12


def _frozen(array):
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class LabelSpace:
    kind: str
    n_classes: int = 2

    def __post_init__(self):
        if self.kind not in LABEL_KINDS:
            raise ConfigError(f"unknown label kind {self.kind!r}; expected one of {LABEL_KINDS}")
        if int(self.n_classes) != self.n_classes:
            raise ConfigError(f"class count must be an integer, got {self.n_classes!r}")
        object.__setattr__(self, "n_classes", int(self.n_classes))
        if self.kind == BINARY and self.n_classes != 2:
            raise ConfigError("binary label space has exactly two labels (-1, +1)")
        if self.n_classes < 2:
            raise ConfigError(f"need at least 2 classes, got {self.n_classes}")

    @classmethod
    def binary(cls):
        return cls(BINARY, 2)

    @classmethod
    def multiclass(cls, n_classes):
        return cls(MULTICLASS, n_classes)

    @classmethod
    def multilabel(cls, n_classes):
        return cls(MULTILABEL, n_classes)

    def check_target(self, target):
        """Return ``target`` in canonical form, or raise ConfigError."""
        if self.kind == BINARY:
            if target not in (-1, 1):
                raise ConfigError(f"binary target must be -1 or +1, got {target!r}")
            return int(target)
        if self.kind == MULTICLASS:
            if int(target) != target or not 1 <= target <= self.n_classes:
                raise ConfigError(f"class index must lie in 1..{self.n_classes}, got {target!r}")
            return int(target)
        bits = tuple(int(b) for b in target)
        if len(bits) != self.n_classes or any(b not in (0, 1) for b in bits):
            raise ConfigError(f"multi-label target must be a 0/1 vector of length {self.n_classes}, got {target!r}")
        return bits


@dataclass(frozen=True)
class Example:
    features: tuple
    target: Union[int, tuple]
    weight: float


@dataclass(frozen=True, eq=False)
class Dataset:
    """Finite weighted sample; weights must form a probability vector.

    ``targets`` has shape ``(m,)`` (binary, multiclass) or ``(m, Q)`` (multilabel).
    """

    label_space: LabelSpace
    features: np.ndarray
    targets: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        features = np.array(self.features, dtype=float)
        if features.ndim == 1:
            features = features.reshape(-1, 1)
        if features.ndim != 2:
            raise ConfigError("features must be a 2-D array (examples x features)")
        m = features.shape[0]
        if m == 0:
            raise ConfigError("dataset must contain at least one example")
        if features.shape[1] == 0:
            raise ConfigError("feature dimension must be positive")

        space = self.label_space
        if space.kind == MULTILABEL:
            targets = np.array(self.targets, dtype=np.int64)
            if targets.shape != (m, space.n_classes):
                raise ConfigError(f"multi-label targets must have shape ({m}, {space.n_classes}), got {targets.shape}")
            if not np.isin(targets, (0, 1)).all():
                raise ConfigError("multi-label targets must be 0/1")
        else:
            targets = np.array(self.targets, dtype=np.int64).reshape(-1)
            if targets.shape != (m,):
                raise ConfigError(f"expected {m} targets, got {targets.shape[0]}")
            if space.kind == BINARY:
                if not np.isin(targets, (-1, 1)).all():
                    raise ConfigError("binary targets must be -1 or +1")
            elif targets.min() < 1 or targets.max() > space.n_classes:
                raise ConfigError(f"class indices must lie in 1..{space.n_classes}")

        if self.weights is None:
            weights = np.full(m, 1.0 / m)
        else:
            weights = np.array(self.weights, dtype=float).reshape(-1)
            if weights.shape != (m,):
                raise ConfigError(f"expected {m} weights, got {weights.shape[0]}")
            if (weights < 0).any() or not np.isfinite(weights).all():
                raise ConfigError("example weights must be finite and nonnegative")
            total = math.fsum(weights)
            if abs(total - 1.0) > SIMPLEX_TOL:
                raise ConfigError(f"example weights sum to {total!r}, not 1")

        object.__setattr__(self, "features", _frozen(features))
        object.__setattr__(self, "targets", _frozen(targets))
        object.__setattr__(self, "weights", _frozen(weights))

    @classmethod
    def from_examples(cls, label_space, examples: Sequence[Example]):
        if not examples:
            raise ConfigError("dataset must contain at least one example")
        dims = {len(e.features) for e in examples}
        if len(dims) != 1:
            raise ConfigError(f"feature vectors have inconsistent lengths {sorted(dims)}")
        return cls(
            label_space,
            [e.features for e in examples],
            [label_space.check_target(e.target) for e in examples],
            [e.weight for e in examples],
        )

    @property
    def n_examples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def n_classes(self):
        return self.label_space.n_classes

    @property
    def kind(self):
        return self.label_space.kind

    @property
    def examples(self):
        if self.kind == MULTILABEL:
            targets = [tuple(int(b) for b in row) for row in self.targets]
        else:
            targets = [int(t) for t in self.targets]
        return [
            Example(tuple(float(v) for v in x), t, float(w))
            for x, t, w in zip(self.features, targets, self.weights)
        ]

    def expectation(self, values):
        """Weighted mean of per-example ``values`` (correctly rounded sum)."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_examples,):
            raise ConfigError(f"expected {self.n_examples} per-example values, got shape {values.shape}")
        return math.fsum(self.weights * values)

    def probability(self, mask):
        """Probability mass of the examples selected by a boolean ``mask``."""
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (self.n_examples,):
            raise ConfigError(f"expected {self.n_examples} per-example flags, got shape {mask.shape}")
        return math.fsum(self.weights[mask])


# -- voters -------------------------------------------------------------------


def _check_output(label_space, value, real_valued=False):
    if real_valued:
        if label_space.kind != BINARY:
            raise ConfigError("real-valued voters are only supported for binary label spaces")
        value = float(value)
        if not -1.0 <= value <= 1.0:
            raise ConfigError(f"real-valued prediction must lie in [-1, 1], got {value!r}")
        return value
    return label_space.check_target(value)


@dataclass(frozen=True, eq=False)
class StumpVoter:
    """Predicts ``left`` when ``x[feature_index] <= threshold``, else ``right``."""

    feature_index: int
    threshold: float
    left: Union[int, tuple]
    right: Union[int, tuple]
    kind: str = field(default="stump", init=False)

    def validate(self, label_space, dataset=None):
        object.__setattr__(self, "left", _check_output(label_space, self.left))
        object.__setattr__(self, "right", _check_output(label_space, self.right))
        if self.feature_index < 0:
            raise ConfigError(f"stump feature index must be nonnegative, got {self.feature_index}")
        if dataset is not None and self.feature_index >= dataset.n_features:
            raise ConfigError(
                f"stump uses feature {self.feature_index} but dataset has {dataset.n_features} features"
            )

    def predict(self, dataset):
        self.validate(dataset.label_space, dataset)
        goes_left = dataset.features[:, self.feature_index] <= self.threshold
        if dataset.kind == MULTILABEL:
            return np.where(goes_left[:, None], np.array(self.left), np.array(self.right))
        return np.where(goes_left, self.left, self.right)


@dataclass(frozen=True, eq=False)
class TableVoter:
    """Voter given by one prediction per dataset example."""

    predictions: np.ndarray
    kind: str = field(default="table", init=False)

    def __post_init__(self):
        object.__setattr__(self, "predictions", _frozen(np.array(self.predictions, dtype=np.int64)))

    def validate(self, label_space, dataset=None):
        preds = self.predictions
        if label_space.kind == MULTILABEL:
            if preds.ndim != 2 or preds.shape[1] != label_space.n_classes or not np.isin(preds, (0, 1)).all():
                raise ConfigError(f"multi-label table voter needs 0/1 rows of length {label_space.n_classes}")
        elif preds.ndim != 1:
            raise ConfigError("table voter predictions must be one value per example")
        elif label_space.kind == BINARY and not np.isin(preds, (-1, 1)).all():
            raise ConfigError("binary table voter predictions must be -1 or +1")
        elif label_space.kind == MULTICLASS and (preds.min() < 1 or preds.max() > label_space.n_classes):
            raise ConfigError(f"table voter predictions must lie in 1..{label_space.n_classes}")
        if dataset is not None and preds.shape[0] != dataset.n_examples:
            raise ConfigError(
                f"table voter has {preds.shape[0]} predictions but dataset has {dataset.n_examples} examples"
            )

    def predict(self, dataset):
        self.validate(dataset.label_space, dataset)
        return self.predictions


@dataclass(frozen=True, eq=False)
class RealValuedTableVoter:
    """Binary voter with a confidence in ``[-1, 1]`` per dataset example."""

    values: np.ndarray
    kind: str = field(default="realvalued-table", init=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(np.array(self.values, dtype=float).reshape(-1)))

    def validate(self, label_space, dataset=None):
        if label_space.kind != BINARY:
            raise ConfigError("real-valued voters are only supported for binary label spaces")
        if not np.isfinite(self.values).all() or np.abs(self.values).max(initial=0.0) > 1.0:
            raise ConfigError("real-valued predictions must lie in [-1, 1]")
        if dataset is not None and self.values.shape[0] != dataset.n_examples:
            raise ConfigError(
                f"table voter has {self.values.shape[0]} predictions but dataset has {dataset.n_examples} examples"
            )

    def predict(self, dataset):
        self.validate(dataset.label_space, dataset)
        return self.values


Voter = Union[StumpVoter, TableVoter, RealValuedTableVoter]


@dataclass(frozen=True, eq=False)
class Posterior:
    weights: np.ndarray

    def __post_init__(self):
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if weights.size == 0:
            raise ConfigError("posterior needs at least one voter")
        if not np.isfinite(weights).all() or (weights < 0).any():
            raise ConfigError("posterior weights must be finite and nonnegative")
        total = math.fsum(weights)
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise ConfigError(f"posterior weights sum to {total!r}, not 1")
        object.__setattr__(self, "weights", _frozen(weights))

    @classmethod
    def uniform(cls, n_voters):
        return cls(np.full(n_voters, 1.0 / n_voters))

    def __len__(self):
        return self.weights.size


@dataclass(frozen=True, eq=False)
class Ensemble:
    label_space: LabelSpace
    voters: tuple
    posterior: Posterior = None

    def __post_init__(self):
        voters = tuple(self.voters)
        if not voters:
            raise ConfigError("ensemble needs at least one voter")
        for voter in voters:
            voter.validate(self.label_space)
        posterior = self.posterior if self.posterior is not None else Posterior.uniform(len(voters))
        if not isinstance(posterior, Posterior):
            posterior = Posterior(posterior)
        if len(posterior) != len(voters):
            raise ConfigError(f"posterior has {len(posterior)} weights for {len(voters)} voters")
        object.__setattr__(self, "voters", voters)
        object.__setattr__(self, "posterior", posterior)

    def with_posterior(self, posterior):
        return Ensemble(self.label_space, self.voters, posterior)


# -- majority vote ------------------------------------------------------------


def prediction_matrix(dataset, voters):
    """Stack every voter's predictions; column ``j`` belongs to voter ``j``."""
    return np.stack([v.predict(dataset) for v in voters], axis=1)


def aggregate(dataset, voters, posterior):
    """Posterior-weighted vote profile of every example.

    Multiclass: ``g[i, c-1]`` is the posterior mass of voters predicting ``c``.
    Multi-label: the posterior mean of the voters' bit vectors.
    Binary: the posterior mean of the voters' outputs.
    """
    if isinstance(posterior, Posterior):
        rho = posterior.weights
    else:
        rho = Posterior(posterior).weights
    voters = list(voters)
    if rho.size != len(voters):
        raise ConfigError(f"posterior has {rho.size} weights for {len(voters)} voters")
    space = dataset.label_space
    m, q = dataset.n_examples, space.n_classes

    if space.kind == BINARY:
        profile = np.zeros(m)
    else:
        profile = np.zeros((m, q))
    classes = np.arange(1, q + 1)
    # accumulate voter by voter so the summation order is fixed
    for weight, voter in zip(rho, voters):
        if space.kind != BINARY and isinstance(voter, RealValuedTableVoter):
            raise ConfigError(f"real-valued voters cannot vote in a {space.kind} ensemble")
        pred = voter.predict(dataset)
        if space.kind == MULTICLASS:
            profile += weight * (pred[:, None] == classes[None, :])
        else:
            profile += weight * pred
    return profile


def predict_multiclass(profile):
    """Class (1-based) with the largest vote mass; ties go to the lowest index."""
    return int(np.argmax(np.asarray(profile))) + 1


def predict_multilabel(profile):
    """Label vector closest to the confidence vector; a confidence of exactly 1/2 gives 0."""
    return tuple(int(b) for b in (np.asarray(profile) > 0.5))


def risk(dataset, margins):
    """Probability that the margin is nonpositive (ties are errors)."""
    margins = np.asarray(margins, dtype=float)
    if margins.shape != (dataset.n_examples,):
        raise ConfigError(f"expected {dataset.n_examples} margins, got shape {margins.shape}")
    return dataset.probability(margins <= 0)
