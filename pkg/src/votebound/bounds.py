"""Margin moments and the C-bound family.

All probabilities are exact finite sums of example weights; all moments are
correctly rounded weighted sums, so results do not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from . import margins as mg
from .core import BINARY, MULTICLASS, MULTILABEL, aggregate, risk
from .errors import BoundUndefined, ConfigError, InvariantViolation

# Jensen guarantees 1 - mu1^2/mu2 >= 0; anything below this is not rounding.
_ROUNDING_SLACK = 1e-12
PROFILE_SUM_TOL = 1e-12

BOUND_KEYS = (
    "theorem1",
    "theorem3-lower",
    "theorem3-upper",
    "theorem4",
    "theorem5",
    "theorem6",
    "theorem7",
    "eq2-union",
)


@dataclass(frozen=True)
class MomentPair:
    mu1: float
    mu2: float

    def __post_init__(self):
        if self.mu2 < 0:
            raise InvariantViolation(f"second moment is negative: {self.mu2!r}")
        if self.mu1 * self.mu1 > self.mu2 + _ROUNDING_SLACK * max(1.0, self.mu2):
            raise InvariantViolation(f"mu1^2 = {self.mu1 ** 2!r} exceeds mu2 = {self.mu2!r}")


def moments(margins, dataset):
    """First and second moments of a per-example margin under the dataset weights."""
    values = np.asarray(margins, dtype=float)
    if values.shape != (dataset.n_examples,):
        raise ConfigError(f"expected {dataset.n_examples} margins, got shape {values.shape}")
    return MomentPair(dataset.expectation(values), dataset.expectation(values * values))


def cbound(m: MomentPair) -> float:
    """``1 - mu1^2 / mu2``, an upper bound on P(margin <= 0) when ``mu1 > 0``."""
    if not m.mu1 > 0:
        raise BoundUndefined(f"first moment must be strictly positive, got {m.mu1!r}")
    if m.mu2 == 0:
        raise InvariantViolation("positive first moment with zero second moment")
    value = 1.0 - m.mu1 * m.mu1 / m.mu2
    if value < 0:
        if value < -_ROUNDING_SLACK:
            raise InvariantViolation(f"C-bound is negative: {value!r}")
        value = 0.0
    return value


def strength_moments(dataset, profiles):
    return {
        c: moments(mg.strength_margin(profiles, dataset, c), dataset)
        for c in range(1, dataset.n_classes + 1)
    }


def strength_bound(dataset, profiles):
    """``(Q-1) - sum_c mu1(S_c)^2 / mu2(S_c)``; needs every ``mu1(S_c) > 0``."""
    total = []
    for c, m in strength_moments(dataset, profiles).items():
        if not m.mu1 > 0:
            raise BoundUndefined(
                f"first strength moment for class {c} is {m.mu1!r}, not strictly positive",
                variant="theorem5",
                offending_class=c,
            )
        total.append(m.mu1 * m.mu1 / m.mu2)
    return (dataset.n_classes - 1) - math.fsum(total)


def union_bound(dataset, profiles):
    """``sum_c P(S_c <= 0) - 1``.

    Per example the ``c = y`` term is always counted, so the summand reduces to
    the number of competing classes whose mass reaches the true class mass.
    """
    if dataset.kind != MULTICLASS:
        raise ConfigError("union bound needs a multiclass dataset")
    strengths = np.stack(
        [mg.strength_margin(profiles, dataset, c) for c in range(1, dataset.n_classes + 1)], axis=1
    )
    counts = (strengths <= 0).sum(axis=1) - 1
    return dataset.expectation(counts.astype(float))


def check_profiles_sum_to_one(profiles, tol=PROFILE_SUM_TOL):
    sums = np.asarray(profiles, dtype=float).sum(axis=1)
    worst = np.abs(sums - 1.0).max()
    if worst > tol:
        raise InvariantViolation(f"vote profiles must sum to 1; worst deviation {worst!r}")


def sandwich(dataset, profiles):
    """``(P(M_Q <= 0), risk, P(M_2 <= 0))``, checked to be nondecreasing."""
    if dataset.kind != MULTICLASS:
        raise ConfigError("the omega-margin sandwich needs a multiclass dataset")
    check_profiles_sum_to_one(profiles)
    q = dataset.n_classes
    lower = risk(dataset, mg.omega_margin(profiles, dataset, q))
    middle = risk(dataset, mg.multiclass_margin(profiles, dataset))
    upper = risk(dataset, mg.omega_margin(profiles, dataset, 2))
    if not lower <= middle <= upper:
        raise InvariantViolation(f"sandwich violated: {lower!r} <= {middle!r} <= {upper!r}")
    return lower, middle, upper


def omega_cbound(dataset, profiles, omega):
    return cbound(moments(mg.omega_margin(profiles, dataset, omega), dataset))


def multilabel_cbound(dataset, profiles, tol=1e-9):
    """C-bound of the 2-margin; also checks risk <= P(2-margin <= 0) <= bound."""
    two = mg.two_margin(profiles, dataset)
    bound = cbound(moments(two, dataset))
    exact_risk = risk(dataset, mg.multilabel_margin(profiles, dataset))
    two_risk = risk(dataset, two)
    if exact_risk > two_risk:
        raise InvariantViolation(f"multi-label risk {exact_risk!r} exceeds P(2-margin <= 0) = {two_risk!r}")
    if two_risk > bound + tol:
        raise InvariantViolation(f"P(2-margin <= 0) = {two_risk!r} exceeds its C-bound {bound!r}")
    return bound


# -- reports ------------------------------------------------------------------


@dataclass(frozen=True)
class ReportSettings:
    omega: float = 2.0
    seed: Optional[int] = None


@dataclass
class BoundReport:
    kind: str
    n_classes: int
    settings: ReportSettings
    risk: float
    moments: Dict[str, MomentPair] = field(default_factory=dict)
    margin_probabilities: Dict[str, float] = field(default_factory=dict)
    bounds: Dict[str, Optional[float]] = field(default_factory=dict)
    preconditions: Dict[str, bool] = field(default_factory=dict)
    notes: Dict[str, str] = field(default_factory=dict)

    def clipped(self, key):
        value = self.bounds[key]
        return None if value is None else min(1.0, value)

    @property
    def applicable(self):
        return [k for k in BOUND_KEYS if self.notes.get(k) != "not applicable"]

    @property
    def degraded(self):
        """True when some applicable bound is undefined."""
        return any(self.bounds[k] is None for k in self.applicable)


def _cbound_entry(report, key, m):
    try:
        report.bounds[key] = cbound(m)
        report.preconditions[key] = True
    except BoundUndefined as exc:
        report.bounds[key] = None
        report.preconditions[key] = False
        report.notes[key] = str(exc)


def full_report(dataset, ensemble, settings=None):
    """Risk, margin moments and every bound that applies to the dataset's label kind."""
    settings = settings or ReportSettings()
    if ensemble.label_space != dataset.label_space:
        raise ConfigError(f"ensemble label space {ensemble.label_space} does not match dataset {dataset.label_space}")
    profiles = aggregate(dataset, ensemble.voters, ensemble.posterior)
    q = dataset.n_classes
    kind = dataset.kind

    if kind == BINARY:
        margin = mg.binary_margin(profiles, dataset)
    elif kind == MULTICLASS:
        margin = mg.multiclass_margin(profiles, dataset)
    else:
        margin = mg.multilabel_margin(profiles, dataset)
    report = BoundReport(kind, q, settings, risk(dataset, margin))
    for key in BOUND_KEYS:
        report.bounds[key] = None
        report.preconditions[key] = False
        report.notes[key] = "not applicable"

    if kind == BINARY:
        report.moments["margin"] = moments(margin, dataset)
        del report.notes["theorem1"]
        _cbound_entry(report, "theorem1", report.moments["margin"])

    elif kind == MULTICLASS:
        for key in ("theorem3-lower", "theorem3-upper", "theorem4", "theorem5", "theorem6", "eq2-union"):
            del report.notes[key]
        report.moments["margin"] = moments(margin, dataset)
        _cbound_entry(report, "theorem4", report.moments["margin"])

        for label, omega in (("omega", settings.omega), ("omega-2", 2.0), ("omega-Q", float(q))):
            report.moments[label] = moments(mg.omega_margin(profiles, dataset, omega), dataset)
        _cbound_entry(report, "theorem6", report.moments["omega"])

        lower, _, upper = sandwich(dataset, profiles)
        report.margin_probabilities["omega-Q"] = lower
        report.margin_probabilities["omega-2"] = upper
        report.margin_probabilities["omega"] = risk(dataset, mg.omega_margin(profiles, dataset, settings.omega))
        report.bounds["theorem3-lower"] = lower
        report.bounds["theorem3-upper"] = upper
        report.preconditions["theorem3-lower"] = report.preconditions["theorem3-upper"] = True

        for c, m in strength_moments(dataset, profiles).items():
            report.moments[f"strength-{c}"] = m
        try:
            report.bounds["theorem5"] = strength_bound(dataset, profiles)
            report.preconditions["theorem5"] = True
        except BoundUndefined as exc:
            report.notes["theorem5"] = str(exc)

        report.bounds["eq2-union"] = union_bound(dataset, profiles)
        report.preconditions["eq2-union"] = True

    else:
        del report.notes["theorem7"]
        two = mg.two_margin(profiles, dataset)
        report.moments["multilabel-margin"] = moments(margin, dataset)
        report.moments["two-margin"] = moments(two, dataset)
        report.margin_probabilities["two-margin"] = risk(dataset, two)
        try:
            report.bounds["theorem7"] = multilabel_cbound(dataset, profiles)
            report.preconditions["theorem7"] = True
        except BoundUndefined as exc:
            report.notes["theorem7"] = str(exc)

    return report
