"""Brute-force verification of the bounds on small random instances.

Each trial is fully determined by one integer seed.  Risks and probabilities
are recomputed here with plain Python loops over the examples (vote masses
included), independently of the vectorised code in :mod:`votebound.margins`,
and compared against the bound values returned by :mod:`votebound.bounds`.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import bounds as bd
from . import margins as mg
from .core import (
    BINARY,
    LABEL_KINDS,
    MULTICLASS,
    MULTILABEL,
    Dataset,
    Ensemble,
    LabelSpace,
    Posterior,
    RealValuedTableVoter,
    TableVoter,
    aggregate,
    predict_multilabel,
)
from .errors import BoundUndefined, ConfigError

INEQUALITY_TOL = 1e-9
EQUALITY_TOL = 1e-12
FEATURE_DIM = 2

PROPERTIES = (
    "cbound-dominates-risk",
    "sandwich",
    "union-bound",
    "strength-bound",
    "omega-cbound",
    "multilabel-cbound",
    "two-margin-implies-correct",
    "two-margin-i-invariance",
    "binary-collapse",
    "cantelli-base",
)


@dataclass(frozen=True)
class InstanceSpec:
    label_kind: str
    n_classes: int
    n_voters: int
    n_examples: int
    seed: int
    voter_accuracy: float = 0.7
    random_weights: bool = False

    def __post_init__(self):
        if self.label_kind not in LABEL_KINDS:
            raise ConfigError(f"unknown label kind {self.label_kind!r}")
        if self.label_kind == BINARY and self.n_classes != 2:
            raise ConfigError("binary instances have exactly 2 classes")
        if self.n_classes < 2:
            raise ConfigError(f"need at least 2 classes, got {self.n_classes}")
        if self.label_kind == MULTILABEL and self.n_classes > 6:
            raise ConfigError(f"multi-label instances are limited to Q <= 6, got {self.n_classes}")
        if self.n_voters < 1 or self.n_examples < 1:
            raise ConfigError("need at least one voter and one example")
        if not 0.0 <= self.voter_accuracy <= 1.0:
            raise ConfigError(f"voter accuracy must lie in [0, 1], got {self.voter_accuracy!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")


@dataclass(frozen=True)
class Violation:
    seed: int
    property: str
    lhs: float
    rhs: float
    detail: str = ""
    spec: Optional[dict] = None


@dataclass
class VerificationResult:
    property: str
    trials: int
    evaluated: int = 0
    violations: List[Violation] = field(default_factory=list)
    stats: Dict[str, int] = field(default_factory=dict)

    @property
    def passed(self):
        return not self.violations

    def to_dict(self):
        return {
            "property": self.property,
            "trials": self.trials,
            "evaluated": self.evaluated,
            "passed": self.passed,
            "stats": dict(sorted(self.stats.items())),
            "violations": [asdict(v) for v in self.violations],
        }


def flat_simplex(rng, n):
    """Uniform draw from the probability simplex via sorted-uniform spacings."""
    if n == 1:
        return np.ones(1)
    cuts = np.sort(rng.random(n - 1))
    return np.diff(np.concatenate(([0.0], cuts, [1.0])))


# -- instance generation --------------------------------------------------------


def _random_targets(rng, kind, q, m):
    if kind == BINARY:
        return rng.choice(np.array([-1, 1]), size=m)
    if kind == MULTICLASS:
        return rng.integers(1, q + 1, size=m)
    return rng.integers(0, 2, size=(m, q))


def _noisy_copy(rng, kind, q, targets, accuracy):
    """Each prediction is the true target with probability ``accuracy``,
    otherwise uniform over the other labels."""
    m = targets.shape[0]
    correct = rng.random(m) < accuracy
    if kind == BINARY:
        wrong = -targets
    elif kind == MULTICLASS:
        shift = rng.integers(1, q, size=m)
        wrong = (targets - 1 + shift) % q + 1
    else:
        powers = 1 << np.arange(q - 1, -1, -1)
        codes = targets @ powers
        other = (codes + rng.integers(1, 2**q, size=m)) % 2**q
        wrong = (other[:, None] & powers[None, :] > 0).astype(np.int64)
        correct = correct[:, None]
    return np.where(correct, targets, wrong)


def generate(spec: InstanceSpec):
    """Deterministic random (dataset, ensemble) pair for ``spec``."""
    rng = np.random.default_rng(spec.seed)
    kind, q, m = spec.label_kind, spec.n_classes, spec.n_examples
    space = LabelSpace(kind, q)
    features = rng.normal(size=(m, FEATURE_DIM))
    targets = _random_targets(rng, kind, q, m)
    weights = flat_simplex(rng, m) if spec.random_weights else None
    dataset = Dataset(space, features, targets, weights)

    voters = []
    for _ in range(spec.n_voters):
        predictions = _noisy_copy(rng, kind, q, targets, spec.voter_accuracy)
        if kind == BINARY:
            voters.append(RealValuedTableVoter(predictions.astype(float)))
        else:
            voters.append(TableVoter(predictions))
    posterior = Posterior(flat_simplex(rng, spec.n_voters))
    return dataset, Ensemble(space, voters, posterior)


_PROPERTY_KIND = {
    "multilabel-cbound": MULTILABEL,
    "two-margin-implies-correct": MULTILABEL,
    "two-margin-i-invariance": MULTILABEL,
}


def spec_from_seed(property_name, seed, q_range=(2, 5), max_voters=10, max_examples=50):
    """Instance parameters derived from ``seed`` alone, so a trial can be rerun
    from its seed."""
    rng = np.random.default_rng([seed, 0x5EED])
    kind = _PROPERTY_KIND.get(property_name, MULTICLASS)
    lo, hi = q_range
    if kind == MULTILABEL:
        lo, hi = max(lo, 2), min(hi, 6)
    if property_name == "binary-collapse":
        lo = hi = 2
    if lo > hi:
        raise ConfigError(f"empty class range {q_range} for {property_name}")
    return InstanceSpec(
        label_kind=kind,
        n_classes=int(rng.integers(lo, hi + 1)),
        n_voters=int(rng.integers(1, max_voters + 1)),
        n_examples=int(rng.integers(1, max_examples + 1)),
        seed=int(seed),
        voter_accuracy=float(rng.uniform(0.3, 1.0)),
        random_weights=bool(rng.random() < 0.5),
    )


def campaign_specs(property_name, trials, seed, q_range=(2, 5), **kwargs):
    seeds = np.random.SeedSequence(seed).generate_state(trials, dtype=np.uint64)
    return [spec_from_seed(property_name, int(s), q_range, **kwargs) for s in seeds]


# -- independent brute-force quantities ----------------------------------------


def brute_vote_mass(dataset, ensemble):
    """Vote mass per example and class, by explicit loops (multiclass only)."""
    rho = ensemble.posterior.weights
    preds = [v.predict(dataset) for v in ensemble.voters]
    q = dataset.n_classes
    return [
        [math.fsum(rho[j] for j in range(len(preds)) if preds[j][i] == c) for c in range(1, q + 1)]
        for i in range(dataset.n_examples)
    ]


def brute_multiclass_probabilities(dataset, ensemble):
    """``(P(M_Q <= 0), risk, P(M_2 <= 0))`` by explicit enumeration of examples."""
    mass = brute_vote_mass(dataset, ensemble)
    q = dataset.n_classes
    lower, err, upper = [], [], []
    for i, (g, y, w) in enumerate(zip(mass, dataset.targets, dataset.weights)):
        own = g[y - 1]
        if any(g[c] >= own for c in range(q) if c != y - 1):
            err.append(w)
        if own <= 1.0 / q:
            lower.append(w)
        if own <= 0.5:
            upper.append(w)
    return math.fsum(lower), math.fsum(err), math.fsum(upper)


def brute_multilabel_risk(dataset, confidences):
    """Exact-match risk with ties counted as errors, over all ``2^Q`` label vectors."""
    q = dataset.n_classes
    candidates = list(itertools.product((0, 1), repeat=q))
    errors = []
    for conf, y, w in zip(confidences, dataset.targets, dataset.weights):
        y = tuple(int(b) for b in y)
        distance = {c: sum((c[k] - conf[k]) ** 2 for k in range(q)) for c in candidates}
        if any(distance[c] <= distance[y] for c in candidates if c != y):
            errors.append(w)
    return math.fsum(errors)


def brute_closest_label(conf):
    """Every label vector at minimal squared distance from ``conf``."""
    q = len(conf)
    distance = {c: sum((c[k] - conf[k]) ** 2 for k in range(q)) for c in itertools.product((0, 1), repeat=q)}
    best = min(distance.values())
    return [c for c, d in distance.items() if d == best]


# -- property checks ------------------------------------------------------------


class _Trial:
    def __init__(self, name, spec, inject_bug):
        self.name = name
        self.spec = spec
        self.inject_bug = inject_bug
        self.violations = []
        self.stats = {}
        self.evaluated = False

    def count(self, key, amount=1):
        self.stats[key] = self.stats.get(key, 0) + int(amount)

    def _fail(self, lhs, rhs, detail):
        self.violations.append(Violation(self.spec.seed, self.name, float(lhs), float(rhs), detail, asdict(self.spec)))

    def le(self, lhs, rhs, detail, tol=INEQUALITY_TOL):
        if self.inject_bug:
            lhs, rhs = rhs, lhs
        if not lhs <= rhs + tol:
            self._fail(lhs, rhs, detail)

    def eq(self, lhs, rhs, detail, tol=EQUALITY_TOL):
        if not abs(lhs - rhs) <= tol:
            self._fail(lhs, rhs, detail)


def _check_cbound_dominates_risk(t):
    dataset, ensemble = generate(t.spec)
    profiles = aggregate(dataset, ensemble.voters, ensemble.posterior)
    if dataset.kind == BINARY:
        margin = mg.binary_margin(profiles, dataset)
        exact = dataset.probability(dataset.targets * profiles <= 0)
    else:
        margin = mg.multiclass_margin(profiles, dataset)
        exact = brute_multiclass_probabilities(dataset, ensemble)[1]
    try:
        bound = bd.cbound(bd.moments(margin, dataset))
    except BoundUndefined:
        return
    t.evaluated = True
    t.le(exact, bound, "risk <= 1 - mu1^2/mu2")


def _check_sandwich(t):
    dataset, ensemble = generate(t.spec)
    lower, err, upper = brute_multiclass_probabilities(dataset, ensemble)
    t.evaluated = True
    t.le(lower, err, "P(M_Q <= 0) <= risk", tol=0.0)
    t.le(err, upper, "risk <= P(M_2 <= 0)", tol=0.0)
    t.count("strict-lower", lower < err)
    t.count("strict-upper", err < upper)


def _check_union_bound(t):
    dataset, ensemble = generate(t.spec)
    profiles = aggregate(dataset, ensemble.voters, ensemble.posterior)
    exact = brute_multiclass_probabilities(dataset, ensemble)[1]
    union = bd.union_bound(dataset, profiles)
    t.evaluated = True
    t.le(exact, union, "risk <= sum_c P(S_c <= 0) - 1")
    if dataset.n_classes == 2:
        t.eq(exact, union, "Q=2: union bound equals risk", tol=0.0)
        t.count("q2-equality-checked")


def _check_strength_bound(t):
    dataset, ensemble = generate(t.spec)
    profiles = aggregate(dataset, ensemble.voters, ensemble.posterior)
    try:
        bound = bd.strength_bound(dataset, profiles)
    except BoundUndefined:
        return
    t.evaluated = True
    exact = brute_multiclass_probabilities(dataset, ensemble)[1]
    t.le(exact, bound, "risk <= (Q-1) - sum_c mu1(S_c)^2/mu2(S_c)")


def _check_omega_cbound(t):
    dataset, ensemble = generate(t.spec)
    profiles = aggregate(dataset, ensemble.voters, ensemble.posterior)
    mass = brute_vote_mass(dataset, ensemble)
    for omega in sorted({2.0, 3.0, float(dataset.n_classes)}):
        margin = mg.omega_margin(profiles, dataset, omega)
        try:
            bound = bd.cbound(bd.moments(margin, dataset))
        except BoundUndefined:
            continue
        t.evaluated = True
        t.count(f"omega-{omega:g}")
        if omega == dataset.n_classes:
            t.count("omega-Q")
        exact = math.fsum(w for g, y, w in zip(mass, dataset.targets, dataset.weights) if g[y - 1] <= 1.0 / omega)
        t.le(exact, bound, f"P(M_omega <= 0) <= C-bound at omega={omega:g}")
        if omega == 2.0:
            err = brute_multiclass_probabilities(dataset, ensemble)[1]
            t.le(err, bound, "risk <= omega C-bound at omega=2")


def _check_multilabel_cbound(t):
    dataset, ensemble = generate(t.spec)
    profiles = aggregate(dataset, ensemble.voters, ensemble.posterior)
    exact = brute_multilabel_risk(dataset, profiles)
    two = mg.two_margin(profiles, dataset)
    two_risk = dataset.probability(two <= 0)
    t.le(exact, two_risk, "risk <= P(2-margin <= 0)", tol=0.0)
    try:
        bound = bd.cbound(bd.moments(two, dataset))
    except BoundUndefined:
        return
    t.evaluated = True
    t.le(two_risk, bound, "P(2-margin <= 0) <= multi-label C-bound")
    t.le(exact, bound, "risk <= multi-label C-bound")


def random_confidences(rng, targets):
    """Confidence vectors in ``[0,1]^Q``: half uniform, half concentrated near
    the target so that positive 2-margins are common."""
    m, q = targets.shape
    uniform = rng.random((m, q))
    spread = rng.random((m, 1)) * rng.random((m, q)) / q
    near = np.abs(targets - spread)
    return np.where((rng.random(m) < 0.5)[:, None], uniform, near)


def _multilabel_samples(spec):
    rng = np.random.default_rng(spec.seed)
    q, m = spec.n_classes, spec.n_examples
    targets = rng.integers(0, 2, size=(m, q))
    conf = random_confidences(rng, targets)
    dataset = Dataset(LabelSpace.multilabel(q), np.zeros((m, 1)), targets)
    return dataset, conf


def _check_two_margin_implies_correct(t):
    dataset, conf = _multilabel_samples(t.spec)
    two = mg.two_margin(conf, dataset)
    t.evaluated = True
    for value, c, y in zip(two, conf, dataset.targets):
        t.count("vectors")
        if value > 0:
            t.count("positive-2-margin")
            y = tuple(int(b) for b in y)
            closest = brute_closest_label(c)
            if closest != [y]:
                t._fail(value, 0.0, f"2-margin > 0 but closest labels are {closest}, target {y}")
            if predict_multilabel(c) != y:
                t._fail(value, 0.0, f"2-margin > 0 but prediction {predict_multilabel(c)} != {y}")


def _check_two_margin_i_invariance(t):
    dataset, conf = _multilabel_samples(t.spec)
    reference = mg.two_margin(conf, dataset, 1)
    t.evaluated = True
    t.count("vectors", dataset.n_examples)
    for i in range(2, dataset.n_classes + 1):
        other = mg.two_margin(conf, dataset, i)
        worst = int(np.argmax(np.abs(other - reference)))
        t.eq(other[worst], reference[worst], f"2-margin with i={i} vs i=1")


def _check_binary_collapse(t):
    spec = t.spec
    dataset, ensemble = generate(spec)
    profiles = aggregate(dataset, ensemble.voters, ensemble.posterior)
    t.evaluated = True
    margin = mg.multiclass_margin(profiles, dataset)
    omega2 = mg.omega_margin(profiles, dataset, 2)
    worst = int(np.argmax(np.abs(margin - 2 * omega2)))
    t.eq(margin[worst], 2 * omega2[worst], "multiclass margin = 2 * omega-margin(2)")

    lower, err, upper = brute_multiclass_probabilities(dataset, ensemble)
    t.eq(lower, err, "Q=2: P(M_Q <= 0) = risk", tol=0.0)
    t.eq(err, upper, "Q=2: risk = P(M_2 <= 0)", tol=0.0)

    # same vote seen as a +/-1 binary problem: class 1 -> +1, class 2 -> -1
    to_sign = lambda a: np.where(np.asarray(a) == 1, 1, -1)
    binary = Dataset(LabelSpace.binary(), dataset.features, to_sign(dataset.targets), dataset.weights)
    voters = [RealValuedTableVoter(to_sign(v.predictions).astype(float)) for v in ensemble.voters]
    bprofiles = aggregate(binary, voters, ensemble.posterior)
    bmargin = mg.binary_margin(bprofiles, binary)
    worst = int(np.argmax(np.abs(bmargin - 2 * omega2)))
    t.eq(bmargin[worst], 2 * omega2[worst], "binary margin = 2 * omega-margin(2)")
    try:
        b4 = bd.cbound(bd.moments(margin, dataset))
        b1 = bd.cbound(bd.moments(bmargin, binary))
    except BoundUndefined:
        return
    t.count("bounds-compared")
    t.eq(b4, b1, "multiclass C-bound = binary C-bound")


def _check_cantelli_base(t):
    rng = np.random.default_rng(t.spec.seed)
    k = t.spec.n_examples
    values = rng.normal(loc=rng.uniform(-0.5, 2.0), scale=rng.uniform(0.1, 2.0), size=k)
    probs = flat_simplex(rng, k)
    mean = math.fsum(probs * values)
    if not mean > 0:
        return
    t.evaluated = True
    var = math.fsum(probs * (values - mean) ** 2)
    tail = math.fsum(probs[values <= 0])
    cantelli = var / (var + mean * mean)
    t.le(tail, cantelli, "P(Z <= 0) <= Var Z / (Var Z + mu^2)")
    second = math.fsum(probs * values * values)
    t.eq(cantelli, bd.cbound(bd.MomentPair(mean, second)), "Cantelli form = 1 - mu1^2/mu2", tol=INEQUALITY_TOL)


_CHECKS = {
    "cbound-dominates-risk": _check_cbound_dominates_risk,
    "sandwich": _check_sandwich,
    "union-bound": _check_union_bound,
    "strength-bound": _check_strength_bound,
    "omega-cbound": _check_omega_cbound,
    "multilabel-cbound": _check_multilabel_cbound,
    "two-margin-implies-correct": _check_two_margin_implies_correct,
    "two-margin-i-invariance": _check_two_margin_i_invariance,
    "binary-collapse": _check_binary_collapse,
    "cantelli-base": _check_cantelli_base,
}


def _thread_count():
    try:
        return max(1, int(os.environ.get("VOTEBOUND_THREADS", "1")))
    except ValueError:
        raise ConfigError("VOTEBOUND_THREADS must be an integer") from None


def run_trial(property_name, spec, inject_bug=False):
    if property_name not in _CHECKS:
        raise ConfigError(f"unknown property {property_name!r}; expected one of {PROPERTIES}")
    trial = _Trial(property_name, spec, inject_bug)
    _CHECKS[property_name](trial)
    return trial


def verify(property_name, specs, inject_bug=False, threads=None):
    """Run one property over every spec and collect violations.

    ``inject_bug`` swaps the sides of every inequality, which must surface
    violations on any non-degenerate campaign.
    """
    if property_name not in _CHECKS:
        raise ConfigError(f"unknown property {property_name!r}; expected one of {PROPERTIES}")
    specs = list(specs)
    threads = threads or _thread_count()
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            trials = list(pool.map(lambda s: run_trial(property_name, s, inject_bug), specs))
    else:
        trials = [run_trial(property_name, s, inject_bug) for s in specs]

    result = VerificationResult(property_name, len(specs))
    for trial in trials:
        result.evaluated += trial.evaluated
        result.violations.extend(trial.violations)
        for key, value in trial.stats.items():
            result.stats[key] = result.stats.get(key, 0) + value
    return result
