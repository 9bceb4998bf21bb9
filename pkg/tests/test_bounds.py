import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from votebound import (
    BoundUndefined,
    ConfigError,
    Ensemble,
    InvariantViolation,
    LabelSpace,
    MomentPair,
    Posterior,
    RealValuedTableVoter,
    ReportSettings,
    TableVoter,
    aggregate,
    cbound,
    full_report,
    moments,
    multiclass_margin,
    multilabel_cbound,
    omega_cbound,
    risk,
    sandwich,
    strength_bound,
    union_bound,
)
from votebound.bounds import BOUND_KEYS
from votebound.oracle import InstanceSpec, brute_multiclass_probabilities, generate

from conftest import binary_dataset, multiclass_dataset, multilabel_dataset


class TestMoments:
    def test_symmetric(self):
        ds = multiclass_dataset([1, 2], 2)
        assert moments([1.0, -1.0], ds) == MomentPair(0.0, 1.0)

    def test_constant(self):
        ds = multiclass_dataset([1, 2, 1, 2, 1], 2)
        m = moments([0.4] * 5, ds)
        assert m.mu1 == pytest.approx(0.4, abs=1e-15)
        assert m.mu2 == pytest.approx(0.16, abs=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(ConfigError):
            moments([0.1], multiclass_dataset([1, 2], 2))

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.floats(-3, 3), min_size=1, max_size=30))
    def test_jensen(self, values):
        ds = multiclass_dataset([1] * len(values), 2)
        m = moments(values, ds)
        assert m.mu1**2 <= m.mu2 + 1e-12

    def test_jensen_violation_detected(self):
        with pytest.raises(InvariantViolation):
            MomentPair(1.0, 0.5)


class TestCBound:
    def test_perfect(self):
        assert cbound(MomentPair(1.0, 1.0)) == 0.0

    def test_arithmetic(self):
        assert cbound(MomentPair(0.5, 0.5)) == 0.5

    @pytest.mark.parametrize("mu1", [0.0, -0.1])
    def test_undefined(self, mu1):
        with pytest.raises(BoundUndefined):
            cbound(MomentPair(mu1, 0.5))

    def test_zero_second_moment(self):
        m = object.__new__(MomentPair)
        object.__setattr__(m, "mu1", 0.1)
        object.__setattr__(m, "mu2", 0.0)
        with pytest.raises(InvariantViolation):
            cbound(m)

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.floats(-1, 1), min_size=1, max_size=30), st.floats(1e-3, 1e3))
    def test_scale_invariance(self, values, scale):
        ds = multiclass_dataset([1] * len(values), 2)
        m = moments(values, ds)
        assume(m.mu1 > 1e-6)
        scaled = moments(np.array(values) * scale, ds)
        assert cbound(scaled) == pytest.approx(cbound(m), abs=1e-12)
        assert 0.0 <= cbound(m) < 1.0

    def test_dominates_risk_random(self, rng):
        checked = 0
        for seed in range(300):
            ds, ens = generate(InstanceSpec("multiclass", int(rng.integers(2, 6)), 5, 20, seed, 0.7))
            g = aggregate(ds, ens.voters, ens.posterior)
            m = moments(multiclass_margin(g, ds), ds)
            if m.mu1 <= 0:
                continue
            checked += 1
            exact = brute_multiclass_probabilities(ds, ens)[1]
            assert exact <= cbound(m) + 1e-9
        assert checked > 100


def _profiles(rows):
    return np.array(rows, dtype=float)


class TestStrengthBound:
    def test_symmetric_two_examples(self):
        # S_c takes values {0, s} with equal mass for each class, so each ratio is 1/2
        s = 0.4
        ds = multiclass_dataset([1, 2], 2)
        g = _profiles([[0.7, 0.3], [0.3, 0.7]])
        strengths = {c: moments(g[np.arange(2), ds.targets - 1] - g[:, c - 1], ds) for c in (1, 2)}
        for m in strengths.values():
            assert m.mu1 == pytest.approx(s / 2) and m.mu2 == pytest.approx(s * s / 2)
        assert strength_bound(ds, g) == pytest.approx(0.0, abs=1e-12)

    def test_undefined_names_class(self):
        ds = multiclass_dataset([1, 1], 3)
        g = _profiles([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        with pytest.raises(BoundUndefined) as info:
            strength_bound(ds, g)
        assert info.value.offending_class == 1


class TestUnionBound:
    def test_perfect(self):
        ds = multiclass_dataset([1, 2, 3], 3)
        g = np.eye(3)
        assert union_bound(ds, g) == 0.0 == risk(ds, multiclass_margin(g, ds))

    def test_by_definition(self, rng):
        # sum_c P(S_c <= 0) - 1 computed literally, class by class
        for _ in range(100):
            q, m = int(rng.integers(2, 6)), int(rng.integers(1, 20))
            g = rng.dirichlet(np.ones(q), size=m)
            ds = multiclass_dataset(rng.integers(1, q + 1, m), q)
            gy = g[np.arange(m), ds.targets - 1]
            literal = math.fsum(ds.probability(gy - g[:, c] <= 0) for c in range(q)) - 1
            assert union_bound(ds, g) == pytest.approx(literal, abs=1e-12)
            assert risk(ds, multiclass_margin(g, ds)) <= union_bound(ds, g)

    def test_q2_equality(self, rng):
        for _ in range(200):
            m = int(rng.integers(1, 30))
            a = rng.random(m)
            a[rng.random(m) < 0.2] = 0.5
            g = np.stack([a, 1 - a], axis=1)
            weights = rng.dirichlet(np.ones(m))
            weights /= math.fsum(weights)
            ds = multiclass_dataset(rng.integers(1, 3, m), 2, weights=weights)
            assert union_bound(ds, g) == risk(ds, multiclass_margin(g, ds))

    def test_wrong_kind(self):
        with pytest.raises(ConfigError):
            union_bound(binary_dataset([1]), np.array([1.0]))


class TestSandwich:
    def test_q2_collapse(self, rng):
        m = 20
        a = rng.random(m)
        g = np.stack([a, 1 - a], axis=1)
        ds = multiclass_dataset(rng.integers(1, 3, m), 2)
        lower, mid, upper = sandwich(ds, g)
        assert lower == mid == upper

    def test_strict_upper(self):
        ds = multiclass_dataset([1], 3)
        assert sandwich(ds, _profiles([[0.4, 0.35, 0.25]])) == (0.0, 0.0, 1.0)

    def test_strict_lower(self):
        # true class has 0.4 > 1/3 but a competitor has 0.6
        ds = multiclass_dataset([1], 3)
        assert sandwich(ds, _profiles([[0.4, 0.6, 0.0]])) == (0.0, 1.0, 1.0)

    def test_profiles_must_sum_to_one(self):
        ds = multiclass_dataset([1], 3)
        with pytest.raises(InvariantViolation):
            sandwich(ds, _profiles([[0.4, 0.35, 0.2]]))


class TestOmegaCBound:
    def test_perfect(self):
        ds = multiclass_dataset([1, 2, 3], 3)
        assert omega_cbound(ds, np.eye(3), 2) == 0.0

    def test_undefined(self):
        ds = multiclass_dataset([1], 3)
        with pytest.raises(BoundUndefined):
            omega_cbound(ds, _profiles([[0.4, 0.35, 0.25]]), 2)


class TestMultilabelCBound:
    def test_perfect(self):
        for q in range(2, 7):
            targets = np.random.default_rng(q).integers(0, 2, (5, q))
            ds = multilabel_dataset(targets)
            assert multilabel_cbound(ds, targets.astype(float)) == 0.0

    def test_undefined(self):
        ds = multilabel_dataset([[1, 0]])
        with pytest.raises(BoundUndefined):
            multilabel_cbound(ds, np.array([[0.5, 0.5]]))


class TestFullReport:
    def _ensemble(self, space, voters, posterior=None):
        return Ensemble(space, voters, posterior)

    def test_binary_routing(self):
        ds = binary_dataset([1, -1, 1])
        ens = self._ensemble(LabelSpace.binary(), [RealValuedTableVoter([1.0, -0.5, 0.2])])
        report = full_report(ds, ens)
        assert report.bounds["theorem1"] is not None
        assert [k for k in BOUND_KEYS if report.bounds[k] is not None] == ["theorem1"]
        assert not report.degraded

    def test_multiclass_routing(self):
        ds, ens = generate(InstanceSpec("multiclass", 3, 5, 30, 1, 0.9))
        report = full_report(ds, ens, ReportSettings(omega=3))
        defined = {k for k in BOUND_KEYS if report.bounds[k] is not None}
        assert defined == {"theorem3-lower", "theorem3-upper", "theorem4", "theorem5", "theorem6", "eq2-union"}
        assert report.moments["omega"] == report.moments["omega-Q"]
        assert report.notes["theorem1"] == "not applicable"

    def test_multilabel_routing(self):
        ds, ens = generate(InstanceSpec("multilabel", 3, 5, 30, 1, 0.95))
        report = full_report(ds, ens)
        assert {k for k in BOUND_KEYS if report.bounds[k] is not None} == {"theorem7"}

    def test_undefined_marked_not_clipped(self):
        ds = multiclass_dataset([1], 3)
        ens = self._ensemble(LabelSpace.multiclass(3), [TableVoter([2])])
        report = full_report(ds, ens)
        assert report.bounds["theorem4"] is None and report.preconditions["theorem4"] is False
        assert report.degraded
        assert "theorem4" in report.notes

    def test_clipped_field(self):
        ds, ens = generate(InstanceSpec("multiclass", 5, 3, 30, 4, 0.55))
        report = full_report(ds, ens)
        for key in BOUND_KEYS:
            if report.bounds[key] is not None:
                assert report.clipped(key) == min(1.0, report.bounds[key])

    def test_perfect_voters(self):
        for kind, q in (("binary", 2), ("multiclass", 4), ("multilabel", 4)):
            ds, ens = generate(InstanceSpec(kind, q, 3, 25, 11, 1.0))
            report = full_report(ds, ens)
            assert report.risk == 0.0
            for key in BOUND_KEYS:
                if report.bounds[key] is not None:
                    assert report.bounds[key] == pytest.approx(0.0, abs=1e-12), key

    def test_label_space_mismatch(self):
        ds = multiclass_dataset([1], 3)
        ens = self._ensemble(LabelSpace.multiclass(4), [TableVoter([2])])
        with pytest.raises(ConfigError):
            full_report(ds, ens)

    def test_q2_theorem4_equals_binary_theorem1(self):
        for seed in range(30):
            ds, ens = generate(InstanceSpec("multiclass", 2, 4, 20, seed, 0.75))
            sign = lambda a: np.where(np.asarray(a) == 1, 1, -1)
            bds = binary_dataset(sign(ds.targets))
            bens = Ensemble(
                LabelSpace.binary(),
                [RealValuedTableVoter(sign(v.predictions).astype(float)) for v in ens.voters],
                ens.posterior,
            )
            b4 = full_report(ds, ens).bounds["theorem4"]
            b1 = full_report(bds, bens).bounds["theorem1"]
            assert (b4 is None) == (b1 is None)
            if b4 is not None:
                assert b4 == pytest.approx(b1, abs=1e-12)
