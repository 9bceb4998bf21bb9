import numpy as np
import pytest

from votebound import ConfigError, aggregate, full_report
from votebound.bounds import BOUND_KEYS
from votebound.oracle import (
    PROPERTIES,
    InstanceSpec,
    brute_multilabel_risk,
    campaign_specs,
    flat_simplex,
    generate,
    run_trial,
    spec_from_seed,
    verify,
)


class TestGenerate:
    def test_deterministic(self):
        spec = InstanceSpec("multiclass", 4, 6, 20, 123, 0.6)
        (d1, e1), (d2, e2) = generate(spec), generate(spec)
        np.testing.assert_array_equal(d1.features, d2.features)
        np.testing.assert_array_equal(d1.targets, d2.targets)
        np.testing.assert_array_equal(e1.posterior.weights, e2.posterior.weights)
        for a, b in zip(e1.voters, e2.voters):
            np.testing.assert_array_equal(a.predictions, b.predictions)

    def test_single_voter(self):
        _, ens = generate(InstanceSpec("multilabel", 3, 1, 5, 0))
        np.testing.assert_array_equal(ens.posterior.weights, [1.0])

    @pytest.mark.parametrize("kind, q", [("binary", 2), ("multiclass", 5), ("multilabel", 6)])
    def test_perfect_voters(self, kind, q):
        ds, ens = generate(InstanceSpec(kind, q, 4, 30, 5, 1.0))
        report = full_report(ds, ens)
        assert report.risk == 0.0
        for key in BOUND_KEYS:
            if report.bounds[key] is not None:
                assert report.bounds[key] == pytest.approx(0.0, abs=1e-12)

    def test_wrong_predictions_differ(self):
        ds, ens = generate(InstanceSpec("multilabel", 3, 5, 40, 9, 0.0))
        for voter in ens.voters:
            assert (voter.predictions != ds.targets).any(axis=1).all()
        ds, ens = generate(InstanceSpec("multiclass", 4, 5, 40, 9, 0.0))
        for voter in ens.voters:
            assert (voter.predictions != ds.targets).all()

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(label_kind="multilabel", n_classes=7),
            dict(n_voters=0),
            dict(n_examples=0),
            dict(voter_accuracy=1.5),
            dict(label_kind="binary", n_classes=3),
            dict(label_kind="tree"),
        ],
    )
    def test_invalid_spec(self, kwargs):
        base = dict(label_kind="multiclass", n_classes=3, n_voters=2, n_examples=3, seed=0)
        base.update(kwargs)
        with pytest.raises(ConfigError):
            InstanceSpec(**base)

    def test_flat_simplex(self, rng):
        for n in range(1, 8):
            w = flat_simplex(rng, n)
            assert (w >= 0).all() and abs(w.sum() - 1) <= 1e-12


class TestBruteForce:
    def test_multilabel_risk_matches_margin(self, rng):
        from votebound import multilabel_margin, risk

        for seed in range(30):
            ds, ens = generate(InstanceSpec("multilabel", int(rng.integers(2, 6)), 4, 20, seed, 0.7))
            g = aggregate(ds, ens.voters, ens.posterior)
            assert brute_multilabel_risk(ds, g) == risk(ds, multilabel_margin(g, ds))


class TestVerify:
    @pytest.mark.parametrize("name", PROPERTIES)
    def test_small_campaign_passes(self, name):
        result = verify(name, campaign_specs(name, 40, seed=3))
        assert result.passed, result.violations[:3]
        assert result.trials == 40
        assert result.evaluated > 0

    def test_unknown_property(self):
        with pytest.raises(ConfigError):
            verify("nope", [])

    @pytest.mark.parametrize("name", ["sandwich", "cbound-dominates-risk", "cantelli-base", "union-bound"])
    def test_injected_bug_detected(self, name):
        result = verify(name, campaign_specs(name, 50, seed=1), inject_bug=True)
        assert not result.passed

    def test_violation_reproducible_from_seed(self):
        specs = campaign_specs("sandwich", 30, seed=5)
        result = verify("sandwich", specs, inject_bug=True)
        v = result.violations[0]
        again = run_trial("sandwich", spec_from_seed("sandwich", v.seed), inject_bug=True)
        assert v in again.violations

    def test_thread_count_does_not_change_result(self):
        specs = campaign_specs("omega-cbound", 30, seed=2)
        assert verify("omega-cbound", specs, threads=1).to_dict() == verify("omega-cbound", specs, threads=4).to_dict()

    def test_q_range_respected(self):
        assert {s.n_classes for s in campaign_specs("sandwich", 50, 0, (3, 3))} == {3}
        assert {s.n_classes for s in campaign_specs("binary-collapse", 20, 0)} == {2}
        assert max(s.n_classes for s in campaign_specs("multilabel-cbound", 50, 0, (2, 9))) <= 6
