from __future__ import annotations

import math

import numpy as np
import pytest

from mvpb import oracle
from mvpb.dataio import SynthConfig
from mvpb.errors import InstanceTooLarge
from mvpb.estimators import pair_disagreement, risk_profile, voter_risk
from mvpb.hierarchy import Stump, VoterPool, uniform_hierarchy

from conftest import hier, sample


@pytest.fixture(scope="module")
def small_harness():
    cfg = SynthConfig(separation=1.0, noise=1.0, flip_noise=0.1, size=4000, seed=11)
    return oracle.SoundnessHarness(cfg, pool_sample_size=300)


def test_guard_rejects_large_instances():
    S = sample([np.zeros((3, 1))], [1, 1, -1])
    pool = VoterPool((tuple(Stump(0, 0, float(t)) for t in range(65)),))
    with pytest.raises(InstanceTooLarge):
        oracle.brute_gibbs(uniform_hierarchy(pool), pool, S)


def test_point_masses_reduce_to_single_voters(four_examples):
    h, h2 = Stump(0, 0, 0.0), Stump(1, 0, 0.0)
    pool = VoterPool(((h,), (h2,)))
    assert oracle.brute_gibbs(hier([1.0, 0.0], [1.0], [1.0]), pool, four_examples) == voter_risk(h, four_examples)
    # half the joint mass on each voter: d = 2 * 0.25 * d(h, h2)
    d = oracle.brute_disagreement(hier([0.5, 0.5], [1.0], [1.0]), pool, four_examples)
    assert d == pytest.approx(0.5 * pair_disagreement(h, h2, four_examples))


def test_brute_identity_on_fixture(two_by_two):
    g = oracle.brute_gibbs(*two_by_two)
    assert abs(g - (oracle.brute_disagreement(*two_by_two) / 2 + oracle.brute_joint_error(*two_by_two))) <= 1e-12


def test_population_truth_on_sample_equals_profile(two_by_two):
    dist, pool, S = two_by_two
    assert oracle.population_truth(dist, pool, S) == risk_profile(dist, pool, S)


def test_population_truth_is_linear_in_halves(small_harness):
    h = small_harness
    dist = h.prior
    whole = oracle.population_truth(dist, h.pool, h.population)
    n = h.population.m // 2
    a = oracle.population_truth(dist, h.pool, h.population.take(np.arange(n)))
    b = oracle.population_truth(dist, h.pool, h.population.take(np.arange(n, 2 * n)))
    for f in ("gibbs_risk", "disagreement", "joint_error"):
        assert getattr(whole, f) == pytest.approx((getattr(a, f) + getattr(b, f)) / 2, abs=1e-12)


def test_population_truth_matches_brute_force_on_truncation():
    pop = oracle.SoundnessHarness(SynthConfig(size=600, seed=2), pool_sample_size=100).population
    sub = pop.take(np.arange(40))
    pool = VoterPool(tuple((Stump(v, 0, 0.0), Stump(v, 1, 0.3, -1)) for v in range(3)))
    dist = hier([0.2, 0.5, 0.3], [0.7, 0.3], [0.5, 0.5], [0.1, 0.9])
    truth = oracle.population_truth(dist, pool, sub)
    assert truth.gibbs_risk == pytest.approx(oracle.brute_gibbs(dist, pool, sub), abs=1e-12)
    assert truth.disagreement == pytest.approx(oracle.brute_disagreement(dist, pool, sub), abs=1e-12)


def test_oracle_suite_passes_and_catches_fault():
    assert oracle.run_oracle_suite(60, seed=1).passed
    bad = oracle.run_oracle_suite(60, seed=1, estimator=oracle.faulty_risk_profile)
    assert not bad.passed and not bad.oracle_ok


def test_violation_tolerance():
    assert oracle.violation_tolerance(0.05, 200) == pytest.approx(0.05 + 3 * math.sqrt(0.05 * 0.95 / 200))
    assert oracle.violation_tolerance(0.05, 200) == pytest.approx(0.096, abs=5e-4)


def test_soundness_harness_small_run(small_harness):
    rep = small_harness.run(m=60, delta=0.05, trials=30, rule="uniform", seed=3)
    assert set(rep.violation_rate) == set(oracle.BOUND_NAMES)
    assert rep.mean_kl_total == 0.0
    assert rep.passed


def test_soundness_threads_do_not_change_results(small_harness):
    a = small_harness.run(m=40, trials=30, rule="uniform", seed=5, threads=1)
    b = small_harness.run(m=40, trials=30, rule="uniform", seed=5, threads=3)
    assert a.to_dict() == b.to_dict()


def test_soundness_needs_thirty_trials(small_harness):
    with pytest.raises(ValueError):
        small_harness.run(trials=29)


def test_draws_are_with_replacement_and_reproducible(small_harness):
    a = small_harness.draw(50, seed=8)
    b = small_harness.draw(50, seed=8)
    assert np.array_equal(a.views[0].toarray(), b.views[0].toarray())
