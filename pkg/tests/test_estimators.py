from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvpb import oracle
from mvpb.errors import AbsoluteContinuityViolation, EmptySample
from mvpb.estimators import (
    disagreement_mv,
    expected_view_disagreement,
    gibbs_risk,
    joint_error_mv,
    kl_budget,
    kl_categorical,
    majority_vote_margin,
    majority_vote_risk,
    pair_disagreement,
    risk_profile,
    voter_risk,
)
from mvpb.hierarchy import Categorical, Stump, VoterPool, uniform_hierarchy

from conftest import hier, sample

instances = st.integers(0, 2**32 - 1).map(lambda s: oracle.random_instance(np.random.default_rng(s)))


def test_voter_risk_perfect_and_complement(four_examples):
    h = Stump(0, 0, 0.0)
    assert voter_risk(h, four_examples) == 0.0
    assert voter_risk(h.negate(), four_examples) == 1.0


def test_voter_risk_two_of_four(four_examples):
    # view 1 is (+1, -1, -1, +1) against labels (+1, +1, -1, -1): wrong on the 2nd and 4th
    assert voter_risk(Stump(1, 0, 0.0), four_examples) == 0.5


def test_pair_disagreement_fixture(four_examples):
    h = Stump(0, 0, 0.0)
    assert pair_disagreement(h, h, four_examples) == 0.0
    assert pair_disagreement(h, h.negate(), four_examples) == 1.0
    # threshold 1.5 flips only the second example
    assert pair_disagreement(h, Stump(0, 0, 1.5), four_examples) == 0.25


def test_gibbs_point_mass_reduces_to_voter_risk(four_examples):
    pool = VoterPool(((Stump(0, 0, 0.0), Stump(0, 0, 1.5)), (Stump(1, 0, 0.0),)))
    dist = hier([1.0, 0.0], [0.0, 1.0], [1.0])
    assert gibbs_risk(dist, pool, four_examples) == voter_risk(Stump(0, 0, 1.5), four_examples)


def test_gibbs_matches_rational_triple_sum(two_by_two):
    dist, pool, S = two_by_two
    exact = Fraction(0)
    for r, Q, hs in zip(dist.hyper.weights, dist.per_view, pool.per_view):
        for q, h in zip(Q.weights, hs):
            for x in S:
                exact += Fraction(float(r)) * Fraction(float(q)) * (h(x) != x.label)
    assert gibbs_risk(dist, pool, S) == pytest.approx(float(exact / S.m), abs=1e-15)


def test_single_voter_has_zero_disagreement(four_examples):
    pool = VoterPool(((Stump(0, 0, 0.0),),))
    S = four_examples
    one_view = sample([S.views[0].toarray()], S.labels)
    assert disagreement_mv(uniform_hierarchy(pool), pool, one_view) == 0.0


def test_cross_view_opposites_disagree_half_the_time():
    x = [[1.0], [-1.0], [2.0]]
    S = sample([x, x], [1, -1, 1])
    pool = VoterPool(((Stump(0, 0, 0.0),), (Stump(1, 0, 0.0, -1),)))
    assert disagreement_mv(uniform_hierarchy(pool), pool, S) == 0.5


def test_all_wrong_voters_have_joint_error_one(four_examples):
    S = sample([four_examples.views[0].toarray(), np.zeros((4, 1))], [1, 1, 1, 1])
    pool = VoterPool(((Stump(0, 0, 100.0),), (Stump(1, 0, 100.0),)))
    assert joint_error_mv(uniform_hierarchy(pool), pool, S) == 1.0
    assert gibbs_risk(uniform_hierarchy(pool), pool, S) == 1.0


def test_perfect_voters_profile_is_zero(four_examples):
    pool = VoterPool(((Stump(0, 0, 0.0), Stump(0, 0, 0.5)), (Stump(1, 0, 100.0),)))
    dist = hier([1.0, 0.0], [0.5, 0.5], [1.0])
    p = risk_profile(dist, pool, four_examples)
    assert (p.gibbs_risk, p.disagreement, p.joint_error, p.majority_vote_risk) == (0.0, 0.0, 0.0, 0.0)


def test_margin_cases(four_examples):
    x = four_examples.example(0)
    pool = VoterPool(((Stump(0, 0, -10.0), Stump(0, 0, -10.0, -1)), (Stump(1, 0, -10.0),)))
    assert majority_vote_margin(hier([0.0, 1.0], [0.5, 0.5], [1.0]), pool, x) == 1.0
    assert majority_vote_margin(hier([1.0, 0.0], [0.5, 0.5], [1.0]), pool, x) == 0.0
    # 0.4 * (0.25 * 1 + 0.75 * -1) + 0.6 * 1
    assert majority_vote_margin(hier([0.4, 0.6], [0.25, 0.75], [1.0]), pool, x) == pytest.approx(0.4)


def test_zero_margin_on_negative_example_counts_as_error():
    S = sample([[[1.0]]], [-1])
    pool = VoterPool(((Stump(0, 0, 0.0), Stump(0, 0, 0.0, -1)),))
    assert majority_vote_risk(uniform_hierarchy(pool), pool, S) == 1.0
    assert risk_profile(uniform_hierarchy(pool), pool, S).zero_margin_count == 1


def test_kl_categorical_values():
    P = Categorical([0.25, 0.75])
    assert kl_categorical(P, P) == 0.0
    assert kl_categorical(Categorical([0.5, 0.5]), P) == pytest.approx(0.5 * math.log(2) + 0.5 * math.log(2 / 3))
    assert kl_categorical(Categorical([0.5, 0.5]), P) == pytest.approx(0.14384, abs=1e-5)
    with pytest.raises(AbsoluteContinuityViolation):
        kl_categorical(Categorical([1.0, 0.0]), Categorical([0.0, 1.0]))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=6), st.lists(st.floats(0.01, 1.0), min_size=6, max_size=6))
def test_kl_nonnegative_and_zero_only_at_equality(q, p):
    if sum(q) == 0:
        q = [1.0] + q[1:]
    Q = Categorical.normalized(q)
    P = Categorical.normalized(p[: len(q)])
    kl = kl_categorical(Q, P)
    assert kl >= 0.0
    if np.abs(Q.weights - P.weights).max() > 1e-6:
        assert kl > 0.0


def test_kl_budget_point_mass():
    prior = hier([0.5, 0.5], [0.5, 0.5], [0.5, 0.5])
    post = hier([1.0, 0.0], [1.0, 0.0], [0.5, 0.5])
    kl = kl_budget(post, prior)
    assert kl.expected_view_kl == pytest.approx(math.log(2))
    assert kl.hyper_kl == pytest.approx(math.log(2))
    assert kl.total == pytest.approx(2 * math.log(2))
    assert kl_budget(prior, prior).total == 0.0


def test_kl_budget_mixed_is_sum_of_parts():
    prior = hier([0.3, 0.7], [0.2, 0.8], [0.5, 0.25, 0.25])
    post = hier([0.6, 0.4], [0.5, 0.5], [0.1, 0.1, 0.8])
    kl = kl_budget(post, prior)
    parts = 0.6 * kl_categorical(post.per_view[0], prior.per_view[0]) + 0.4 * kl_categorical(
        post.per_view[1], prior.per_view[1])
    assert kl.expected_view_kl == pytest.approx(parts)
    assert kl.hyper_kl == pytest.approx(kl_categorical(post.hyper, prior.hyper))


def test_empty_sample_rejected(four_examples):
    pool = VoterPool(((Stump(0, 0, 0.0),), (Stump(1, 0, 0.0),)))
    with pytest.raises(EmptySample):
        gibbs_risk(uniform_hierarchy(pool), pool, four_examples.take([]))


def test_fixture_matches_brute_force(two_by_two):
    dist, pool, S = two_by_two
    p = risk_profile(dist, pool, S)
    assert abs(p.gibbs_risk - oracle.brute_gibbs(dist, pool, S)) <= 1e-12
    assert abs(p.disagreement - oracle.brute_disagreement(dist, pool, S)) <= 1e-12
    assert abs(p.joint_error - oracle.brute_joint_error(dist, pool, S)) <= 1e-12
    assert p.majority_vote_risk == oracle.brute_majority_vote_risk(dist, pool, S)


@settings(max_examples=150, deadline=None)
@given(instances)
def test_decomposition_identity(inst):
    p = risk_profile(*inst)
    assert abs(p.gibbs_risk - (p.disagreement / 2 + p.joint_error)) <= 1e-12


@settings(max_examples=150, deadline=None)
@given(instances)
def test_factor2_and_jensen(inst):
    dist, pool, S = inst
    p = risk_profile(dist, pool, S)
    assert p.majority_vote_risk <= 2 * p.gibbs_risk + 1e-12
    assert p.disagreement >= expected_view_disagreement(p, dist.hyper) - 1e-12


@settings(max_examples=80, deadline=None)
@given(instances, st.integers(0, 2**32 - 1))
def test_permutation_invariance(inst, seed):
    dist, pool, S = inst
    perm = np.random.default_rng(seed).permutation(S.m)
    a, b = risk_profile(dist, pool, S), risk_profile(dist, pool, S.take(perm))
    for f in ("gibbs_risk", "disagreement", "joint_error", "majority_vote_risk"):
        assert getattr(a, f) == pytest.approx(getattr(b, f), abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(instances)
def test_pair_disagreement_symmetric(inst):
    _, pool, S = inst
    voters = [h for hs in pool.per_view for h in hs]
    for h in voters:
        for h2 in voters:
            assert pair_disagreement(h, h2, S) == pair_disagreement(h2, h, S)


@settings(max_examples=100, deadline=None)
@given(instances)
def test_brute_force_equivalence(inst):
    dist, pool, S = inst
    p = risk_profile(dist, pool, S)
    assert abs(p.gibbs_risk - oracle.brute_gibbs(dist, pool, S)) <= 1e-12
    assert abs(p.disagreement - oracle.brute_disagreement(dist, pool, S)) <= 1e-12
    assert abs(p.joint_error - oracle.brute_joint_error(dist, pool, S)) <= 1e-12
    for a, b in zip(p.per_view_disagreement, oracle.brute_view_disagreements(dist, pool, S)):
        assert abs(a - b) <= 1e-12
