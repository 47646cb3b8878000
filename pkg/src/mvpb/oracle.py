"""Independent checks: literal nested-sum estimators and Monte-Carlo bound soundness.

The brute-force functions evaluate every stump on every ``MultiviewExample``
one at a time and sum with ``math.fsum``; they share no code with the
vectorized estimators beyond ``Stump.__call__``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import bounds as B
from .dataio import SynthConfig, subsample, synth_population
from .errors import EmptySample, InstanceTooLarge
from .estimators import (
    ZERO_MARGIN_TOL,
    RiskProfile,
    expected_view_disagreement,
    kl_budget,
    profile_from_votes,
    risk_profile,
)
from .fusion import TrainConfig, build_pool, learn_posterior
from .hierarchy import (
    Categorical,
    HierarchicalDistribution,
    MultiviewSample,
    Stump,
    VoterPool,
    uniform_hierarchy,
    validate_hierarchy,
)
from .rng import Xoshiro256, derive_seed

MAX_VOTER_SLOTS = 64
MAX_BRUTE_M = 1000
POOL_STREAM = 0x5EED_0F_9001


def _guard(dist, pool, S):
    if S.m == 0:
        raise EmptySample("brute-force estimators need at least one example")
    if pool.n_views * max(pool.sizes) > MAX_VOTER_SLOTS or S.m > MAX_BRUTE_M:
        raise InstanceTooLarge(f"V*max(n_v)={pool.n_views * max(pool.sizes)}, m={S.m} exceed the brute-force guard")
    validate_hierarchy(dist, pool)


def _weighted_voters(dist, pool):
    return [(float(r) * float(q), h)
            for r, Q, hs in zip(dist.hyper.weights, dist.per_view, pool.per_view)
            for q, h in zip(Q.weights, hs)]


def brute_gibbs(dist: HierarchicalDistribution, pool: VoterPool, S: MultiviewSample) -> float:
    _guard(dist, pool, S)
    voters = _weighted_voters(dist, pool)
    return math.fsum(w * (h(x) != x.label) for x in S.examples for w, h in voters) / S.m


def brute_disagreement(dist, pool, S) -> float:
    _guard(dist, pool, S)
    voters = _weighted_voters(dist, pool)
    terms = []
    for x in S.examples:
        for w, h in voters:
            for w2, h2 in voters:
                terms.append(w * w2 * (h(x) != h2(x)))
    return math.fsum(terms) / S.m


def brute_joint_error(dist, pool, S) -> float:
    _guard(dist, pool, S)
    voters = _weighted_voters(dist, pool)
    terms = []
    for x in S.examples:
        for w, h in voters:
            for w2, h2 in voters:
                terms.append(w * w2 * (h(x) != x.label) * (h2(x) != x.label))
    return math.fsum(terms) / S.m


def brute_view_disagreements(dist, pool, S) -> list[float]:
    """Within-view disagreement d_S(Q_v) for every view."""
    _guard(dist, pool, S)
    out = []
    for Q, hs in zip(dist.per_view, pool.per_view):
        terms = [q * q2 * (h(x) != h2(x)) for x in S.examples
                 for q, h in zip(Q.weights, hs) for q2, h2 in zip(Q.weights, hs)]
        out.append(math.fsum(terms) / S.m)
    return out


def brute_majority_vote_risk(dist, pool, S) -> float:
    _guard(dist, pool, S)
    voters = _weighted_voters(dist, pool)
    errors = 0
    for x in S.examples:
        margin = math.fsum(w * h(x) for w, h in voters)
        pred = 1 if margin >= -ZERO_MARGIN_TOL else -1
        errors += pred != x.label
    return errors / S.m


def population_truth(dist: HierarchicalDistribution, pool: VoterPool, population: MultiviewSample) -> RiskProfile:
    """Exact risks when the finite population plays the data distribution."""
    if population.m == 0:
        raise EmptySample("population is empty")
    return risk_profile(dist, pool, population)


# ---------------------------------------------------------------------------
# randomized small instances


def random_instance(rng: np.random.Generator, max_views=3, max_voters=4, max_m=8, max_dim=4):
    """A random (dist, pool, sample) triple small enough for the brute-force path."""
    V = int(rng.integers(1, max_views + 1))
    m = int(rng.integers(1, max_m + 1))
    dims = [int(rng.integers(1, max_dim + 1)) for _ in range(V)]
    grid = np.array([-1.0, 0.0, 0.0, 0.5, 1.0, 2.0])
    views = [sp.csr_matrix(rng.choice(grid, size=(m, d))) for d in dims]
    labels = rng.choice([-1, 1], size=m)
    S = MultiviewSample(tuple(views), labels, tuple(dims))
    thresholds = [-0.5, 0.0, 0.5, 1.0]
    per_view = []
    for v, d in enumerate(dims):
        n = int(rng.integers(1, max_voters + 1))
        per_view.append(tuple(Stump(v, int(rng.integers(d)), float(rng.choice(thresholds)), int(rng.choice([-1, 1])))
                              for _ in range(n)))
    pool = VoterPool(tuple(per_view))
    dist = HierarchicalDistribution(_random_cat(rng, V), tuple(_random_cat(rng, n) for n in pool.sizes))
    return dist, pool, S


def _random_cat(rng, n):
    kind = rng.integers(4)
    if kind == 0:
        return Categorical.uniform(n)
    if kind == 1:
        return Categorical.point_mass(n, int(rng.integers(n)))
    w = rng.dirichlet(np.ones(n))
    if kind == 2 and n > 1:
        w[rng.integers(n)] = 0.0
    return Categorical.normalized(w)


@dataclass
class OracleReport:
    instances: int
    max_gibbs_error: float = 0.0
    max_disagreement_error: float = 0.0
    max_joint_error_error: float = 0.0
    max_view_disagreement_error: float = 0.0
    max_decomposition_error: float = 0.0
    max_brute_decomposition_error: float = 0.0
    majority_vote_mismatches: int = 0
    factor2_violations: int = 0
    jensen_violations: int = 0
    cbound_chain_violations: int = 0
    cbound_chain_checked: int = 0
    tolerance: float = 1e-12

    @property
    def oracle_ok(self) -> bool:
        t = self.tolerance
        return (max(self.max_gibbs_error, self.max_disagreement_error, self.max_joint_error_error,
                    self.max_view_disagreement_error) <= t and self.majority_vote_mismatches == 0)

    @property
    def decomposition_ok(self) -> bool:
        return max(self.max_decomposition_error, self.max_brute_decomposition_error) <= self.tolerance

    @property
    def passed(self) -> bool:
        return (self.oracle_ok and self.decomposition_ok and self.factor2_violations == 0
                and self.jensen_violations == 0 and self.cbound_chain_violations == 0)

    def to_dict(self) -> dict:
        return {**asdict(self), "oracle_ok": self.oracle_ok, "decomposition_ok": self.decomposition_ok,
                "passed": self.passed}


def cbound_chain_holds(profile: RiskProfile, rho: Categorical, slack: float = 1e-12) -> tuple[bool, bool | None]:
    """(Jensen step holds, joint C-bound <= view-averaged C-bound; the latter is None when either is vacuous)."""
    jensen = profile.disagreement >= expected_view_disagreement(profile, rho) - slack
    c8 = B.cbound_mv(min(1.0, max(0.0, profile.gibbs_risk)), profile.disagreement)
    c9 = B.cbound_mv_per_view(profile.per_view_gibbs, profile.per_view_disagreement, rho)
    if c8 is None or c9 is None:
        return jensen, None
    return jensen, c8 <= c9 + slack


def run_oracle_suite(n_instances: int = 200, seed: int = 0,
                     estimator: Callable[..., RiskProfile] = risk_profile) -> OracleReport:
    """Compare ``estimator`` with the brute-force sums on random small instances."""
    rng = np.random.default_rng(seed)
    rep = OracleReport(n_instances)
    for _ in range(n_instances):
        dist, pool, S = random_instance(rng)
        fast = estimator(dist, pool, S)
        bg, bd, be = brute_gibbs(dist, pool, S), brute_disagreement(dist, pool, S), brute_joint_error(dist, pool, S)
        bv = brute_view_disagreements(dist, pool, S)
        rep.max_gibbs_error = max(rep.max_gibbs_error, abs(fast.gibbs_risk - bg))
        rep.max_disagreement_error = max(rep.max_disagreement_error, abs(fast.disagreement - bd))
        rep.max_joint_error_error = max(rep.max_joint_error_error, abs(fast.joint_error - be))
        rep.max_view_disagreement_error = max(
            [rep.max_view_disagreement_error, *(abs(a - b) for a, b in zip(fast.per_view_disagreement, bv))])
        rep.max_decomposition_error = max(
            rep.max_decomposition_error, abs(fast.gibbs_risk - (fast.disagreement / 2 + fast.joint_error)))
        rep.max_brute_decomposition_error = max(rep.max_brute_decomposition_error, abs(bg - (bd / 2 + be)))
        rep.majority_vote_mismatches += fast.majority_vote_risk != brute_majority_vote_risk(dist, pool, S)
        rep.factor2_violations += fast.majority_vote_risk > 2 * fast.gibbs_risk + 1e-12
        jensen, chain = cbound_chain_holds(fast, dist.hyper)
        rep.jensen_violations += not jensen
        if chain is not None:
            rep.cbound_chain_checked += 1
            rep.cbound_chain_violations += not chain
    return rep


def faulty_risk_profile(dist, pool, S) -> RiskProfile:
    """Fault-injection hook: the disagreement with the margin term's sign flipped."""
    p = risk_profile(dist, pool, S)
    return RiskProfile(p.gibbs_risk, 1.0 - p.disagreement, p.joint_error, p.majority_vote_risk,
                       p.per_view_gibbs, p.per_view_disagreement, p.m, p.zero_margin_count)


# ---------------------------------------------------------------------------
# Monte-Carlo soundness

BOUND_NAMES = ("mcallester", "catoni", "seeger")
DEFAULT_SOUNDNESS_SYNTH = SynthConfig(views=3, dims=(10, 10, 10), separation=1.0, noise=1.0,
                                      redundancy=0.5, flip_noise=0.1, size=50_000, seed=2017)
DEFAULT_SOUNDNESS_POOL = TrainConfig(stumps_per_feature=4, max_features_per_view=10, polarity="oriented")


@dataclass
class SoundnessReport:
    posterior_rule: str
    m: int
    delta: float
    trials: int
    violation_rate: dict = field(default_factory=dict)
    mean_bound: dict = field(default_factory=dict)
    mean_true_gibbs: float = 0.0
    mean_empirical_gibbs: float = 0.0
    mean_kl_total: float = 0.0
    disagreement_coverage: float = 0.0
    violation_tolerance: float = 0.0
    expectation_holds: dict = field(default_factory=dict)

    @property
    def violations_ok(self) -> bool:
        return all(r <= self.violation_tolerance for r in self.violation_rate.values())

    @property
    def coverage_ok(self) -> bool:
        return self.disagreement_coverage >= 0.95

    @property
    def passed(self) -> bool:
        return self.violations_ok and self.coverage_ok and all(self.expectation_holds.values())

    def to_dict(self) -> dict:
        return {**asdict(self), "violations_ok": self.violations_ok, "coverage_ok": self.coverage_ok,
                "passed": self.passed}


def violation_tolerance(delta: float, trials: int) -> float:
    """delta plus three binomial standard deviations."""
    return delta + 3.0 * math.sqrt(delta * (1.0 - delta) / trials)


class SoundnessHarness:
    """A synthetic population, a fixed pool built from an independent draw, and cached votes."""

    def __init__(self, cfg: SynthConfig = DEFAULT_SOUNDNESS_SYNTH, pool_cfg: TrainConfig = DEFAULT_SOUNDNESS_POOL,
                 pool_sample_size: int = 500):
        self.cfg = cfg
        self.population = synth_population(cfg)
        pool_sample = subsample(self.population, min(pool_sample_size, self.population.m),
                                derive_seed(cfg.seed, POOL_STREAM), stratified=False)
        self.pool = build_pool(pool_sample, pool_cfg)
        self.prior = uniform_hierarchy(self.pool)
        self.pop_votes = self.pool.votes(self.population)

    def truth(self, dist: HierarchicalDistribution) -> RiskProfile:
        return profile_from_votes(dist, self.pop_votes, self.population.labels)

    def draw(self, m: int, seed: int) -> MultiviewSample:
        """m i.i.d. examples (with replacement) from the population."""
        return self.population.take(Xoshiro256(seed).choice(self.population.m, m))

    def posterior(self, S: MultiviewSample, rule: str) -> HierarchicalDistribution:
        if rule == "uniform":
            return self.prior
        return learn_posterior(self.pool, S, self.prior, TrainConfig(optimizer=rule)).posterior

    def trial(self, m: int, delta: float, rule: str, seed: int) -> dict:
        S = self.draw(m, seed)
        post = self.posterior(S, rule)
        prof = profile_from_votes(post, self.pool.votes(S), S.labels)
        kl = kl_budget(post, self.prior)
        true = self.truth(post)
        out = {"true_gibbs": true.gibbs_risk, "true_disagreement": true.disagreement,
               "empirical_gibbs": prof.disagreement / 2 + prof.joint_error, "kl_total": kl.total}
        for d in (delta, 1.0):
            inp = B.BoundInputs(prof, kl, m, d)
            out[("mcallester", d)] = B.mcallester_bound(inp)
            out[("catoni", d)] = B.catoni_bound_best_C(inp)[0]
            out[("seeger", d)] = B.seeger_bound(inp)
        lo, hi = B.disagreement_interval(prof.disagreement, kl, m, delta)
        out["covered"] = lo <= true.disagreement <= hi
        return out

    def run(self, m: int = 100, delta: float = 0.05, trials: int = 200, rule: str = "uniform",
            seed: int = 0, threads: int = 1) -> SoundnessReport:
        if trials < 30:
            raise ValueError("soundness trials need trials >= 30")
        seeds = [derive_seed(seed, t) for t in range(trials)]
        if threads > 1:
            with ThreadPoolExecutor(threads) as ex:
                results = list(ex.map(lambda s: self.trial(m, delta, rule, s), seeds))
        else:
            results = [self.trial(m, delta, rule, s) for s in seeds]
        rep = SoundnessReport(rule, m, delta, trials, violation_tolerance=violation_tolerance(delta, trials))
        true = np.array([r["true_gibbs"] for r in results])
        rep.mean_true_gibbs = float(true.mean())
        rep.mean_empirical_gibbs = float(np.mean([r["empirical_gibbs"] for r in results]))
        rep.mean_kl_total = float(np.mean([r["kl_total"] for r in results]))
        rep.disagreement_coverage = float(np.mean([r["covered"] for r in results]))
        for name in BOUND_NAMES:
            at_delta = np.array([r[(name, delta)] for r in results])
            rep.violation_rate[name] = float(np.mean(true > at_delta))
            for d in (delta, 1.0):
                mean_b = float(np.mean([r[(name, d)] for r in results]))
                rep.mean_bound[f"{name}@{d:g}"] = mean_b
                rep.expectation_holds[f"{name}@{d:g}"] = mean_b >= rep.mean_true_gibbs
        return rep


def bound_soundness_trial(cfg: SynthConfig, m: int, delta: float, trials: int, posterior_rule: str,
                          seed: int = 0, threads: int = 1) -> SoundnessReport:
    return SoundnessHarness(cfg).run(m, delta, trials, posterior_rule, seed, threads)


# ---------------------------------------------------------------------------
# kl machinery

KL_ROUNDTRIP_A = tuple(round(0.05 * i, 2) for i in range(10))
KL_ROUNDTRIP_C = tuple(round(0.001 * i, 3) for i in range(1, 1001))


@dataclass
class KlMachineryReport:
    max_roundtrip_error: float = 0.0
    roundtrip_points: int = 0
    xi_max_excess: float = -math.inf
    xi_checked_up_to: int = 0
    xi1_error: float = 0.0
    xi2_error: float = 0.0
    pinsker_violations: int = 0
    pinsker_trials: int = 0

    @property
    def passed(self) -> bool:
        return (self.max_roundtrip_error <= 1e-8 and self.xi_max_excess <= 0.0 and self.xi1_error <= 1e-12
                and self.xi2_error <= 1e-12 and self.pinsker_violations == 0)

    def to_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


def kl_machinery_check(xi_max_m: int = 100_000, pinsker_trials: int = 1000, seed: int = 0) -> KlMachineryReport:
    rep = KlMachineryReport()
    for a in KL_ROUNDTRIP_A:
        for c in KL_ROUNDTRIP_C:
            b = B.binary_kl_inverse_upper(a, c)
            if b < 1.0:
                rep.roundtrip_points += 1
                rep.max_roundtrip_error = max(rep.max_roundtrip_error, abs(B.binary_kl(a, b) - c))
    rep.xi_max_excess = max(B.xi(m) - 2.0 * math.sqrt(m) for m in range(1, xi_max_m + 1))
    rep.xi_checked_up_to = xi_max_m
    rep.xi1_error = abs(B.xi(1) - 2.0)
    rep.xi2_error = abs(B.xi(2) - 2.5)
    rng = np.random.default_rng(seed)
    for _ in range(pinsker_trials):
        risk = float(rng.uniform())
        inp = B.BoundInputs.from_values(risk, int(rng.integers(1, 10_001)), float(rng.uniform(1e-6, 1.0)),
                                        float(rng.exponential(5.0)), float(rng.uniform(0, min(1.0, 2 * risk))))
        rep.pinsker_violations += B.seeger_bound(inp) > B.mcallester_bound(inp) + 1e-12
    rep.pinsker_trials = pinsker_trials
    return rep
