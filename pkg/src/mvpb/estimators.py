"""Empirical estimators of the multiview Gibbs risk and its decomposition.

Disagreement and joint error are computed per example from the margin
``M(x) = E_{v~rho} E_{h~Q_v} h(x^v)`` and the conditional Gibbs error
``g(x) = E_{v~rho} E_{h~Q_v} 1[h(x^v) != y]``:

    d(x) = (1 - M(x)**2) / 2          e(x, y) = g(x, y)**2

Both identities need voters with outputs in {-1, +1}, which ``Stump``
guarantees. Views are accumulated in order, voters within a view by a single
dot product, so results are reproducible for a given input.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import AbsoluteContinuityViolation, EmptySample, ShapeMismatch
from .hierarchy import Categorical, HierarchicalDistribution, MultiviewSample, Stump, VoterPool, validate_hierarchy

# margins within this distance of 0 count as ties and are resolved to +1
ZERO_MARGIN_TOL = 1e-12


@dataclass(frozen=True)
class RiskProfile:
    gibbs_risk: float
    disagreement: float
    joint_error: float
    majority_vote_risk: float
    per_view_gibbs: tuple[float, ...]
    per_view_disagreement: tuple[float, ...]
    m: int
    zero_margin_count: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_view_gibbs"] = list(self.per_view_gibbs)
        d["per_view_disagreement"] = list(self.per_view_disagreement)
        return d


@dataclass(frozen=True)
class KlBudget:
    expected_view_kl: float
    hyper_kl: float

    @property
    def total(self) -> float:
        return self.expected_view_kl + self.hyper_kl

    def to_dict(self) -> dict:
        return {"expected_view_kl": self.expected_view_kl, "hyper_kl": self.hyper_kl, "total": self.total}


def _check_sample(S: MultiviewSample):
    if S is None or S.m == 0:
        raise EmptySample("estimators need at least one example")


def _votes(dist, pool, S):
    _check_sample(S)
    validate_hierarchy(dist, pool)
    return pool.votes(S)


def voter_risk(h: Stump, S: MultiviewSample) -> float:
    _check_sample(S)
    return float(np.mean(h.predict(S) != S.labels))


def pair_disagreement(h: Stump, h2: Stump, S: MultiviewSample) -> float:
    _check_sample(S)
    return float(np.mean(h.predict(S) != h2.predict(S)))


def view_margins(dist: HierarchicalDistribution, votes: list[np.ndarray]) -> list[np.ndarray]:
    """Per-view margins ``E_{h~Q_v} h(x^v)``, one array per view."""
    return [H @ q.weights for H, q in zip(votes, dist.per_view)]


def margins(dist: HierarchicalDistribution, votes: list[np.ndarray]) -> np.ndarray:
    out = np.zeros(votes[0].shape[0])
    for r, mv in zip(dist.hyper.weights, view_margins(dist, votes)):
        out += r * mv
    return out


def _view_errors(dist, votes, y):
    """Per-view conditional Gibbs errors ``E_{h~Q_v} 1[h(x^v) != y]``."""
    return [(H != y[:, None]).astype(np.float64) @ q.weights for H, q in zip(votes, dist.per_view)]


def _vote_sign(M: np.ndarray) -> np.ndarray:
    return np.where(M >= -ZERO_MARGIN_TOL, 1, -1)


def gibbs_risk(dist: HierarchicalDistribution, pool: VoterPool, S: MultiviewSample) -> float:
    votes = _votes(dist, pool, S)
    per_view = [float(np.mean(H != S.labels[:, None], axis=0) @ q.weights) for H, q in zip(votes, dist.per_view)]
    return float(np.dot(dist.hyper.weights, per_view))


def disagreement_mv(dist: HierarchicalDistribution, pool: VoterPool, S: MultiviewSample) -> float:
    M = margins(dist, _votes(dist, pool, S))
    return float(np.mean(0.5 * (1.0 - M * M)))


def joint_error_mv(dist: HierarchicalDistribution, pool: VoterPool, S: MultiviewSample) -> float:
    votes = _votes(dist, pool, S)
    g = np.zeros(S.m)
    for r, ev in zip(dist.hyper.weights, _view_errors(dist, votes, S.labels)):
        g += r * ev
    return float(np.mean(g * g))


def majority_vote_margin(dist: HierarchicalDistribution, pool: VoterPool, x) -> float:
    """Margin on one ``MultiviewExample``."""
    validate_hierarchy(dist, pool)
    if x.n_views != pool.n_views:
        raise ShapeMismatch(f"example has {x.n_views} views, pool has {pool.n_views}")
    total = 0.0
    for r, q, hs in zip(dist.hyper.weights, dist.per_view, pool.per_view):
        total += r * float(np.dot(q.weights, [h(x) for h in hs]))
    return total


def majority_vote_predict(dist: HierarchicalDistribution, pool: VoterPool, S: MultiviewSample) -> np.ndarray:
    return _vote_sign(margins(dist, _votes(dist, pool, S)))


def majority_vote_risk(dist: HierarchicalDistribution, pool: VoterPool, S: MultiviewSample) -> float:
    return float(np.mean(majority_vote_predict(dist, pool, S) != S.labels))


def kl_categorical(Q: Categorical, P: Categorical) -> float:
    q, p = np.asarray(Q.weights), np.asarray(P.weights)
    if q.shape != p.shape:
        raise ShapeMismatch(f"KL between distributions of size {q.size} and {p.size}")
    support = q > 0
    if np.any(p[support] == 0):
        raise AbsoluteContinuityViolation("posterior puts mass where the prior has none")
    qs = q[support]
    return max(0.0, float(np.sum(qs * np.log(qs / p[support]))))


def kl_budget(posterior: HierarchicalDistribution, prior: HierarchicalDistribution) -> KlBudget:
    if posterior.n_views != prior.n_views:
        raise ShapeMismatch("posterior and prior cover different numbers of views")
    rho = posterior.hyper.weights
    view_kl = 0.0
    for r, q, p in zip(rho, posterior.per_view, prior.per_view):
        if len(q) != len(p):
            raise ShapeMismatch("posterior and prior differ in a view's voter count")
        if r > 0:
            view_kl += float(r) * kl_categorical(q, p)
    return KlBudget(float(view_kl), float(kl_categorical(posterior.hyper, prior.hyper)))


def profile_from_votes(dist: HierarchicalDistribution, votes: list[np.ndarray], y: np.ndarray) -> RiskProfile:
    """RiskProfile from precomputed vote matrices (the fast path used in training)."""
    m = y.shape[0]
    if m == 0:
        raise EmptySample("estimators need at least one example")
    rho = dist.hyper.weights
    vm = view_margins(dist, votes)
    ve = _view_errors(dist, votes, y)
    M = np.zeros(m)
    g = np.zeros(m)
    for r, mv, ev in zip(rho, vm, ve):
        M += r * mv
        g += r * ev
    per_view_gibbs = tuple(float(np.mean(H != y[:, None], axis=0) @ q.weights) for H, q in zip(votes, dist.per_view))
    per_view_dis = tuple(float(np.mean(0.5 * (1.0 - mv * mv))) for mv in vm)
    return RiskProfile(
        gibbs_risk=float(np.dot(rho, per_view_gibbs)),
        disagreement=float(np.mean(0.5 * (1.0 - M * M))),
        joint_error=float(np.mean(g * g)),
        majority_vote_risk=float(np.mean(_vote_sign(M) != y)),
        per_view_gibbs=per_view_gibbs,
        per_view_disagreement=per_view_dis,
        m=int(m),
        zero_margin_count=int(np.sum(np.abs(M) <= ZERO_MARGIN_TOL)),
    )


def risk_profile(dist: HierarchicalDistribution, pool: VoterPool, S: MultiviewSample) -> RiskProfile:
    return profile_from_votes(dist, _votes(dist, pool, S), S.labels)


def expected_view_disagreement(profile: RiskProfile, rho: Categorical) -> float:
    """rho-average of the within-view disagreements."""
    return float(np.dot(rho.weights, profile.per_view_disagreement))
