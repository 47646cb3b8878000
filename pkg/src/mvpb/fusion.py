"""Two-level late fusion: stump pools per view, then a learned hierarchy over them.

Level one builds quantile-threshold stumps on S1. Level two starts from the
prior and runs exponentiated-gradient descent on (rho, Q_1..Q_V) to minimize
the empirical multiview C-bound on S2, written with the first two margin
moments ``mu1 = E[y M]`` and ``mu2 = E[M^2]`` as ``1 - mu1^2 / mu2``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .bounds import DEFAULT_CATONI_GRID, BoundInputs, BoundReport, cbound_mv, full_report
from .dataio import stratified_counts
from .errors import (
    ConfigError,
    DegenerateViewWarning,
    EmptySample,
    ModelVersionMismatch,
    ParseError,
    ShapeMismatch,
    TooFewExamples,
)
from .estimators import RiskProfile, kl_budget, majority_vote_predict, profile_from_votes
from .hierarchy import (
    Categorical,
    HierarchicalDistribution,
    MultiviewSample,
    Stump,
    VoterPool,
    uniform_hierarchy,
    validate_hierarchy,
)
from .rng import Xoshiro256

MODEL_HEADER = "mvpb-model v1"
OPTIMIZERS = ("cbound-minimize", "uniform", "risk-minimize")
MAX_BACKTRACKS = 30


@dataclass(frozen=True)
class TrainConfig:
    split_ratio: tuple[float, float] = (0.6, 0.4)
    stumps_per_feature: int = 4
    max_features_per_view: int = 10
    optimizer: str = "cbound-minimize"
    learning_rate: float = 0.5
    max_iters: int = 500
    tol: float = 1e-6
    seed: int = 0
    delta: float = 0.05
    polarity: str = "both"
    catoni_grid: tuple[float, ...] = DEFAULT_CATONI_GRID
    prior_path: str | None = None
    min_margin: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "split_ratio", tuple(float(r) for r in self.split_ratio))
        object.__setattr__(self, "catoni_grid", tuple(float(c) for c in self.catoni_grid))
        r1, r2 = self.split_ratio
        if len(self.split_ratio) != 2 or r1 <= 0 or r2 <= 0 or abs(r1 + r2 - 1.0) > 1e-9:
            raise ConfigError(f"split ratios must be positive and sum to 1, got {self.split_ratio}")
        if self.stumps_per_feature < 1 or self.max_features_per_view < 1 or self.max_iters < 1:
            raise ConfigError("stump, feature and iteration counts must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {self.optimizer!r}; choose from {OPTIMIZERS}")
        if self.polarity not in ("both", "oriented"):
            raise ConfigError("polarity must be 'both' or 'oriented'")
        if not self.learning_rate > 0 or not self.tol > 0:
            raise ConfigError("learning_rate and tol must be positive")
        if not 0.0 < self.delta <= 1.0:
            raise ConfigError("delta must lie in (0, 1]")
        if not 0.0 <= self.min_margin < 1.0:
            raise ConfigError("min_margin must lie in [0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["split_ratio"] = list(self.split_ratio)
        d["catoni_grid"] = list(self.catoni_grid)
        return d


@dataclass(frozen=True, eq=False)
class LearnResult:
    posterior: HierarchicalDistribution
    trace: tuple[float, ...]
    iterations: int
    warmup_iterations: int = 0
    nonfinite_objective: bool = False


@dataclass(frozen=True, eq=False)
class FusionModel:
    pool: VoterPool
    posterior: HierarchicalDistribution
    prior: HierarchicalDistribution
    train_profile: RiskProfile | None = None
    train_report: BoundReport | None = None
    objective_trace: tuple[float, ...] = ()
    nonfinite_objective: bool = False

    def __post_init__(self):
        validate_hierarchy(self.posterior, self.pool)
        validate_hierarchy(self.prior, self.pool)


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    f1: float
    precision: float
    recall: float
    gibbs_risk: float
    disagreement: float
    joint_error: float
    majority_vote_risk: float
    zero_margin_count: int
    m: int

    @property
    def factor2_holds(self) -> bool:
        return self.majority_vote_risk <= 2.0 * self.gibbs_risk + 1e-12

    def to_dict(self) -> dict:
        return {**asdict(self), "factor2_holds": self.factor2_holds}


def split_sample(S: MultiviewSample, ratio: Sequence[float] = (0.6, 0.4), seed: int = 0):
    """Label-stratified split into (S1, S2); S1 gets ``ceil(ratio[0] * m)`` examples."""
    if S.m < 5:
        raise TooFewExamples(f"need at least 5 examples to split, got {S.m}")
    n1 = math.ceil(ratio[0] * S.m - 1e-9)
    perm = Xoshiro256(seed).permutation(S.m)
    members = [perm[S.labels[perm] == c] for c in (1, -1)]
    counts = stratified_counts([len(x) for x in members], n1)
    for x, k in zip(members, counts):
        if k == 0 or k == len(x):
            raise TooFewExamples("each part of the split needs at least one example of each class")
    first = np.concatenate([x[:k] for x, k in zip(members, counts)])
    second = np.concatenate([x[k:] for x, k in zip(members, counts)])
    return S.take(np.sort(first)), S.take(np.sort(second))


def build_pool(S1: MultiviewSample, cfg: TrainConfig) -> VoterPool:
    """Quantile-threshold stumps on the highest-variance features of each view."""
    if S1.m == 0:
        raise EmptySample("cannot build a pool from an empty sample")
    levels = np.arange(1, cfg.stumps_per_feature + 1) / (cfg.stumps_per_feature + 1)
    per_view = []
    degenerate = []
    for v, X in enumerate(S1.views):
        spread = (X.max(axis=0).toarray() - X.min(axis=0).toarray()).ravel()
        mean = np.asarray(X.mean(axis=0)).ravel()
        var = np.asarray(X.multiply(X).mean(axis=0)).ravel() - mean**2
        candidates = np.flatnonzero(spread > 0)
        order = candidates[np.argsort(-var[candidates], kind="stable")][: cfg.max_features_per_view]
        stumps = []
        for j in order:
            col = S1.column(v, int(j))
            for t in np.unique(np.quantile(col, levels)):
                if cfg.polarity == "both":
                    stumps += [Stump(v, int(j), float(t), 1), Stump(v, int(j), float(t), -1)]
                else:
                    err = np.mean(np.where(col > t, 1, -1) != S1.labels)
                    stumps.append(Stump(v, int(j), float(t), 1 if err <= 0.5 else -1))
        if not stumps:
            warnings.warn(f"view {v} is constant on the pool sample; emitting one constant stump",
                          DegenerateViewWarning, stacklevel=2)
            degenerate.append(v)
            stumps = [Stump(v, 0, float(S1.column(v, 0)[0]), 1)]
        per_view.append(tuple(stumps))
    return VoterPool(tuple(per_view), tuple(degenerate))


class _Objective:
    """Empirical C-bound and Gibbs risk as functions of the joint voter weights.

    Points whose mean margin ``mu1`` is not above ``min_margin`` (in particular
    any point with Gibbs risk >= 1/2) score 1.0, the vacuous value.
    """

    def __init__(self, votes: list[np.ndarray], y: np.ndarray, min_margin: float = 0.0):
        self.min_margin = min_margin
        self.H = np.hstack(votes)
        self.y = y.astype(np.float64)
        self.m = y.shape[0]
        self.a = self.H.T @ self.y / self.m
        self.risk = (1.0 - self.a) / 2.0

    def moments(self, w):
        M = self.H @ w
        return M, float(self.y @ M) / self.m, float(M @ M) / self.m

    def cbound(self, w) -> float:
        _, mu1, mu2 = self.moments(w)
        if mu1 <= 0 or mu2 <= 0 or mu1 < self.min_margin:
            return 1.0
        return max(0.0, 1.0 - mu1 * mu1 / mu2)

    def cbound_grad(self, w) -> np.ndarray:
        M, mu1, mu2 = self.moments(w)
        b = 2.0 * (self.H.T @ M) / self.m
        return -(2.0 * mu1 * mu2 * self.a - mu1 * mu1 * b) / (mu2 * mu2)

    def gibbs(self, w) -> float:
        return float(self.risk @ w)

    def gibbs_grad(self, w) -> np.ndarray:
        return self.risk


def _eg_step(p: np.ndarray, g: np.ndarray, eta: float) -> np.ndarray:
    support = p > 0
    e = np.where(support, -eta * g, -np.inf)
    e -= e[support].max()
    out = np.where(support, p * np.exp(e), 0.0)
    return out / out.sum()


class _Hierarchy:
    def __init__(self, rho, qs):
        self.rho = np.array(rho, dtype=np.float64)
        self.qs = [np.array(q, dtype=np.float64) for q in qs]

    def joint(self):
        return np.concatenate([r * q for r, q in zip(self.rho, self.qs)])

    def step(self, gw, eta, offsets):
        parts = [gw[a:b] for a, b in zip(offsets[:-1], offsets[1:])]
        g_rho = np.array([q @ g for q, g in zip(self.qs, parts)])
        rho = _eg_step(self.rho, g_rho, eta)
        qs = [_eg_step(q, r * g, eta) for q, r, g in zip(self.qs, self.rho, parts)]
        return _Hierarchy(rho, qs)

    def to_distribution(self):
        return HierarchicalDistribution(Categorical.normalized(self.rho), tuple(Categorical.normalized(q) for q in self.qs))


def learn_posterior(pool: VoterPool, S2: MultiviewSample, prior: HierarchicalDistribution,
                    cfg: TrainConfig) -> LearnResult:
    """Second-level weighting. The trace holds the empirical C-bound (1.0 while vacuous).

    ``cbound-minimize`` starting from a vacuous point (Gibbs risk >= 1/2, e.g. a
    uniform prior over a pool closed under negation) first takes Gibbs-risk
    descent steps until the C-bound is defined. ``cfg.min_margin`` > 0 plays the
    role of a required margin level: the warm-up continues until the mean margin
    reaches it and later steps may not go below it.
    """
    validate_hierarchy(prior, pool)
    if S2.m == 0:
        raise EmptySample("cannot learn a posterior from an empty sample")
    if cfg.optimizer == "uniform":
        dist = uniform_hierarchy(pool)
        obj = _Objective(pool.votes(S2), S2.labels)
        return LearnResult(dist, (obj.cbound(dist.joint()),), 0)

    obj = _Objective(pool.votes(S2), S2.labels, cfg.min_margin)
    offsets = np.concatenate([[0], np.cumsum(pool.sizes)])
    state = _Hierarchy(prior.hyper.weights, [q.weights for q in prior.per_view])
    w = state.joint()
    risk_only = cfg.optimizer == "risk-minimize"
    phase = "risk" if risk_only or obj.cbound(w) >= 1.0 else "cbound"
    value = obj.gibbs(w) if phase == "risk" else obj.cbound(w)
    trace = [obj.gibbs(w) if risk_only else obj.cbound(w)]
    warmup = 0
    steps = 0
    for _ in range(cfg.max_iters):
        gw = obj.gibbs_grad(w) if phase == "risk" else obj.cbound_grad(w)
        f = obj.gibbs if phase == "risk" else obj.cbound
        eta = cfg.learning_rate
        accepted = None
        for _ in range(MAX_BACKTRACKS + 1):
            cand = state.step(gw, eta, offsets)
            cw = cand.joint()
            new_value = f(cw)
            if new_value < value:
                accepted = cand
                break
            eta *= 0.5
        if accepted is None:
            break
        steps += 1
        decrease = value - new_value
        state, w, value = accepted, cw, new_value
        trace.append(value if risk_only or phase == "cbound" else obj.cbound(w))
        if phase == "risk" and not risk_only:
            warmup += 1
            if obj.cbound(w) < 1.0:
                phase, value = "cbound", obj.cbound(w)
            continue
        if decrease < cfg.tol:
            break
    nonfinite = not risk_only and phase == "risk"
    return LearnResult(state.to_distribution(), tuple(trace), steps, warmup, nonfinite)


def load_prior(path, pool: VoterPool) -> HierarchicalDistribution:
    """Read a prior written as ``hyper w...`` then one ``view v w...`` line per view."""
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    dist = _parse_weights(lines, 0, pool.n_views, str(path))[0]
    validate_hierarchy(dist, pool)
    return dist


def train(S: MultiviewSample, cfg: TrainConfig = TrainConfig()) -> FusionModel:
    S1, S2 = split_sample(S, cfg.split_ratio, cfg.seed)
    pool = build_pool(S1, cfg)
    prior = load_prior(cfg.prior_path, pool) if cfg.prior_path else uniform_hierarchy(pool)
    fit = learn_posterior(pool, S2, prior, cfg)
    profile = profile_from_votes(fit.posterior, pool.votes(S2), S2.labels)
    report = full_report(BoundInputs(profile, kl_budget(fit.posterior, prior), S2.m, cfg.delta), cfg.catoni_grid)
    return FusionModel(pool, fit.posterior, prior, profile, report, fit.trace, fit.nonfinite_objective)


def evaluate(model: FusionModel, T: MultiviewSample) -> Metrics:
    if T.m == 0:
        raise EmptySample("cannot evaluate on an empty sample")
    profile = profile_from_votes(model.posterior, model.pool.votes(T), T.labels)
    pred = majority_vote_predict(model.posterior, model.pool, T)
    tp = int(np.sum((pred == 1) & (T.labels == 1)))
    fp = int(np.sum((pred == 1) & (T.labels == -1)))
    fn = int(np.sum((pred == -1) & (T.labels == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics(
        accuracy=1.0 - profile.majority_vote_risk,
        f1=f1,
        precision=precision,
        recall=recall,
        gibbs_risk=profile.gibbs_risk,
        disagreement=profile.disagreement,
        joint_error=profile.joint_error,
        majority_vote_risk=profile.majority_vote_risk,
        zero_margin_count=profile.zero_margin_count,
        m=T.m,
    )


def _fmt(x: float) -> str:
    return "%.17g" % x


def _weights_lines(dist: HierarchicalDistribution) -> list[str]:
    out = ["hyper " + " ".join(_fmt(w) for w in dist.hyper.weights)]
    out += [f"view {v} " + " ".join(_fmt(w) for w in q.weights) for v, q in enumerate(dist.per_view)]
    return out


def _parse_weights(lines, start, n_views, where):
    try:
        if lines[start][0] != "hyper":
            raise ParseError(where, start + 1, 1, "expected a 'hyper' line")
        hyper = Categorical([float(t) for t in lines[start][1:]])
        qs = []
        for v in range(n_views):
            row = lines[start + 1 + v]
            if row[0] != "view" or int(row[1]) != v:
                raise ParseError(where, start + 2 + v, 1, f"expected 'view {v}'")
            qs.append(Categorical([float(t) for t in row[2:]]))
    except (IndexError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(where, start + 1, 1, f"malformed weights: {exc}") from None
    return HierarchicalDistribution(hyper, tuple(qs)), start + 1 + n_views


def save_model(model: FusionModel, path) -> None:
    lines = [MODEL_HEADER, f"views {model.pool.n_views}", "sizes " + " ".join(map(str, model.pool.sizes)), "pool"]
    lines += [f"{h.view} {h.feature} {_fmt(h.threshold)} {h.polarity}" for h in model.pool]
    lines += ["posterior", *_weights_lines(model.posterior), "prior", *_weights_lines(model.prior), "end"]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path) -> FusionModel:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or text[0].strip() != MODEL_HEADER:
        found = text[0].strip() if text else "<empty file>"
        raise ModelVersionMismatch(f"{path}: expected header {MODEL_HEADER!r}, found {found!r}")
    rows = [ln.split() for ln in text]
    where = str(path)
    try:
        V = int(rows[1][1])
        sizes = [int(t) for t in rows[2][1:]]
        if rows[1][0] != "views" or rows[2][0] != "sizes" or len(sizes) != V or rows[3] != ["pool"]:
            raise ParseError(where, 2, 1, "malformed model preamble")
        k = 4
        per_view = []
        for v in range(V):
            hs = []
            for _ in range(sizes[v]):
                view, feat, thr, pol = rows[k]
                hs.append(Stump(int(view), int(feat), float(thr), int(pol)))
                k += 1
            per_view.append(tuple(hs))
    except (IndexError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(where, 0, 0, f"malformed pool section: {exc}") from None
    pool = VoterPool(tuple(per_view))
    if rows[k] != ["posterior"]:
        raise ParseError(where, k + 1, 1, "expected 'posterior'")
    posterior, k = _parse_weights(rows, k + 1, V, where)
    if rows[k] != ["prior"]:
        raise ParseError(where, k + 1, 1, "expected 'prior'")
    prior, k = _parse_weights(rows, k + 1, V, where)
    return FusionModel(pool, posterior, prior)
