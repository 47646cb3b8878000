from __future__ import annotations

import numpy as np
import pytest

from mvpb.dataio import SynthConfig, synth_population
from mvpb.errors import DegenerateViewWarning, ModelVersionMismatch, ParseError, TooFewExamples
from mvpb.fusion import (
    FusionModel,
    TrainConfig,
    _Objective,
    build_pool,
    evaluate,
    learn_posterior,
    load_model,
    load_prior,
    save_model,
    split_sample,
    train,
)
from mvpb.hierarchy import Stump, VoterPool, uniform_hierarchy, validate_hierarchy

from conftest import hier, sample


def empirical_cbound(model):
    """Empirical C-bound on S2, with the vacuous case read as 1."""
    c = model.train_report.intermediates["cbound_empirical"]
    return 1.0 if c is None else c


@pytest.fixture(scope="module")
def separable():
    pop = synth_population(SynthConfig(separation=10.0, noise=0.1, size=1300, seed=7))
    return pop.take(np.arange(300)), pop.take(np.arange(300, 1300))


@pytest.fixture(scope="module")
def noisy():
    return synth_population(SynthConfig(separation=1.5, noise=1.0, flip_noise=0.1, size=400, seed=3))


def test_split_sizes_and_stratification():
    y = np.array([1] * 70 + [-1] * 30)
    S = sample([np.arange(100.0)[:, None]], y)
    S1, S2 = split_sample(S, (0.6, 0.4), seed=1)
    assert (S1.m, S2.m) == (60, 40)
    assert abs(int((S1.labels == 1).sum()) - 42) <= 1
    T1, _ = split_sample(S, (0.6, 0.4), seed=1)
    assert np.array_equal(S1.column(0, 0), T1.column(0, 0))
    assert set(S1.column(0, 0)).isdisjoint(S2.column(0, 0))


def test_split_needs_both_classes():
    S = sample([np.arange(10.0)[:, None]], [1] * 9 + [-1])
    with pytest.raises(TooFewExamples):
        split_sample(S, (0.6, 0.4), 0)
    with pytest.raises(TooFewExamples):
        split_sample(S.take([0, 1, 2]), (0.6, 0.4), 0)


def test_pool_counts(noisy):
    one = sample([np.array([[0.0], [1.0], [2.0], [3.0]])], [1, 1, -1, -1])
    assert build_pool(one, TrainConfig(stumps_per_feature=1)).sizes == (2,)
    assert build_pool(noisy, TrainConfig()).sizes == (80, 80, 80)
    oriented = build_pool(noisy, TrainConfig(polarity="oriented"))
    assert oriented.sizes == (40, 40, 40)


def test_constant_view_is_flagged():
    S = sample([np.ones((6, 2)), np.arange(6.0)[:, None]], [1, -1, 1, -1, 1, -1])
    with pytest.warns(DegenerateViewWarning):
        pool = build_pool(S, TrainConfig())
    assert pool.degenerate_views == (0,) and pool.sizes[0] == 1


def test_cbound_gradient_matches_finite_differences(noisy):
    pool = build_pool(noisy, TrainConfig(polarity="oriented", max_features_per_view=3))
    obj = _Objective(pool.votes(noisy), noisy.labels)
    w = np.random.default_rng(0).dirichlet(np.ones(sum(pool.sizes)))
    g = obj.cbound_grad(w)
    eps = 1e-6
    for k in (0, 5, 17):
        e = np.zeros_like(w)
        e[k] = eps
        fd = (obj.cbound(w + e) - obj.cbound(w - e)) / (2 * eps)
        assert g[k] == pytest.approx(fd, rel=1e-4, abs=1e-7)


def test_uniform_optimizer_returns_uniform(noisy):
    pool = build_pool(noisy, TrainConfig())
    prior = hier([0.2, 0.3, 0.5], *[np.full(80, 1 / 80)] * 3)
    fit = learn_posterior(pool, noisy, prior, TrainConfig(optimizer="uniform"))
    assert fit.posterior == uniform_hierarchy(pool)


def test_perfect_voter_gets_the_largest_weight():
    rng = np.random.default_rng(0)
    y = rng.choice([-1, 1], size=40)
    view0 = np.column_stack([y, rng.normal(size=40), rng.normal(size=40)])
    view1 = rng.normal(size=(40, 2))
    S = sample([view0, view1], y)
    pool = VoterPool(((Stump(0, 0, 0.0), Stump(0, 1, 0.0), Stump(0, 2, 0.0)),
                      (Stump(1, 0, 0.0), Stump(1, 1, 0.0))))
    fit = learn_posterior(pool, S, uniform_hierarchy(pool), TrainConfig(max_iters=500))
    w = fit.posterior.joint()
    assert np.argmax(w) == 0 and w[0] > w[1:].max()


@pytest.mark.parametrize("optimizer", ["cbound-minimize", "risk-minimize"])
@pytest.mark.parametrize("min_margin", [0.0, 0.4])
def test_trace_non_increasing_and_posterior_valid(noisy, optimizer, min_margin):
    cfg = TrainConfig(optimizer=optimizer, min_margin=min_margin)
    model = train(noisy, cfg)
    assert np.all(np.diff(model.objective_trace) <= 0.0)
    validate_hierarchy(model.posterior, model.pool)


def test_train_is_deterministic(noisy):
    a, b = train(noisy, TrainConfig(seed=4)), train(noisy, TrainConfig(seed=4))
    assert a.posterior == b.posterior and a.objective_trace == b.objective_trace


def test_separable_end_to_end(separable):
    S, T = separable
    model = train(S, TrainConfig())
    assert evaluate(model, T).majority_vote_risk < 0.1
    base = train(S, TrainConfig(optimizer="uniform"))
    assert empirical_cbound(model) <= empirical_cbound(base)


def test_min_margin_gives_non_vacuous_cbound(separable):
    S, _ = separable
    rep = train(S, TrainConfig(min_margin=0.5)).train_report
    assert rep.cbound_upper is not None and rep.cbound_upper < 1.0


def test_factor2_on_evaluation_sets(noisy, separable):
    model = train(noisy, TrainConfig())
    for T in (noisy, separable[1]):
        assert evaluate(model, T).factor2_holds


def _fixed_model(pred):
    S = sample([np.array(pred, dtype=float)[:, None]], [1] * len(pred))
    pool = VoterPool(((Stump(0, 0, 0.0),),))
    dist = uniform_hierarchy(pool)
    return FusionModel(pool, dist, dist), S


def test_f1_hand_fixture():
    model, _ = _fixed_model([1, 1, 1, 1, -1, -1, -1])
    T = sample([np.array([1, 1, 1, 1, -1, -1, -1], dtype=float)[:, None]], [1, 1, 1, -1, 1, 1, -1])
    m = evaluate(model, T)
    assert (m.precision, m.recall) == (0.75, 0.6)
    assert m.f1 == pytest.approx(2 / 3, abs=1e-5)


def test_f1_zero_when_nothing_predicted_positive():
    model, _ = _fixed_model([-1, -1, -1])
    T = sample([np.array([-1.0, -1.0, -1.0])[:, None]], [1, -1, 1])
    assert evaluate(model, T).f1 == 0.0


def test_perfect_model_metrics():
    model, _ = _fixed_model([1, -1])
    T = sample([np.array([[1.0], [-1.0], [2.0]])], [1, -1, 1])
    m = evaluate(model, T)
    assert m.accuracy == 1.0 and m.f1 == 1.0


def test_model_round_trip(tmp_path, noisy):
    model = train(noisy, TrainConfig(max_iters=20))
    save_model(model, tmp_path / "m")
    back = load_model(tmp_path / "m")
    assert back.posterior == model.posterior and back.prior == model.prior
    assert [tuple(v) for v in back.pool.per_view] == [tuple(v) for v in model.pool.per_view]
    save_model(back, tmp_path / "m2")
    assert (tmp_path / "m").read_bytes() == (tmp_path / "m2").read_bytes()


def test_model_header_and_body_errors(tmp_path, noisy):
    save_model(train(noisy, TrainConfig(max_iters=5)), tmp_path / "m")
    text = (tmp_path / "m").read_text()
    (tmp_path / "bad").write_text(text.replace("mvpb-model v1", "mvpb-model v9", 1))
    with pytest.raises(ModelVersionMismatch):
        load_model(tmp_path / "bad")
    (tmp_path / "trunc").write_text(text[: len(text) // 2])
    with pytest.raises(ParseError):
        load_model(tmp_path / "trunc")


def test_load_prior(tmp_path):
    pool = VoterPool(((Stump(0, 0, 0.0), Stump(0, 0, 1.0)), (Stump(1, 0, 0.0),)))
    (tmp_path / "p").write_text("hyper 0.25 0.75\nview 0 0.5 0.5\nview 1 1\n")
    assert load_prior(tmp_path / "p", pool) == hier([0.25, 0.75], [0.5, 0.5], [1.0])
