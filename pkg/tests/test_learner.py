import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import greedy_cover, krr_objective_minimizer, loss_table, naive_kernel, objective_gradient
from stratsched.errors import DimensionMismatch, EmptyModel, TooFewSamples
from stratsched.learner import (
    LearnParams,
    PredictionModel,
    build_models,
    clamped_predict,
    cross_validate,
    cv_loss_table,
    fit_weights,
    fold_indices,
    gaussian_kernel,
    global_best_strategy,
    kernel_matrix,
    raw_predict,
    select_start_strategies,
    solved_times,
    train_model,
)
from stratsched.runner import RunRecord


def test_kernel_examples():
    assert gaussian_kernel([1.5, -2.0], [1.5, -2.0], 0.3) == 1.0
    assert gaussian_kernel([0], [1], 1.0) == pytest.approx(math.exp(-1), abs=1e-12)
    assert gaussian_kernel([0, 0], [3, 4], 5.0) == pytest.approx(math.exp(-1))
    rng = np.random.default_rng(1)
    for _ in range(20):
        x, y = rng.normal(size=4), rng.normal(size=4)
        assert gaussian_kernel(x, y, 0.7) == gaussian_kernel(y, x, 0.7)
    with pytest.raises(DimensionMismatch):
        gaussian_kernel([0, 1], [0], 1.0)


def test_kernel_matrix_examples():
    assert kernel_matrix(np.array([[0.3, 0.2]]), 2.0).tolist() == [[1.0]]
    assert kernel_matrix(np.array([[1.0, 2.0], [1.0, 2.0]]), 0.5).tolist() == [[1.0, 1.0], [1.0, 1.0]]
    X = np.random.default_rng(2).random((10, 4))
    K = kernel_matrix(X, 0.8)
    assert np.linalg.eigvalsh(K).min() >= -1e-8
    assert np.allclose(K, naive_kernel(X, 0.8), atol=1e-14)
    Z = np.random.default_rng(3).random((3, 4))
    assert np.allclose(kernel_matrix(X, 0.8, Z),
                       [[gaussian_kernel(x, z, 0.8) for z in Z] for x in X], atol=1e-15)


def test_fit_weights_scalar():
    assert fit_weights(np.array([[1.0]]), np.array([4.0]), 1.0)[0] == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(ValueError):
        fit_weights(np.array([[1.0]]), np.array([4.0]), 0.0)


def test_fit_weights_huge_regularizer():
    rng = np.random.default_rng(4)
    K = kernel_matrix(rng.random((5, 3)), 1.0)
    Y = rng.random(5) * 10
    A = fit_weights(K, Y, 1e9)
    assert np.abs(A).max() < 1e-6 * np.abs(Y).max()


@pytest.mark.parametrize("seed", range(5))
def test_fit_weights_matches_objective_minimizer(seed):
    rng = np.random.default_rng(seed)
    K = kernel_matrix(rng.random((5, 3)) * 3, 1.0)
    Y = rng.random(5) * 10
    for lam in (0.01, 0.1, 1.0):
        A = fit_weights(K, Y, lam)
        assert np.abs(A - krr_objective_minimizer(K, Y, lam)).max() <= 1e-6
        assert np.abs(objective_gradient(K, Y, A, lam)).max() <= 1e-6 * len(Y)
        assert np.linalg.eigvalsh(K + lam * np.eye(5)).min() >= lam - 1e-8


def test_interpolation_limit():
    rng = np.random.default_rng(5)
    X = rng.random((8, 3))
    Y = 1 + rng.random(8) * 5
    model = train_model("s", [f"p{i}" for i in range(8)], X, Y, sigma=0.5, lam=1e-8)
    for i in range(8):
        assert raw_predict(model, X[i]) == pytest.approx(Y[i], rel=1e-3)


def test_raw_predict_at_training_points():
    rng = np.random.default_rng(6)
    X = rng.random((12, 4))
    model = train_model("s", [str(i) for i in range(12)], X, rng.random(12), 1.0, 0.1)
    KA = kernel_matrix(X, 1.0) @ model.A
    for i in range(12):
        assert raw_predict(model, X[i]) == pytest.approx(KA[i], abs=1e-12)
    single = train_model("s", ["p"], X[:1], np.array([3.0]), 1.0, 1e-3)
    assert raw_predict(single, X[0]) == pytest.approx(3.0 / (1 + 1e-3))
    with pytest.raises(DimensionMismatch):
        raw_predict(model, [0.0])


def _constant_raw(raw: float, Y, min_training_size=5) -> PredictionModel:
    # one training row at the origin, so the prediction at the origin is A[0]
    m = len(Y)
    X = np.zeros((m, 1))
    A = np.zeros(m)
    A[0] = raw
    return PredictionModel("s", tuple(map(str, range(m))), X, np.asarray(Y, float), A, 1.0, 1.0,
                           float(min(Y)), float(max(Y)), min_training_size)


def test_clamp_examples():
    m20 = _constant_raw(0.1, [0.5] + [3.0] * 19)
    assert clamped_predict(m20, [0.0]) == 0.5
    m3 = _constant_raw(0.1, [1.0, 12.0, 4.0])
    for x in ([0.0], [5.0], [-100.0]):
        assert clamped_predict(m3, x) == 12.0
    raw2 = _constant_raw(2.0, [1.0] * 10)
    assert clamped_predict(raw2, [0.0], speed_ratio=1.5, min_run_time=0.1) == 3.0
    assert clamped_predict(raw2, [0.0], speed_ratio=0.01, min_run_time=0.1) == 0.1
    empty = PredictionModel("s", (), np.zeros((0, 1)), np.zeros(0), np.zeros(0), 1, 1, 0, 0)
    with pytest.raises(EmptyModel):
        clamped_predict(empty, [0.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_clamp_bounds(m, seed):
    rng = np.random.default_rng(seed)
    X = rng.random((m, 3))
    Y = 0.5 + rng.random(m) * 10
    model = train_model("s", [str(i) for i in range(m)], X, Y, 0.3, 0.01)
    for q in rng.normal(size=(20, 3)) * 2:
        t = clamped_predict(model, q)
        if m < 5:
            assert t == Y.max()
        else:
            assert t >= Y.min()


def test_fold_indices_partition():
    for m, folds in [(10, 10), (23, 10), (40, 7)]:
        parts = fold_indices(m, folds, seed=3)
        assert len(parts) == folds
        assert sorted(np.concatenate(parts).tolist()) == list(range(m))
        sizes = [len(p) for p in parts]
        assert max(sizes) - min(sizes) <= 1
    assert all(np.array_equal(a, b) for a, b in zip(fold_indices(23, 10, 1), fold_indices(23, 10, 1)))


def test_cross_validate_examples():
    X = np.random.default_rng(7).random((12, 2))
    Y = np.arange(12.0)
    assert cross_validate(X, Y, [0.3], [2.0]) == (0.3, 2.0)
    assert cross_validate(X[:5], Y[:5], [0.1, 1], [1, 2], enabled=False) == (0.1, 1)
    with pytest.raises(TooFewSamples):
        cross_validate(X[:5], Y[:5], [0.1], [1.0], folds=10)


def test_cross_validate_exhaustive_oracle():
    rng = np.random.default_rng(8)
    X = rng.random((30, 2))
    lam0, sigma0 = 0.1, 0.5
    A0 = rng.normal(size=30)
    Y = kernel_matrix(X, sigma0) @ A0  # noise-free data from a model in the grid
    lams, sigmas = [0.001, 0.1, 10.0], [0.1, 0.5, 2.0]
    table = loss_table(X, Y, lams, sigmas, fold_indices(30, 5, seed=0))
    assert np.allclose(cv_loss_table(X, Y, lams, sigmas, 5, seed=0), table, rtol=1e-8, atol=1e-12)
    lam, sigma = cross_validate(X, Y, lams, sigmas, folds=5, seed=0)
    assert table[lams.index(lam), sigmas.index(sigma)] <= table.min() + 1e-8
    assert lam0 in lams and sigma0 in sigmas


def test_cross_validate_tie_prefers_small_lambda_then_sigma():
    X = np.zeros((10, 1))
    Y = np.zeros(10)  # every grid pair has zero loss
    assert cross_validate(X, Y, [1.0, 0.1], [5.0, 0.5], folds=5) == (0.1, 0.5)


def test_start_strategies_example():
    solved = {"s1": {"a": 0.1, "b": 0.1, "c": 0.1}, "s2": {"c": 0.1, "d": 0.1},
              "s3": {"d": 0.1, "e": 0.1}}
    assert select_start_strategies(solved, 2, 1.0) == [("s1", 1.0), ("s3", 1.0)]
    assert select_start_strategies(solved, 0, 1.0) == []
    # stops once nothing new is covered
    assert [s for s, _ in select_start_strategies(solved, 10, 1.0)] == ["s1", "s3"]
    # only runs within start_time count
    slow = {"s1": {"a": 5.0, "b": 5.0}, "s2": {"c": 0.5}}
    assert select_start_strategies(slow, 2, 1.0) == [("s2", 1.0)]


def test_start_strategy_tie_breaks():
    solved = {"b": {"x": 0.2}, "a": {"y": 0.2}, "c": {"z": 0.1}}
    assert [s for s, _ in select_start_strategies(solved, 3, 1.0)] == ["c", "a", "b"]


@settings(max_examples=100, deadline=None)
@given(st.dictionaries(st.sampled_from([f"s{i}" for i in range(6)]),
                       st.dictionaries(st.sampled_from(list("abcdefgh")),
                                       st.sampled_from([0.1, 0.5, 1.0, 2.0, 4.0]), max_size=6),
                       max_size=6),
       st.integers(0, 6), st.sampled_from([0.5, 1.0, 2.0]))
def test_start_strategies_match_greedy_oracle(solved, n, start_time):
    got = select_start_strategies(solved, n, start_time)
    assert [s for s, _ in got] == greedy_cover(solved, n, start_time)
    assert all(t == start_time for _, t in got)


def test_solved_times_and_global_best():
    recs = [RunRecord("p", "s1", True, 3.0, 10), RunRecord("p", "s1", True, 2.0, 5),
            RunRecord("q", "s1", False, 10.0, 10), RunRecord("q", "s2", True, 1.0, 10),
            RunRecord("p", "s2", True, 4.0, 10)]
    assert solved_times(recs) == {"s1": {"p": 2.0}, "s2": {"q": 1.0, "p": 4.0}}
    assert global_best_strategy(solved_times(recs)) == "s2"
    assert global_best_strategy({}) is None


PARAMS = LearnParams((0.01, 0.1, 1.0), (0.5, 1.0, 2.0), cv_folds=3)


def test_build_models_bias_and_start_cover():
    problems = [f"p{i}" for i in range(6)]
    feats = {p: np.array([i / 5.0]) for i, p in enumerate(problems)}
    solved = {"start": {"p0": 0.5, "p1": 0.5},
              "covered": {"p0": 3.0, "p1": 2.0},
              "other": {p: 2.0 for p in problems}}
    schedule = [("start", 1.0)]
    params = LearnParams((0.1,), (1.0,), cv_folds=3, cpu_bias=1.0)
    models = build_models(["covered", "other", "start"], problems, solved, feats, schedule, params)
    assert "covered" not in models and "start" not in models
    assert models["other"].train_ids == ("p2", "p3", "p4", "p5")
    assert models["other"].Y.tolist() == [3.0] * 4
    assert models["other"].min_time == models["other"].max_time == 3.0


def test_build_models_set_algebra_oracle():
    rng = np.random.default_rng(9)
    problems = [f"p{i:02d}" for i in range(30)]
    feats = {p: rng.random(3) for p in problems}
    solved = {sid: {p: float(rng.choice([0.3, 0.8, 2.0, 6.0])) for p in problems if rng.random() < 0.6}
              for sid in ("s0", "s1", "s2", "s3")}
    schedule = select_start_strategies(solved, 1, 1.0)
    models = build_models(sorted(solved), problems, solved, feats, schedule, PARAMS, cores=2)
    start_cover = {p for sid, t in schedule for p, rt in solved[sid].items() if rt <= t}
    for sid in solved:
        expected = sorted(set(solved[sid]) - start_cover)
        if expected:
            assert list(models[sid].train_ids) == expected
            assert models[sid].Y.tolist() == [solved[sid][p] for p in expected]
        else:
            assert sid not in models
    assert build_models(sorted(solved), problems, solved, feats, schedule, PARAMS, cores=1).keys() \
        == models.keys()


def test_model_dict_round_trip():
    rng = np.random.default_rng(10)
    model = train_model("s", ["a", "b", "c"], rng.random((3, 2)), rng.random(3), 0.7, 0.3, 2)
    back = PredictionModel.from_dict(model.to_dict())
    for q in rng.random((10, 2)):
        assert raw_predict(back, q) == raw_predict(model, q)
    assert back.min_training_size == 2 and back.lam == 0.3
