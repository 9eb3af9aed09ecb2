import numpy as np
import pytest

from datamarket.scenarios import (
    ClassificationScenario,
    LossUtility,
    RegressionScenario,
    corrupt_labels,
    default_beta_schedule,
    gen_corrupted_classification,
    gen_mixture_regression,
    gradient_oracle,
    local_sgd_oracle,
    regression_utility,
    softmax_xent,
    softmax_xent_grad,
    squared_loss,
    squared_loss_grad,
)
from oracles import central_difference


# ------------------------------------------------------ mixture regression ---

def test_group_parameters_lie_in_their_bands():
    sc = gen_mixture_regression(20, 30, 5, K_groups=4, seed=0)
    for k in range(4):
        assert np.all(sc.true_params[k] >= 0.5 * k) and np.all(sc.true_params[k] <= 0.5 * (k + 1))
    assert sc.groups[0] == 0
    np.testing.assert_array_equal(sc.consumer_param, sc.true_params[0])


def test_single_group_providers_share_consumer_model():
    sc = gen_mixture_regression(6, 4, 400, K_groups=1, seed=1, noise_std=0.0)
    assert np.all(sc.groups == 0)
    w = np.zeros(4)
    for o in sc.oracles():
        g = o.update(w)
        assert g @ (sc.consumer_param - w) > 0


def test_desk_scale_group_fraction():
    n = 40
    frac = np.mean(gen_mixture_regression(n, 50, 25, 4, seed=17).provider_groups == 0)
    assert abs(frac - 0.25) <= 3 * np.sqrt(0.25 * 0.75 / n)


def test_mixture_generation_is_deterministic():
    a = gen_mixture_regression(5, 3, 7, 2, seed=9)
    b = gen_mixture_regression(5, 3, 7, 2, seed=9)
    assert a.to_json() == b.to_json()
    c = gen_mixture_regression(5, 3, 7, 2, seed=10)
    assert a.to_json() != c.to_json()


def test_regression_json_roundtrip():
    sc = gen_mixture_regression(4, 3, 6, 2, seed=3, holdout_size=9)
    back = RegressionScenario.from_json(sc.to_json())
    assert back.to_json() == sc.to_json()
    np.testing.assert_array_equal(back.groups, sc.groups)
    for X1, X2 in zip(back.X, sc.X):
        np.testing.assert_array_equal(X1, X2)
    with pytest.raises(ValueError):
        ClassificationScenario.from_json(sc.to_json())


def test_invalid_regression_sizes():
    with pytest.raises(ValueError):
        gen_mixture_regression(0, 3, 5)
    with pytest.raises(ValueError):
        gen_mixture_regression(3, 3, 5, K_groups=2, consumer_group=2)


def test_matching_group_oracles_point_to_consumer_parameter():
    sc = gen_mixture_regression(30, 5, 2000, K_groups=3, seed=4, noise_std=0.0)
    rng = np.random.default_rng(0)
    for _ in range(5):
        w = rng.normal(size=5)
        for i, o in enumerate(sc.oracles(), start=1):
            if sc.groups[i] == sc.groups[0]:
                assert o.update(w) @ (sc.consumer_param - w) > 0


# --------------------------------------------------------------- oracles ---

def test_gradient_oracle_zero_at_optimum():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(20, 3))
    w_true = np.array([1.0, -2.0, 0.5])
    o = gradient_oracle(X, X @ w_true)
    np.testing.assert_allclose(o.update(w_true), 0.0, atol=1e-12)


def test_gradient_oracle_single_sample():
    o = gradient_oracle(np.array([[1.0, 0.0]]), np.array([2.0]))
    np.testing.assert_allclose(o.update(np.zeros(2)), [2.0, 0.0])


def test_gradient_oracle_matches_finite_differences():
    rng = np.random.default_rng(2)
    X, y = rng.normal(size=(15, 4)), rng.normal(size=15)
    w = rng.normal(size=4)
    fd = central_difference(lambda v: -squared_loss(v, X, y), w)
    np.testing.assert_allclose(gradient_oracle(X, y).update(w), fd, rtol=1e-5)


def test_softmax_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    X, y, C = rng.normal(size=(12, 3)), rng.integers(0, 4, size=12), 4
    w = rng.normal(size=(3 + 1) * C)
    fd = central_difference(lambda v: softmax_xent(v, X, y, C), w)
    np.testing.assert_allclose(softmax_xent_grad(w, X, y, C), fd, rtol=1e-5, atol=1e-9)


def test_local_sgd_zero_rate_is_zero_update():
    rng = np.random.default_rng(4)
    X, y = rng.normal(size=(10, 3)), rng.normal(size=10)
    o = local_sgd_oracle(X, y, 0.0, 5)
    np.testing.assert_array_equal(o.update(rng.normal(size=3), np.random.default_rng(0)), 0.0)


def test_local_sgd_full_batch_is_one_gradient_step():
    rng = np.random.default_rng(5)
    X, y = rng.normal(size=(10, 3)), rng.normal(size=10)
    w = rng.normal(size=3)
    o = local_sgd_oracle(X, y, 0.05, 10)
    np.testing.assert_allclose(o.update(w, np.random.default_rng(1)), -0.05 * squared_loss_grad(w, X, y),
                               rtol=1e-12)


def test_local_sgd_two_minibatches_replay():
    rng = np.random.default_rng(6)
    X, y = rng.normal(size=(8, 3)), rng.normal(size=8)
    w = rng.normal(size=3)
    lr = 0.1
    out = local_sgd_oracle(X, y, lr, 4).update(w, np.random.default_rng(42))

    # replay: same shuffle, two hand-coded steps on the halves
    perm = np.random.default_rng(42).permutation(8)
    first, second = perm[:4], perm[4:]
    v = w.copy()
    for idx in (first, second):
        Xb, yb = X[idx], y[idx]
        grad = sum((Xb[j] @ v - yb[j]) * Xb[j] for j in range(4)) / 4
        v = v - lr * grad
    np.testing.assert_allclose(out, v - w, rtol=1e-12)


def test_local_sgd_rejects_bad_sizes():
    with pytest.raises(ValueError):
        local_sgd_oracle(np.zeros((3, 2)), np.zeros(3), 0.1, 4)
    with pytest.raises(ValueError):
        local_sgd_oracle(np.zeros((0, 2)), np.zeros(0), 0.1, 1)


# ------------------------------------------------------------- utility ---

def test_exp_utility_values():
    u = LossUtility(lambda w: float(w[0]), tau=2.0)
    assert u.evaluate(np.array([0.0])) == 1.0
    assert u.evaluate(np.array([2.0])) == pytest.approx(np.exp(-1), rel=1e-15)


def test_affine_utility_clips():
    u = LossUtility(lambda w: float(w[0]), tau=4.0, squash="affine")
    assert u.evaluate(np.array([1.0])) == 0.75
    assert u.evaluate(np.array([10.0])) == 0.0


def test_regression_utility_is_monotone_in_loss():
    rng = np.random.default_rng(7)
    X, y = rng.normal(size=(30, 4)), rng.normal(size=30)
    u = regression_utility(X, y, tau=3.0)
    for _ in range(100):
        a, b = rng.normal(size=4), rng.normal(size=4)
        la, lb = squared_loss(a, X, y), squared_loss(b, X, y)
        if la < lb:
            assert u.evaluate(a) > u.evaluate(b)
        assert 0 < u.evaluate(a) <= 1


def test_utility_rejects_bad_tau():
    with pytest.raises(ValueError):
        LossUtility(lambda w: 0.0, tau=0.0)


# ------------------------------------------------ label corruption ---

def test_default_schedule_tiers():
    beta = default_beta_schedule(100)
    assert np.all(beta[:10] == 0) and np.all(beta[10:20] == 20)
    assert np.all(beta[20:30] == 50) and np.all(beta[30:] == 90)


def test_no_corruption_keeps_labels():
    sc = gen_corrupted_classification(4, 30, 3, 3, [0, 0, 0, 0], seed=1)
    for l, c in zip(sc.labels, sc.clean_labels):
        np.testing.assert_array_equal(l, c)


def test_full_corruption_changes_every_label():
    sc = gen_corrupted_classification(3, 30, 3, 4, [100, 100, 100], seed=2)
    for l, c in zip(sc.labels, sc.clean_labels):
        assert np.all(l != c)


def test_half_corruption_exact_count():
    labels = np.random.default_rng(0).integers(0, 5, size=200)
    out = corrupt_labels(labels, 50, 5, np.random.default_rng(1))
    assert np.count_nonzero(out != labels) == 100


def test_corruption_count_is_floor():
    rng = np.random.default_rng(3)
    beta = rng.uniform(0, 100, size=12)
    sc = gen_corrupted_classification(12, 37, 2, 3, beta, seed=3)
    for b, l, c in zip(beta, sc.labels, sc.clean_labels):
        assert np.count_nonzero(l != c) == int(np.floor(b * 37 / 100))


def test_classification_schedule_validation():
    with pytest.raises(ValueError):
        gen_corrupted_classification(3, 10, 2, 2, [0, 0])
    with pytest.raises(ValueError):
        gen_corrupted_classification(2, 10, 2, 2, [0, 120])


def test_classification_json_roundtrip_and_determinism():
    a = gen_corrupted_classification(3, 10, 2, 3, [0, 50, 90], seed=5, holdout_size=7, test_size=6)
    b = gen_corrupted_classification(3, 10, 2, 3, [0, 50, 90], seed=5, holdout_size=7, test_size=6)
    assert a.to_json() == b.to_json()
    back = ClassificationScenario.from_json(a.to_json())
    assert back.to_json() == a.to_json()


def test_clean_provider_oracle_improves_holdout():
    sc = gen_corrupted_classification(2, 200, 4, 3, [0, 0], seed=6, class_sep=2.0)
    util = sc.utility(tau=1.0)
    w = sc.initial_params()
    g = sc.oracles(0.5, 20)[0].update(w, np.random.default_rng(0))
    assert util.evaluate(w + g) > util.evaluate(w)
    assert sc.accuracy(w + g) > 1 / 3
