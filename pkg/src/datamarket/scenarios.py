"""Synthetic markets: mixture linear regression and label-corrupted classification.

Both generators return immutable scenario objects holding every provider's
data plus the consumer's hold-out set; oracle and utility constructors turn
them into the callables the market loop consumes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import rng as rngs

SCHEMA_VERSION = 1


# ---------------------------------------------------------------- losses ---

def squared_loss(w, X, y) -> float:
    r = y - X @ w
    return float(r @ r) / (2 * len(y))


def squared_loss_grad(w, X, y) -> np.ndarray:
    return X.T @ (X @ w - y) / len(y)


def _logits(w, X, n_classes):
    W = w.reshape(X.shape[1] + 1, n_classes)
    return X @ W[:-1] + W[-1]


def softmax_xent(w, X, y, n_classes) -> float:
    z = _logits(w, X, n_classes)
    z = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    return float(np.mean(logsum - z[np.arange(len(y)), y]))


def softmax_xent_grad(w, X, y, n_classes) -> np.ndarray:
    z = _logits(w, X, n_classes)
    z = z - z.max(axis=1, keepdims=True)
    P = np.exp(z)
    P /= P.sum(axis=1, keepdims=True)
    P[np.arange(len(y)), y] -= 1.0
    P /= len(y)
    Xb = np.hstack([X, np.ones((len(y), 1))])
    return (Xb.T @ P).ravel()


# --------------------------------------------------------------- oracles ---

class GradientOracle:
    """Negative full gradient of the provider's mean squared loss."""

    def __init__(self, X, y):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        if len(self.y) == 0:
            raise ValueError("empty dataset")

    def update(self, w, rng=None):
        return -squared_loss_grad(w, self.X, self.y)


class LocalSGDOracle:
    """One or more epochs of minibatch SGD from ``w``; returns ``w_plus - w``.

    Minibatches partition a shuffled copy of the dataset (last batch may be
    short); the shuffle comes from the per-call substream.
    """

    def __init__(self, X, y, local_lr: float, minibatch_size: int, epochs: int = 1,
                 grad: Callable = squared_loss_grad):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y)
        if len(self.y) == 0:
            raise ValueError("empty dataset")
        if not 1 <= minibatch_size <= len(self.y):
            raise ValueError("minibatch_size must lie in [1, dataset size]")
        self.local_lr = local_lr
        self.minibatch_size = minibatch_size
        self.epochs = epochs
        self.grad = grad

    def update(self, w, rng):
        w0 = np.asarray(w, dtype=float)
        v = w0.copy()
        m = len(self.y)
        for _ in range(self.epochs):
            perm = rng.permutation(m)
            for start in range(0, m, self.minibatch_size):
                idx = perm[start:start + self.minibatch_size]
                v = v - self.local_lr * self.grad(v, self.X[idx], self.y[idx])
        return v - w0


def gradient_oracle(X, y) -> GradientOracle:
    return GradientOracle(X, y)


def local_sgd_oracle(X, y, local_lr, minibatch_size, epochs=1, grad=squared_loss_grad) -> LocalSGDOracle:
    return LocalSGDOracle(X, y, local_lr, minibatch_size, epochs, grad)


def classification_grad(n_classes: int) -> Callable:
    return lambda w, X, y: softmax_xent_grad(w, X, y, n_classes)


# ------------------------------------------------------------- utilities ---

class LossUtility:
    """Consumer utility in [0, 1] from a hold-out loss.

    ``squash="exp"`` gives ``exp(-loss / tau)``; ``squash="affine"`` gives
    ``clip(1 - loss / tau, 0, 1)``. Both decrease with the loss.
    """

    def __init__(self, loss: Callable, tau: float, squash: str = "exp"):
        if not tau > 0:
            raise ValueError(f"tau must be positive, got {tau}")
        if squash not in ("exp", "affine"):
            raise ValueError(f"unknown squash {squash!r}")
        self.loss = loss
        self.tau = float(tau)
        self.squash = squash

    def evaluate(self, w) -> float:
        l = self.loss(w)
        if self.squash == "exp":
            return float(np.exp(-l / self.tau))
        return float(np.clip(1.0 - l / self.tau, 0.0, 1.0))

    __call__ = evaluate


def regression_utility(X, y, tau: float, squash: str = "exp") -> LossUtility:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    return LossUtility(lambda w: squared_loss(w, X, y), tau, squash)


def classification_utility(X, y, n_classes: int, tau: float, squash: str = "exp") -> LossUtility:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    return LossUtility(lambda w: softmax_xent(w, X, y, n_classes), tau, squash)


# ------------------------------------------------- mixture regression ---

@dataclass(frozen=True)
class RegressionScenario:
    """Providers ``1..n`` and the consumer (index 0) draw responses from a
    mixture of linear models; ``groups[i]`` picks the model for party ``i``.
    """

    X: list
    y: list
    groups: np.ndarray
    true_params: np.ndarray
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.X) - 1

    @property
    def d(self) -> int:
        return self.true_params.shape[1]

    @property
    def consumer_param(self) -> np.ndarray:
        return self.true_params[self.groups[0]]

    @property
    def provider_groups(self) -> np.ndarray:
        return self.groups[1:]

    def oracles(self) -> list:
        return [GradientOracle(self.X[i], self.y[i]) for i in range(1, self.n + 1)]

    def utility(self, tau: float, squash: str = "exp") -> LossUtility:
        return regression_utility(self.X[0], self.y[0], tau, squash)

    def estimation_error(self, w) -> float:
        return float(np.linalg.norm(np.asarray(w) - self.consumer_param))

    def initial_params(self) -> np.ndarray:
        return -np.ones(self.d)

    def to_json(self) -> str:
        return json.dumps({
            "schema": SCHEMA_VERSION,
            "kind": "mixture_regression",
            "meta": {**self.meta, "seed": self.seed, "n": self.n, "d": self.d,
                     "groups": self.groups.tolist()},
            "true_params": self.true_params.tolist(),
            "datasets": [{"x": X.tolist(), "y": y.tolist()} for X, y in zip(self.X, self.y)],
        })

    @classmethod
    def from_json(cls, text: str) -> "RegressionScenario":
        doc = json.loads(text)
        if doc.get("kind") != "mixture_regression" or doc.get("schema") != SCHEMA_VERSION:
            raise ValueError("not a mixture-regression scenario document")
        meta = dict(doc["meta"])
        d = meta["d"]
        X = [np.asarray(ds["x"], dtype=float).reshape(-1, d) for ds in doc["datasets"]]
        y = [np.asarray(ds["y"], dtype=float) for ds in doc["datasets"]]
        groups = np.asarray(meta.pop("groups"), dtype=int)
        seed = meta.pop("seed")
        for key in ("n", "d"):
            meta.pop(key)
        return cls(X, y, groups, np.asarray(doc["true_params"], dtype=float), seed, meta)


def gen_mixture_regression(n: int, d: int, samples_per_provider: int, K_groups: int = 4,
                           consumer_group: int = 0, seed: int = 0,
                           holdout_size: Optional[int] = None,
                           noise_std: float = 0.5) -> RegressionScenario:
    """Mixture linear regression market.

    Group ``k`` (0-based) has parameter entries i.i.d. ``U[0.5 k, 0.5 (k+1)]``;
    provider groups are uniform over ``K_groups``, the consumer's is fixed to
    ``consumer_group``. Features are standard normal and responses carry
    ``N(0, noise_std^2)`` noise.
    """
    if n < 1 or d < 1 or samples_per_provider < 1 or K_groups < 1:
        raise ValueError("n, d, samples_per_provider and K_groups must be positive")
    if not 0 <= consumer_group < K_groups:
        raise ValueError(f"consumer_group must lie in [0, {K_groups})")
    holdout_size = samples_per_provider if holdout_size is None else holdout_size
    rng = rngs.substream(seed, rngs.SCENARIO)

    lo = 0.5 * np.arange(K_groups)[:, None]
    true_params = rng.uniform(lo, lo + 0.5, size=(K_groups, d))
    groups = np.concatenate([[consumer_group], rng.integers(0, K_groups, size=n)])
    X, y = [], []
    for i in range(n + 1):
        m = holdout_size if i == 0 else samples_per_provider
        Xi = rng.standard_normal((m, d))
        X.append(Xi)
        y.append(Xi @ true_params[groups[i]] + noise_std * rng.standard_normal(m))
    meta = {"samples_per_provider": samples_per_provider, "holdout_size": holdout_size,
            "K_groups": K_groups, "noise_std": noise_std}
    return RegressionScenario(X, y, groups, true_params, seed, meta)


# ------------------------------------------- corrupted classification ---

def default_beta_schedule(n: int) -> np.ndarray:
    """Corruption tiers by decile: 0%, 20%, 50%, then 90% for the rest."""
    decile = (10 * np.arange(n)) // n
    return np.select([decile == 0, decile == 1, decile == 2], [0.0, 20.0, 50.0], 90.0)


@dataclass(frozen=True)
class ClassificationScenario:
    X: list
    labels: list
    clean_labels: list
    beta: np.ndarray
    holdout: tuple
    test: tuple
    n_classes: int
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.X)

    @property
    def d(self) -> int:
        return self.holdout[0].shape[1]

    @property
    def dim(self) -> int:
        """Length of the flattened softmax-regression parameter."""
        return (self.d + 1) * self.n_classes

    def oracles(self, local_lr: float = 0.1, minibatch_size: int = 10, epochs: int = 1) -> list:
        grad = classification_grad(self.n_classes)
        return [LocalSGDOracle(X, y, local_lr, min(minibatch_size, len(y)), epochs, grad)
                for X, y in zip(self.X, self.labels)]

    def utility(self, tau: float, squash: str = "exp") -> LossUtility:
        return classification_utility(*self.holdout, self.n_classes, tau, squash)

    def accuracy(self, w) -> float:
        X, y = self.test
        return float(np.mean(np.argmax(_logits(np.asarray(w), X, self.n_classes), axis=1) == y))

    def initial_params(self) -> np.ndarray:
        return np.zeros(self.dim)

    def to_json(self) -> str:
        return json.dumps({
            "schema": SCHEMA_VERSION,
            "kind": "corrupted_classification",
            "meta": {**self.meta, "seed": self.seed, "n": self.n, "d": self.d,
                     "n_classes": self.n_classes, "beta": self.beta.tolist()},
            "datasets": [{"x": X.tolist(), "label": l.tolist(), "clean_label": c.tolist()}
                         for X, l, c in zip(self.X, self.labels, self.clean_labels)],
            "holdout": {"x": self.holdout[0].tolist(), "label": self.holdout[1].tolist()},
            "test": {"x": self.test[0].tolist(), "label": self.test[1].tolist()},
        })

    @classmethod
    def from_json(cls, text: str) -> "ClassificationScenario":
        doc = json.loads(text)
        if doc.get("kind") != "corrupted_classification" or doc.get("schema") != SCHEMA_VERSION:
            raise ValueError("not a corrupted-classification scenario document")
        meta = dict(doc["meta"])
        d = meta.pop("d")
        C = meta.pop("n_classes")
        beta = np.asarray(meta.pop("beta"), dtype=float)
        seed = meta.pop("seed")
        meta.pop("n")

        def arr(block):
            return np.asarray(block["x"], dtype=float).reshape(-1, d), np.asarray(block["label"], dtype=int)

        X, labels, clean = [], [], []
        for ds in doc["datasets"]:
            x, l = arr(ds)
            X.append(x)
            labels.append(l)
            clean.append(np.asarray(ds["clean_label"], dtype=int))
        return cls(X, labels, clean, beta, arr(doc["holdout"]), arr(doc["test"]), C, seed, meta)


def corrupt_labels(labels, beta: float, n_classes: int, rng) -> np.ndarray:
    """Replace ``floor(beta * m / 100)`` labels, chosen at random, by a different class."""
    labels = np.asarray(labels).copy()
    k = int(np.floor(beta * len(labels) / 100))
    if k and n_classes < 2:
        raise ValueError("corruption needs at least two classes")
    idx = rng.choice(len(labels), size=k, replace=False)
    labels[idx] = (labels[idx] + rng.integers(1, n_classes, size=k)) % n_classes
    return labels


def gen_corrupted_classification(n: int, per_provider: int, d: int, C: int,
                                 beta_schedule: Optional[Sequence[float]] = None, seed: int = 0,
                                 holdout_size: int = 500, test_size: int = 1000,
                                 class_sep: float = 1.0) -> ClassificationScenario:
    """Gaussian class clusters with per-provider label corruption.

    Each class gets a mean drawn once from ``N(0, class_sep^2 I)``; samples
    are that mean plus standard normal noise. Provider ``i`` has
    ``beta_schedule[i]`` percent of its labels flipped to a wrong class.
    Hold-out and test sets are clean.
    """
    beta = default_beta_schedule(n) if beta_schedule is None else np.asarray(beta_schedule, dtype=float)
    if beta.shape != (n,):
        raise ValueError(f"beta_schedule must have length {n}, got {beta.size}")
    if np.any((beta < 0) | (beta > 100)):
        raise ValueError("beta entries must lie in [0, 100]")
    rng = rngs.substream(seed, rngs.SCENARIO)
    means = class_sep * rng.standard_normal((C, d))

    def draw(m):
        lab = rng.integers(0, C, size=m)
        return means[lab] + rng.standard_normal((m, d)), lab

    X, labels, clean = [], [], []
    for i in range(n):
        x, lab = draw(per_provider)
        X.append(x)
        clean.append(lab)
        labels.append(corrupt_labels(lab, beta[i], C, rng))
    holdout = draw(holdout_size)
    test = draw(test_size)
    meta = {"per_provider": per_provider, "class_sep": class_sep}
    return ClassificationScenario(X, labels, clean, beta, holdout, test, C, seed, meta)
