"""Shapley-value comparators for revenue allocation.

Each round is treated as a cooperative game over the ``n`` providers whose
worth ``v(S)`` is the utility gain of applying the averaged update of
coalition ``S``. Values are accumulated over a uniform-sampling training
trajectory.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from itertools import permutations as all_permutations
from typing import Optional

import numpy as np

from . import rng as rngs
from .market import MarketConfig, run_market

MAX_EXACT_PLAYERS = 16


@dataclass
class ShapleyReport:
    values: np.ndarray
    rounds_used: int
    permutations_per_round: int  # 0 for exact enumeration

    def to_dict(self) -> dict:
        d = asdict(self)
        d["values"] = self.values.tolist()
        return d


def round_characteristic(w, updates, gamma: float, utility, subset) -> float:
    """``U(w + gamma * mean_{i in S} g_i) - U(w)``; zero for the empty coalition."""
    subset = sorted(subset)
    if not subset:
        return 0.0
    w = np.asarray(w, dtype=float)
    g = np.mean([np.asarray(updates[i], dtype=float) for i in subset], axis=0)
    return float(utility.evaluate(w + gamma * g)) - float(utility.evaluate(w))


class _Game:
    """Memoized characteristic function keyed by coalition bitmask."""

    def __init__(self, w, updates, gamma, utility):
        self.w = np.asarray(w, dtype=float)
        self.G = np.asarray(updates, dtype=float)
        self.gamma = gamma
        self.utility = utility
        self.base = float(utility.evaluate(self.w))
        self.cache = {0: 0.0}

    def __call__(self, mask: int) -> float:
        v = self.cache.get(mask)
        if v is None:
            members = [i for i in range(self.G.shape[0]) if mask >> i & 1]
            step = self.G[members].mean(axis=0)
            v = float(self.utility.evaluate(self.w + self.gamma * step)) - self.base
            self.cache[mask] = v
        return v


def exact_round_shapley(w, updates, gamma: float, utility) -> np.ndarray:
    """Shapley values by enumerating all ``2^n`` coalitions (``n <= 16``)."""
    n = len(updates)
    if n > MAX_EXACT_PLAYERS:
        raise ValueError(f"exact Shapley refuses n={n} > {MAX_EXACT_PLAYERS}")
    game = _Game(w, updates, gamma, utility)
    v = np.array([game(mask) for mask in range(1 << n)])
    size = np.array([bin(mask).count("1") for mask in range(1 << n)])
    weight = np.array([math.factorial(s) * math.factorial(n - s - 1) / math.factorial(n)
                       for s in range(n)])
    out = np.empty(n)
    masks = np.arange(1 << n)
    for i in range(n):
        without = masks[(masks >> i & 1) == 0]
        out[i] = math.fsum(weight[size[without]] * (v[without | (1 << i)] - v[without]))
    return out


def perm_sampling_shapley(w, updates, gamma: float, utility, num_perms: int,
                          rng: Optional[np.random.Generator] = None, perms=None) -> np.ndarray:
    """Average marginal contributions over random orderings of the providers.

    Pass ``perms`` to use an explicit list of orderings instead of sampling.
    """
    n = len(updates)
    if perms is None:
        if num_perms < 1:
            raise ValueError("num_perms must be >= 1")
        rng = np.random.default_rng() if rng is None else rng
        perms = [rng.permutation(n) for _ in range(num_perms)]
    game = _Game(w, updates, gamma, utility)
    contrib = [[] for _ in range(n)]
    for order in perms:
        mask = 0
        prev = 0.0
        for i in order:
            mask |= 1 << int(i)
            cur = game(mask)
            contrib[int(i)].append(cur - prev)
            prev = cur
    return np.array([math.fsum(c) / len(c) for c in contrib])


def every_permutation(n: int) -> list:
    return [np.array(p) for p in all_permutations(range(n))]


def shapley_revenue(values, total_revenue: float):
    """Pay in proportion to the positive part of ``values``.

    Returns ``(payments, degenerate)``; when no entry is positive the pool is
    split evenly and ``degenerate`` is True.
    """
    pos = np.maximum(np.asarray(values, dtype=float), 0.0)
    if pos.sum() <= 0:
        return np.full(pos.size, total_revenue / pos.size), True
    return total_revenue * pos / pos.sum(), False


def accumulated_shapley(config: MarketConfig, oracles, utility, w0, num_perms: int = 0) -> ShapleyReport:
    """Sum per-round Shapley values along a uniform-sampling trajectory.

    Every provider is queried every round, which goes beyond the market's
    budget; this is comparison instrumentation only. ``num_perms=0`` uses
    exact enumeration.
    """
    per_round = []

    def observe(t, w, updates):
        gamma = config.gamma_at(t)
        if num_perms == 0:
            sv = exact_round_shapley(w, updates, gamma, utility)
        else:
            rng = rngs.substream(config.seed, rngs.SHAPLEY, t)
            sv = perm_sampling_shapley(w, updates, gamma, utility, num_perms, rng)
        per_round.append(sv)

    run_market(config, oracles, utility, w0, "uniform", analysis=True, observer=observe)
    rows = np.array(per_round)
    total = np.array([math.fsum(col) for col in rows.T])
    return ShapleyReport(total, config.T, num_perms)
