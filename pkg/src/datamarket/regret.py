"""Regret against a switching oracle and the matching upper bound."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np


@dataclass
class UtilityTrace:
    """True marginal gains of every provider in every round.

    ``gains[t, i]`` is ``U(w^t + gamma^t g_i^t) - U(w^t)``; ``realized[t]`` is
    the sum of gains over the ``K`` draws actually made in round ``t``.
    """

    gains: np.ndarray
    realized: np.ndarray

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=float)
        self.realized = np.asarray(self.realized, dtype=float)
        if self.gains.ndim != 2 or self.realized.shape != (self.gains.shape[0],):
            raise ValueError("gains must be T x n and realized length T")

    @classmethod
    def from_draws(cls, gains, draws) -> "UtilityTrace":
        gains = np.asarray(gains, dtype=float)
        draws = np.asarray(draws)
        realized = np.take_along_axis(gains, draws, axis=1).sum(axis=1)
        return cls(gains, realized)

    @classmethod
    def from_run(cls, trace) -> "UtilityTrace":
        if trace.all_gains is None:
            raise ValueError("run was not recorded in analysis mode")
        return cls.from_draws(trace.all_gains, trace.draws)


@dataclass
class RegretReport:
    oracle_value: float
    realized_total: float
    regret: float
    bound: float
    avg_regret: float
    m: int
    K: int

    def to_dict(self) -> dict:
        return asdict(self)


def oracle_value(trace: UtilityTrace, m: int, K: int):
    """Best payoff of an action sequence that changes provider at most ``m - 1`` times.

    Dynamic program over (round, provider, switches used), O(T n m). Ties in
    the recovered path go to the lowest provider index.

    Returns
    -------
    value : float
        ``K`` times the best cumulative gain.
    path : ndarray of int
        One optimal action sequence of length ``T``.
    """
    g = trace.gains
    T, n = g.shape
    if not 1 <= m <= T:
        raise ValueError(f"m must lie in [1, T={T}], got {m}")

    if m == T:
        path = np.argmax(g, axis=1)
        return K * float(g[np.arange(T), path].sum()), path

    S = m  # switch counts 0 .. m-1
    # best[t, s, i]: payoff of rounds t..T-1, playing i at t with s switches spent
    best = np.empty((T, S, n))
    best[T - 1] = g[T - 1]
    for t in range(T - 2, -1, -1):
        nxt = best[t + 1]
        # max over j != i of nxt[s + 1, j], via the top two entries per row
        top = np.argmax(nxt, axis=1)
        first = nxt[np.arange(S), top]
        masked = nxt.copy()
        masked[np.arange(S), top] = -np.inf
        second = masked.max(axis=1) if n > 1 else np.full(S, -np.inf)
        other = np.where(np.arange(n)[None, :] == top[:, None], second[:, None], first[:, None])
        switch = np.full((S, n), -np.inf)
        switch[:-1] = other[1:]
        best[t] = g[t] + np.maximum(nxt, switch)

    path = np.empty(T, dtype=np.intp)
    i, s = int(np.argmax(best[0, 0])), 0
    path[0] = i
    for t in range(1, T):
        stay = best[t, s, i]
        cand = best[t, s + 1] if s + 1 < S else None
        j_best, v_best = i, stay
        if cand is not None:
            for j in range(n):
                if j != i and (cand[j] > v_best or (cand[j] == v_best and j < j_best)):
                    j_best, v_best = j, cand[j]
        if j_best != i:
            s += 1
            i = j_best
        path[t] = i
    return K * float(best[0, 0].max()), path


def theorem_bound(alpha: float, eta: float, n: int, B: int, m: int, K: int) -> float:
    """``alpha B + eta n B / 2 + m K log(n / alpha) / eta``; ``inf`` when alpha is 0."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    if alpha == 0:
        return math.inf
    return alpha * B + eta * n * B / 2 + m * K * math.log(n / alpha) / eta


def theory_tuning(n: int, B: int, K: int, m: int):
    """Rates making the bound sublinear: ``alpha = sqrt(n/B)``, ``eta = sqrt(m log(nB) / (nT))``."""
    T = B // K
    alpha = min(1.0, math.sqrt(n / B))
    eta = math.sqrt(m * math.log(n * B) / (n * T))
    return alpha, eta


def compute_regret(trace: UtilityTrace, m: int, K: int, *, alpha=None, eta=None) -> RegretReport:
    """Single-run regret. Pass ``alpha`` and ``eta`` to attach the upper bound."""
    value, _ = oracle_value(trace, m, K)
    realized = float(trace.realized.sum())
    T, n = trace.gains.shape
    B = K * T
    bound = theorem_bound(alpha, eta, n, B, m, K) if alpha is not None and eta is not None else math.nan
    regret = value - realized
    return RegretReport(value, realized, regret, bound, regret / B, m, K)
