"""The market arbiter: budgeted training loop, access ledger, revenue split."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Protocol, Sequence, Union

import numpy as np

from . import rng as rngs
from .clipped_simplex import Distribution
from .sampler import SamplerState, estimate_utilities, sample_batch, step


class ProviderOracle(Protocol):
    def update(self, w: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        ...


class UtilityFunction(Protocol):
    def evaluate(self, w: np.ndarray) -> float:
        ...


class OracleError(RuntimeError):
    """A provider oracle returned an unusable update."""

    def __init__(self, provider: int, message: str):
        super().__init__(f"provider {provider}: {message}")
        self.provider = provider


class DivergenceError(RuntimeError):
    """Model parameters became non-finite."""

    def __init__(self, round_: int):
        super().__init__(f"non-finite model parameters at round {round_}")
        self.round = round_


@dataclass(frozen=True)
class MarketConfig:
    n: int
    B: int
    K: int
    eta: float
    alpha: float
    gamma: Union[float, Sequence[float]] = 0.01
    seed: int = 0
    m: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not self.B >= self.K >= 1:
            raise ValueError(f"need B >= K >= 1, got B={self.B}, K={self.K}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if np.ndim(self.gamma) == 0:
            gammas = np.array([float(self.gamma)])
        else:
            gammas = np.asarray(self.gamma, dtype=float)
            if gammas.size != self.T:
                raise ValueError(f"gamma schedule has {gammas.size} entries, expected T={self.T}")
        if not np.all(gammas > 0):
            raise ValueError("all step sizes gamma must be positive")
        if not 1 <= self.m <= self.T:
            raise ValueError(f"m must lie in [1, T={self.T}], got {self.m}")

    @property
    def T(self) -> int:
        return self.B // self.K

    def gamma_at(self, t: int) -> float:
        if np.ndim(self.gamma) == 0:
            return float(self.gamma)
        return float(self.gamma[t])


@dataclass
class AccessLedger:
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class RunTrace:
    """Per-round record of a market run.

    ``probs[t]`` is the distribution used to draw ``draws[t]``; ``utility[t]``
    is ``U(w^t)`` before the round's update. ``all_gains`` is only filled in
    analysis mode, where every oracle is queried each round.
    """

    probs: np.ndarray
    draws: np.ndarray
    utility: np.ndarray
    gains: list
    metric: Optional[np.ndarray] = None
    all_gains: Optional[np.ndarray] = None
    w_final: Optional[np.ndarray] = None
    final_probs: Optional[np.ndarray] = None

    @property
    def T(self) -> int:
        return self.draws.shape[0]

    def realized(self) -> np.ndarray:
        """Cumulative marginal utility gain per round, summed over draws."""
        return np.array([sum(g[int(i)] for i in row) for g, row in zip(self.gains, self.draws)])


def apply_updates(w: np.ndarray, updates, gamma: float) -> np.ndarray:
    """``w + (gamma / K) * sum(updates)``; one entry per draw, duplicates repeated."""
    updates = [np.asarray(u, dtype=float) for u in updates]
    if not updates:
        raise ValueError("need at least one update")
    for u in updates:
        if u.shape != w.shape:
            raise ValueError(f"update has shape {u.shape}, expected {w.shape}")
    return w + (gamma / len(updates)) * np.sum(updates, axis=0)


def allocate_revenue(ledger: AccessLedger, total_revenue: float) -> np.ndarray:
    """Split ``total_revenue`` in proportion to access counts."""
    if ledger.total <= 0:
        raise ValueError("ledger has no recorded accesses")
    if not total_revenue > 0:
        raise ValueError("total_revenue must be positive")
    return total_revenue * ledger.counts / ledger.total


def _query(oracle, i: int, w: np.ndarray, seed: int, t: int) -> np.ndarray:
    g = np.asarray(oracle.update(w.copy(), rngs.substream(seed, rngs.ORACLE, t, i)), dtype=float)
    if g.shape != w.shape:
        raise OracleError(i, f"update has shape {g.shape}, expected {w.shape}")
    if not np.all(np.isfinite(g)):
        raise OracleError(i, "update is not finite")
    return g


def run_market(config: MarketConfig, oracles: Sequence[ProviderOracle], utility: UtilityFunction,
               w0, sampler_kind: str = "osmd", *, metric: Optional[Callable] = None,
               analysis: bool = False, observer: Optional[Callable] = None, order=None):
    """Run the budgeted training loop.

    Each round draws ``K`` providers from the current distribution, queries
    the distinct ones once, charges one access per draw, scores each
    provider's single-step gain ``U(w + gamma g_i) - U(w)``, steps the
    sampler (frozen for ``sampler_kind="uniform"``) and applies the averaged
    update.

    With ``analysis=True`` every provider is queried each round to record the
    full gain matrix; those calls are instrumentation and never charged.
    ``observer(t, w, updates)`` is called with the full update list in that
    mode.

    Returns
    -------
    w_final, ledger, trace
    """
    if sampler_kind not in ("osmd", "uniform"):
        raise ValueError(f"unknown sampler {sampler_kind!r}")
    n, K, T = config.n, config.K, config.T
    if len(oracles) != n:
        raise ValueError(f"expected {n} oracles, got {len(oracles)}")

    w = np.array(w0, dtype=float)
    state = SamplerState(Distribution.uniform(n, config.alpha), config.eta)
    counts = np.zeros(n, dtype=np.int64)
    probs = np.empty((T, n))
    draws = np.empty((T, K), dtype=np.intp)
    util = np.empty(T)
    metrics = np.empty(T) if metric is not None else None
    all_gains = np.empty((T, n)) if analysis else None
    gains_log = []

    for t in range(T):
        gamma = config.gamma_at(t)
        probs[t] = state.dist.probs
        batch = sample_batch(state, K, rngs.substream(config.seed, rngs.SAMPLE, t), order)
        draws[t] = batch.draws
        u_w = float(utility.evaluate(w))
        util[t] = u_w
        if metrics is not None:
            metrics[t] = metric(w)

        if analysis:
            everyone = [_query(oracles[i], i, w, config.seed, t) for i in range(n)]
            all_gains[t] = [float(utility.evaluate(w + gamma * g)) - u_w for g in everyone]
            if observer is not None:
                observer(t, w, everyone)
            updates = {int(i): everyone[i] for i in np.unique(batch.draws)}
            gains = {i: float(all_gains[t, i]) for i in updates}
        else:
            updates = {int(i): _query(oracles[i], int(i), w, config.seed, t)
                       for i in np.unique(batch.draws)}
            gains = {i: float(utility.evaluate(w + gamma * g)) - u_w for i, g in updates.items()}
        gains_log.append(gains)
        counts += batch.counts(n)

        if sampler_kind == "osmd":
            state = step(state, estimate_utilities(batch, gains, state.dist, K))
        else:
            state = SamplerState(state.dist, state.eta, state.round + 1)

        w = apply_updates(w, [updates[int(i)] for i in batch.draws], gamma)
        if not np.all(np.isfinite(w)):
            raise DivergenceError(t)

    trace = RunTrace(probs, draws, util, gains_log, metrics, all_gains, w.copy(), state.dist.probs)
    return w, AccessLedger(counts), trace
