"""OSMD provider sampler: batch draws, importance-weighted estimates, updates."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .clipped_simplex import Distribution, osmd_update


@dataclass(frozen=True)
class SamplerState:
    dist: Distribution
    eta: float
    round: int = 0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.round < 0:
            raise ValueError("round must be nonnegative")


@dataclass(frozen=True)
class Batch:
    """``K`` provider indices drawn with replacement (duplicates allowed)."""

    draws: np.ndarray
    round: int

    @property
    def K(self) -> int:
        return self.draws.size

    def counts(self, n: int) -> np.ndarray:
        return np.bincount(self.draws, minlength=n)


@dataclass(frozen=True)
class UtilityEstimate:
    values: np.ndarray


def sample_batch(state: SamplerState, K: int, rng: np.random.Generator, order=None) -> Batch:
    """Draw ``K`` i.i.d. indices from ``state.dist`` by inverse CDF.

    ``order`` fixes the sequence in which providers are laid out along the
    cumulative vector (default: index order). Relabeling providers and
    passing the matching ``order`` maps the same uniforms to relabeled draws.
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    probs = state.dist.probs
    n = probs.size
    order = np.arange(n) if order is None else np.asarray(order)
    cdf = np.cumsum(probs[order])
    u = rng.random(K) * cdf[-1]
    pos = np.minimum(np.searchsorted(cdf, u, side="right"), n - 1)
    return Batch(order[pos].astype(np.intp), state.round)


def estimate_utilities(batch: Batch, marginal_gains: Mapping[int, float], dist: Distribution,
                       K: int) -> UtilityEstimate:
    """Importance-weighted estimate of every provider's marginal gain.

    ``values[i] = count_i / (K p_i) * gain_i`` for drawn providers, zero
    elsewhere. Only gains of drawn providers are read.
    """
    n = dist.n
    counts = batch.counts(n)
    values = np.zeros(n)
    for i in np.flatnonzero(counts):
        p_i = dist.probs[i]
        if p_i <= 0:
            raise RuntimeError(f"provider {i} was drawn with probability {p_i}")
        values[i] = counts[i] / (K * p_i) * float(marginal_gains[int(i)])
    if not np.all(np.isfinite(values)):
        raise ValueError("utility estimate is not finite")
    return UtilityEstimate(values)


def step(state: SamplerState, estimate: UtilityEstimate) -> SamplerState:
    """Advance the distribution by one mirror-descent update."""
    dist = osmd_update(state.dist, estimate.values, state.eta)
    return SamplerState(dist, state.eta, state.round + 1)
