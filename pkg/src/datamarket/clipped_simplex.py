"""Mirror-descent update on the clipped probability simplex.

The feasible set is ``{q : sum(q) = 1, q_i >= alpha / n}``. Updating a
distribution is a multiplicative (exponential-weights) tilt followed by a
KL (negative-entropy Bregman) projection back onto that set. The projection
has a closed form once the tilted weights are sorted, so one update costs
O(n log n).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Cap on |eta * u_hat| inside exp(); exp(500) ~ 1.4e217 stays finite even
# after multiplying by n and summing.
EXP_CAP = 500.0
TIE_RTOL = 8 * np.finfo(float).eps


@dataclass(frozen=True)
class Distribution:
    """A sampling distribution on the clipped simplex.

    ``probs[i] >= alpha / n`` and ``sum(probs) == 1`` up to float tolerance.
    """

    probs: np.ndarray
    alpha: float

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a non-empty 1-D vector")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        n = probs.size
        tol = 1e-12 * n
        if not np.all(np.isfinite(probs)):
            raise ValueError("probs contains non-finite entries")
        if abs(probs.sum() - 1.0) > tol:
            raise ValueError(f"probs sums to {probs.sum()!r}, not 1")
        if probs.min() < self.alpha / n - 1e-12:
            raise ValueError("probs violates the alpha / n floor")
        object.__setattr__(self, "probs", probs)

    @property
    def n(self) -> int:
        return self.probs.size

    @classmethod
    def uniform(cls, n: int, alpha: float = 0.0) -> "Distribution":
        return cls(np.full(n, 1.0 / n), alpha)


def multiplicative_tilt(p: Distribution, u_hat, eta: float) -> np.ndarray:
    """Return the unnormalized weights ``p_i * exp(eta * u_hat_i)``.

    The exponent is clamped to ``[-EXP_CAP, EXP_CAP]``.
    """
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    u_hat = np.asarray(u_hat, dtype=float)
    if u_hat.shape != p.probs.shape:
        raise ValueError(f"u_hat has shape {u_hat.shape}, expected {p.probs.shape}")
    if not np.all(np.isfinite(u_hat)):
        raise ValueError("u_hat contains non-finite entries")
    return p.probs * np.exp(np.clip(eta * u_hat, -EXP_CAP, EXP_CAP))


def kl_project(y, alpha: float) -> Distribution:
    """KL projection of nonnegative weights ``y`` onto the clipped simplex.

    Solves ``argmin_{q in A} sum_i q_i log(q_i / y_i) - q_i + y_i`` with
    ``A = {q : sum(q) = 1, q >= alpha / n}``. Coordinates with the smallest
    weights are pinned at the floor ``alpha / n``; the rest are ``y_i``
    rescaled to fill the remaining mass.

    Parameters
    ----------
    y : array_like
        Nonnegative weights, not all zero.
    alpha : float
        Clipping parameter in ``[0, 1]``.
    """
    y = np.asarray(y, dtype=float)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if y.ndim != 1 or y.size == 0:
        raise ValueError("y must be a non-empty 1-D vector")
    if not np.all(np.isfinite(y)) or np.any(y < 0):
        raise ValueError("y must be finite and nonnegative")
    if not np.any(y > 0):
        raise ValueError("y is all zeros")

    n = y.size
    floor = alpha / n
    if alpha == 1.0:
        return Distribution(np.full(n, 1.0 / n), alpha)

    order = np.argsort(y, kind="stable")
    ys = y[order]
    # suffix[k] = sum_{j >= k} ys[j], one reverse pass
    suffix = np.cumsum(ys[::-1])[::-1]
    ranks = np.arange(n)  # 0-based rank k corresponds to i = k + 1
    remaining = (n - ranks * alpha) / n  # 1 - (i - 1) alpha / n
    # near-ties count as pinned so a weight sitting on the floor stays exactly
    # there instead of drifting one ulp above it
    above = ys * remaining > floor * suffix * (1.0 + TIE_RTOL)
    if not above.any():
        # only reachable through rounding when alpha is within an ulp of 1
        return Distribution(np.full(n, 1.0 / n), alpha)
    k = int(np.argmax(above))

    out = np.empty(n)
    out[order[:k]] = floor
    out[order[k:]] = remaining[k] * ys[k:] / suffix[k]
    return Distribution(out, alpha)


def osmd_update(p: Distribution, u_hat, eta: float) -> Distribution:
    """One mirror-descent step: ``argmin_{q in A} -eta <q, u_hat> + KL(q || p)``."""
    return kl_project(multiplicative_tilt(p, u_hat, eta), p.alpha)


def bregman_objective(q, p, u_hat, eta: float) -> float:
    """Value of ``-eta <q, u_hat> + D(q || p)`` for the unnormalized negative entropy."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    u_hat = np.asarray(u_hat, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(q > 0, q * np.log(q / p), 0.0)
    return float(-eta * q @ u_hat + plogp.sum() - q.sum() + p.sum())
