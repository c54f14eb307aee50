"""The four aggregation algorithms.

``MLProd``       Prod with one fixed learning rate per expert.
``AdaptMLProd``  Prod with per-expert rates tuned online from squared excess losses.
``MLPoly``       Polynomial (order 2) potential on the regret vector, per-expert rates.
``MLCHedge``     Exponential weights for experts that report confidences.

All of them share the :class:`~excess_agg.core.Learner` interface: ``predict``
returns the mixture for the next round without side effects, ``update``
consumes one loss vector and returns a :class:`~excess_agg.core.RoundOutcome`.
"""

from __future__ import annotations

import math

import numpy as np

from .core import Learner
from .errors import AggregationError, RateOutOfRange


class MLProd(Learner):
    """Prod with multiple fixed learning rates.

    Mixture weights are proportional to ``rates * weights`` and every weight is
    multiplied by ``1 + rate_k * r_k`` after the round. That choice of mixture
    makes the total weight an exact invariant (it stays at 1).

    ``check_rates=False`` skips the ``(0, 1/2]`` range check; it exists only so
    the bound checker can be fed a deliberately broken learner.
    """

    name = "ml_prod"

    def __init__(self, n_experts: int, rates=0.5, prior=None, check_rates: bool = True):
        super().__init__(n_experts, prior, rates)
        self.rates = self.config.fixed_rates
        if check_rates and not (self.rates.min() > 0.0 and self.rates.max() <= 0.5):
            raise RateOutOfRange(f"ML-Prod rates must lie in (0, 1/2], got {self.rates}")
        self.weights = self.prior.copy()

    @property
    def weight_total(self) -> float:
        return float(self.weights.sum())

    def _mixture(self, confidences):
        v = self.rates * self.weights
        return v / v.sum()

    def _advance(self, losses, r, lhat, p, confidences):
        self.weights *= 1.0 + self.rates * r


class AdaptMLProd(Learner):
    """Prod with per-expert rates ``min(1/2, sqrt(gamma_k / (1 + sum_s r_{k,s}^2)))``.

    ``gamma_k = ln(1 / w_{k,0})``, i.e. ``ln K`` for the uniform prior. After
    each round the rate is recomputed from the squared excess losses seen so
    far, and the weight is raised to the power ``new_rate / old_rate`` (which
    is at most 1).

    Besides the algorithm state this class keeps two running sums used by the
    bound checks: ``rate_ratio_excess`` (sum over experts and rounds of
    ``old_rate / new_rate - 1``) and ``weighted_sq`` (per expert, the sum of
    ``old_rate * r^2``).
    """

    name = "adapt_ml_prod"

    def __init__(self, n_experts: int, prior=None):
        super().__init__(n_experts, prior)
        self.gamma = -np.log(self.prior)
        self.weights = self.prior.copy()
        self.cumulative_sq = np.ones(self.n_experts)
        self.rates = self._rule(self.cumulative_sq)
        self.initial_rates = self.rates.copy()
        self.prev_rates = self.rates.copy()
        self.rate_ratio_excess = 0.0
        self.weighted_sq = np.zeros(self.n_experts)

    def _rule(self, cumulative_sq):
        return np.minimum(0.5, np.sqrt(self.gamma / cumulative_sq))

    @property
    def weight_total(self) -> float:
        return float(self.weights.sum())

    def potential_bound(self) -> float:
        """Upper bound on ``weight_total`` guaranteed by the analysis."""
        return 1.0 + self.rate_ratio_excess / math.e

    def _mixture(self, confidences):
        v = self.rates * self.weights
        return v / v.sum()

    def _advance(self, losses, r, lhat, p, confidences):
        old = self.rates
        rr = r * r
        grown = self.weights * (1.0 + old * r)
        self.weighted_sq += old * rr
        self.cumulative_sq += rr
        new = self._rule(self.cumulative_sq)
        self.weights = grown ** (new / old)
        self.rate_ratio_excess += float(np.sum(old / new - 1.0))
        self.prev_rates = old
        self.rates = new


class MLPoly(Learner):
    """Polynomially weighted averages with rates ``1 / (1 + sum_s r_{k,s}^2)``.

    The mixture is proportional to ``rates * max(R, 0)`` where ``R`` is the
    cumulative regret vector. When no expert has positive regret (always the
    case in the first round) the uniform mixture is played.
    """

    name = "ml_poly"

    def __init__(self, n_experts: int):
        super().__init__(n_experts)
        self.regrets = np.zeros(self.n_experts)
        self.cumulative_sq = np.ones(self.n_experts)
        self.rates = 1.0 / self.cumulative_sq

    def potential(self) -> float:
        """Squared weighted norm ``sum_k rate_k * max(R_k, 0)^2``."""
        pos = np.maximum(self.regrets, 0.0)
        return float(self.rates @ (pos * pos))

    def _mixture(self, confidences):
        v = self.rates * np.maximum(self.regrets, 0.0)
        s = v.sum()
        if s > 0.0:
            return v / s
        return np.full(self.n_experts, 1.0 / self.n_experts)

    def _advance(self, losses, r, lhat, p, confidences):
        self.regrets += r
        self.cumulative_sq += r * r
        self.rates = 1.0 / self.cumulative_sq


class MLCHedge(Learner):
    """Hedge with multiple fixed rates for experts reporting confidences.

    Only experts with positive confidence receive mass. Weights are kept as
    logarithms: they decay like ``exp(-rate * t)`` and would underflow
    otherwise.
    """

    name = "mlc_hedge"
    uses_confidences = True

    def __init__(self, n_experts: int, rates=0.3, prior=None):
        super().__init__(n_experts, prior, rates)
        self.rates = self.config.fixed_rates
        if not (self.rates.min() > 0.0 and self.rates.max() <= 1.0):
            raise RateOutOfRange(f"MLC-Hedge rates must lie in (0, 1], got {self.rates}")
        self.log_weights = np.log(self.prior)
        self._log_gain = np.log(-np.expm1(-self.rates))
        self._decay = np.exp(-self.rates)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def _mixture(self, confidences):
        with np.errstate(divide="ignore"):
            logits = np.log(confidences) + self._log_gain + self.log_weights
        e = np.exp(logits - logits.max())
        return e / e.sum()

    def _advance(self, losses, r, lhat, p, confidences):
        self.log_weights += self.rates * confidences * (self._decay * lhat - losses)


LEARNERS = {
    "ml_prod": MLProd,
    "adapt_ml_prod": AdaptMLProd,
    "ml_poly": MLPoly,
    "mlc_hedge": MLCHedge,
}


def make_learner(name: str, n_experts: int, rates=None, prior=None) -> Learner:
    """Build a learner by its short name; ``rates`` only applies to fixed-rate ones."""
    try:
        cls = LEARNERS[name]
    except KeyError:
        raise AggregationError(f"unknown learner {name!r}; choose from {sorted(LEARNERS)}")
    if cls is MLPoly:
        if prior is not None:
            raise AggregationError("ml_poly does not take a prior")
        return cls(n_experts)
    if cls is AdaptMLProd:
        return cls(n_experts, prior=prior)
    default = 0.5 if cls is MLProd else 0.3
    return cls(n_experts, rates=default if rates is None else rates, prior=prior)
