"""Closed-form regret bounds and reports comparing them with realized regrets.

Two layers: plain calculators working on arrays and scalars (``*_bound``
functions, ``bound_iid``, ``solve_quadratic``), and report builders that read
a :class:`~excess_agg.core.RegretLedger` and return a :class:`BoundReport`.

Bounds are in rescaled units (losses in [0, 1]).

Several derived bounds take a pair ``xi = (xi1, xi2)`` meaning that the
learner guarantees, for every expert,

    R_k <= xi1 * sqrt(ln K * sum_t r_{k,t}^2) + xi2.

:func:`xi_adapt_ml_prod` and :func:`xi_ml_poly` give such pairs for the two
adaptive learners.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import LearnerConfig, RegretLedger
from .errors import (
    AlphaOutOfRange,
    ConfigMismatch,
    DegenerateK,
    DeltaOutOfRange,
    NegativeInput,
)

SLACK_TOL = 1e-9
THEOREM_IDS = ("T1", "Eq5", "Eq6", "T2", "C3", "T4", "C5", "ISEL", "IID", "T7")
KINDS = ("deterministic", "high_probability", "informational")


@dataclass
class BoundReport:
    """Per-expert bound versus realized regret for one inequality.

    ``kind`` says what a failed comparison means: ``deterministic`` bounds
    hold on every sequence, ``high_probability`` ones may fail with small
    probability, ``informational`` ones are not guaranteed for the learner
    that produced the ledger (they are shown for comparison only).
    """

    theorem_id: str
    per_expert_bound: np.ndarray
    realized: np.ndarray
    kind: str = "deterministic"
    note: str = ""
    slack: np.ndarray = field(init=False)
    satisfied: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.theorem_id not in THEOREM_IDS:
            raise ValueError(f"unknown theorem id {self.theorem_id!r}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        self.per_expert_bound = np.asarray(self.per_expert_bound, dtype=float)
        self.realized = np.asarray(self.realized, dtype=float)
        with np.errstate(invalid="ignore"):
            self.slack = self.per_expert_bound - self.realized
        self.satisfied = self.slack >= -SLACK_TOL

    @property
    def proved(self) -> bool:
        return self.kind != "informational"

    @property
    def all_satisfied(self) -> bool:
        return bool(self.satisfied.all())

    @property
    def violated(self) -> bool:
        """True when a proved (not informational) bound fails for some expert."""
        return self.proved and not self.all_satisfied

    @property
    def min_slack(self) -> float:
        return float(self.slack.min())

    def as_dict(self) -> dict:
        def clean(a):
            return [float(x) if math.isfinite(x) else None for x in a]
        return {
            "theorem_id": self.theorem_id,
            "kind": self.kind,
            "per_expert_bound": clean(self.per_expert_bound),
            "realized": clean(self.realized),
            "slack": clean(self.slack),
            "satisfied": [bool(s) for s in self.satisfied],
            "note": self.note,
        }


def _log_inverse(prior) -> np.ndarray:
    return -np.log(np.asarray(prior, dtype=float))


def _log_k(n_experts: int) -> float:
    if n_experts < 2:
        raise DegenerateK(f"bound needs K >= 2 (ln K > 0), got K={n_experts}")
    return math.log(n_experts)


# Fixed-rate Prod

def theorem1_bound(prior, rates, squared_excess) -> np.ndarray:
    """``ln(1/w_k0) / eta_k + eta_k * sum_t r_kt^2``."""
    rates = np.asarray(rates, dtype=float)
    return _log_inverse(prior) / rates + rates * np.asarray(squared_excess, dtype=float)


def optimized_prod_bound(prior, squared_excess) -> np.ndarray:
    """The fixed-rate bound minimized over eta in hindsight: ``2 sqrt(S ln(1/w0))``."""
    return 2.0 * np.sqrt(np.asarray(squared_excess, dtype=float) * _log_inverse(prior))


def variance_bound(prior, regrets, squared_excess, n_rounds: int, xi=None) -> np.ndarray:
    """Bound in terms of the empirical variance of the excess losses.

    The variance is ``sum_t (r_t - R/T)^2 = S - R^2 / T``. Without ``xi`` this
    is ``4 ln(1/w0) + 2 sqrt(var * ln(1/w0))``, the consequence of the
    hindsight-optimized bound. With ``xi`` the same argument applied to
    ``R <= a sqrt(S) + xi2`` (``a = xi1 sqrt(ln K)``) gives
    ``a sqrt(var) + a^2 + a xi2 / sqrt(T) + xi2``.
    """
    regrets = np.asarray(regrets, dtype=float)
    s = np.asarray(squared_excess, dtype=float)
    t = max(int(n_rounds), 1)
    var = np.maximum(s - regrets * regrets / t, 0.0)
    if xi is None:
        g = _log_inverse(prior)
        return 4.0 * g + 2.0 * np.sqrt(var * g)
    xi1, xi2 = xi
    a = xi1 * math.sqrt(math.log(len(regrets))) if len(regrets) > 1 else 0.0
    return a * np.sqrt(var) + a * a + a * xi2 / math.sqrt(t) + xi2


# Adaptive Prod

def corollary3_constant(n_experts: int, n_rounds: int) -> float:
    """``C_{K,T} = 3 ln K + ln(1 + (K / 2e)(1 + ln(T + 1)))``."""
    k = n_experts
    return 3.0 * math.log(k) + _rate_penalty(k, n_rounds)


def _rate_penalty(n_experts: int, n_rounds: int) -> float:
    return math.log1p(n_experts / (2 * math.e) * (1.0 + math.log1p(n_rounds)))


def adapt_constants(prior, n_rounds: int) -> np.ndarray:
    """Per-expert constants ``3 ln(1/w_k0) + ln(1 + (K/2e)(1 + ln(T+1)))``.

    Equal to ``C_{K,T}`` for every expert when the prior is uniform.
    """
    g = _log_inverse(prior)
    return 3.0 * g + _rate_penalty(g.size, n_rounds)


def corollary3_bound(prior, n_rounds: int, squared_excess) -> np.ndarray:
    """``C_k / sqrt(ln(1/w_k0)) * sqrt(1 + S_k) + 2 C_k``."""
    g = _log_inverse(prior)
    c = adapt_constants(prior, n_rounds)
    return c / np.sqrt(g) * np.sqrt(1.0 + np.asarray(squared_excess, dtype=float)) + 2.0 * c


def xi_adapt_ml_prod(n_experts: int, n_rounds: int) -> tuple[float, float]:
    """``(C / ln K, 2C + C / sqrt(ln K))`` for the uniform prior.

    Obtained from ``sqrt(1 + S) <= sqrt(S) + 1``; the extra ``C / sqrt(ln K)``
    in the second entry is the price of that step.
    """
    lk = _log_k(n_experts)
    c = corollary3_constant(n_experts, n_rounds)
    return c / lk, 2.0 * c + c / math.sqrt(lk)


# Polynomial potential

def theorem4_bound(n_experts: int, n_rounds: int, squared_excess) -> np.ndarray:
    """``sqrt(K (1 + ln(1 + T)) (1 + S_k))``."""
    s = np.asarray(squared_excess, dtype=float)
    return np.sqrt(n_experts * (1.0 + math.log1p(n_rounds)) * (1.0 + s))


def xi_ml_poly(n_experts: int, n_rounds: int) -> tuple[float, float]:
    """``(A / sqrt(ln K), A)`` with ``A = sqrt(K (1 + ln(1 + T)))``.

    Conservative: uses ``sqrt(1 + S) <= sqrt(S) + 1``.
    """
    lk = _log_k(n_experts)
    a = math.sqrt(n_experts * (1.0 + math.log1p(n_rounds)))
    return a / math.sqrt(lk), a


# Derived bounds from an xi pair

def solve_quadratic(a: float, c: float) -> float:
    """Upper bound ``sqrt(a) + c`` on any ``x >= 0`` with ``x^2 <= a + c x``."""
    if a < 0 or c < 0:
        raise NegativeInput(f"solve_quadratic needs a, c >= 0, got ({a}, {c})")
    return math.sqrt(a) + c


def small_excess_bound(xi, n_experts: int, negative_part) -> np.ndarray:
    """``2 xi1 sqrt(ln K R^-_k) + (xi2 + 2 xi1 sqrt(xi2 ln K) + 4 xi1^2 ln K)``."""
    xi1, xi2 = xi
    lk = math.log(n_experts)
    const = xi2 + 2.0 * xi1 * math.sqrt(xi2 * lk) + 4.0 * xi1 * xi1 * lk
    return 2.0 * xi1 * np.sqrt(lk * np.asarray(negative_part, dtype=float)) + const


def bound_iid(xi, n_experts: int, alpha: float, delta: Optional[float] = None):
    """Regret of the best action under a gap ``alpha`` between expected losses.

    Returns ``C = xi1^2 ln K / alpha + xi1 sqrt(xi2 ln K / alpha) + xi2``,
    which bounds the expected regret against that action. With ``delta`` the
    pair ``(C, high_probability_bound)`` is returned instead.
    """
    if not 0.0 < alpha <= 1.0:
        raise AlphaOutOfRange(f"alpha must lie in (0, 1], got {alpha}")
    xi1, xi2 = xi
    lk = math.log(n_experts)
    c = xi1 * xi1 * lk / alpha + xi1 * math.sqrt(xi2 * lk / alpha) + xi2
    if delta is None:
        return c
    if not 0.0 < delta < 1.0:
        raise DeltaOutOfRange(f"delta must lie in (0, 1), got {delta}")
    log_term = math.log(1.0 / delta) + math.log1p(math.log1p(c / 4.0) / (2 * math.e))
    return c, c + 6.0 * xi1 / alpha * math.sqrt(log_term * lk)


def corollary5_terms(xi, n_experts: int, confidence_squared_excess):
    """Split the confidence-regret bound into its square-root term and ``xi2``."""
    xi1, xi2 = xi
    lk = math.log(n_experts)
    return xi1 * np.sqrt(lk * np.asarray(confidence_squared_excess, dtype=float)), xi2


def corollary5_bound(xi, n_experts: int, confidence_squared_excess) -> np.ndarray:
    """``xi1 sqrt(ln K sum_t I_kt^2 r_kt^2) + xi2``."""
    root, xi2 = corollary5_terms(xi, n_experts, confidence_squared_excess)
    return root + xi2


# Hedge with confidences

def mlc_hedge_bound(prior, rates, weighted_loss) -> np.ndarray:
    """``ln(1/w0)/eta + (e - 1) eta sum_t I ell + (e - 1) ln(1/w0)``."""
    g = _log_inverse(prior)
    rates = np.asarray(rates, dtype=float)
    return g / rates + (math.e - 1) * rates * np.asarray(weighted_loss, dtype=float) \
        + (math.e - 1) * g


def mlc_hedge_optimized_bound(prior, weighted_loss) -> np.ndarray:
    """The same bound at the hindsight-best rate: ``2 sqrt((e-1) L ln(1/w0)) + (e-1) ln(1/w0)``."""
    g = _log_inverse(prior)
    return 2.0 * np.sqrt((math.e - 1) * np.asarray(weighted_loss, dtype=float) * g) \
        + (math.e - 1) * g


# Report builders

def _check_size(ledger: RegretLedger, n_experts: int):
    if ledger.n_experts != n_experts:
        raise ConfigMismatch(
            f"ledger has {ledger.n_experts} experts, configuration has {n_experts}")


def theorem1(ledger: RegretLedger, config: LearnerConfig) -> BoundReport:
    _check_size(ledger, config.expert_count)
    if config.fixed_rates is None:
        raise ConfigMismatch("fixed-rate bound needs a configuration with fixed_rates")
    bound = theorem1_bound(config.initial_weights, config.fixed_rates, ledger.squared_excess)
    return BoundReport("T1", bound, ledger.cumulative_regret)


def optimized_prod(ledger: RegretLedger, prior=None) -> BoundReport:
    prior = _prior(ledger, prior)
    return BoundReport("Eq5", optimized_prod_bound(prior, ledger.squared_excess),
                       ledger.cumulative_regret, kind="informational",
                       note="rate tuned in hindsight; no sequential learner guarantees it")


def variance(ledger: RegretLedger, xi=None, prior=None) -> BoundReport:
    prior = _prior(ledger, prior)
    bound = variance_bound(prior, ledger.cumulative_regret, ledger.squared_excess,
                           ledger.round_count, xi)
    note = "hindsight-optimized constants" if xi is None else "learner's own xi substituted"
    return BoundReport("Eq6", bound, ledger.cumulative_regret, kind="informational", note=note)


def theorem2(learner) -> BoundReport:
    """Bound for the adaptive Prod learner computed from its actual rate path."""
    g = -np.log(learner.prior)
    ledger = learner.ledger
    if learner.n_experts == 1:
        return BoundReport("T2", np.zeros(1), ledger.cumulative_regret)
    bound = g / learner.initial_rates + learner.weighted_sq \
        + np.log1p(learner.rate_ratio_excess / math.e) / learner.rates
    return BoundReport("T2", bound, ledger.cumulative_regret)


def corollary3(ledger: RegretLedger, prior=None) -> BoundReport:
    _log_k(ledger.n_experts)
    prior = _prior(ledger, prior)
    bound = corollary3_bound(prior, ledger.round_count, ledger.squared_excess)
    return BoundReport("C3", bound, ledger.cumulative_regret)


def theorem4(ledger: RegretLedger) -> BoundReport:
    bound = theorem4_bound(ledger.n_experts, ledger.round_count, ledger.squared_excess)
    return BoundReport("T4", bound, ledger.cumulative_regret)


def small_excess(ledger: RegretLedger, xi) -> BoundReport:
    bound = small_excess_bound(xi, ledger.n_experts, ledger.negative_part)
    return BoundReport("ISEL", bound, ledger.cumulative_regret)


def iid(ledger: RegretLedger, xi, alpha: float, best: int, delta: float = 0.05) -> BoundReport:
    """High-probability check for the expert with the smallest expected loss."""
    _, hp = bound_iid(xi, ledger.n_experts, alpha, delta)
    bound = np.full(ledger.n_experts, np.inf)
    bound[best] = hp
    return BoundReport("IID", bound, ledger.cumulative_regret, kind="high_probability",
                       note=f"expert {best}, delta={delta}")


def corollary5(ledger: RegretLedger, xi) -> BoundReport:
    bound = corollary5_bound(xi, ledger.n_experts, ledger.confidence_squared_excess)
    return BoundReport("C5", bound, ledger.confidence_regret)


def mlc_hedge(ledger: RegretLedger, config: LearnerConfig) -> BoundReport:
    _check_size(ledger, config.expert_count)
    if config.fixed_rates is None:
        raise ConfigMismatch("confidence Hedge bound needs fixed_rates")
    bound = mlc_hedge_bound(config.initial_weights, config.fixed_rates, ledger.weighted_loss)
    return BoundReport("T7", bound, ledger.confidence_regret)


def _prior(ledger: RegretLedger, prior):
    if prior is None:
        return np.full(ledger.n_experts, 1.0 / ledger.n_experts)
    prior = np.asarray(prior, dtype=float)
    _check_size(ledger, prior.size)
    return prior
