"""Domain types, the learner base class and the regret ledger.

All learners work on losses in the canonical range [0, 1]. Losses living in
some other interval [a, b] are mapped there with :meth:`LossVector.from_raw`;
the width ``b - a`` travels with each round so the ledger can report regrets
in original units as well.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import EmptyActiveSet, LossOutOfRange, AggregationError

MIXTURE_TOL = 1e-12


@dataclass(frozen=True)
class LossVector:
    """One round of losses, already rescaled to [0, 1]."""

    values: np.ndarray
    original_range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise AggregationError("a loss vector needs at least one entry")
        a, b = map(float, self.original_range)
        if not a < b:
            raise AggregationError(f"invalid loss range ({a}, {b})")
        if not (values.min() >= 0.0 and values.max() <= 1.0):
            raise LossOutOfRange(f"rescaled losses outside [0, 1]: {values}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "original_range", (a, b))

    @classmethod
    def from_raw(cls, raw, loss_range=(0.0, 1.0)) -> "LossVector":
        """Affinely map ``raw`` from ``loss_range`` onto [0, 1]."""
        a, b = map(float, loss_range)
        if not a < b:
            raise AggregationError(f"invalid loss range ({a}, {b})")
        raw = np.asarray(raw, dtype=float)
        if raw.size and (raw.min() < a or raw.max() > b):
            raise LossOutOfRange(f"losses {raw} outside declared range [{a}, {b}]")
        return cls((raw - a) / (b - a), (a, b))

    @property
    def width(self) -> float:
        return self.original_range[1] - self.original_range[0]

    def to_original(self) -> np.ndarray:
        a, b = self.original_range
        return a + self.values * (b - a)

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True)
class ConfidenceVector:
    """Per-expert confidences in [0, 1]; at least one must be positive."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise AggregationError("a confidence vector needs at least one entry")
        if not (values.min() >= 0.0 and values.max() <= 1.0):
            raise AggregationError(f"confidences outside [0, 1]: {values}")
        if not values.max() > 0.0:
            raise EmptyActiveSet("every expert reported zero confidence")
        object.__setattr__(self, "values", values)

    @property
    def active(self) -> np.ndarray:
        return self.values > 0.0

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def as_losses(losses, n_experts: int) -> tuple[np.ndarray, float, float]:
    """Return (values in [0,1], original width, smallest value)."""
    if isinstance(losses, LossVector):
        values, width = losses.values, losses.width
    else:
        values, width = np.asarray(losses, dtype=float), 1.0
    if values.shape != (n_experts,):
        raise AggregationError(f"expected {n_experts} losses, got shape {values.shape}")
    lo = np.minimum.reduce(values)
    if not (lo >= 0.0 and np.maximum.reduce(values) <= 1.0):
        raise LossOutOfRange(f"losses outside [0, 1]: {values}")
    return values, width, lo


def as_confidences(confidences, n_experts: int) -> np.ndarray:
    if isinstance(confidences, ConfidenceVector):
        values = confidences.values
    else:
        values = ConfidenceVector(confidences).values
    if values.shape != (n_experts,):
        raise AggregationError(f"expected {n_experts} confidences, got shape {values.shape}")
    return values


def check_mixture(p, tol: float = MIXTURE_TOL) -> np.ndarray:
    """Validate a mixture vector: nonnegative entries summing to one."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0 or p.min() < 0.0 or abs(p.sum() - 1.0) > tol:
        raise AggregationError(f"not a probability vector: {p}")
    return p


def excess_regrets(p: np.ndarray, losses: np.ndarray, lo=None) -> np.ndarray:
    """Instantaneous regrets ``p.losses - losses``.

    Computed from differences to the round's smallest loss ``lo`` so that
    shifting every loss by the same constant reproduces the regrets up to one
    rounding of the differences.
    """
    d = losses - (np.minimum.reduce(losses) if lo is None else lo)
    return p @ d - d


@dataclass(slots=True)
class RoundOutcome:
    mixture: np.ndarray
    aggregate_loss: float
    instantaneous_regrets: np.ndarray
    losses: np.ndarray
    confidences: Optional[np.ndarray] = None
    loss_width: float = 1.0


_STATS = (
    "cumulative_regret",
    "squared_excess",
    "positive_part",
    "negative_part",
    "confidence_regret",
    "confidence_squared_excess",
    "weighted_loss",
    "cumulative_loss",
    "original_regret",
    "original_confidence_regret",
)


class RegretLedger:
    """Running regret statistics, one entry per expert.

    ``positive_part`` and ``negative_part`` split the regret by the sign of
    each round's increment, so ``cumulative_regret == positive_part -
    negative_part``. ``negative_part`` is also the sum of the expert's excess
    losses over the rounds where it did no better than the aggregate.
    Confidence-weighted statistics treat a round without confidences as
    all-ones.

    Rounds are buffered and folded into the totals in blocks; the fold adds
    rows in order, so totals equal a plain running sum bit for bit.
    """

    block = 1024

    def __init__(self, n_experts: int):
        k = n_experts
        self.n_experts = k
        self.round_count = 0
        self._totals = np.zeros((len(_STATS), k))
        self._aggregate = 0.0
        self._r = np.empty((self.block, k))
        self._l = np.empty((self.block, k))
        self._c = np.ones((self.block, k))
        self._h = np.empty(self.block)
        self._w = np.ones(self.block)
        self._n = 0

    def record(self, outcome: RoundOutcome) -> None:
        i = self._n
        self._r[i] = outcome.instantaneous_regrets
        self._l[i] = outcome.losses
        self._h[i] = outcome.aggregate_loss
        if outcome.confidences is not None:
            self._c[i] = outcome.confidences
        if outcome.loss_width != 1.0:
            self._w[i] = outcome.loss_width
        self._n = i + 1
        self.round_count += 1
        if self._n == self.block:
            self._flush()

    def _flush(self) -> None:
        n = self._n
        if n == 0:
            return
        r, l, c = self._r[:n], self._l[:n], self._c[:n]
        w = self._w[:n, None]
        ir = c * r
        rows = np.stack([
            r, r * r, np.maximum(r, 0.0), np.maximum(-r, 0.0),
            ir, ir * ir, c * l, l, w * r, w * ir,
        ])
        rows = np.concatenate([self._totals[:, None, :], rows], axis=1)
        self._totals = np.cumsum(rows, axis=1)[:, -1, :]
        self._aggregate = float(np.cumsum(np.concatenate([[self._aggregate], self._h[:n]]))[-1])
        self._c[:n] = 1.0
        self._w[:n] = 1.0
        self._n = 0

    def _stat(self, i: int) -> np.ndarray:
        self._flush()
        return self._totals[i]

    cumulative_regret = property(lambda self: self._stat(0))
    squared_excess = property(lambda self: self._stat(1))
    positive_part = property(lambda self: self._stat(2))
    negative_part = property(lambda self: self._stat(3))
    confidence_regret = property(lambda self: self._stat(4))
    confidence_squared_excess = property(lambda self: self._stat(5))
    weighted_loss = property(lambda self: self._stat(6))
    cumulative_loss = property(lambda self: self._stat(7))
    original_regret = property(lambda self: self._stat(8))
    original_confidence_regret = property(lambda self: self._stat(9))

    @property
    def aggregate_loss(self) -> float:
        """Cumulative loss of the aggregate."""
        self._flush()
        return self._aggregate

    @classmethod
    def replay(cls, outcomes: Iterable[RoundOutcome], n_experts: int) -> "RegretLedger":
        ledger = cls(n_experts)
        for outcome in outcomes:
            ledger.record(outcome)
        return ledger

    def best_expert(self) -> int:
        """Index of the smallest cumulative loss (lowest index on ties)."""
        return int(np.argmin(self.cumulative_loss))

    def as_dict(self) -> dict:
        out = {"round_count": self.round_count, "aggregate_loss": self.aggregate_loss}
        for name in _STATS:
            out[name] = getattr(self, name).tolist()
        return out


@dataclass
class LearnerConfig:
    expert_count: int
    initial_weights: Optional[np.ndarray] = None
    fixed_rates: Optional[np.ndarray] = None
    seed: Optional[int] = None

    def __post_init__(self):
        k = int(self.expert_count)
        if k < 1:
            raise AggregationError("need at least one expert")
        self.expert_count = k
        if self.initial_weights is None:
            w = np.full(k, 1.0 / k)
        else:
            w = np.asarray(self.initial_weights, dtype=float)
            if w.shape != (k,) or w.min() <= 0.0 or abs(w.sum() - 1.0) > MIXTURE_TOL:
                raise AggregationError(
                    "initial weights must be K positive numbers summing to 1")
        self.initial_weights = w
        if self.fixed_rates is not None:
            rates = np.broadcast_to(np.asarray(self.fixed_rates, dtype=float), (k,)).copy()
            self.fixed_rates = rates

    @property
    def uniform_prior(self) -> bool:
        return bool(np.all(self.initial_weights == self.initial_weights[0]))


class Learner:
    """Common predict/update interface.

    Subclasses implement ``_mixture`` and ``_advance``. With a single expert
    the point mass is returned and no algorithm state is touched.
    """

    name = "learner"
    uses_confidences = False

    def __init__(self, n_experts: int, prior=None, rates=None):
        self.config = LearnerConfig(n_experts, prior, rates)
        self.n_experts = self.config.expert_count
        self.prior = self.config.initial_weights
        self.ledger = RegretLedger(self.n_experts)

    @property
    def t(self) -> int:
        return self.ledger.round_count

    def _confidences(self, confidences):
        if self.uses_confidences:
            if confidences is None:
                return np.ones(self.n_experts)
            return as_confidences(confidences, self.n_experts)
        if confidences is not None:
            raise AggregationError(
                f"{self.name} ignores confidences; wrap it in ConfidenceReduction")
        return None

    def predict(self, confidences=None) -> np.ndarray:
        """Mixture for the coming round. Does not change any state."""
        conf = self._confidences(confidences)
        if self.n_experts == 1:
            return np.ones(1)
        return self._mixture(conf)

    def update(self, losses, confidences=None) -> RoundOutcome:
        values, width, lo = as_losses(losses, self.n_experts)
        conf = self._confidences(confidences)
        if self.n_experts == 1:
            p = np.ones(1)
        else:
            p = self._mixture(conf)
        lhat = float(p @ values)
        r = excess_regrets(p, values, lo)
        if self.n_experts > 1:
            self._advance(values, r, lhat, p, conf)
        outcome = RoundOutcome(p, lhat, r, values, conf, width)
        self.ledger.record(outcome)
        return outcome

    def _mixture(self, confidences) -> np.ndarray:
        raise NotImplementedError

    def _advance(self, losses, r, lhat, p, confidences) -> None:
        raise NotImplementedError


@dataclass
class Run:
    """Per-round record of a learner driven over a whole sequence."""

    mixtures: np.ndarray
    aggregate_losses: np.ndarray
    regrets: np.ndarray
    ledger: RegretLedger
    outcomes: list = field(default_factory=list, repr=False)

    @property
    def cumulative_regrets(self) -> np.ndarray:
        return np.cumsum(self.regrets, axis=0)


def run(learner, losses, confidences=None, keep_outcomes: bool = False,
        record: bool = True) -> Run:
    """Feed a (T, K) loss matrix (and optional confidences) through ``learner``.

    ``learner`` is anything with ``update(losses[, confidences])`` returning a
    RoundOutcome and a ``ledger`` attribute.
    """
    losses = np.asarray(losses, dtype=float)
    n_rounds, k = losses.shape
    mixtures = np.empty((n_rounds, k)) if record else np.empty((0, k))
    agg = np.empty(n_rounds) if record else np.empty(0)
    regrets = np.empty((n_rounds, k)) if record else np.empty((0, k))
    outcomes = []
    conf = None if confidences is None else np.asarray(confidences, dtype=float)
    for t in range(n_rounds):
        if conf is None:
            out = learner.update(losses[t])
        else:
            out = learner.update(losses[t], conf[t])
        if record:
            mixtures[t] = out.mixture
            agg[t] = out.aggregate_loss
            regrets[t] = out.instantaneous_regrets
        if keep_outcomes:
            outcomes.append(out)
    return Run(mixtures, agg, regrets, learner.ledger, outcomes)
