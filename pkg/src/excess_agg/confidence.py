"""Experts that report confidences, and convex losses via linearization.

:class:`ConfidenceReduction` turns any standard-setting learner into one for
experts reporting confidences ``I_k in [0, 1]``. The wrapped learner sees
modified losses ``I_k * loss_k + (1 - I_k) * aggregate``; with that choice its
ordinary regret against expert k equals the confidence regret
``sum_t I_{k,t} * (aggregate_t - loss_{k,t})`` on the original losses, round
by round. Sleeping experts are the special case ``I in {0, 1}``.

:class:`GradientTrick` handles experts that predict points of a convex set and
are scored by a convex differentiable loss: the loss is replaced by its
gradient at the aggregated point, which reduces the problem to linear losses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (
    LossVector,
    RegretLedger,
    RoundOutcome,
    as_confidences,
    as_losses,
    excess_regrets,
)
from .errors import AggregationError, GradientBoundViolated, StaleRound


def redistribute(inner_mixture: np.ndarray, confidences: np.ndarray) -> np.ndarray:
    """Reweight a mixture by confidences and renormalize over active experts.

    If the inner mixture puts no mass on any active expert, the mass is spread
    proportionally to the confidences instead. Any mixture supported on the
    active set keeps the regret identity in that case.
    """
    v = confidences * inner_mixture
    s = v.sum()
    if s > 0.0:
        return v / s
    return confidences / confidences.sum()


def modified_losses(losses, confidences, aggregate_loss: float) -> np.ndarray:
    """``I * loss + (1 - I) * aggregate``, clipped against rounding to [0, 1]."""
    out = confidences * losses + (1.0 - confidences) * aggregate_loss
    return np.clip(out, 0.0, 1.0)


class ConfidenceReduction:
    """Wrap a standard learner for experts reporting confidences.

    Call :meth:`predict` with the round's confidences, then :meth:`update`
    with the losses (or use :meth:`step` for both). ``ledger`` holds the
    confidence regrets on the original losses; ``inner.ledger`` holds the
    standard regrets of the wrapped learner on the modified losses.
    """

    name = "reduction"
    uses_confidences = True

    def __init__(self, inner):
        if getattr(inner, "uses_confidences", False):
            raise AggregationError(
                f"{inner.name} already handles confidences; wrap a standard learner")
        self.inner = inner
        self.n_experts = inner.n_experts
        self.ledger = RegretLedger(self.n_experts)
        self.last_inner_outcome: Optional[RoundOutcome] = None
        self._pending = None

    @property
    def t(self) -> int:
        return self.ledger.round_count

    def predict(self, confidences) -> np.ndarray:
        if self._pending is not None:
            raise StaleRound("predict called twice without an update")
        conf = as_confidences(confidences, self.n_experts)
        inner_p = self.inner.predict()
        p = redistribute(inner_p, conf)
        self._pending = (conf, inner_p, p)
        return p

    def update(self, losses, confidences=None) -> RoundOutcome:
        if self._pending is None:
            if confidences is None:
                raise StaleRound("update called before predict")
            self.predict(confidences)
            confidences = None
        conf, inner_p, p = self._pending
        if confidences is not None and not np.array_equal(
                as_confidences(confidences, self.n_experts), conf):
            raise StaleRound("confidences differ from the ones given to predict")
        values, width, lo = as_losses(losses, self.n_experts)
        lhat = float(p @ values)
        modified = modified_losses(values, conf, lhat)
        if width != 1.0:
            modified = LossVector(modified, (0.0, width))
        self.last_inner_outcome = self.inner.update(modified)
        r = excess_regrets(p, values, lo)
        outcome = RoundOutcome(p, lhat, r, values, conf, width)
        self.ledger.record(outcome)
        self._pending = None
        return outcome

    def step(self, losses, confidences) -> RoundOutcome:
        self.predict(confidences)
        return self.update(losses)


def identity_residual(outcome: RoundOutcome, inner_outcome: RoundOutcome) -> np.ndarray:
    """``I_k (aggregate - loss_k) - (inner mixture . modified - modified_k)`` per expert.

    Zero up to rounding for every round of a :class:`ConfidenceReduction`.
    """
    conf = outcome.confidences
    lhs = conf * (outcome.aggregate_loss - outcome.losses)
    mod = inner_outcome.losses
    rhs = inner_outcome.mixture @ mod - mod
    return lhs - rhs


@dataclass
class ConvexLossOracle:
    """A convex differentiable loss on a convex set of diameter ``diameter``.

    ``gradient_bound`` must bound the Euclidean norm of the gradient over the
    set; together with the diameter it fixes the affine map that sends
    linearized losses into [0, 1].
    """

    evaluate: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    gradient_bound: float
    diameter: float
    dimension: int = 1

    def __post_init__(self):
        if not (self.gradient_bound > 0 and self.diameter > 0):
            raise AggregationError("gradient_bound and diameter must be positive")


def check_gradient(oracle: ConvexLossOracle, points, rtol: float = 1e-5,
                   atol: float = 1e-7, step: float = 1e-6) -> bool:
    """Compare ``oracle.gradient`` against central finite differences."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    eye = np.eye(oracle.dimension)
    for x in points:
        h = step * max(1.0, float(np.abs(x).max()))
        fd = np.array([
            (oracle.evaluate(x + h * e) - oracle.evaluate(x - h * e)) / (2 * h) for e in eye
        ])
        if not np.allclose(np.atleast_1d(oracle.gradient(x)), fd, rtol=rtol, atol=atol):
            return False
    return True


def linearize(oracle: ConvexLossOracle, expert_points, aggregate_point) -> LossVector:
    """Pseudo-losses ``grad f(aggregate) . x_k`` rescaled into [0, 1].

    Each round is mapped with the interval centred on ``grad . aggregate`` of
    half-width ``gradient_bound * diameter``. The centre moves from round to
    round but the width does not, so excess losses (and hence regrets) are a
    fixed multiple, ``2 * gradient_bound * diameter``, of the raw ones.
    """
    x = np.atleast_2d(np.asarray(expert_points, dtype=float))
    if x.shape[1] != oracle.dimension:
        x = x.reshape(-1, oracle.dimension)
    xhat = np.atleast_1d(np.asarray(aggregate_point, dtype=float))
    g = np.atleast_1d(np.asarray(oracle.gradient(xhat), dtype=float))
    half = oracle.gradient_bound * oracle.diameter
    slack = 1e-9 * half
    if np.linalg.norm(g) > oracle.gradient_bound * (1 + 1e-9):
        raise GradientBoundViolated(
            f"gradient norm {np.linalg.norm(g):.6g} exceeds declared bound {oracle.gradient_bound}")
    raw = x @ g
    centre = float(g @ xhat)
    if np.abs(raw - centre).max() > half + slack:
        raise GradientBoundViolated(
            "pseudo-loss outside the declared range; check gradient_bound and diameter")
    a, b = centre - half, centre + half
    return LossVector(np.clip((raw - a) / (b - a), 0.0, 1.0), (a, b))


class GradientTrick:
    """Aggregate point forecasts under convex losses through a linear-loss learner.

    ``learner`` is a standard learner, or a :class:`ConfidenceReduction` when
    confidences are supplied.
    """

    def __init__(self, learner):
        self.learner = learner
        self._pending = None

    def predict(self, expert_points, confidences=None) -> np.ndarray:
        x = np.asarray(expert_points, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if confidences is None:
            p = self.learner.predict()
        else:
            p = self.learner.predict(confidences)
        xhat = p @ x
        self._pending = (x, xhat, confidences)
        return xhat

    def update(self, oracle: ConvexLossOracle) -> RoundOutcome:
        if self._pending is None:
            raise StaleRound("update called before predict")
        x, xhat, confidences = self._pending
        self._pending = None
        pseudo = linearize(oracle, x, xhat)
        if confidences is None:
            return self.learner.update(pseudo)
        return self.learner.update(pseudo, confidences)
