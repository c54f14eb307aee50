"""A Bernstein-Freedman type martingale bound and the numeric lemmas behind it.

:func:`freedman_bound` evaluates

    sum_t X_t <= 3 sqrt((1 + sum_t V_t) ln(gamma / delta)) + ln(gamma / delta),
    gamma = 1 + (1 / 2e) (1 + ln(1 + E[sum_t V_t])),

for a martingale difference sequence with ``X_t <= 1`` and conditional
variances ``V_t``. :func:`monte_carlo_violation_rate` estimates how often it
fails on simulated coin-flip martingales, and also tracks the exponential
potential ``H_T`` whose expectation the argument keeps below ``gamma``.

:func:`lemma_exp_gap` and :func:`lemma_riemann` check the two elementary
inequalities used for the adaptive learning rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DeltaOutOfRange, DomainError, InvalidSpec


def freedman_gamma(expected_sum_variance: float) -> float:
    if expected_sum_variance < 0:
        raise DomainError("expected variance sum must be nonnegative")
    return 1.0 + (1.0 + math.log1p(expected_sum_variance)) / (2 * math.e)


def freedman_bound(sum_variance, expected_sum_variance: float, delta: float):
    """Right-hand side of the martingale bound; ``sum_variance`` may be an array."""
    if not 0.0 < delta < 1.0:
        raise DeltaOutOfRange(f"delta must lie in (0, 1), got {delta}")
    x = math.log(freedman_gamma(expected_sum_variance) / delta)
    return 3.0 * np.sqrt((1.0 + np.asarray(sum_variance, dtype=float)) * x) + x


def phi(lam):
    """``exp(lam) - lam - 1``, accurate near zero."""
    lam = np.asarray(lam, dtype=float)
    series = lam * lam * (1 / 2 + lam * (1 / 6 + lam * (1 / 24 + lam / 120)))
    return np.where(np.abs(lam) < 1e-3, series, np.expm1(lam) - lam)


def lambda_path(conditional_variances, x: float) -> np.ndarray:
    """``min(1, sqrt(x / (1 + sum_{s<t} V_s)))`` along the last axis."""
    v = np.asarray(conditional_variances, dtype=float)
    before = np.cumsum(v, axis=-1) - v
    return np.minimum(1.0, np.sqrt(x / (1.0 + before)))


def potential(increments, conditional_variances, x: float):
    """``H_T = exp(Lambda_T * sum_s (X_s - phi(Lambda_s) / Lambda_s * V_s))``."""
    xs = np.asarray(increments, dtype=float)
    v = np.asarray(conditional_variances, dtype=float)
    lam = lambda_path(v, x)
    inner = np.sum(xs - phi(lam) / lam * v, axis=-1)
    return np.exp(lam[..., -1] * inner)


@dataclass
class MartingalePath:
    increments: np.ndarray
    conditional_variances: np.ndarray
    lambda_path: np.ndarray

    def __post_init__(self):
        if np.any(self.increments > 1.0):
            raise DomainError("increments must be at most 1")
        if np.any(self.conditional_variances < 0.0):
            raise DomainError("conditional variances must be nonnegative")

    @classmethod
    def build(cls, increments, conditional_variances, x: float) -> "MartingalePath":
        v = np.asarray(conditional_variances, dtype=float)
        return cls(np.asarray(increments, dtype=float), v, lambda_path(v, x))


# Coin-flip martingales: X_t = scale * (B_t - q_t) with B_t ~ Bernoulli(q_t),
# so E[X_t | past] = 0 and V_t = scale^2 q_t (1 - q_t). With scale <= 1 every
# increment is at most 1 in absolute value.

@dataclass
class MartingaleSpec:
    """Coin-flip martingale generator.

    ``kind`` is one of

    ``zero``      X_t = 0
    ``coin``      fair coin, increments +-``scale``/2
    ``drifting``  bias following a fixed sinusoidal schedule
    ``adaptive``  bias chosen from the running sum (a predictable process)

    Only ``adaptive`` lacks a closed form for ``E[sum V]``; it is estimated by
    a pilot simulation and flagged.
    """

    kind: str = "coin"
    scale: float = 1.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("zero", "coin", "drifting", "adaptive"):
            raise InvalidSpec(f"unknown martingale kind {self.kind!r}")
        if not 0.0 <= self.scale <= 1.0:
            raise InvalidSpec("scale must lie in [0, 1] so that increments stay <= 1")

    def bias_schedule(self, n_rounds: int) -> np.ndarray:
        t = np.arange(1, n_rounds + 1)
        if self.kind == "drifting":
            amp = self.params.get("amplitude", 0.4)
            period = self.params.get("period", 200.0)
            return 0.5 + amp * np.sin(2 * math.pi * t / period)
        return np.full(n_rounds, 0.5)

    def expected_sum_variance(self, n_rounds: int) -> Optional[float]:
        if self.kind == "zero":
            return 0.0
        if self.kind == "adaptive":
            return None
        q = self.bias_schedule(n_rounds)
        return float(self.scale ** 2 * np.sum(q * (1 - q)))

    def sample(self, uniforms: np.ndarray):
        """Increments and conditional variances driven by (reps, T) uniforms."""
        reps, n = uniforms.shape
        if self.kind == "zero":
            z = np.zeros((reps, n))
            return z, z.copy()
        if self.kind != "adaptive":
            q = self.bias_schedule(n)
            x = self.scale * ((uniforms < q) - q)
            return x, np.broadcast_to(self.scale ** 2 * q * (1 - q), (reps, n)).copy()
        tilt = self.params.get("tilt", 0.4)
        x = np.empty((reps, n))
        v = np.empty((reps, n))
        total = np.zeros(reps)
        for t in range(n):
            q = 0.5 + tilt * np.tanh(total / math.sqrt(t + 1))
            x[:, t] = self.scale * ((uniforms[:, t] < q) - q)
            v[:, t] = self.scale ** 2 * q * (1 - q)
            total += x[:, t]
        return x, v


def replication_uniforms(seed: int, start: int, stop: int, n_rounds: int) -> np.ndarray:
    """Uniform draws for replications ``start..stop-1``, each from its own stream.

    Replication ``i`` always uses the stream derived from ``(seed, i)``, so any
    split of the range reproduces the serial result exactly.
    """
    out = np.empty((stop - start, n_rounds))
    for j, i in enumerate(range(start, stop)):
        ss = np.random.SeedSequence(seed, spawn_key=(i,))
        out[j] = np.random.Generator(np.random.Philox(ss)).random(n_rounds)
    return out


@dataclass
class MonteCarloResult:
    violation_rate: float
    replications: int
    delta: float
    gamma: float
    expected_sum_variance: float
    estimated_variance: bool
    potential_mean: float
    potential_stderr: float
    sums: np.ndarray = field(repr=False)
    bounds: np.ndarray = field(repr=False)

    @property
    def binomial_sigma(self) -> float:
        return math.sqrt(self.delta * (1 - self.delta) / self.replications)


def monte_carlo_violation_rate(spec: MartingaleSpec, n_rounds: int, delta: float,
                               replications: int, seed: int, start: int = 0,
                               expected_sum_variance: Optional[float] = None,
                               pilot: int = 2000) -> MonteCarloResult:
    """Fraction of replications in which the martingale bound fails."""
    if not 0.0 < delta < 1.0:
        raise DeltaOutOfRange(f"delta must lie in (0, 1), got {delta}")
    esv = expected_sum_variance
    estimated = False
    if esv is None:
        esv = spec.expected_sum_variance(n_rounds)
    if esv is None:
        # pilot on a fixed block of replication indices, disjoint from the main run
        u = replication_uniforms(seed, 2**31, 2**31 + pilot, n_rounds)
        esv = float(spec.sample(u)[1].sum(axis=1).mean())
        estimated = True
    u = replication_uniforms(seed, start, start + replications, n_rounds)
    xs, v = spec.sample(u)
    sums = xs.sum(axis=1)
    sum_v = v.sum(axis=1)
    bounds = freedman_bound(sum_v, esv, delta)
    gamma = freedman_gamma(esv)
    h = potential(xs, v, math.log(gamma / delta))
    return MonteCarloResult(
        violation_rate=float(np.mean(sums > bounds)),
        replications=replications,
        delta=delta,
        gamma=gamma,
        expected_sum_variance=esv,
        estimated_variance=estimated,
        potential_mean=float(h.mean()),
        potential_stderr=float(h.std(ddof=1) / math.sqrt(replications)) if replications > 1 else 0.0,
        sums=sums,
        bounds=bounds,
    )


# Elementary lemmas

def exp_gap_margin(x, alpha):
    """``x^alpha + (alpha - 1)/e - x``; nonnegative for x > 0, alpha >= 1."""
    x = np.asarray(x, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if np.any(x <= 0) or np.any(alpha < 1):
        raise DomainError("need x > 0 and alpha >= 1")
    return x ** alpha + (alpha - 1) / math.e - x


def lemma_exp_gap(x: float, alpha: float) -> bool:
    """Whether ``x <= x^alpha + (alpha - 1)/e`` (with 1e-12 slack)."""
    return bool(exp_gap_margin(x, alpha) >= -1e-12)


_RIEMANN = {
    "inverse": (lambda u: 1.0 / u, lambda lo, hi: math.log(hi / lo)),
    "inverse_sqrt": (lambda u: 1.0 / np.sqrt(u), lambda lo, hi: 2.0 * (math.sqrt(hi) - math.sqrt(lo))),
}


def riemann_sides(a0: float, a, f_id: str) -> tuple[float, float]:
    """Left and right side of ``sum_i a_i f(a_0 + ... + a_{i-1}) <= f(a_0) + integral``."""
    if f_id not in _RIEMANN:
        raise DomainError(f"unknown function {f_id!r}; use 'inverse' or 'inverse_sqrt'")
    a = np.asarray(a, dtype=float)
    if not a0 > 0:
        raise DomainError("a0 must be positive")
    if a.size and (a.min() < 0 or a.max() > 1):
        raise DomainError("sequence entries must lie in [0, 1]")
    f, integral = _RIEMANN[f_id]
    partial = a0 + np.concatenate([[0.0], np.cumsum(a)])
    lhs = float(np.sum(a * f(partial[:-1])))
    rhs = float(f(a0)) + integral(a0, float(partial[-1]))
    return lhs, rhs


def lemma_riemann(a0: float, a, f_id: str) -> bool:
    lhs, rhs = riemann_sides(a0, a, f_id)
    return lhs <= rhs + 1e-9
