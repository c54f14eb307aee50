"""Seeded loss and confidence generators.

Every generator draws from a Philox stream keyed on the seed. Round ``t``
owns a fixed block of that stream, so any slice of rounds can be produced on
its own (:func:`generate_rounds`) and matches the full stream exactly.

Kinds
-----
``identical``             all experts share one uniform loss per round
``adversarial_random``    i.i.d. uniform losses
``alternating``           two experts, losses (0,1), (1,0), (0,1), ...
``iid_gap``               Bernoulli losses with means ``params['means']``; the
                          best mean beats all others by at least ``alpha``
``small_loss``            uniform losses scaled by ``scale`` (``best_scale`` for expert 1)
``gain_framed``           raw losses in [-1, 0] (negated uniform gains)
``confidence_bernoulli``  uniform losses, experts asleep with prob ``sleep_prob``;
                          awake experts get confidence 1, or a uniform level if ``graded``
``confidence_scaled``     uniform losses, confidences ``lambdas[k] * U(0,1)``
``shock_recovery``        expert 1 loses 1 for ``shocks`` rounds while the others lose 0,
                          then loses 0 while the others lose ``epsilon``
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import csvio
from .core import ConfidenceVector, LossVector
from .errors import InvalidSpec

KINDS = (
    "identical",
    "adversarial_random",
    "alternating",
    "iid_gap",
    "small_loss",
    "gain_framed",
    "confidence_bernoulli",
    "confidence_scaled",
    "shock_recovery",
)


@dataclass
class GeneratorSpec:
    kind: str
    n_experts: int
    n_rounds: int
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown generator kind {self.kind!r}; choose from {KINDS}")
        if self.n_experts < 1 or self.n_rounds < 0:
            raise InvalidSpec("need n_experts >= 1 and n_rounds >= 0")
        if self.seed < 0:
            raise InvalidSpec("seed must be nonnegative")
        k = self.n_experts
        p = self.params
        if self.kind == "alternating" and k != 2:
            raise InvalidSpec("the alternating sequence is defined for two experts")
        if self.kind == "iid_gap":
            alpha = p.get("alpha", 0.2)
            means = np.asarray(p.get("means", [0.3] + [0.3 + alpha] * (k - 1)), dtype=float)
            if means.shape != (k,) or means.min() < 0 or means.max() > 1:
                raise InvalidSpec("iid_gap means must be K numbers in [0, 1]")
            if not 0 < alpha <= 1:
                raise InvalidSpec("alpha must lie in (0, 1]")
            if k > 1 and np.sort(means)[1] - means.min() < alpha - 1e-12:
                raise InvalidSpec(f"means {means.tolist()} do not have a gap of {alpha}")
        if self.kind == "small_loss":
            if not (0 < p.get("scale", 0.1) <= 1 and 0 < p.get("best_scale", 0.02) <= 1):
                raise InvalidSpec("small_loss scales must lie in (0, 1]")
        if self.kind == "shock_recovery" and not 0 <= p.get("epsilon", 0.05) <= 1:
            raise InvalidSpec("epsilon must lie in [0, 1]")
        if self.kind == "confidence_bernoulli" and not 0 <= p.get("sleep_prob", 0.3) < 1:
            raise InvalidSpec("sleep_prob must lie in [0, 1)")
        if self.kind == "confidence_scaled":
            lam = np.asarray(p.get("lambdas", np.ones(k)), dtype=float)
            if lam.shape != (k,) or lam.min() < 0 or lam.max() > 1 or lam.max() == 0:
                raise InvalidSpec("lambdas must be K numbers in [0, 1], not all zero")

    @property
    def means(self) -> Optional[np.ndarray]:
        if self.kind != "iid_gap":
            return None
        alpha = self.params.get("alpha", 0.2)
        k = self.n_experts
        return np.asarray(self.params.get("means", [0.3] + [0.3 + alpha] * (k - 1)), dtype=float)

    @property
    def best_expert(self) -> Optional[int]:
        """Expert with the smallest expected loss (iid_gap only)."""
        m = self.means
        return None if m is None else int(np.argmin(m))

    @property
    def loss_range(self) -> tuple[float, float]:
        return (-1.0, 0.0) if self.kind == "gain_framed" else (0.0, 1.0)

    @property
    def has_confidences(self) -> bool:
        return self.kind.startswith("confidence_")

    def draws_per_round(self) -> int:
        k = self.n_experts
        n = {"identical": 1, "alternating": 0, "shock_recovery": 0}.get(self.kind, k)
        if self.has_confidences:
            n += k
        return 4 * math.ceil(n / 4)


@dataclass
class Stream:
    """A generated sequence; ``losses`` are rescaled to [0, 1], ``raw`` are not."""

    spec: GeneratorSpec
    losses: np.ndarray
    raw: np.ndarray
    confidences: Optional[np.ndarray] = None
    start: int = 0

    @property
    def loss_range(self):
        return self.spec.loss_range

    def __len__(self):
        return self.losses.shape[0]

    def __iter__(self):
        for t in range(len(self)):
            lv = LossVector(self.losses[t], self.loss_range)
            cv = None if self.confidences is None else ConfidenceVector(self.confidences[t])
            yield lv, cv

    def loss_vectors(self):
        return [LossVector(row, self.loss_range) for row in self.losses]

    def to_csv(self, losses_path, confidences_path=None) -> None:
        """Write the raw losses (and confidences if any)."""
        csvio.write_matrix(losses_path, self.raw)
        if confidences_path is not None and self.confidences is not None:
            csvio.write_matrix(confidences_path, self.confidences)


def _uniforms(spec: GeneratorSpec, start: int, stop: int) -> np.ndarray:
    d = spec.draws_per_round()
    if d == 0 or stop <= start:
        return np.empty((max(stop - start, 0), d))
    bitgen = np.random.Philox(key=spec.seed)
    # each counter step yields four 64-bit words, one per double
    bitgen.advance(start * d // 4)
    return np.random.Generator(bitgen).random((stop - start) * d).reshape(stop - start, d)


def generate_rounds(spec: GeneratorSpec, start: int, stop: int) -> Stream:
    """Rounds ``start..stop-1`` (0-based) of the stream described by ``spec``."""
    if not 0 <= start <= stop <= spec.n_rounds:
        raise InvalidSpec(f"round slice [{start}, {stop}) outside 0..{spec.n_rounds}")
    k = spec.n_experts
    u = _uniforms(spec, start, stop)
    p = spec.params
    conf = None
    kind = spec.kind
    if kind == "identical":
        raw = np.repeat(u[:, :1], k, axis=1)
    elif kind == "alternating":
        odd = (np.arange(start, stop) % 2 == 0)[:, None]
        raw = np.where(odd, [[0.0, 1.0]], [[1.0, 0.0]])
    elif kind == "shock_recovery":
        shocked = (np.arange(start, stop) < p.get("shocks", 6))[:, None]
        calm = np.full(k, p.get("epsilon", 0.05))
        calm[0] = 0.0
        hit = np.zeros(k)
        hit[0] = 1.0
        raw = np.where(shocked, hit, calm)
    elif kind == "iid_gap":
        raw = (u[:, :k] < spec.means).astype(float)
    elif kind == "small_loss":
        scale = np.full(k, p.get("scale", 0.1))
        scale[0] = p.get("best_scale", 0.02)
        raw = u[:, :k] * scale
    elif kind == "gain_framed":
        raw = -u[:, :k]
    else:
        raw = u[:, :k]
    if kind == "confidence_bernoulli":
        v = u[:, k:2 * k]
        sleep = p.get("sleep_prob", 0.3)
        if p.get("graded", False):
            conf = np.where(v < sleep, 0.0, (v - sleep) / (1 - sleep))
        else:
            conf = (v >= sleep).astype(float)
        conf = _ensure_active(conf, v, np.ones(k))
    elif kind == "confidence_scaled":
        lam = np.asarray(p.get("lambdas", np.ones(k)), dtype=float)
        conf = lam * u[:, k:2 * k]
        conf = _ensure_active(conf, u[:, k:2 * k], lam)
    a, b = spec.loss_range
    losses = (raw - a) / (b - a)
    return Stream(spec, losses, raw, conf, start)


def _ensure_active(conf, draws, ceiling):
    """Wake the expert with the largest draw in rounds where nobody is active."""
    empty = conf.max(axis=1) == 0.0
    if empty.any():
        rows = np.flatnonzero(empty)
        pick = np.argmax(draws[rows] * (ceiling > 0), axis=1)
        conf[rows, pick] = ceiling[pick]
    return conf


def generate(spec: GeneratorSpec) -> Stream:
    """The whole stream; bitwise identical for identical specs."""
    return generate_rounds(spec, 0, spec.n_rounds)
