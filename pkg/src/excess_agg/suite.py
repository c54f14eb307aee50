"""Evaluate bounds for a finished learner, and the randomized bound-checking matrix."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bounds
from .confidence import ConfidenceReduction
from .core import run
from .errors import ConfigMismatch
from .learners import AdaptMLProd, MLCHedge, MLPoly, MLProd, make_learner
from .sim import GeneratorSpec, generate

DEFAULT_CHECKS = {
    "ml_prod": ("T1", "Eq5", "Eq6"),
    "adapt_ml_prod": ("T2", "C3", "ISEL", "Eq6"),
    "ml_poly": ("T4", "ISEL", "Eq6"),
    "mlc_hedge": ("T7",),
    "reduction": ("C5",),
}


def learner_xi(learner, n_rounds: int):
    """The ``(xi1, xi2)`` pair guaranteed by an adaptive learner, else None."""
    if learner.n_experts < 2:
        return None
    if isinstance(learner, AdaptMLProd):
        return bounds.xi_adapt_ml_prod(learner.n_experts, n_rounds)
    if isinstance(learner, MLPoly):
        return bounds.xi_ml_poly(learner.n_experts, n_rounds)
    return None


def default_checks(learner) -> tuple:
    if isinstance(learner, ConfidenceReduction):
        return DEFAULT_CHECKS["reduction"]
    return DEFAULT_CHECKS[learner.name]


def evaluate(learner, checks=None, alpha=None, best=None, delta: float = 0.05) -> list:
    """Bound reports for ``learner`` after it has processed a sequence.

    For a :class:`ConfidenceReduction`, ``C5`` is checked on the confidence
    regrets and the other ids on the wrapped learner's own ledger.
    """
    if checks is None:
        checks = default_checks(learner)
    wrapped = isinstance(learner, ConfidenceReduction)
    base = learner.inner if wrapped else learner
    ledger = base.ledger
    xi = learner_xi(base, ledger.round_count)
    out = []
    for tid in checks:
        if tid == "C5" and not wrapped:
            raise ConfigMismatch("C5 applies to the confidence reduction only")
        if tid in ("ISEL", "IID", "C5") and xi is None:
            raise ConfigMismatch(f"{tid} needs an adaptive learner (adapt_ml_prod or ml_poly)")
        if tid == "T1":
            _expect(base, MLProd, tid)
            out.append(bounds.theorem1(ledger, base.config))
        elif tid == "Eq5":
            out.append(bounds.optimized_prod(ledger, base.prior))
        elif tid == "Eq6":
            out.append(bounds.variance(ledger, xi, base.prior))
        elif tid == "T2":
            _expect(base, AdaptMLProd, tid)
            out.append(bounds.theorem2(base))
        elif tid == "C3":
            _expect(base, AdaptMLProd, tid)
            out.append(bounds.corollary3(ledger, base.prior))
        elif tid == "T4":
            _expect(base, MLPoly, tid)
            out.append(bounds.theorem4(ledger))
        elif tid == "ISEL":
            out.append(bounds.small_excess(ledger, xi))
        elif tid == "IID":
            if alpha is None or best is None:
                raise ConfigMismatch("IID needs the gap alpha and the best expert")
            out.append(bounds.iid(ledger, xi, alpha, best, delta))
        elif tid == "C5":
            out.append(bounds.corollary5(learner.ledger, xi))
        elif tid == "T7":
            _expect(base, MLCHedge, tid)
            out.append(bounds.mlc_hedge(ledger, base.config))
        else:
            raise ConfigMismatch(f"unknown theorem id {tid!r}")
    return out


def _expect(learner, cls, tid):
    if not isinstance(learner, cls):
        raise ConfigMismatch(f"{tid} does not apply to {learner.name}")


# Randomized matrix

SCALES = {
    "small": dict(k_max=5, t_max=500),
    "medium": dict(k_max=10, t_max=5000),
}
STANDARD_GENERATORS = (
    "adversarial_random", "alternating", "small_loss", "gain_framed", "identical", "shock_recovery",
)
CONFIDENCE_GENERATORS = ("confidence_bernoulli", "confidence_scaled")
MLC_RATES = (0.1, 0.3, 1.0)


def draw_case(seed: int, k_max: int, t_min: int = 10, t_max: int = 2000):
    """Experts and rounds for one seeded run: K cycles through 2..k_max, T is log-uniform."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0xCA5E,)))
    k = 2 + seed % (k_max - 1)
    t = int(round(math.exp(rng.uniform(math.log(t_min), math.log(t_max)))))
    return k, t


def case_spec(seed: int, kind: str, k_max: int, t_max: int, t_min: int = 10) -> GeneratorSpec:
    k, t = draw_case(seed, k_max, t_min, t_max)
    if kind == "alternating":
        k = 2
    params = {}
    if kind == "confidence_bernoulli":
        params = {"sleep_prob": 0.3, "graded": bool(seed % 2)}
    elif kind == "confidence_scaled":
        lam = np.ones(k)
        lam[seed % k] = (0.1, 0.5)[seed % 2]
        params = {"lambdas": lam.tolist()}
    return GeneratorSpec(kind, k, t, params, seed)


def build(name: str, n_experts: int, seed: int = 0, inject_bug: bool = False):
    if name == "ml_prod" and inject_bug:
        return MLProd(n_experts, rates=0.9, check_rates=False)
    if name == "mlc_hedge":
        return MLCHedge(n_experts, rates=MLC_RATES[seed % len(MLC_RATES)])
    if name == "reduction":
        return ConfidenceReduction(AdaptMLProd(n_experts))
    return make_learner(name, n_experts)


MATRIX = (
    ("ml_prod", STANDARD_GENERATORS, ("T1",)),
    ("adapt_ml_prod", STANDARD_GENERATORS, ("T2", "C3", "ISEL")),
    ("ml_poly", STANDARD_GENERATORS, ("T4", "ISEL")),
    ("mlc_hedge", CONFIDENCE_GENERATORS, ("T7",)),
    ("reduction", CONFIDENCE_GENERATORS, ("C5",)),
)


@dataclass
class SuiteReport:
    scale: str
    seeds: range
    counts: dict = field(default_factory=dict)  # (learner, generator, theorem) -> [runs, violations, min slack]

    def add(self, learner, generator, report):
        key = (learner, generator, report.theorem_id)
        c = self.counts.setdefault(key, [0, 0, math.inf])
        c[0] += 1
        c[1] += int(not report.all_satisfied)
        c[2] = min(c[2], report.min_slack)

    @property
    def runs(self) -> int:
        return sum(c[0] for c in self.counts.values())

    @property
    def violations(self) -> int:
        return sum(c[1] for c in self.counts.values())

    def as_dict(self) -> dict:
        return {
            "scale": self.scale,
            "seeds": [self.seeds.start, self.seeds.stop],
            "checks": self.runs,
            "violations": self.violations,
            "rows": [
                {"learner": l, "generator": g, "theorem_id": t,
                 "runs": c[0], "violations": c[1], "min_slack": c[2]}
                for (l, g, t), c in sorted(self.counts.items())
            ],
        }


def check_bounds_suite(seeds: int, scale: str = "small", inject_bug: bool = False,
                       first_seed: int = 0) -> SuiteReport:
    """Run every learner on seeded sequences and count bound violations.

    Seed ``s`` picks one generator per learner (cycling through the list),
    the expert count ``2 + s % (k_max - 1)`` and a log-uniform horizon.
    ``inject_bug`` replaces the fixed-rate learner by one with rate 0.9,
    outside the range its guarantee needs; violations are then expected.
    """
    if scale not in SCALES:
        raise ConfigMismatch(f"scale must be one of {sorted(SCALES)}")
    cfg = SCALES[scale]
    report = SuiteReport(scale, range(first_seed, first_seed + seeds))
    for seed in report.seeds:
        for name, generators, checks in MATRIX:
            kind = generators[seed % len(generators)]
            spec = case_spec(seed, kind, cfg["k_max"], cfg["t_max"])
            stream = generate(spec)
            learner = build(name, spec.n_experts, seed, inject_bug)
            run(learner, stream.losses, stream.confidences, record=False)
            for rep in evaluate(learner, checks):
                report.add(name, kind, rep)
    return report
