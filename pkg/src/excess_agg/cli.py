"""Command line entry point ``excess-agg``.

    excess-agg run --learner adapt_ml_prod --generator iid_gap --experts 3 --rounds 10000 --out out/
    excess-agg run --learner ml_prod --losses losses.csv --range -1,0 --check T1 --out out/
    excess-agg check-suite --seeds 100 --scale small
    excess-agg generate --generator confidence_bernoulli --experts 4 --rounds 500 --out data/

Exit status: 0 when every requested proved bound holds, 1 when one fails,
2 on bad input (an ``error.json`` describing the problem is written to the
output directory and to stderr).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import bounds, csvio
from .confidence import ConfidenceReduction
from .core import LossVector
from .errors import AggregationError, ConfigMismatch
from .learners import LEARNERS, make_learner
from .sim import KINDS, GeneratorSpec, generate
from .suite import SCALES, check_bounds_suite, default_checks, evaluate, learner_xi

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 1, 2
SEED_ENV = "EXCESS_AGG_SEED"


class InputError(AggregationError):
    def __init__(self, message, path=None, row=None):
        super().__init__(message)
        self.path = path
        self.row = row


@dataclass
class ExperimentConfig:
    learner: str
    output_dir: str
    generator: Optional[GeneratorSpec] = None
    losses_path: Optional[str] = None
    confidences_path: Optional[str] = None
    loss_range: tuple = (0.0, 1.0)
    reduction: bool = False
    bounds_to_check: Optional[tuple] = None
    seed: int = 0
    rates: Optional[list] = None
    delta: float = 0.05
    alpha: Optional[float] = None
    best_expert: Optional[int] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.learner not in LEARNERS:
            raise ConfigMismatch(f"unknown learner {self.learner!r}")
        if (self.generator is None) == (self.losses_path is None):
            raise ConfigMismatch("give exactly one of a generator or a losses file")
        if self.reduction and self.learner == "mlc_hedge":
            raise ConfigMismatch("mlc_hedge handles confidences itself; drop --reduction")


def load_inputs(config: ExperimentConfig):
    """Return (rescaled losses, raw losses, confidences or None, loss range)."""
    if config.generator is not None:
        stream = generate(config.generator)
        return stream.losses, stream.raw, stream.confidences, stream.loss_range
    raw = csvio.read_matrix(config.losses_path)
    a, b = map(float, config.loss_range)
    if not a < b:
        raise InputError(f"invalid loss range ({a}, {b})")
    bad = np.flatnonzero((raw < a).any(axis=1) | (raw > b).any(axis=1))
    if bad.size:
        row = int(bad[0]) + 2
        raise InputError(f"row {row} has a loss outside [{a}, {b}]", config.losses_path, row)
    losses = np.clip((raw - a) / (b - a), 0.0, 1.0)
    conf = None
    if config.confidences_path is not None:
        conf = csvio.read_matrix(config.confidences_path, raw.shape[1])
        if conf.shape != raw.shape:
            raise InputError(
                f"confidences have {conf.shape[0]} rows, losses have {raw.shape[0]}",
                config.confidences_path)
        bad = np.flatnonzero((conf < 0).any(axis=1) | (conf > 1).any(axis=1)
                             | (conf.max(axis=1, initial=0.0) <= 0))
        if bad.size:
            row = int(bad[0]) + 2
            raise InputError(
                f"row {row}: confidences must lie in [0, 1] with at least one positive",
                config.confidences_path, row)
    return losses, raw, conf, (a, b)


def build_learner(config: ExperimentConfig, n_experts: int, has_confidences: bool):
    if has_confidences and not (config.reduction or config.learner == "mlc_hedge"):
        raise ConfigMismatch(
            f"{config.learner} ignores confidences; add --reduction or use mlc_hedge")
    rates = config.rates
    if rates is not None and len(rates) == 1:
        rates = rates[0]
    learner = make_learner(config.learner, n_experts, rates=rates)
    return ConfidenceReduction(learner) if config.reduction else learner


def drive(learner, losses, confidences, loss_range):
    """Run all rounds; return (aggregate losses, regrets, mixtures), each per round."""
    n, k = losses.shape
    agg = np.empty(n)
    regrets = np.empty((n, k))
    mixtures = np.empty((n, k))
    wide = tuple(loss_range) != (0.0, 1.0)
    for t in range(n):
        row = LossVector(losses[t], loss_range) if wide else losses[t]
        out = learner.update(row) if confidences is None else learner.update(row, confidences[t])
        agg[t] = out.aggregate_loss
        regrets[t] = out.instantaneous_regrets
        mixtures[t] = out.mixture
    return agg, regrets, mixtures


def write_trajectory(path, agg, regrets, confidences, mixtures):
    k = regrets.shape[1]
    conf = np.ones_like(regrets) if confidences is None else confidences
    cols = [np.arange(1, len(agg) + 1)[:, None], agg[:, None],
            np.cumsum(regrets, axis=0), np.cumsum(conf * regrets, axis=0), mixtures]
    names = (["round", "aggregate_loss"] + [f"regret_{j + 1}" for j in range(k)]
             + [f"confidence_regret_{j + 1}" for j in range(k)] + [f"p_{j + 1}" for j in range(k)])
    table = np.hstack(cols)
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for row in table:
            fh.write(str(int(row[0])) + "," + ",".join(format(x, ".17g") for x in row[1:]) + "\n")


def _dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, allow_nan=False)
        fh.write("\n")


def run_experiment(config: ExperimentConfig) -> int:
    """Run one experiment and write trajectory.csv, bounds.json, summary.json."""
    os.makedirs(config.output_dir, exist_ok=True)
    losses, raw, conf, loss_range = load_inputs(config)
    n, k = losses.shape
    if config.learner == "mlc_hedge" and conf is None:
        conf = np.ones((n, k))
    learner = build_learner(config, k, conf is not None)

    alpha, best = config.alpha, config.best_expert
    spec = config.generator
    if spec is not None and spec.kind == "iid_gap":
        alpha = spec.params.get("alpha", 0.2) if alpha is None else alpha
        best = spec.best_expert if best is None else best
    checks = config.bounds_to_check
    if checks is None:
        checks = default_checks(learner)
        base = learner.inner if config.reduction else learner
        if alpha is not None and best is not None and base.name in ("adapt_ml_prod", "ml_poly") \
                and not config.reduction:
            checks = checks + ("IID",)

    agg, regrets, mixtures = drive(learner, losses, conf, loss_range)
    reports = evaluate(learner, checks, alpha=alpha, best=best, delta=config.delta)
    ledger = learner.ledger

    write_trajectory(os.path.join(config.output_dir, "trajectory.csv"), agg, regrets, conf, mixtures)
    _dump(os.path.join(config.output_dir, "bounds.json"),
          {"reports": [r.as_dict() for r in reports]})

    violated = [r.theorem_id for r in reports if r.violated]
    status = EXIT_VIOLATION if violated else EXIT_OK
    base = learner.inner if config.reduction else learner
    xi = learner_xi(base, n)
    summary = {
        "learner": config.learner,
        "reduction": config.reduction,
        "n_experts": k,
        "n_rounds": n,
        "loss_range": list(loss_range),
        "seed": config.seed,
        "input": config.losses_path if spec is None else {
            "generator": spec.kind, "params": spec.params, "seed": spec.seed},
        "final_regret": ledger.cumulative_regret.tolist(),
        "final_regret_original": ledger.original_regret.tolist(),
        "final_confidence_regret": ledger.confidence_regret.tolist(),
        "final_confidence_regret_original": ledger.original_confidence_regret.tolist(),
        "aggregate_loss": ledger.aggregate_loss,
        "cumulative_loss": ledger.cumulative_loss.tolist(),
        "best_expert": ledger.best_expert() + 1,
        "C_KT": bounds.corollary3_constant(k, n) if k >= 2 else None,
        "xi": None if xi is None else list(xi),
        "checks": list(checks),
        "violations": violated,
        "exit_status": status,
    }
    if alpha is not None and best is not None and xi is not None:
        c, hp = bounds.bound_iid(xi, k, alpha, config.delta)
        summary["iid"] = {"best_expert": best + 1, "alpha": alpha, "delta": config.delta,
                          "expected_regret_bound": c, "high_probability_bound": hp,
                          "realized_regret": float(ledger.cumulative_regret[best])}
    _dump(os.path.join(config.output_dir, "summary.json"), summary)
    return status


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _range(text: str) -> tuple:
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError("--range takes two numbers: a,b")
    return tuple(vals)


def _checks(text: str) -> tuple:
    ids = tuple(x.strip() for x in text.split(",") if x.strip())
    unknown = [x for x in ids if x not in bounds.THEOREM_IDS]
    if unknown:
        raise argparse.ArgumentTypeError(
            f"unknown theorem ids {unknown}; choose from {', '.join(bounds.THEOREM_IDS)}")
    return ids


class _Parser(argparse.ArgumentParser):
    """Report usage errors as input errors (exit 2 with error JSON)."""

    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="excess-agg", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run one learner and check its bounds")
    r.add_argument("--learner", required=True, choices=sorted(LEARNERS))
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--generator", choices=KINDS)
    src.add_argument("--losses", help="CSV with header expert_1..expert_K")
    r.add_argument("--confidences", help="CSV of confidences, same shape as the losses")
    r.add_argument("--rounds", type=int, default=1000)
    r.add_argument("--experts", type=int, default=3)
    r.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or 0")
    r.add_argument("--check", type=_checks, default=None,
                   help="comma list of " + ",".join(bounds.THEOREM_IDS))
    r.add_argument("--range", type=_range, default=(0.0, 1.0), dest="loss_range",
                   help="raw loss range a,b (files only)")
    r.add_argument("--out", required=True)
    r.add_argument("--reduction", action="store_true",
                   help="wrap the learner in the confidence reduction")
    r.add_argument("--rates", type=_floats, default=None, help="fixed rates, one or K values")
    r.add_argument("--alpha", type=float, default=None, help="gap for the IID check")
    r.add_argument("--means", type=_floats, default=None, help="iid_gap Bernoulli means")
    r.add_argument("--best-expert", type=int, default=None, help="1-based expert for the IID check")
    r.add_argument("--delta", type=float, default=0.05)
    r.add_argument("--sleep-prob", type=float, default=None)
    r.add_argument("--lambdas", type=_floats, default=None)

    s = sub.add_parser("check-suite", help="randomized bound checks over many seeds")
    s.add_argument("--seeds", type=int, default=100)
    s.add_argument("--scale", choices=sorted(SCALES), default="small")
    s.add_argument("--first-seed", type=int, default=0)
    s.add_argument("--inject-bug", action="store_true",
                   help="use a fixed-rate learner with rate 0.9 (expect violations)")
    s.add_argument("--out", default=None, help="directory for suite.json")

    g = sub.add_parser("generate", help="write a generated sequence as CSV")
    g.add_argument("--generator", required=True, choices=KINDS)
    g.add_argument("--rounds", type=int, default=1000)
    g.add_argument("--experts", type=int, default=3)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--alpha", type=float, default=None)
    g.add_argument("--means", type=_floats, default=None)
    g.add_argument("--sleep-prob", type=float, default=None)
    g.add_argument("--lambdas", type=_floats, default=None)
    g.add_argument("--out", required=True)
    return parser


def _seed(value) -> int:
    if value is not None:
        return value
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise InputError(f"{SEED_ENV} must be an integer, got {env!r}")


def _spec(args, seed) -> GeneratorSpec:
    params = {}
    if args.alpha is not None:
        params["alpha"] = args.alpha
    if args.means is not None:
        params["means"] = args.means
    if args.sleep_prob is not None:
        params["sleep_prob"] = args.sleep_prob
    if args.lambdas is not None:
        params["lambdas"] = args.lambdas
    return GeneratorSpec(args.generator, args.experts, args.rounds, params, seed)


def _report_error(exc, out_dir) -> int:
    err = {"status": "error", "error": type(exc).__name__, "message": str(exc),
           "row": getattr(exc, "row", None), "path": getattr(exc, "path", None)}
    text = json.dumps(err)
    print(text, file=sys.stderr)
    if out_dir:
        try:
            os.makedirs(out_dir, exist_ok=True)
            with open(os.path.join(out_dir, "error.json"), "w") as fh:
                fh.write(text + "\n")
        except OSError:
            pass
    return EXIT_INPUT


def _join_negative_range(argv):
    # let "--range -1,0" through; argparse would read -1,0 as an option
    argv = list(argv)
    for i, a in enumerate(argv[:-1]):
        if a == "--range" and argv[i + 1].startswith("-"):
            argv[i:i + 2] = [f"--range={argv[i + 1]}"]
            break
    return argv


def main(argv=None) -> int:
    argv = _join_negative_range(sys.argv[1:] if argv is None else argv)
    out_dir = None
    if "--out" in argv[:-1]:
        out_dir = argv[argv.index("--out") + 1]
    try:
        args = make_parser().parse_args(argv)
        out_dir = getattr(args, "out", None)
        if args.command == "run":
            seed = _seed(args.seed)
            config = ExperimentConfig(
                learner=args.learner,
                output_dir=args.out,
                generator=_spec(args, seed) if args.generator else None,
                losses_path=args.losses,
                confidences_path=args.confidences,
                loss_range=args.loss_range,
                reduction=args.reduction,
                bounds_to_check=args.check,
                seed=seed,
                rates=args.rates,
                delta=args.delta,
                alpha=args.alpha,
                best_expert=None if args.best_expert is None else args.best_expert - 1,
            )
            status = run_experiment(config)
            with open(os.path.join(args.out, "summary.json")) as fh:
                summary = json.load(fh)
            print(json.dumps({"exit_status": status, "violations": summary["violations"],
                              "out": args.out}))
            return status
        if args.command == "check-suite":
            report = check_bounds_suite(args.seeds, args.scale, args.inject_bug, args.first_seed)
            data = report.as_dict()
            if args.out:
                os.makedirs(args.out, exist_ok=True)
                _dump(os.path.join(args.out, "suite.json"), data)
            print(json.dumps({k: data[k] for k in ("scale", "seeds", "checks", "violations")}))
            for row in data["rows"]:
                if row["violations"]:
                    print(f"violation: {row['learner']} on {row['generator']}: "
                          f"{row['theorem_id']} failed {row['violations']}/{row['runs']} "
                          f"(min slack {row['min_slack']:.6g})")
            return EXIT_VIOLATION if report.violations else EXIT_OK
        if args.command == "generate":
            stream = generate(_spec(args, _seed(args.seed)))
            os.makedirs(args.out, exist_ok=True)
            stream.to_csv(os.path.join(args.out, "losses.csv"),
                          os.path.join(args.out, "confidences.csv"))
            print(json.dumps({"losses": os.path.join(args.out, "losses.csv"),
                              "loss_range": list(stream.loss_range),
                              "confidences": None if stream.confidences is None
                              else os.path.join(args.out, "confidences.csv")}))
            return EXIT_OK
    except (AggregationError, csvio.CsvFormatError) as exc:
        return _report_error(exc, out_dir)
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
