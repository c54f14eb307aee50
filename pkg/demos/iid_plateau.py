"""Regret against the best Bernoulli expert stops growing once the gap is learned.

Run: python3 demos/iid_plateau.py [rounds] [seed]
"""

import sys

import numpy as np

from excess_agg import bounds
from excess_agg.core import run
from excess_agg.learners import AdaptMLProd, MLPoly
from excess_agg.sim import GeneratorSpec, generate


def main(rounds: int = 20_000, seed: int = 0):
    spec = GeneratorSpec("iid_gap", 3, rounds, {"means": [0.3, 0.5, 0.5], "alpha": 0.2}, seed)
    stream = generate(spec)
    best = spec.best_expert
    checkpoints = np.unique(np.geomspace(10, rounds, 8).astype(int))
    print(f"{'round':>8}" + "".join(f"{name:>16}" for name in ("adapt_ml_prod", "ml_poly")))
    paths = []
    for learner in (AdaptMLProd(3), MLPoly(3)):
        res = run(learner, stream.losses)
        agg = np.einsum("ij,ij->i", res.mixtures, stream.losses)
        paths.append(np.cumsum(agg - stream.losses[:, best]))
    for t in checkpoints:
        print(f"{t:>8}" + "".join(f"{p[t - 1]:>16.3f}" for p in paths))
    c, hp = bounds.bound_iid(bounds.xi_adapt_ml_prod(3, rounds), 3, 0.2, 0.05)
    print(f"expected-regret bound {c:.1f}, high-probability bound (delta=0.05) {hp:.1f}")


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:3]))
