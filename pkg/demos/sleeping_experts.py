"""Confidence regret through the reduction, next to the confidence Hedge learner.

Expert 1 is good but awake only 40% of the time; the others are always awake.
Run: python3 demos/sleeping_experts.py [rounds] [seed]
"""

import sys

import numpy as np

from excess_agg import bounds
from excess_agg.confidence import ConfidenceReduction
from excess_agg.learners import AdaptMLProd, MLCHedge


def main(rounds: int = 5000, seed: int = 0):
    rng = np.random.default_rng(seed)
    losses = rng.random((rounds, 3)) * np.array([0.4, 1.0, 1.0])
    conf = np.ones((rounds, 3))
    conf[:, 0] = rng.random(rounds) < 0.4

    red = ConfidenceReduction(AdaptMLProd(3))
    hedge = MLCHedge(3, rates=0.3)
    for row, c in zip(losses, conf):
        red.step(row, c)
        hedge.update(row, c)

    xi = bounds.xi_adapt_ml_prod(3, rounds)
    for name, rep in (("reduction", bounds.corollary5(red.ledger, xi)),
                      ("mlc_hedge", bounds.mlc_hedge(hedge.ledger, hedge.config))):
        print(name)
        for k in range(3):
            print(f"  expert {k + 1}: confidence regret {rep.realized[k]:9.3f}"
                  f"   bound {rep.per_expert_bound[k]:9.3f}")
    gap = np.abs(red.ledger.confidence_regret - red.inner.ledger.cumulative_regret).max()
    print(f"confidence regret vs inner regret, max difference: {gap:.2e}")


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:3]))
