"""Hill estimates of the cycle-sum tail index over k, for several cycle counts.

Shows how far out the tail of W has to be sampled before the estimate
settles near the innovation tail index.
"""

import argparse

from rcinar import distributions as D
from rcinar import engine as E
from rcinar import limitlab as L
from rcinar.engine import ModelSpec
from rcinar.rng import RngStream

p = argparse.ArgumentParser()
p.add_argument("--alpha", type=float, default=1.5)
p.add_argument("--cycles", type=int, default=10**6)
p.add_argument("--seed", type=int, default=99)
args = p.parse_args()

model = ModelSpec(D.BetaShape(2, 2), D.DiscretePareto(args.alpha))
_, w = E.cycle_arrays(E.collect_cycles(model, args.cycles, RngStream(args.seed)))
print("cycles,k,alpha_hat")
m = 10**4
while m <= args.cycles:
    x = w[:m].astype(float)
    for k in (30, 100, 316, 1000, 3000):
        if k < m / 2:
            print(f"{m},{k},{L.hill_estimate(x, k=k).alpha_hat:.4f}")
    m *= 10
