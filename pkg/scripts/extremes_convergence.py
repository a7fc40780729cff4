"""Distance between the exact law of the scaled innovation maximum and both Frechet forms.

No simulation: the finite-n law is P(Z <= x)^n, evaluated on the lattice.
"""

import argparse

from rcinar import distributions as D
from rcinar import limitlab as L

p = argparse.ArgumentParser()
p.add_argument("--alpha", type=float, default=1.5)
args = p.parse_args()

law = D.DiscretePareto(args.alpha)
print("n,dist_exp_minus_x_pow_minus_alpha,dist_exp_minus_x_pow_minus_inv_alpha")
for e in range(2, 8):
    n = 10**e
    print(f"{n},{L.oracle_limit_distance(law, n):.6g},{L.oracle_limit_distance(law, n, inverse_exponent=True):.6g}")
