"""Total mass of the Dawson-Watanabe density against the Feller diffusion.

A unit-mass bump evolves under the stochastic heat equation with and
without killing.  The unkilled total mass is a Feller diffusion, so its
quantiles at t = 1 match those of a direct Euler simulation; constant
killing at rate a scales the mean by exp(-a).

Usage: python demos/superprocess_mass.py [runs]
"""

import math
import sys

import numpy as np

from epicrit import spde
from epicrit.diffusion import batch_paths
from epicrit.sampling import derive_stream

n = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
probs = [0.25, 0.5, 0.75, 0.9]
X0 = spde.bump()


def masses(mode, a):
    return np.array([spde.dw_run(X0, mode, a, rng=derive_stream(9, r))[-1].mass() for r in range(n)])


free = masses("none", 0.0)
fel = batch_paths("feller", 1.0, 0.0, n, base_seed=10, times=[1.0], horizon=1.0).values[:, 0]
print(f"t = 1, {n} runs")
print(f"  {'':18s}" + "".join(f"{q:>9}" for q in probs) + f"{'P(0)':>9s}{'mean':>9s}")
for label, x in (("field mass", free), ("Feller Euler", fel)):
    print(f"  {label:18s}" + "".join(f"{v:9.4f}" for v in np.quantile(x, probs)) + f"{(x == 0).mean():9.4f}{x.mean():9.4f}")
print(f"  extinction oracle exp(-2) = {math.exp(-2):.4f}\n")
for mode, a in (("none", 0.5), ("sis", 0.0), ("sir", 0.0)):
    m = masses(mode, a).mean()
    print(f"  killing {mode:4s} a = {a:3.1f}: mean mass {m:.4f}" + (f" (exp(-a) = {math.exp(-a):.4f})" if a else ""))
