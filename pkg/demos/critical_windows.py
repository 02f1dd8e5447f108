"""Critical epidemics against their diffusion limits.

Runs the SIS and SIR chains at the critical infection probability and
prints quantiles of the rescaled size next to the quantiles of the limiting
passage times.  The SIS column also shows the OU passage with reversion 3/2,
which is the drift the Reed-Frost chain with p = 1/N actually produces.

Usage: python demos/critical_windows.py [replicates]
"""

import math
import sys

import numpy as np

from epicrit import meanfield
from epicrit.diffusion import batch_passage_times
from epicrit.sampling import derive_stream
from epicrit.stats import EmpiricalDistribution, ks_two_sample

n = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
probs = [0.1, 0.25, 0.5, 0.75, 0.9]


def sizes(kind, N, exponent):
    J0 = math.ceil(N**meanfield.SCALE_EXPONENTS[kind][0] - 1e-9)
    p = meanfield.critical_p(kind, N)
    U = [meanfield.run_meanfield(kind, N, p, J0, derive_stream(1, r), record=False).U for r in range(n)]
    return np.array(U) / N**exponent


def row(label, x):
    q = np.quantile(x, probs)
    print(f"  {label:27s}" + "".join(f"{v:9.4f}" for v in q))


print(f"quantiles at {probs}, {n} replicates each\n")
print("SIS, N = 40000, U/N")
sis = sizes("SIS", 40000, 1.0)
ou1, _ = batch_passage_times("ou", 1.0, 0.0, n, base_seed=2)
ou15, _ = batch_passage_times("ou", 1.0, 0.0, n, base_seed=3, reversion=1.5)
row("chain", sis)
row("OU passage, reversion 1", ou1)
row("OU passage, reversion 1.5", ou15)
E = EmpiricalDistribution.from_values
print(f"  KS: {ks_two_sample(E(sis), E(ou1)):.3f} (reversion 1), {ks_two_sample(E(sis), E(ou15)):.3f} (reversion 1.5)\n")

print("SIR, N = 8000, U/N^(2/3)")
sir = sizes("SIR", 8000, 2 / 3)
par, _ = batch_passage_times("parabolic", 1.0, 0.0, n, base_seed=4)
row("chain", sir)
row("parabolic passage T_1", par)
print(f"  KS: {ks_two_sample(E(sir), E(par)):.3f}")
