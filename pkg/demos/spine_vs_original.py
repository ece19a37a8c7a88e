"""Two ways to compute the same lineage average in a logistic population.

The left side samples one individual uniformly from a simulated population at
time t.  The right side simulates a single distinguished lineage (the spine)
under changed rates and reweights.  Both estimate the same expectation, for
any choice of the function psi.

    python demos/spine_vs_original.py [n]
"""
from __future__ import annotations

import sys

from spinepop.core import ConstantOne, InverseSize
from spinepop.models import logistic
from spinepop.stats import LineageBranchCount, LineageOccupation, PopulationSize, compare, estimate_lhs, estimate_rhs

n = int(sys.argv[1]) if len(sys.argv) > 1 else 20_000
model = logistic(1.0, 0.5, v=3)
functionals = [LineageBranchCount(), PopulationSize(), LineageOccupation((2,))]

print(f"logistic b=1 c=0.5 from 3 individuals, t=1.5, {n} replicas per side")
lhs = estimate_lhs(model, functionals, t=1.5, n=n, seed=1)
for psi in (InverseSize(), ConstantOne()):
    rhs = estimate_rhs(model, psi, functionals, t=1.5, n=n, seed=2)
    print(f"\npsi = {psi.name}")
    for f, a, b in zip(functionals, lhs, rhs):
        c = compare(a, b)
        print(f"  {f.name:28s} original {a.mean:8.4f} +- {a.stderr:.4f}   spine {b.mean:8.4f} +- {b.stderr:.4f}"
              f"   z = {c.zscore:+.2f}")
