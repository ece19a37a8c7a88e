"""Large populations follow an ODE.

Rates depend on the density z / N.  As N grows, the scaled population path
Z(t) / N approaches the ODE solution z'(t) = z A(z), and the error shrinks
roughly like N^{-1/2}.

    python demos/ode_limit.py
"""
from __future__ import annotations

import numpy as np

from spinepop.models import logistic_large_n, ode_solve, scaled_path_error
from spinepop.simulate import SimConfig, simulate_original

model = logistic_large_n(1.0, 1.0, 0.2)
T = 3.0
traj = ode_solve(model, T=T, dt=1e-2)
print(f"logistic density model from z = 0.2: ODE end point {float(traj.end[0]):.6f}, "
      f"step-halving drift {traj.halving_error:.1e}")
for N in (100, 1000, 10_000):
    errs = [scaled_path_error(simulate_original(model.scaled(N), SimConfig(T, 10**7, False, 5, i, record_path=True)).path,
                              N, traj, T) for i in range(50)]
    print(f"  N = {N:6d}  median sup |Z/N - z| = {np.median(errs):.4f}   x sqrt(N) = {np.median(errs) * N ** 0.5:.3f}")
