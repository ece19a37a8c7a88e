"""Long-run ancestral lineages in a population with a carrying capacity.

With a capacity the first-moment generator is a finite matrix.  Its Perron
triplet (lambda, h, gamma) gives the stationary law h * gamma of the
(type, population) pair seen along a typical ancestral line, and the rate at
which that line branches.  Simulating the spine with psi = h checks both.

    python demos/perron_lineages.py
"""
from __future__ import annotations

from spinepop.core import ConstantOne, lambda_of
from spinepop.eigen import EigenPsi, ancestral_branch_intensity, solve_model
from spinepop.genealogy import lineage_statistics
from spinepop.models import logistic, random_capacity_model
from spinepop.simulate import SimConfig, simulate_spine

trip = solve_model(logistic(1.0, 1.0, capacity=2))
print("two-state logistic, capacity 2")
print(f"  lambda = {trip.lam:.3e}  h = {trip.h.round(6)}  gamma = {trip.gamma.round(6)}  pi = {trip.pi.round(6)}")

model = random_capacity_model(7, n_types=2, zbar=5)
trip = solve_model(model)
print(f"\nrandom two-type model, capacity 5: {len(trip.states.states)} states, lambda = {trip.lam:.3e}, "
      f"residuals {trip.residuals[0]:.1e} / {trip.residuals[1]:.1e}")
for x, z in trip.states.states[:4]:
    print(f"  state ({x}, {z}): lambda(psi = h) = {lambda_of(model.kernel, EigenPsi(trip), x, z):+.2e}   "
          f"lambda(psi = 1) = {lambda_of(model.kernel, ConstantOne(), x, z):+.4f}")

T, reps = 200.0, 40
counts: dict = {}
psi = EigenPsi(trip)
for i in range(reps):
    out = simulate_spine(model, psi, SimConfig(T, seed=11, replica=i))
    for key, v in lineage_statistics(out.tree, out.spine_node, T)[1].items():
        counts[key] = counts.get(key, 0) + v

print(f"\nancestral branching rates along the h-spine ({reps} lineages, t = {T:g}):")
rows = []
for (state, k), c in counts.items():
    rows.append((ancestral_branch_intensity(trip, state, k), c / (T * reps), state, k))
for theory, rate, state, k in sorted(rows, reverse=True)[:6]:
    print(f"  state {state} offspring {k}: simulated {rate:.4f}  Perron {theory:.4f}")
