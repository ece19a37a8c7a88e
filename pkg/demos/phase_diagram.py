"""Regulated versus growing mass in a competitive growth-fragmentation model.

Cells divide at rate b and die at rate c (z - 1); each cell's mass grows at
rate r and splits into fractions F and 1 - F.  The mass along a typical
lineage grows iff r exceeds 2b (1 - c/b + 1/(e^{b/c} - 1)) E log(1/F).

    python demos/phase_diagram.py
"""
from __future__ import annotations

from spinepop.models import BetaSymmetric, GrowthFragmentation, PointMass, UniformFraction, classify_phase, gf_threshold

for name, law in (("F = 1/2", PointMass(0.5)), ("F ~ U(0,1)", UniformFraction()), ("F ~ Beta(2,2)", BetaSymmetric(2.0))):
    r_star = gf_threshold(1.0, 1.0, law)
    print(f"\nb = c = 1, {name}: threshold r* = {r_star:.6f}")
    gf = GrowthFragmentation(1.0, 1.0, law)
    for factor in (0.5, 0.9, 1.1, 1.5):
        r = factor * r_star
        try:
            res = classify_phase(gf, r, T=200.0, n_paths=32, seed=3)
            verdict = res.phase.value
            slope = f"{res.slope:+.4f} +- {res.stderr:.4f} (theory {res.theory:+.4f})"
        except Exception as exc:  # too close to the threshold to decide
            verdict, slope = type(exc).__name__, ""
        print(f"  r = {r:.4f}  {verdict:12s} {slope}")

print("\nthreshold as c -> 0 approaches the branching value 2b E log(1/F) = 2 ln 2:")
for c in (1.0, 0.3, 0.1, 0.01):
    print(f"  c = {c:5.2f}  r* = {gf_threshold(1.0, c, PointMass(0.5)):.6f}")
