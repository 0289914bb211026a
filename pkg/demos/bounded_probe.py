"""
Checking the bounded-score guarantees at run time
=================================================

For scores in [0, D] the KT iterates never wander far: every radius stays
within 3D + 1 and consecutive radii differ by at most 2D + 1. The probe
runs adversarial and random streams and counts violations.
"""

from coinconf.experiments import theorem_probe

for D in (0.1, 1.0, 10.0):
    rep = theorem_probe(D=D, alpha=0.1, T=10_000, adversary="flipper")
    print(f"D={D:<5} flipper: max |s| {rep.max_abs_radius:.3f} (cap {3 * D + 1}), "
          f"max step {rep.max_step:.3f} (cap {2 * D + 1}), passed={rep.passed}")

rep = theorem_probe(D=1.0, alpha=0.1, T=5_000, adversary="random", n_streams=200, seed=1)
print("200 random bounded streams:", "no violations" if rep.passed else rep.violations)

# Without a bound the adversary can always place the score just outside the
# interval, so coverage is zero. The radius grows until float64 gives out.
rep = theorem_probe(D=1.0, alpha=0.1, T=10_000, adversary="unbounded")
print(f"unbounded: miscoverage {rep.miscoverage:.1f} over {rep.steps} steps")
