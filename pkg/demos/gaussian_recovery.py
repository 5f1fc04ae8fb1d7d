"""Track the unlabeled-loss minimiser along a path of Gaussian means.

    python3 demos/gaussian_recovery.py
"""

from gradual_st import theory

r = theory.verify_gaussian_recovery(mc_samples=50_000, lipschitz_pairs=200)
for t, dev in enumerate(r.diagnostics["deviations"]):
    print(f"step {t}: distance to the best direction {dev:.4f}")
print(f"status {r.status} (tolerance {r.tolerance})")
