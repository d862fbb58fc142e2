"""How hard is a dataset, and how lopsided can we make it?

We start from a balanced four-class two-patterns set, measure how well its
classes separate, then carve out a step-imbalanced copy where half of the
classes keep only a quarter of their instances.
"""
from imblab import ImbalanceSpec, apply_imbalance, dataset_separability, measure_imbalance, synth_two_patterns

ds = synth_two_patterns(n_per_class=100, length=128, noise_sd=0.3, seed=0)
print(f"balanced set: {len(ds)} series, class counts {ds.class_counts().tolist()}")

report = dataset_separability(ds)
print(f"class separability: {report.overall:+.3f}")
for name, score in report.per_class.items():
    print(f"  class {name}: {score:+.3f}")

# Noise blurs the patterns; watch the score fall as it grows.
for sd in (0.1, 0.5, 1.0):
    noisy = synth_two_patterns(50, 128, sd, seed=0)
    print(f"noise sd {sd:.1f} -> separability {dataset_separability(noisy).overall:+.3f}")

imbalanced = apply_imbalance(ds, ImbalanceSpec("step", rho=4, mu=0.5, seed=7))
rho, mu = measure_imbalance(imbalanced)
print(f"\nstep imbalance: counts {imbalanced.class_counts().tolist()}, measured rho {rho:.2f}, mu {mu:.2f}")

linear = apply_imbalance(ds, ImbalanceSpec("linear", rho=4, seed=7))
print(f"linear imbalance: counts {linear.class_counts().tolist()}")
