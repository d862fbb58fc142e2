"""Balanced mini-batches without throwing data away.

Each epoch shuffles the majority pool and deals it out once, so no majority
series is seen twice.  Every batch is topped up with minority series drawn
with replacement.
"""
from collections import Counter

from imblab.data import ImbalanceSpec, apply_imbalance, synth_two_patterns
from imblab.sampling import BootstrapConfig, plan_bootstrap, plan_plain, smote, undersample

ds = apply_imbalance(synth_two_patterns(48, 64, 0.3, seed=1), ImbalanceSpec("step", 4, 0.5, seed=3))
print(f"training counts: {ds.class_counts().tolist()}")

plain = plan_plain(ds, batch_size=16, epoch_seed=0)
print("plain batch label mix:", [dict(sorted(Counter(ds.labels[b].tolist()).items())) for b in plain.batches[:3]])

boot = plan_bootstrap(ds, BootstrapConfig(s_n=8, s_p=8), epoch_seed=0)
print(f"\nbootstrap: {len(boot)} batches of {len(boot.batches[0])}")
print("bootstrap batch label mix:", [dict(sorted(Counter(ds.labels[b].tolist()).items())) for b in boot.batches[:3]])
majority_seen = Counter(int(r) for b in boot for r in b[:8])
print(f"majority rows used this epoch: {len(majority_seen)}, most repeats: {max(majority_seen.values())}")

print(f"\nunder-sampled counts: {undersample(ds, seed=0).class_counts().tolist()}")
print(f"SMOTE counts:         {smote(ds, seed=0).class_counts().tolist()}")
