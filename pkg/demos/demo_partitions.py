"""Show the three client partition schemes on a small synthetic dataset.

Case 1 spreads every label evenly, case 2 gives each client a contiguous
block of labels, and case 3 mixes the two.  Run with:
python3 demos/demo_partitions.py
"""

import numpy as np

from bherd.data import partition, synth_dataset

ds = synth_dataset(classes=10, per_class=100, feature_dim=8, spread=1.0, seed=0)
names = {1: "even split", 2: "label skew", 3: "mixed"}

for case in (1, 2, 3):
    shards = partition(ds, 5, case, seed=1)
    print(f"case {case} ({names[case]}):")
    for shard in shards:
        labels = np.unique(ds.labels[shard.indices])
        print(f"  client {shard.owner}: {len(shard.indices):>4} samples, "
              f"labels {labels.tolist()}")
    print()
