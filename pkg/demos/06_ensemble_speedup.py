"""Why an ensemble of small autoencoders is cheaper than one wide one.

Counts multiply-accumulates per instance and times execution for several
forced ensemble sizes on 115 features.
"""

import math

from kitsune import FeatureMap, KitNET
from kitsune.pipeline import benchmark
from kitsune.synthetic import detection_stream

X, _ = detection_stream(seed=1, n_normal=2000, n_test=1, n_groups=5, group_size=23)
n = X.shape[1]
ks = [1, 4, math.ceil(n / 10), 23]
rates = benchmark(X, ks, train_rows=1000)
print(f"n={n}")
print(" k   MACs/instance   instances/s")
for k in ks:
    macs = KitNET(FeatureMap.uniform(n, k)).execute_macs()
    print(f"{k:2d} {macs:14d} {rates[k]:13.0f}")
print(f"speedup of k={ks[2]} over k=1: {rates[ks[2]] / rates[1]:.2f}x")
