"""Learning a feature map from correlation alone.

Five hidden blocks of eight correlated features are shuffled. The streaming
correlation summary plus single-linkage clustering recovers the blocks
without ever storing a row.

The distance is one minus correlation, so features that move in opposite
directions count as far apart (distance near 2) -- farther than unrelated
features (near 1). The second run flips the sign of half the loadings to
show the consequence: each block splits by sign, and the halves may join
halves of other blocks.
"""

import numpy as np

from kitsune import CorrSummary, cluster
from kitsune.synthetic import correlated_mixture


def learn_map(signed):
    rng = np.random.default_rng(3)
    loadings = rng.uniform(0.5, 2.0, (5, 8))
    if signed:
        loadings *= rng.choice([-1, 1], loadings.shape)
    params = {"means": rng.normal(0, 3, (1, 40)), "loadings": loadings, "weights": np.ones(1)}
    X, _ = correlated_mixture(rng, 5000, n_groups=5, group_size=8, n_components=1, params=params)
    perm = rng.permutation(40)
    X = X[:, perm]
    summary = CorrSummary(40)
    for x in X:
        summary.update(x)
    fmap = cluster(summary.distance_matrix(), m=8)
    print(f"k={fmap.k} groups, sizes {fmap.sizes}")
    for g in fmap.groups:
        blocks = sorted({int(perm[i]) // 8 for i in g})
        signs = "".join("+" if loadings[perm[i] // 8, perm[i] % 8] > 0 else "-" for i in g)
        print(f"  {len(g)} features from hidden block(s) {blocks}  loading signs {signs}")


print("positive loadings only:")
learn_map(signed=False)
print("\nmixed-sign loadings:")
learn_map(signed=True)
