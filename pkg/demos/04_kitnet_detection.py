"""KitNET on a synthetic stream with injected anomalies.

The detector learns its feature map and autoencoders from a normal prefix,
then scores a test segment in which 10% of rows have one feature block
pushed five standard deviations away.
"""

import numpy as np

from kitsune.metrics import report
from kitsune.pipeline import OnlineDetector
from kitsune.synthetic import detection_stream

X, labels = detection_stream(seed=0, n_normal=20_000, n_test=5_000)
det = OnlineDetector(X.shape[1], m=10, fm_grace=2_000, ad_grace=18_000, seed=0)
scores = np.array([np.nan if (s := det.process(x)) is None else s for x in X])

model = det.model
test = slice(20_000, None)
print(f"ensemble of k={model.k} autoencoders, sizes {model.fmap.sizes}")
print(f"phi (max training score) = {model.phi:.4f}")
print(f"mean score: normal {scores[test][~labels[test]].mean():.4f}, "
      f"anomalous {scores[test][labels[test]].mean():.4f}")
r = report(scores[test], labels[test], target_fpr=0.001)
print(f"AUC {r['auc']:.4f}  EER {r['eer']:.4f}  TPR at FPR 0.001: {r['tpr']:.3f}")
alerts = int(np.sum(scores[test] >= model.threshold))
print(f"alerts at phi: {alerts} of {int(labels[test].sum())} injected anomalies")
