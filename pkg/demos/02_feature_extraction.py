"""From packets to 115 features.

Synthesizes a short client/server exchange and shows the feature vector for
one TCP packet and one ICMP packet, grouped by time window.
"""

import numpy as np

from kitsune import FeatureExtractor, PacketMeta, feature_names
from kitsune.synthetic import benign_traffic

fe = FeatureExtractor()
packets = benign_traffic(2000, seed=1)
for meta in packets:
    x = fe.extract(meta)

names = feature_names()
print(f"{len(names)} features, tracking {len(fe.registry)} statistics after {len(packets)} packets\n")
print("last packet, 1-second window (lambda=1):")
w = 2 * 23
for name, value in zip(names[w:w + 23], x[w:w + 23]):
    print(f"  {name:32s} {value:12.4f}")

icmp = PacketMeta(packets[-1].timestamp + 0.01, 98, "02:00:00:00:00:0a", "02:00:00:00:00:c8",
                  "192.168.1.10", "192.168.1.200", 1)
x = fe.extract(icmp)
socket = [i for i, n in enumerate(names) if "_socket_" in n]
print(f"\nICMP packet: {len(socket)} socket features, all zero: {bool(np.all(x[socket] == 0))}")
