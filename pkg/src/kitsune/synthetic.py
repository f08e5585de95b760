"""Synthetic inputs for tests, benchmarks and demos.

Two generators: correlated Gaussian-mixture feature vectors with injected
group anomalies, and a small benign network (with an optional flood) as a
sequence of :class:`~kitsune.packet_ingest.PacketMeta`.
"""

import numpy as np

from kitsune.packet_ingest import PacketMeta

__all__ = ["correlated_mixture", "detection_stream", "flood", "benign_traffic"]


def correlated_mixture(rng, rows, n_groups=5, group_size=8, n_components=3, noise=0.3, params=None):
    """Rows from a mixture whose features are correlated within blocks.

    Each block of ``group_size`` columns is driven by one latent factor per
    mixture component. Returns ``(X, params)``; pass ``params`` back in to
    draw more rows from the same distribution.
    """
    n = n_groups * group_size
    if params is None:
        params = {
            "means": rng.normal(0.0, 3.0, (n_components, n)),
            "loadings": rng.uniform(0.5, 2.0, (n_groups, group_size)) * rng.choice([-1, 1], (n_groups, group_size)),
            "weights": rng.dirichlet(np.ones(n_components) * 5),
        }
    comp = rng.choice(n_components, size=rows, p=params["weights"])
    latent = rng.normal(size=(rows, n_groups))
    X = params["means"][comp]
    X = X + (latent[:, :, None] * params["loadings"][None]).reshape(rows, n)
    X = X + rng.normal(0.0, noise, (rows, n))
    return X, params


def detection_stream(seed=0, n_normal=50_000, n_test=5_000, attack_fraction=0.1, shift_sigmas=5.0,
                     n_groups=5, group_size=8):
    """Normal prefix followed by a test segment with injected anomalies.

    An anomalous row has every feature of one randomly chosen generating
    block shifted by ``shift_sigmas`` standard deviations of that feature
    (direction random per row). Returns ``(X, labels)`` where ``labels`` is
    a boolean array, true for injected rows.
    """
    rng = np.random.default_rng(seed)
    X_train, params = correlated_mixture(rng, n_normal, n_groups, group_size)
    X_test, _ = correlated_mixture(rng, n_test, n_groups, group_size, params=params)
    sigma = X_train.std(axis=0)
    labels = np.zeros(n_normal + n_test, dtype=bool)
    attack_rows = rng.choice(n_test, size=int(round(attack_fraction * n_test)), replace=False)
    for r in attack_rows:
        g = rng.integers(n_groups)
        cols = slice(g * group_size, (g + 1) * group_size)
        X_test[r, cols] += rng.choice([-1.0, 1.0]) * shift_sigmas * sigma[cols]
    labels[n_normal + attack_rows] = True
    return np.vstack([X_train, X_test]), labels


def _mac(i):
    return f"02:00:00:00:{i >> 8 & 0xff:02x}:{i & 0xff:02x}"


def benign_traffic(n_packets, seed=0, n_clients=8, n_servers=3, start=0.0, rate=500.0):
    """Request/response traffic between a few clients and servers.

    Mostly TCP sessions with occasional UDP, ICMP echo and ARP frames.
    """
    rng = np.random.default_rng(seed)
    clients = [(f"192.168.1.{10 + i}", _mac(10 + i)) for i in range(n_clients)]
    servers = [(f"192.168.1.{200 + i}", _mac(200 + i), port) for i, port in zip(range(n_servers), (80, 443, 554, 8080))]
    gaps = rng.exponential(1.0 / rate, n_packets)
    times = start + np.cumsum(gaps)
    out = []
    sessions = {}
    for t in times:
        t = round(float(t), 6)
        c = int(rng.integers(n_clients))
        s = int(rng.integers(n_servers))
        cip, cmac = clients[c]
        sip, smac, sport = servers[s]
        u = rng.random()
        if u < 0.02:
            out.append(PacketMeta(t, 60, cmac, "ff:ff:ff:ff:ff:ff"))
            continue
        if u < 0.05:
            out.append(PacketMeta(t, 98, cmac, smac, cip, sip, 1))
            continue
        proto = 17 if u < 0.15 else 6
        cport = sessions.setdefault((c, s, proto), 40000 + int(rng.integers(20000)))
        if rng.random() < 0.02:
            sessions.pop((c, s, proto))
        if rng.random() < 0.5:
            size = int(np.clip(rng.normal(120, 30), 60, 1514))
            out.append(PacketMeta(t, size, cmac, smac, cip, sip, proto, cport, sport))
        else:
            size = int(np.clip(rng.normal(900 if s else 1200, 200), 60, 1514))
            out.append(PacketMeta(t, size, smac, cmac, sip, cip, proto, sport, cport))
    return out


def flood(n_packets, start, seed=1, rate=5000.0, target="192.168.1.200", target_port=80):
    """SYN-style flood from a single unfamiliar host with random source ports."""
    rng = np.random.default_rng(seed)
    times = start + np.cumsum(rng.exponential(1.0 / rate, n_packets))
    src_ip, src_mac = "192.168.1.66", _mac(66)
    return [
        PacketMeta(round(float(t), 6), 60, src_mac, _mac(200), src_ip, target, 6,
                   int(rng.integers(1024, 65535)), target_port)
        for t in times
    ]
