"""Per-packet behavioral features from damped traffic statistics.

For every packet and every decay factor ``lam`` the extractor updates the size
streams of four aggregations (source MAC+IP, source IP, IP channel, socket)
and the inter-arrival stream of the channel, then reads 23 statistics:

    8  outbound size mean/std for the four aggregations
    8  magnitude/radius/cov/pcc between the two directions of channel and socket
       (all 0 until the reverse direction has been seen)
    4  outbound weights (packet rate) of the four aggregations
    3  weight/mean/std of channel jitter

With the default five windows this gives 115 columns, ordered window-major.
"""

import math

import numpy as np

from kitsune.incremental_stats import DampedStat, StatLink

__all__ = [
    "DEFAULT_LAMBDAS",
    "FEATURES_PER_WINDOW",
    "FeatureExtractor",
    "StatRegistry",
    "feature_names",
]

DEFAULT_LAMBDAS = (5.0, 3.0, 1.0, 0.1, 0.01)

_PER_WINDOW_NAMES = (
    "srcmacip_size_mean", "srcmacip_size_std",
    "srcip_size_mean", "srcip_size_std",
    "channel_size_mean", "channel_size_std",
    "socket_size_mean", "socket_size_std",
    "channel_magnitude", "channel_radius", "channel_cov", "channel_pcc",
    "socket_magnitude", "socket_radius", "socket_cov", "socket_pcc",
    "srcmacip_weight", "srcip_weight", "channel_weight", "socket_weight",
    "jitter_weight", "jitter_mean", "jitter_std",
)
FEATURES_PER_WINDOW = len(_PER_WINDOW_NAMES)

# layout of one window's block, used by tests and by zeroing logic
SIZE_1D = slice(0, 8)
SIZE_2D = slice(8, 16)
WEIGHTS = slice(16, 20)
JITTER = slice(20, 23)
SOCKET_COLUMNS = (6, 7, 12, 13, 14, 15, 19)

# rough per-entry cost of a compiled implementation: a 1D entry holds
# five doubles plus hash-table overhead, a link two of those plus SR
STREAM_BYTES = 112
LINK_BYTES = 168


def feature_names(lambdas=DEFAULT_LAMBDAS):
    return [f"L{lam:g}_{name}" for lam in lambdas for name in _PER_WINDOW_NAMES]


class StatRegistry:
    """Hash table of damped statistics keyed by aggregation and window.

    ``streams`` maps ``(kind, *ids, lam)`` to a :class:`DampedStat`.
    ``links`` maps ``(kind, a, b, lam)`` with ``a <= b`` to a :class:`StatLink`
    whose ``stat_i`` is the ``a -> b`` direction and ``stat_j`` the reverse.
    """

    def __init__(self, lambdas=DEFAULT_LAMBDAS, epsilon=1e-6):
        self.lambdas = tuple(float(lam) for lam in lambdas)
        self.epsilon = epsilon
        self.streams = {}
        self.links = {}

    def __len__(self):
        return len(self.streams) + len(self.links)

    def stream(self, key, lam, t):
        stat = self.streams.get(key)
        if stat is None:
            stat = self.streams[key] = DampedStat(lam, t)
        return stat

    def link(self, kind, src, dst, lam, t):
        """Return ``(link, side)`` where ``side`` is the ``src -> dst`` direction."""
        if src <= dst:
            key, side = (kind, src, dst, lam), "i"
        else:
            key, side = (kind, dst, src, lam), "j"
        link = self.links.get(key)
        if link is None:
            link = self.links[key] = StatLink(DampedStat(lam, t), DampedStat(lam, t))
        return link, side

    def evict_stale(self, now):
        """Delete every entry whose weight, decayed to ``now``, is below epsilon.

        A link counts as one entry and is kept while either direction is
        still above the threshold.
        """
        eps = self.epsilon
        stale = [k for k, s in self.streams.items() if s.weight_at(now) < eps]
        for k in stale:
            del self.streams[k]
        dead = [
            k for k, l in self.links.items()
            if l.stat_i.weight_at(now) < eps and l.stat_j.weight_at(now) < eps
        ]
        for k in dead:
            del self.links[k]
        return len(stale) + len(dead)

    def memory_estimate(self):
        """Approximate footprint in bytes; advisory only."""
        return len(self.streams) * STREAM_BYTES + len(self.links) * LINK_BYTES


class FeatureExtractor:
    """Turns a stream of :class:`~kitsune.packet_ingest.PacketMeta` into feature vectors.

    Parameters
    ----------
    lambdas : sequence of float
        Decay factors, one block of 23 features each.
    epsilon : float
        Eviction threshold on decayed weight.
    evict_every : int or None
        Run :meth:`StatRegistry.evict_stale` every this many packets.
    """

    def __init__(self, lambdas=DEFAULT_LAMBDAS, epsilon=1e-6, evict_every=100_000):
        self.registry = StatRegistry(lambdas, epsilon)
        self.evict_every = evict_every
        self.packets = 0
        self.evicted = 0

    @property
    def lambdas(self):
        return self.registry.lambdas

    @property
    def n_features(self):
        return FEATURES_PER_WINDOW * len(self.registry.lambdas)

    def feature_names(self):
        return feature_names(self.registry.lambdas)

    def extract(self, meta):
        """Update the registry with one packet and return its feature vector."""
        reg = self.registry
        t = meta.timestamp
        size = float(meta.frame_len)
        has_ip = meta.src_ip is not None and meta.dst_ip is not None
        has_ports = has_ip and meta.src_port is not None and meta.dst_port is not None
        # non-IP frames register under the MAC alone so ARP floods still show up
        mi_id = (meta.src_mac, meta.src_ip if has_ip else meta.src_mac)

        out = np.zeros(self.n_features)
        for w, lam in enumerate(reg.lambdas):
            base = w * FEATURES_PER_WINDOW
            mi = reg.stream(("mi", *mi_id, lam), lam, t)
            mi.insert(size, t)
            mi_w, mi_mu, mi_sd = mi.stats_1d()
            out[base + 0] = mi_mu
            out[base + 1] = mi_sd
            out[base + 16] = mi_w
            if not has_ip:
                continue

            h = reg.stream(("h", meta.src_ip, lam), lam, t)
            h.insert(size, t)
            h_w, h_mu, h_sd = h.stats_1d()
            out[base + 2] = h_mu
            out[base + 3] = h_sd
            out[base + 17] = h_w

            ch, side = reg.link("ch", meta.src_ip, meta.dst_ip, lam, t)
            outbound = ch.stat_i if side == "i" else ch.stat_j
            if outbound.w > 0:
                jit = reg.stream(("jit", meta.src_ip, meta.dst_ip, lam), lam, t)
                jit.insert(max(0.0, t - outbound.t_last), t)
                out[base + 20], out[base + 21], out[base + 22] = jit.stats_1d()
            ch.insert(side, size, t)
            ch_w, ch_mu, ch_sd = outbound.stats_1d()
            out[base + 4] = ch_mu
            out[base + 5] = ch_sd
            out[base + 18] = ch_w
            inbound = ch.stat_j if side == "i" else ch.stat_i
            if inbound.w > 0:
                out[base + 8 : base + 12] = ch.stats_2d()

            if has_ports:
                sk, side = reg.link(
                    "sk", (meta.src_ip, meta.src_port), (meta.dst_ip, meta.dst_port), lam, t
                )
                sk.insert(side, size, t)
                outbound = sk.stat_i if side == "i" else sk.stat_j
                sk_w, sk_mu, sk_sd = outbound.stats_1d()
                out[base + 6] = sk_mu
                out[base + 7] = sk_sd
                out[base + 19] = sk_w
                inbound = sk.stat_j if side == "i" else sk.stat_i
                if inbound.w > 0:
                    out[base + 12 : base + 16] = sk.stats_2d()

        self.packets += 1
        if self.evict_every and self.packets % self.evict_every == 0:
            self.evicted += reg.evict_stale(t)
        if not np.all(np.isfinite(out)):
            # overflow in a statistic should never leak into the detector
            np.nan_to_num(out, copy=False, nan=0.0, posinf=0.0, neginf=0.0)
        return out

    def process(self, packets):
        """Yield ``(timestamp, x)`` for every packet."""
        for meta in packets:
            yield meta.timestamp, self.extract(meta)
