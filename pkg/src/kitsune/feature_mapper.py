"""Online feature mapping by correlation clustering.

:class:`CorrSummary` accumulates, one instance at a time, the residual
statistics needed for the correlation distance between every pair of
features. Once training ends the distance matrix is clustered
(single-linkage) and the dendrogram is cut top-down until no group has more
than ``m`` features; the resulting :class:`FeatureMap` projects each instance
onto its groups.
"""

import json
from dataclasses import dataclass

import numpy as np

__all__ = ["CorrSummary", "FeatureMap", "NotReadyError", "build_dendrogram", "cluster"]


class NotReadyError(RuntimeError):
    """Raised when a summary has seen too few instances."""


class CorrSummary:
    """Incremental residual summaries of an ``n``-dimensional stream.

    Residuals are taken against the running mean after the current instance
    has been added, so only one instance is ever held in memory.
    """

    def __init__(self, n):
        self.n = n
        self.n_t = 0
        self.c = np.zeros(n)
        self.c_r = np.zeros(n)
        self.c_rs = np.zeros(n)
        self.C = np.zeros((n, n))

    def update(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise ValueError(f"expected a vector of length {self.n}, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite value in feature vector")
        self.n_t += 1
        self.c += x
        res = x - self.c / self.n_t
        self.c_r += res
        self.c_rs += res * res
        self.C += np.outer(res, res)

    def distance_matrix(self):
        """Correlation distance between every pair of features.

        Constant features (no residual energy) are placed at distance 1 from
        every other feature.
        """
        if self.n_t < 2:
            raise NotReadyError(f"need at least 2 instances, have {self.n_t}")
        norms = np.sqrt(self.c_rs)
        denom = np.outer(norms, norms)
        with np.errstate(divide="ignore", invalid="ignore"):
            D = 1.0 - self.C / denom
        D[denom == 0] = 1.0
        np.clip(D, 0.0, 2.0, out=D)
        np.fill_diagonal(D, 0.0)
        return D


@dataclass(frozen=True)
class FeatureMap:
    """Partition of ``range(n)`` into ordered groups of at most ``m`` indices."""

    n: int
    m: int
    groups: tuple

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        if not groups:
            raise ValueError("feature map has no groups")
        seen = sorted(i for g in groups for i in g)
        if seen != list(range(self.n)):
            raise ValueError("groups must cover every feature index exactly once")
        for g in groups:
            if not 1 <= len(g) <= self.m:
                raise ValueError(f"group of size {len(g)} violates 1 <= size <= m={self.m}")

    @property
    def k(self):
        return len(self.groups)

    @property
    def sizes(self):
        return [len(g) for g in self.groups]

    @property
    def index(self):
        """All feature indices concatenated in group order."""
        return np.fromiter((i for g in self.groups for i in g), dtype=np.int64, count=self.n)

    def map_instance(self, x):
        x = np.asarray(x)
        if x.shape != (self.n,):
            raise ValueError(f"expected a vector of length {self.n}, got shape {x.shape}")
        return [x[list(g)] for g in self.groups]

    @classmethod
    def uniform(cls, n, k):
        """Contiguous near-equal partition into ``k`` groups."""
        groups = [tuple(a.tolist()) for a in np.array_split(np.arange(n), k)]
        return cls(n, max(len(g) for g in groups), tuple(groups))

    def to_dict(self):
        return {"n": self.n, "m": self.m, "groups": [list(g) for g in self.groups]}

    @classmethod
    def from_dict(cls, doc):
        return cls(int(doc["n"]), int(doc["m"]), tuple(tuple(g) for g in doc["groups"]))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def build_dendrogram(D):
    """Single-linkage agglomeration over a distance matrix.

    Returns a list of nodes ``(left, right, height, members)``; nodes
    ``0..n-1`` are leaves and the last node is the root. Among equal
    distances the pair with the lowest ``(i, j)`` indices merges first, where
    a cluster is indexed by its smallest member.
    """
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    nodes = [(None, None, 0.0, (i,)) for i in range(n)]
    if n == 1:
        return nodes
    M = D.copy()
    np.fill_diagonal(M, np.inf)
    node_of = list(range(n))
    for _ in range(n - 1):
        flat = int(np.argmin(M))
        i, j = divmod(flat, n)
        if i > j:
            i, j = j, i
        height = float(M[i, j])
        a, b = node_of[i], node_of[j]
        nodes.append((a, b, height, tuple(sorted(nodes[a][3] + nodes[b][3]))))
        node_of[i] = len(nodes) - 1
        merged = np.minimum(M[i], M[j])
        M[i, :] = merged
        M[:, i] = merged
        M[i, i] = np.inf
        M[j, :] = np.inf
        M[:, j] = np.inf
    return nodes


def cluster(D, m):
    """Partition features into groups of at most ``m`` using the dendrogram of ``D``.

    Any cluster larger than ``m`` is split at its top-most link, repeatedly,
    until all groups fit. Groups are ordered by their smallest member.
    """
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    if D.shape != (n, n):
        raise ValueError("distance matrix must be square")
    if not 1 <= m <= n:
        raise ValueError(f"m must be in [1, {n}], got {m}")
    nodes = build_dendrogram(D)
    groups = []
    pending = [len(nodes) - 1]
    while pending:
        left, right, _, members = nodes[pending.pop()]
        if len(members) <= m:
            groups.append(members)
        else:
            pending.extend((left, right))
    groups.sort(key=lambda g: g[0])
    return FeatureMap(n, m, tuple(groups))
