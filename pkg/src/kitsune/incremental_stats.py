"""Damped incremental statistics over unbounded streams.

A stream keeps a decayed (weight, linear sum, squared sum) tuple. Before each
insertion the tuple is multiplied by ``2 ** (-lam * dt)``, so old values fade
out and the statistics describe a recency-weighted window whose length is set
by ``lam``. Two streams can be linked to track a decayed sum of residual
products, from which an approximate covariance and correlation are derived.
"""

import math

__all__ = ["DampedStat", "StatLink", "decay_factor"]


def decay_factor(lam, dt):
    """Return ``2 ** (-lam * dt)``; negative ``dt`` is treated as 0."""
    if lam <= 0:
        raise ValueError("decay factor lambda must be positive")
    if dt <= 0:
        return 1.0
    return 2.0 ** (-lam * dt)


class DampedStat:
    __slots__ = ("lam", "w", "ls", "ss", "t_last", "last_residual")

    def __init__(self, lam, t_init=0.0):
        if lam <= 0:
            raise ValueError("decay factor lambda must be positive")
        self.lam = lam
        self.w = 0.0
        self.ls = 0.0
        self.ss = 0.0
        self.t_last = t_init
        # no residual before the first insert, so the first cross product is 0
        self.last_residual = 0.0

    def __repr__(self):
        return (
            f"DampedStat(lam={self.lam}, w={self.w:.6g}, ls={self.ls:.6g}, "
            f"ss={self.ss:.6g}, t_last={self.t_last})"
        )

    def decay(self, t):
        """Decay the tuple to time ``t`` and return the factor applied."""
        gamma = decay_factor(self.lam, t - self.t_last)
        if gamma != 1.0:
            self.w *= gamma
            self.ls *= gamma
            self.ss *= gamma
        if t > self.t_last:
            self.t_last = t
        return gamma

    def insert(self, x, t):
        """Insert value ``x`` observed at time ``t``.

        Returns the decay factor that was applied, which a linked
        :class:`StatLink` reuses to discount its residual-product sum.
        """
        if not math.isfinite(x):
            raise ValueError(f"non-finite value inserted into stream: {x!r}")
        gamma = self.decay(t)
        self.w += 1.0
        self.ls += x
        self.ss += x * x
        self.last_residual = x - self.ls / self.w
        return gamma

    def weight_at(self, t):
        """Weight the stream would have if decayed to time ``t`` (no mutation)."""
        return self.w * decay_factor(self.lam, t - self.t_last)

    @property
    def mean(self):
        return self.ls / self.w if self.w > 0 else 0.0

    @property
    def var(self):
        if self.w <= 0:
            return 0.0
        mu = self.ls / self.w
        return abs(self.ss / self.w - mu * mu)

    @property
    def std(self):
        return math.sqrt(self.var)

    def stats_1d(self):
        """Return ``(weight, mean, std)``; an empty stream gives zeros."""
        if self.w <= 0:
            return 0.0, 0.0, 0.0
        mu = self.ls / self.w
        return self.w, mu, math.sqrt(abs(self.ss / self.w - mu * mu))


class StatLink:
    """Joint statistics of two streams ``i`` and ``j``.

    The link owns a decayed sum of residual products ``sr``. Inserting on one
    side decays ``sr`` by that side's decay factor and then adds the product of
    the new residual with the other side's most recent residual.
    """

    __slots__ = ("stat_i", "stat_j", "sr")

    def __init__(self, stat_i, stat_j):
        self.stat_i = stat_i
        self.stat_j = stat_j
        self.sr = 0.0

    def insert(self, side, x, t):
        if side == "i":
            this, other = self.stat_i, self.stat_j
        elif side == "j":
            this, other = self.stat_j, self.stat_i
        else:
            raise ValueError(f"side must be 'i' or 'j', got {side!r}")
        gamma = this.insert(x, t)
        self.sr = self.sr * gamma + this.last_residual * other.last_residual

    @property
    def cov(self):
        wsum = self.stat_i.w + self.stat_j.w
        return self.sr / wsum if wsum > 0 else 0.0

    def stats_2d(self):
        """Return ``(magnitude, radius, cov, pcc)`` for the two streams."""
        si, sj = self.stat_i, self.stat_j
        if si.w <= 0 and sj.w <= 0:
            return 0.0, 0.0, 0.0, 0.0
        mu_i, mu_j = si.mean, sj.mean
        var_i, var_j = si.var, sj.var
        magnitude = math.sqrt(mu_i * mu_i + mu_j * mu_j)
        radius = math.sqrt(var_i * var_i + var_j * var_j)
        cov = self.sr / (si.w + sj.w)
        denom = math.sqrt(var_i) * math.sqrt(var_j)
        pcc = cov / denom if denom > 0 else 0.0
        return magnitude, radius, cov, pcc
