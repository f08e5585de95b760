"""Damped statistics: how a recency-weighted window forgets.

A single stream receives a burst of large values, then a long run of small
ones. Watch the fast window (lambda=5) lose the burst within a second while
the slow window (lambda=0.01) still remembers it minutes later.
"""

from kitsune import DampedStat, StatLink

fast, slow = DampedStat(5.0), DampedStat(0.01)

print("t      fast mean  slow mean   fast weight")
for i in range(10):
    t = 0.1 * i
    fast.insert(1000.0, t)
    slow.insert(1000.0, t)
for i in range(1, 301):
    t = 1.0 + i
    fast.insert(60.0, t)
    slow.insert(60.0, t)
    if i in (1, 2, 5, 30, 300):
        print(f"{t:6.1f} {fast.mean:10.2f} {slow.mean:10.2f} {fast.w:12.4f}")

# Two directions of a conversation share a link: upload sizes and download
# sizes that rise and fall together give a positive correlation.
up, down = DampedStat(1.0), DampedStat(1.0)
link = StatLink(up, down)
for i in range(200):
    t = 0.05 * i
    size = 100 + 50 * (i % 10)
    link.insert("i", size, t)
    link.insert("j", 3 * size, t + 0.01)
magnitude, radius, cov, pcc = link.stats_2d()
print(f"\nlinked streams: magnitude={magnitude:.1f} radius={radius:.1f} cov={cov:.1f} pcc={pcc:.3f}")
