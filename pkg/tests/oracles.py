"""Independent reference computations used to freeze expected values."""

import math

import numpy as np


def two_pass_variance(samples):
    """Population variance of a list of per-channel tuples, averaged over channels."""
    n = len(samples)
    channels = len(samples[0])
    total = 0.0
    for c in range(channels):
        mean = sum(s[c] for s in samples) / n
        total += sum((s[c] - mean) ** 2 for s in samples) / n
    return total / channels


def density_oracle(data, labels):
    """Per-region variance x sqrt(area ratio), looping pixel by pixel."""
    h, w, _ = data.shape
    groups = {}
    for y in range(h):
        for x in range(w):
            groups.setdefault(int(labels[y, x]), []).append(tuple(data[y, x]))
    out = []
    for k in range(len(groups)):
        pix = groups[k]
        out.append(two_pass_variance(pix) * math.sqrt(len(pix) / (h * w)))
    return out


def eq4_scalar(d, alpha):
    peak = max(d)
    if peak == 0:
        return [1.0 / len(d)] * len(d)
    e = [math.exp(v / (alpha * peak)) for v in d]
    s = sum(e)
    return [v / s for v in e]


def enumerate_apportion(quotas, budget, caps):
    """Exhaustive integer allocation closest to the quotas in squared error.

    Feasible set: sum = min(budget, sum(caps)), a_k <= cap_k, and a_k >= 1 for
    non-empty regions whenever the budget covers all of them. Largest
    remainder is the L2-closest integer vector, so this pins it down without
    reusing the greedy.
    """
    k = len(quotas)
    nonempty = sum(1 for c in caps if c > 0)
    lo = [1 if (c > 0 and budget >= nonempty) else 0 for c in caps]
    target = min(budget, sum(caps))
    if k == 1:
        return [target]
    axes = [np.arange(lo[i], caps[i] + 1) for i in range(k - 1)]
    mesh = np.meshgrid(*axes, indexing="ij")
    partial = sum(m for m in mesh)
    last = target - partial
    ok = (last >= lo[-1]) & (last <= caps[-1])
    cost = sum((m - quotas[i]) ** 2 for i, m in enumerate(mesh)) + (last - quotas[-1]) ** 2
    cost = np.where(ok, cost, np.inf)
    idx = np.unravel_index(np.argmin(cost), cost.shape)
    best = [int(m[idx]) for m in mesh] + [int(last[idx])]
    return best


def hamilton_textbook(quotas, seats):
    """Floor every quota, then hand leftovers to the largest fractional parts."""
    base = [math.floor(q) for q in quotas]
    left = seats - sum(base)
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in order[:left]:
        base[i] += 1
    return base


def brute_force_layer_flops(n, d, m):
    total = 0
    for _ in range(4):
        total += n * d * d
    total += 2 * n * n * d
    total += 2 * n * d * m
    return total


