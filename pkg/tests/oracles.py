"""Independent reference implementations used as test oracles.

Everything here is written with plain loops and ``math`` so it shares no code
path with the library beyond forward evaluation where that is the point
(finite differences).
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


# ---------------------------------------------------------------------------
# labeling and sampling


def label_by_rule(start, duration, t_a):
    """0 intentional, 1 transitional, 2 unintentional, by separate predicates."""
    end = start + duration
    is_int = end <= t_a
    is_unint = start >= t_a
    is_trans = start < t_a < end
    assert is_int + is_unint + is_trans == 1
    return 0 if is_int else (2 if is_unint else 1)


def brute_positives(t, n):
    return [i for i in range(1, n + 1) if abs(i - t) == 1]


def brute_negatives(t, n, scope):
    out = []
    for i in range(1, n + 1):
        d = abs(i - t)
        if d >= 3 and (scope == "Global" or d <= 5):
            out.append(i)
    return out


def triplet_distribution(n, scope):
    """Exact probability of each (anchor, positive, negative) under the two-stage draw."""
    anchors = [t for t in range(1, n + 1) if brute_positives(t, n) and brute_negatives(t, n, scope)]
    probs = {}
    for t in anchors:
        ps, qs = brute_positives(t, n), brute_negatives(t, n, scope)
        for p in ps:
            for q in qs:
                probs[(t, p, q)] = Fraction(1, len(anchors) * len(ps) * len(qs))
    return probs


# ---------------------------------------------------------------------------
# losses


def cosine(x, y):
    dot = sum(a * b for a, b in zip(x, y))
    nx = math.sqrt(sum(a * a for a in x))
    ny = math.sqrt(sum(b * b for b in y))
    return dot / (nx * ny)


def nce(x, y, negatives, tau):
    """-log(q(x,y) / (q(x,y) + sum_n q(x,n))) by direct summation."""
    qpos = math.exp(cosine(x, y) / tau)
    qneg = sum(math.exp(cosine(x, n) / tau) for n in negatives)
    return -math.log(qpos / (qpos + qneg))


def temporal(z1, z2, zn, tau):
    k = len(z1)
    total = 0.0
    for i in range(k):
        total += nce(z1[i], z2[i], zn, tau) + nce(z2[i], z1[i], zn, tau)
    return total / (2 * k)


def bce(logit, label):
    p = 1.0 / (1.0 + math.exp(-logit))
    return -(label * math.log(p) + (1 - label) * math.log(1 - p))


def ce(logits, target):
    m = max(logits)
    lse = m + math.log(sum(math.exp(v - m) for v in logits))
    return lse - logits[target]


def mlp(x, layers):
    """Dense layers with tanh between them, written out with numpy matrix products."""
    h = np.asarray(x, dtype=np.float64)
    for i, (w, b) in enumerate(layers):
        h = h @ w + b
        if i < len(layers) - 1:
            h = np.tanh(h)
    return h


def layers_of(arrays, prefix, count):
    return [(arrays[f"{prefix}.w{i}"], arrays[f"{prefix}.b{i}"]) for i in range(1, count + 1)]


# ---------------------------------------------------------------------------
# finite differences


def numeric_grads(loss_fn, arrays, names=None, eps=1e-5):
    """Central differences of ``loss_fn(arrays)`` for every entry of each named array."""
    names = list(arrays) if names is None else names
    out = {}
    for name in names:
        base = arrays[name]
        g = np.zeros_like(base)
        flat = g.reshape(-1)
        for j in range(base.size):
            plus = base.copy().reshape(-1)
            minus = plus.copy()
            plus[j] += eps
            minus[j] -= eps
            lp = loss_fn({**arrays, name: plus.reshape(base.shape)})
            lm = loss_fn({**arrays, name: minus.reshape(base.shape)})
            flat[j] = (lp - lm) / (2 * eps)
        out[name] = g
    return out


def rel_err(analytic, numeric, floor=1e-8):
    """Per-tensor relative error ||a - n|| / max(||a||, ||n||)."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    scale = max(np.linalg.norm(a), np.linalg.norm(n))
    if scale < floor:
        return 0.0
    return float(np.linalg.norm(a - n) / scale)
