"""Independent reference implementations used only by the tests."""
import math

import numpy as np


def naive_conv3d(x, w, bias=None, stride=1, padding="same"):
    """Direct loops over batch, output channel and output position."""
    n, c, d, h, wd = x.shape
    o, _, k = w.shape[:3]
    p = (k - 1) // 2 if padding == "same" else 0
    if padding == "same":
        dims = [math.ceil(s / stride) for s in (d, h, wd)]
    else:
        dims = [(s - k) // stride + 1 for s in (d, h, wd)]
    out = np.zeros((n, o, *dims))
    for b in range(n):
        for oc in range(o):
            for i in range(dims[0]):
                for j in range(dims[1]):
                    for l in range(dims[2]):
                        acc = 0.0 if bias is None else float(bias[oc])
                        for a in range(k):
                            zi = i * stride + a - p
                            if not 0 <= zi < d:
                                continue
                            for bb in range(k):
                                yi = j * stride + bb - p
                                if not 0 <= yi < h:
                                    continue
                                lo = l * stride - p
                                for e in range(k):
                                    xi = lo + e
                                    if 0 <= xi < wd:
                                        acc += float(np.dot(x[b, :, zi, yi, xi], w[oc, :, a, bb, e]))
                        out[b, oc, i, j, l] = acc
    return out


def mcc_from_counts(p, y):
    """Matthews correlation from a 2x2 contingency table."""
    table = np.zeros((2, 2))
    np.add.at(table, (np.asarray(y, int), np.asarray(p, int)), 1.0)
    (tn, fp), (fn, tp) = table
    den = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    return 0.0 if den == 0 else (tp * tn - fp * fn) / den


def clipped_normal_mean(mu, sd, lo=0.0, hi=1.0):
    """Mean of clip(N(mu, sd^2), lo, hi) in closed form."""
    if sd == 0:
        return min(max(mu, lo), hi)
    phi = lambda z: math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)  # noqa: E731
    Phi = lambda z: 0.5 * (1 + math.erf(z / math.sqrt(2)))  # noqa: E731
    a, b = (lo - mu) / sd, (hi - mu) / sd
    inside = mu * (Phi(b) - Phi(a)) + sd * (phi(a) - phi(b))
    return lo * Phi(a) + inside + hi * (1 - Phi(b))


def nadam_scalar(theta, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1 ** t)
        vh = v / (1 - b2 ** t)
        theta -= lr * (b1 * mh + (1 - b1) * g / (1 - b1 ** t)) / (math.sqrt(vh) + eps)
    return theta
