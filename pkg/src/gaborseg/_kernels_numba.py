"""numba kernels mirroring :mod:`gaborseg._kernels_numpy` one for one."""
import math

import numpy as np
from numba import njit

_jit = njit(cache=True, nogil=True)


@_jit
def im2col(xp, k, stride, do, ho, wo):
    c = xp.shape[0]
    cols = np.empty((c * k * k * k, do * ho * wo), dtype=np.float64)
    for ci in range(c):
        for a in range(k):
            for b in range(k):
                for e in range(k):
                    row = ((ci * k + a) * k + b) * k + e
                    for d in range(do):
                        xd = d * stride + a
                        for h in range(ho):
                            xh = h * stride + b
                            base = (d * ho + h) * wo
                            if stride == 1:
                                for w in range(wo):
                                    cols[row, base + w] = xp[ci, xd, xh, e + w]
                            else:
                                for w in range(wo):
                                    cols[row, base + w] = xp[ci, xd, xh, e + w * stride]
    return cols


@_jit
def col2im(cols, dxp, k, stride, do, ho, wo):
    c = dxp.shape[0]
    for ci in range(c):
        for a in range(k):
            for b in range(k):
                for e in range(k):
                    row = ((ci * k + a) * k + b) * k + e
                    col = 0
                    for d in range(do):
                        xd = d * stride + a
                        for h in range(ho):
                            xh = h * stride + b
                            for w in range(wo):
                                dxp[ci, xd, xh, e + w * stride] += cols[row, col]
                                col += 1
    return dxp


@_jit
def trilinear(vol, coords):
    d, h, w = vol.shape
    m = coords.shape[1]
    out = np.zeros(m, dtype=np.float64)
    for i in range(m):
        x = coords[0, i]
        y = coords[1, i]
        z = coords[2, i]
        x0 = int(math.floor(x))
        y0 = int(math.floor(y))
        z0 = int(math.floor(z))
        fx = x - x0
        fy = y - y0
        fz = z - z0
        acc = 0.0
        for dx in range(2):
            xi = x0 + dx
            if xi < 0 or xi >= d:
                continue
            wx = fx if dx else 1.0 - fx
            for dy in range(2):
                yi = y0 + dy
                if yi < 0 or yi >= h:
                    continue
                wy = fy if dy else 1.0 - fy
                for dz in range(2):
                    zi = z0 + dz
                    if zi < 0 or zi >= w:
                        continue
                    wz = fz if dz else 1.0 - fz
                    acc += wx * wy * wz * vol[xi, yi, zi]
        out[i] = acc
    return out


@_jit
def nearest(labels, coords):
    d, h, w = labels.shape
    m = coords.shape[1]
    out = np.zeros(m, dtype=labels.dtype)
    for i in range(m):
        xi = int(math.floor(coords[0, i] + 0.5))
        yi = int(math.floor(coords[1, i] + 0.5))
        zi = int(math.floor(coords[2, i] + 0.5))
        if 0 <= xi < d and 0 <= yi < h and 0 <= zi < w:
            out[i] = labels[xi, yi, zi]
    return out


@_jit
def im2col_hw(xp, k):
    c, dp, hp, wp = xp.shape
    ho = hp - k + 1
    wo = wp - k + 1
    plane = ho * wo
    cols = np.empty((c * k * k, dp * plane), dtype=np.float64)
    for ci in range(c):
        for b in range(k):
            for e in range(k):
                row = (ci * k + b) * k + e
                for d in range(dp):
                    for h in range(ho):
                        base = d * plane + h * wo
                        for w in range(wo):
                            cols[row, base + w] = xp[ci, d, h + b, w + e]
    return cols
