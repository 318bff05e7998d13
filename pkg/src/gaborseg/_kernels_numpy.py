"""Pure-numpy implementations of the hot kernels.

Shapes follow one convention throughout: a padded single-sample volume
``xp`` is ``(C, Dp, Hp, Wp)`` and a column matrix is ``(C*k**3, Do*Ho*Wo)``
with rows ordered ``(c, a, b, e)`` (channel slowest) and columns in
row-major output order.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def im2col(xp, k, stride, do, ho, wo):
    c = xp.shape[0]
    win = sliding_window_view(xp, (k, k, k), axis=(1, 2, 3))
    win = win[:, : (do - 1) * stride + 1 : stride, : (ho - 1) * stride + 1 : stride,
              : (wo - 1) * stride + 1 : stride]
    # (C, Do, Ho, Wo, k, k, k) -> (C, k, k, k, Do, Ho, Wo)
    cols = np.ascontiguousarray(win.transpose(0, 4, 5, 6, 1, 2, 3))
    return cols.reshape(c * k ** 3, do * ho * wo)


def col2im(cols, dxp, k, stride, do, ho, wo):
    """Scatter-add ``cols`` back into the padded gradient buffer ``dxp``."""
    c = dxp.shape[0]
    c6 = cols.reshape(c, k, k, k, do, ho, wo)
    s = stride
    for a in range(k):
        for b in range(k):
            for e in range(k):
                dxp[:, a : a + s * (do - 1) + 1 : s, b : b + s * (ho - 1) + 1 : s,
                    e : e + s * (wo - 1) + 1 : s] += c6[:, a, b, e]
    return dxp


def trilinear(vol, coords):
    """Sample ``vol`` at fractional ``coords`` (3, M); outside samples read 0."""
    d, h, w = vol.shape
    x, y, z = coords
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    z0 = np.floor(z).astype(np.int64)
    fx, fy, fz = x - x0, y - y0, z - z0
    out = np.zeros(x.shape, dtype=np.float64)
    for dx in (0, 1):
        wx = fx if dx else 1.0 - fx
        xi = x0 + dx
        for dy in (0, 1):
            wy = fy if dy else 1.0 - fy
            yi = y0 + dy
            for dz in (0, 1):
                wz = fz if dz else 1.0 - fz
                zi = z0 + dz
                ok = (xi >= 0) & (xi < d) & (yi >= 0) & (yi < h) & (zi >= 0) & (zi < w)
                wt = wx * wy * wz
                vals = np.zeros_like(out)
                vals[ok] = vol[xi[ok], yi[ok], zi[ok]]
                out += wt * vals
    return out


def nearest(labels, coords):
    """Nearest-neighbour lookup of an integer volume; outside samples read 0."""
    d, h, w = labels.shape
    xi = np.floor(coords[0] + 0.5).astype(np.int64)
    yi = np.floor(coords[1] + 0.5).astype(np.int64)
    zi = np.floor(coords[2] + 0.5).astype(np.int64)
    ok = (xi >= 0) & (xi < d) & (yi >= 0) & (yi < h) & (zi >= 0) & (zi < w)
    out = np.zeros(xi.shape, dtype=labels.dtype)
    out[ok] = labels[xi[ok], yi[ok], zi[ok]]
    return out


def im2col_hw(xp, k):
    """In-plane columns: ``(C*k*k, Dp*Ho*Wo)`` with rows ``(c, b, e)``.

    Only the H and W offsets are unfolded; a depth offset ``a`` then selects
    the contiguous column range ``[a*Ho*Wo, (a+Do)*Ho*Wo)``.
    """
    c, dp, hp, wp = xp.shape
    ho, wo = hp - k + 1, wp - k + 1
    win = sliding_window_view(xp, (k, k), axis=(2, 3))  # (C, Dp, Ho, Wo, k, k)
    cols = np.ascontiguousarray(win.transpose(0, 4, 5, 1, 2, 3))
    return cols.reshape(c * k * k, dp * ho * wo)
