"""Differentiable volumetric operations on 5D ``(n, c, D, H, W)`` tensors."""
import numpy as np

from . import _backend
from .tensor import DTYPE, Tensor, as_tensor

def _out_extent(size, k, stride, padding):
    if padding == "same":
        return -(-size // stride)
    return (size - k) // stride + 1


def _pad_amount(k, padding):
    return (k - 1) // 2 if padding == "same" else 0


def _corr_s1(xp, w, kern):
    """Stride-1 valid correlation of padded ``xp`` (n, C, Dp, Hp, Wp) with ``w``.

    The H/W offsets are unfolded per sample (``im2col_hw``); each depth
    offset is then one GEMM over a contiguous column range.
    """
    n, c, dp, hp, wp = xp.shape
    o, _, k = w.shape[:3]
    do, ho, wo = dp - k + 1, hp - k + 1, wp - k + 1
    plane = ho * wo
    wa = np.ascontiguousarray(w.transpose(2, 0, 1, 3, 4)).reshape(k, o, c * k * k)
    out = np.empty((n, o, do, ho, wo), dtype=DTYPE)
    for i in range(n):
        cols = kern.im2col_hw(np.ascontiguousarray(xp[i]), k)
        acc = wa[0] @ cols[:, : do * plane]
        for a in range(1, k):
            acc += wa[a] @ cols[:, a * plane : (a + do) * plane]
        out[i] = acc.reshape(o, do, ho, wo)
    return out


def _corr_s1_grad_w(xp, g, k, kern):
    n, c = xp.shape[:2]
    o, do, ho, wo = g.shape[1:]
    plane = ho * wo
    gw = np.zeros((k, o, c * k * k), dtype=DTYPE)
    for i in range(n):
        cols = kern.im2col_hw(np.ascontiguousarray(xp[i]), k)
        gi = g[i].reshape(o, -1)
        for a in range(k):
            gw[a] += gi @ cols[:, a * plane : (a + do) * plane].T
    return gw.reshape(k, o, c, k, k).transpose(1, 2, 0, 3, 4)


def _corr_strided(xp, w, stride, out_shape, kern):
    n, c = xp.shape[:2]
    o, _, k = w.shape[:3]
    do, ho, wo = out_shape
    w2 = w.reshape(o, -1)
    out = np.empty((n, o, do, ho, wo), dtype=DTYPE)
    for i in range(n):
        cols = kern.im2col(np.ascontiguousarray(xp[i]), k, stride, do, ho, wo)
        out[i] = (w2 @ cols).reshape(o, do, ho, wo)
    return out


def conv3d(x, weight, bias=None, stride=1, padding="same", kernels=None):
    """3D cross-correlation (no kernel flip) with zero padding.

    ``padding="same"`` pads ``(k-1)//2`` on each side so that every output
    extent is ``ceil(size / stride)``; ``"valid"`` uses no padding.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 5 or weight.ndim != 5:
        raise ValueError(f"conv3d wants 5D input and weights, got {x.shape} and {weight.shape}")
    n, c_in, d, h, w = x.shape
    c_out, wc_in, k, k2, k3 = weight.shape
    if wc_in != c_in:
        raise ValueError(f"shape mismatch: input has {c_in} channels, weights expect {wc_in}")
    if not (k == k2 == k3):
        raise ValueError(f"only cubic kernels are supported, got {weight.shape[2:]}")
    if padding not in ("same", "valid"):
        raise ValueError(f"padding must be 'same' or 'valid', got {padding!r}")
    if padding == "same" and k % 2 == 0:
        raise ValueError("'same' padding needs an odd kernel size")
    if stride < 1:
        raise ValueError("stride must be a positive integer")
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (c_out,):
            raise ValueError(f"bias must have shape ({c_out},), got {bias.shape}")
    kern = kernels or _backend.get_kernels()

    p = _pad_amount(k, padding)
    out_shape = tuple(_out_extent(s, k, stride, padding) for s in (d, h, w))
    if min(out_shape) < 1:
        raise ValueError(f"kernel {k} larger than input extents {(d, h, w)}")
    xp = _pad(x.data, p)
    wd = weight.data
    if stride == 1:
        out = _corr_s1(xp, wd, kern)
    else:
        out = _corr_strided(xp, wd, stride, out_shape, kern)
    if bias is not None:
        out += bias.data.reshape(1, c_out, 1, 1, 1)

    def backward(g):
        g = np.ascontiguousarray(g)
        gx = gw = None
        if stride == 1:
            if x.requires_grad:
                # input gradient = full correlation of g with the flipped, transposed kernel
                wflip = np.ascontiguousarray(wd[:, :, ::-1, ::-1, ::-1].transpose(1, 0, 2, 3, 4))
                gx = _corr_s1(_pad(g, k - 1 - p), wflip, kern)
            if weight.requires_grad:
                gw = _corr_s1_grad_w(xp, g, k, kern)
        else:
            gw, gx = _strided_backward(xp, wd, g, stride, p, x.requires_grad,
                                       weight.requires_grad, kern)
        gb = g.sum(axis=(0, 2, 3, 4)) if bias is not None else None
        return (gx, gw) if bias is None else (gx, gw, gb)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._make(out, parents, backward)


def _pad(a, p):
    if not p:
        return a
    return np.pad(a, ((0, 0), (0, 0), (p, p), (p, p), (p, p)))


def _strided_backward(xp, wd, g, stride, p, need_x, need_w, kern):
    n, c = xp.shape[:2]
    o, _, k = wd.shape[:3]
    do, ho, wo = g.shape[2:]
    w2 = wd.reshape(o, -1)
    gw = np.zeros_like(w2) if need_w else None
    gx = np.zeros_like(xp) if need_x else None
    for i in range(n):
        gi = g[i].reshape(o, -1)
        if need_w:
            gw += gi @ kern.im2col(np.ascontiguousarray(xp[i]), k, stride, do, ho, wo).T
        if need_x:
            kern.col2im(w2.T @ gi, gx[i], k, stride, do, ho, wo)
    if gx is not None and p:
        gx = gx[:, :, p:-p, p:-p, p:-p]
    return (gw.reshape(wd.shape) if need_w else None), gx


def upsample3d(x, factor=2, mode="nearest"):
    """Nearest-neighbour upsampling of the three spatial axes."""
    x = as_tensor(x)
    if mode != "nearest":
        raise ValueError(f"unsupported upsampling mode {mode!r}")
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise ValueError(f"factor must be a positive integer, got {factor!r}")
    if factor == 1:
        return x
    f = int(factor)
    n, c, d, h, w = x.shape
    src = x.data.reshape(n, c, d, 1, h, 1, w, 1)
    out = np.broadcast_to(src, (n, c, d, f, h, f, w, f)).reshape(n, c, d * f, h * f, w * f)

    def backward(g):
        return (g.reshape(n, c, d, f, h, f, w, f).sum(axis=(3, 5, 7)),)

    return Tensor._make(out, (x,), backward)


def group_norm(x, groups, gamma, beta, eps=1e-5):
    """Group normalization over ``groups`` channel groups per sample."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    n, c = x.shape[:2]
    if groups < 1 or c % groups:
        raise ValueError(f"{c} channels are not divisible into {groups} groups")
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ValueError(f"gamma and beta must have shape ({c},)")
    spatial = x.shape[2:]
    xg = x.data.reshape(n, groups, -1)
    mu = xg.mean(axis=2, keepdims=True)
    xc = xg - mu
    var = np.mean(xc * xc, axis=2, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xc * inv).reshape(x.shape)
    bshape = (1, c) + (1,) * len(spatial)
    out = xhat * gamma.data.reshape(bshape) + beta.data.reshape(bshape)

    def backward(g):
        axes = (0,) + tuple(range(2, x.ndim))
        ggamma = (g * xhat).sum(axis=axes)
        gbeta = g.sum(axis=axes)
        gx = None
        if x.requires_grad:
            dxhat = (g * gamma.data.reshape(bshape)).reshape(n, groups, -1)
            xh = xhat.reshape(n, groups, -1)
            m1 = dxhat.mean(axis=2, keepdims=True)
            m2 = (dxhat * xh).mean(axis=2, keepdims=True)
            gx = (inv * (dxhat - m1 - xh * m2)).reshape(x.shape)
        return gx, ggamma, gbeta

    return Tensor._make(out, (x, gamma, beta), backward)


def softmax_channel(x):
    """Softmax along axis 1, stabilised by subtracting the per-voxel max."""
    x = as_tensor(x)
    z = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=1, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=1, keepdims=True)),)

    return Tensor._make(out, (x,), backward)


def spatial_dropout(x, rate, training=True, rng=None):
    """Zero entire channels with probability ``rate`` and rescale survivors."""
    x = as_tensor(x)
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("training-mode dropout needs an explicit numpy Generator")
    n, c = x.shape[:2]
    keep = rng.random((n, c)) >= rate
    mask = (keep / (1.0 - rate)).reshape((n, c) + (1,) * (x.ndim - 2))
    return x * mask


def relu(x):
    return as_tensor(x).relu()


def conv_output_shape(shape, k, stride=1, padding="same"):
    """Spatial output extents of :func:`conv3d` for an input of ``shape``."""
    return tuple(_out_extent(s, k, stride, padding) for s in shape)


def flops_conv3d(c_in, c_out, k, out_voxels):
    """Multiply-accumulate count of one dense conv3d forward pass."""
    return c_in * c_out * k ** 3 * out_voxels


__all__ = [
    "conv3d", "upsample3d", "group_norm", "softmax_channel", "spatial_dropout",
    "relu", "conv_output_shape", "flops_conv3d",
]
