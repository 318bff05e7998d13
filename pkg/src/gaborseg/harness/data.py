"""Synthetic labelled volumes and random affine augmentation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import _backend


@dataclass
class Dataset:
    images: np.ndarray  # (n, 1, D, H, W) float64
    labels: np.ndarray  # (n, D, H, W) uint8
    n_labels: int

    def __post_init__(self):
        if self.images.ndim != 5 or self.labels.ndim != 4:
            raise ValueError("images must be (n, C, D, H, W) and labels (n, D, H, W)")
        if self.images.shape[0] != self.labels.shape[0] or self.images.shape[2:] != self.labels.shape[1:]:
            raise ValueError(f"images {self.images.shape} and labels {self.labels.shape} disagree")

    def __len__(self):
        return self.images.shape[0]

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.images[idx], self.labels[idx], self.n_labels)

    def split(self, n_train, n_val, n_test=None):
        """Consecutive train/validation/test partitions."""
        n = len(self)
        n_test = n - n_train - n_val if n_test is None else n_test
        if min(n_train, n_val, n_test) < 0 or n_train + n_val + n_test > n:
            raise ValueError(f"cannot split {n} volumes into {n_train}/{n_val}/{n_test}")
        a, b = n_train, n_train + n_val
        return self.subset(range(a)), self.subset(range(a, b)), self.subset(range(b, b + n_test))


def _object_mask(shape, rng, kind, side):
    grid = np.indices(shape, dtype=np.float64)
    if kind == "sphere":
        r = rng.uniform(0.15, 0.25) * side
        lo = np.full(3, r + 1.0)
        hi = np.array(shape) - r - 2.0
        c = rng.uniform(lo, hi)
        d2 = sum((grid[i] - c[i]) ** 2 for i in range(3))
        return d2 <= r * r
    half = rng.uniform(0.12, 0.2, size=3) * side
    lo = half + 1.0
    hi = np.array(shape) - half - 2.0
    c = rng.uniform(lo, hi)
    inside = np.ones(shape, dtype=bool)
    for i in range(3):
        inside &= np.abs(grid[i] - c[i]) <= half[i]
    return inside


def _dilate(mask):
    out = mask.copy()
    for ax in range(3):
        out[tuple(slice(1, None) if i == ax else slice(None) for i in range(3))] |= \
            mask[tuple(slice(None, -1) if i == ax else slice(None) for i in range(3))]
        out[tuple(slice(None, -1) if i == ax else slice(None) for i in range(3))] |= \
            mask[tuple(slice(1, None) if i == ax else slice(None) for i in range(3))]
    return out


def _place_objects(shape, n_labels, rng, side, retries):
    labels = np.zeros(shape, dtype=np.uint8)
    occupied = np.zeros(shape, dtype=bool)
    for lab in range(1, n_labels):
        for _ in range(retries):
            kind = "sphere" if rng.random() < 0.5 else "cuboid"
            mask = _object_mask(shape, rng, kind, side)
            if mask.any() and not (mask & _dilate(occupied)).any():
                break
        else:
            return None
        labels[mask] = lab
        occupied |= mask
    return labels


def synth_volume(side, n_labels, rng, noise=0.1, retries=200, restarts=20):
    """One ``(image, labels)`` pair with ``n_labels - 1`` disjoint objects.

    Label ``l`` is drawn with mean intensity ``l / (n_labels - 1)`` on a zero
    background, plus N(0, noise^2) everywhere.  When an object cannot be
    placed the whole layout is redrawn, up to ``restarts`` times.
    """
    shape = (side,) * 3
    for _ in range(restarts):
        labels = _place_objects(shape, n_labels, rng, side, retries)
        if labels is not None:
            break
    else:
        raise ValueError(f"could not place {n_labels - 1} disjoint objects in a {side}^3 volume")
    intensity = labels.astype(np.float64) / (n_labels - 1)
    image = intensity + noise * rng.standard_normal(shape)
    return image, labels


def synth_dataset(n_volumes, side, n_labels, seed, noise=0.1, downsampling=1):
    """``n_volumes`` synthetic volumes, bitwise reproducible from ``seed``."""
    if n_labels < 2:
        raise ValueError("need at least two labels")
    if side % downsampling:
        raise ValueError(f"side {side} must be divisible by the network downsampling {downsampling}")
    images = np.empty((n_volumes, 1, side, side, side))
    labels = np.empty((n_volumes, side, side, side), dtype=np.uint8)
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(n_volumes)):
        images[i, 0], labels[i] = synth_volume(side, n_labels, np.random.default_rng(child), noise)
    return Dataset(images, labels, n_labels)


@dataclass(frozen=True)
class AugmentConfig:
    rot_deg: float = 30.0
    shift_frac: float = 0.2
    scale_range: tuple = (0.8, 1.2)
    prob: float = 0.8
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scale_range", tuple(float(s) for s in self.scale_range))
        if not 0.0 <= self.prob <= 1.0:
            raise ValueError("prob must lie in [0, 1]")
        lo, hi = self.scale_range
        if not 0 < lo <= hi:
            raise ValueError("scale_range must be positive and ordered")


def affine_resample(image, labels, angle_deg=0.0, shift=(0.0, 0.0, 0.0), scale=1.0, kernels=None):
    """Apply rotation about the z axis, shift (voxels) and isotropic scale.

    Output voxel ``q`` reads the source at ``c + R^T (q - c - shift) / scale``
    with ``c`` the volume centre.  The image is resampled trilinearly and the
    labels by nearest neighbour; samples outside the volume read 0.
    """
    kern = kernels or _backend.get_kernels()
    image = np.asarray(image, dtype=np.float64)
    squeeze = image.ndim == 3
    if squeeze:
        image = image[None]
    shape = labels.shape
    if image.shape[1:] != shape:
        raise ValueError(f"image {image.shape[1:]} and labels {shape} differ in extent")
    centre = (np.array(shape, dtype=np.float64) - 1.0) / 2.0
    q = np.indices(shape, dtype=np.float64).reshape(3, -1)
    a = math.radians(angle_deg)
    c, s = math.cos(a), math.sin(a)
    rot_t = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
    rel = (q - centre[:, None] - np.asarray(shift, dtype=np.float64)[:, None]) / scale
    src = np.ascontiguousarray(rot_t @ rel + centre[:, None])
    out = np.empty_like(image)
    for ch in range(image.shape[0]):
        out[ch] = kern.trilinear(np.ascontiguousarray(image[ch]), src).reshape(shape)
    lab = kern.nearest(np.ascontiguousarray(labels), src).reshape(shape)
    return (out[0] if squeeze else out), lab


def augment(image, labels, cfg: AugmentConfig, rng):
    """With probability ``cfg.prob`` apply one random affine transform."""
    if cfg.prob <= 0.0 or rng.random() >= cfg.prob:
        return image, labels
    angle = rng.uniform(-cfg.rot_deg, cfg.rot_deg)
    extent = np.array(labels.shape, dtype=np.float64)
    shift = rng.uniform(-cfg.shift_frac, cfg.shift_frac, size=3) * extent
    scale = rng.uniform(*cfg.scale_range)
    return affine_resample(image, labels, angle, shift, scale)
