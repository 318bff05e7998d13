"""Trainable 3D Gabor kernels.

Two forms are provided.  :func:`gabor_full` evaluates the general kernel
with an anisotropic Gaussian envelope rotated by ``Rx Ry Rz`` and returns
the real and imaginary parts separately.  :func:`gabor_dl` is the fused
eight-parameter kernel used inside convolution layers: a spherical envelope
(which makes ``theta_x`` irrelevant) multiplying the sum of a cosine and a
sine carrier with their own amplitudes and frequencies.

Axis convention: grid coordinate ``x`` runs along tensor axis D, ``y``
along H and ``z`` along W.
"""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .tensor import Tensor, as_tensor

PARAM_NAMES = ("sigma", "theta_y", "theta_z", "a_re", "a_im", "f_re", "f_im", "psi")
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class CoordGrid:
    k: int
    coords: np.ndarray  # (k**3, 3) integer offsets, x slowest

    @property
    def x(self):
        return self.coords[:, 0].astype(np.float64)

    @property
    def y(self):
        return self.coords[:, 1].astype(np.float64)

    @property
    def z(self):
        return self.coords[:, 2].astype(np.float64)

    def __len__(self):
        return len(self.coords)


def coordinate_grid(k: int) -> CoordGrid:
    if not isinstance(k, (int, np.integer)) or k < 1 or k % 2 == 0:
        raise ValueError(f"kernel size must be a positive odd integer, got {k!r}")
    r = (k - 1) // 2
    ax = np.arange(-r, r + 1)
    xs, ys, zs = np.meshgrid(ax, ax, ax, indexing="ij")
    coords = np.stack([xs.ravel(), ys.ravel(), zs.ravel()], axis=1)
    return CoordGrid(int(k), coords)


def rotated_x(grid, theta_y, theta_z):
    """First rotated coordinate under ``Ry(theta_y) @ Rz(theta_z)``.

    Angles may be floats, arrays or :class:`Tensor` objects; the result
    broadcasts the angles against the grid points on the trailing axis.
    """
    x, y, z = grid.x, grid.y, grid.z
    if isinstance(theta_y, Tensor) or isinstance(theta_z, Tensor):
        theta_y, theta_z = as_tensor(theta_y), as_tensor(theta_z)
        cy, sy = theta_y.cos(), theta_y.sin()
        cz, sz = theta_z.cos(), theta_z.sin()
    else:
        cy, sy = np.cos(theta_y), np.sin(theta_y)
        cz, sz = np.cos(theta_z), np.sin(theta_z)
    return (cy * cz) * x - (cy * sz) * y + sy * z


def _rot(axis, t):
    c, s = math.cos(t), math.sin(t)
    if axis == "x":
        return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
    if axis == "y":
        return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


@dataclass(frozen=True)
class GaborFullParams:
    amplitude: float
    frequency: float
    psi: float
    theta: tuple = (0.0, 0.0, 0.0)
    sigma: tuple = (1.0, 1.0, 1.0)


def gabor_full(p: GaborFullParams, grid: CoordGrid):
    """Real and imaginary parts of the general (anisotropic) 3D Gabor kernel."""
    sigma = np.asarray(p.sigma, dtype=np.float64)
    if sigma.shape != (3,) or np.any(sigma <= 0):
        raise ValueError(f"sigma components must be positive, got {p.sigma}")
    tx, ty, tz = p.theta
    rot = _rot("x", tx) @ _rot("y", ty) @ _rot("z", tz)
    xr = grid.coords.astype(np.float64) @ rot.T  # (k**3, 3) rotated coordinates
    env = np.exp(-0.5 * np.sum((xr / sigma) ** 2, axis=1))
    phase = TWO_PI * p.frequency * xr[:, 0] + p.psi
    return p.amplitude * env * np.cos(phase), p.amplitude * env * np.sin(phase)


@dataclass(frozen=True)
class GaborDLParams:
    sigma: float
    theta_y: float
    theta_z: float
    a_re: float
    a_im: float
    f_re: float
    f_im: float
    psi: float

    def as_list(self):
        return list(astuple(self))

    @classmethod
    def from_list(cls, values):
        if len(values) != len(PARAM_NAMES):
            raise ValueError(f"expected {len(PARAM_NAMES)} Gabor values, got {len(values)}")
        return cls(*(float(v) for v in values))


assert tuple(f.name for f in fields(GaborDLParams)) == PARAM_NAMES


def gabor_dl(p: GaborDLParams, grid: CoordGrid) -> np.ndarray:
    """Fused eight-parameter kernel evaluated at every grid point (k**3 values)."""
    if p.sigma <= 0:
        raise ValueError(f"sigma must be positive, got {p.sigma}")
    xr = rotated_x(grid, p.theta_y, p.theta_z)
    r2 = np.sum(grid.coords.astype(np.float64) ** 2, axis=1)
    env = np.exp(-0.5 * r2 / p.sigma ** 2)
    return env * (p.a_re * np.cos(TWO_PI * p.f_re * xr + p.psi)
                  + p.a_im * np.sin(TWO_PI * p.f_im * xr + p.psi))


def softplus_inv(y):
    y = np.asarray(y, dtype=np.float64)
    return y + np.log(-np.expm1(-y))


class KernelBank:
    """Convolution weights for one layer, stored directly or as Gabor parameters.

    In gabor mode every ``(out, in)`` channel pair owns eight trainable
    scalars, each held in a ``(c_out, c_in)`` tensor; sigma is stored through
    softplus so that it stays strictly positive under unconstrained updates.
    """

    def __init__(self, c_out, c_in, k, mode="gabor", tensors=None):
        if mode not in ("direct", "gabor"):
            raise ValueError(f"mode must be 'direct' or 'gabor', got {mode!r}")
        if min(c_out, c_in) < 1:
            raise ValueError("channel counts must be positive")
        self.c_out, self.c_in, self.k, self.mode = int(c_out), int(c_in), int(k), mode
        self.grid = coordinate_grid(k)
        self.tensors = dict(tensors or {})

    # parameter views ----------------------------------------------------------

    def parameters(self):
        return list(self.tensors.items())

    @property
    def n_trainable(self):
        return sum(t.size for t in self.tensors.values())

    def sigma(self):
        return self.tensors["raw_sigma"].softplus()

    def records(self):
        """Gabor parameters as ``c_out*c_in`` rows of eight floats, (out, in) order."""
        self._require_gabor()
        sig = np.logaddexp(0.0, self.tensors["raw_sigma"].data)
        cols = [sig] + [self.tensors[name].data for name in PARAM_NAMES[1:]]
        return np.stack([c.reshape(-1) for c in cols], axis=1)

    def pair(self, o, i) -> GaborDLParams:
        return GaborDLParams.from_list(self.records()[o * self.c_in + i])

    def _require_gabor(self):
        if self.mode != "gabor":
            raise ValueError("direct-mode banks hold weights, not Gabor parameters")

    # kernels --------------------------------------------------------------

    def weights(self) -> Tensor:
        if self.mode == "direct":
            return self.tensors["weight"]
        return materialize_bank(self)

    @classmethod
    def from_records(cls, records, c_out, c_in, k):
        rec = np.asarray(records, dtype=np.float64).reshape(c_out * c_in, len(PARAM_NAMES))
        if np.any(rec[:, 0] <= 0):
            raise ValueError("sigma values must be positive")
        tensors = {"raw_sigma": Tensor(softplus_inv(rec[:, 0]).reshape(c_out, c_in),
                                       requires_grad=True)}
        for j, name in enumerate(PARAM_NAMES[1:], start=1):
            tensors[name] = Tensor(rec[:, j].reshape(c_out, c_in).copy(), requires_grad=True)
        return cls(c_out, c_in, k, "gabor", tensors)


def materialize_bank(bank: KernelBank, grid: CoordGrid | None = None) -> Tensor:
    """Build the ``(c_out, c_in, k, k, k)`` weight tensor from Gabor parameters.

    The result stays connected to the eight parameter tensors, so a backward
    pass through a convolution reaches every scalar.
    """
    bank._require_gabor()
    grid = grid or bank.grid
    t = bank.tensors
    shape = (bank.c_out, bank.c_in, 1)
    ty = t["theta_y"].reshape(shape)
    tz = t["theta_z"].reshape(shape)
    xr = rotated_x(grid, ty, tz)
    r2 = np.sum(grid.coords.astype(np.float64) ** 2, axis=1)
    sig = bank.sigma().reshape(shape)
    env = (r2 * (-0.5) / (sig * sig)).exp()
    psi = t["psi"].reshape(shape)
    carrier = (t["a_re"].reshape(shape) * (xr * t["f_re"].reshape(shape) * TWO_PI + psi).cos()
               + t["a_im"].reshape(shape) * (xr * t["f_im"].reshape(shape) * TWO_PI + psi).sin())
    k = grid.k
    return (env * carrier).reshape(bank.c_out, bank.c_in, k, k, k)


def init_gabor(c_in, c_out, seed, k=7) -> KernelBank:
    """Seeded random Gabor bank.

    sigma ~ U[1, k/2], angles and phase ~ U[-pi, pi], frequencies ~ U[0, 0.5]
    cycles/voxel, amplitudes ~ N(0, 1/(c_in k^3)).
    """
    if min(c_in, c_out) < 1:
        raise ValueError("channel counts must be positive")
    rng = np.random.default_rng(seed)
    shape = (c_out, c_in)
    scale = 1.0 / math.sqrt(c_in * k ** 3)
    hi = max(1.0, k / 2.0)
    values = {
        "raw_sigma": softplus_inv(rng.uniform(1.0, hi, shape)),
        "theta_y": rng.uniform(-math.pi, math.pi, shape),
        "theta_z": rng.uniform(-math.pi, math.pi, shape),
        "a_re": rng.normal(0.0, scale, shape),
        "a_im": rng.normal(0.0, scale, shape),
        "f_re": rng.uniform(0.0, 0.5, shape),
        "f_im": rng.uniform(0.0, 0.5, shape),
        "psi": rng.uniform(-math.pi, math.pi, shape),
    }
    tensors = {name: Tensor(v, requires_grad=True) for name, v in values.items()}
    return KernelBank(c_out, c_in, k, "gabor", tensors)


def init_direct(c_in, c_out, seed, k=3) -> KernelBank:
    """He-normal conventional weights."""
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, math.sqrt(2.0 / (c_in * k ** 3)), (c_out, c_in, k, k, k))
    return KernelBank(c_out, c_in, k, "direct", {"weight": Tensor(w, requires_grad=True)})


def sinusoid_factor(x, a_re, a_im, f_re, f_im, psi=0.0):
    """The carrier of :func:`gabor_dl` along one axis, without envelope."""
    x = np.asarray(x, dtype=np.float64)
    return a_re * np.cos(TWO_PI * f_re * x + psi) + a_im * np.sin(TWO_PI * f_im * x + psi)
