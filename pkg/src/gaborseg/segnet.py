"""V-Net style encoder/decoder with deep supervision and selectable kernels.

Every spatial convolution is either conventional (``k_conv``-sized direct
weights) or Gabor-parametric (``k_gabor`` grid, eight scalars per channel
pair).  In ``mixed`` mode a layer is conventional when
``max(c_in, c_out) <= mixed_threshold`` and Gabor otherwise.

Wiring, per level ``l`` with ``c_l`` channels::

    encoder:  h -> [conv-GN-ReLU] x2 -> dropout -> + h         (residual)
              -> stride-2 conv-GN-ReLU to level l+1
    decoder:  up2(h_{l+1}) -> conv-GN-ReLU ->  concat(skip_l) ->
              a = conv-GN-ReLU,  h = a + dropout(conv-GN-ReLU(a))
    heads:    1x1 conv of each level's output to L channels, upsampled to
              full resolution, summed, softmax.
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import asdict, dataclass, field

import numpy as np

from . import functional as F
from .gabor import init_direct, init_gabor
from .tensor import Tensor, concat, no_grad

KERNEL_MODES = ("conventional", "gabor", "mixed")


@dataclass
class NetworkConfig:
    levels: int = 4
    channels: tuple = (16, 32, 64, 128)
    kernel_mode: str = "mixed"
    k_conv: int = 3
    k_gabor: int = 7
    gn_groups: int = 4
    dropout_rate: float = 0.2
    labels: int = 4
    mixed_threshold: int = 16
    in_channels: int = 1
    gn_eps: float = 1e-5

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        if self.levels < 1 or len(self.channels) != self.levels:
            raise ValueError(f"need one channel count per level: levels={self.levels}, "
                             f"channels={self.channels}")
        if any(b <= a for a, b in zip(self.channels, self.channels[1:])):
            raise ValueError(f"channels must increase strictly along the encoder: {self.channels}")
        bad = [c for c in self.channels if c % self.gn_groups]
        if bad:
            raise ValueError(f"channel counts {bad} are not divisible by gn_groups={self.gn_groups}")
        if self.kernel_mode not in KERNEL_MODES:
            raise ValueError(f"kernel_mode must be one of {KERNEL_MODES}, got {self.kernel_mode!r}")
        for name in ("k_conv", "k_gabor"):
            k = getattr(self, name)
            if k < 1 or k % 2 == 0:
                raise ValueError(f"{name} must be a positive odd integer, got {k}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.labels < 2:
            raise ValueError("need at least two labels")

    def to_dict(self):
        d = asdict(self)
        d["channels"] = list(self.channels)
        return d

    @property
    def downsampling(self):
        return 2 ** (self.levels - 1)

    def layer_mode(self, c_in, c_out):
        if self.kernel_mode == "mixed":
            return "conventional" if max(c_in, c_out) <= self.mixed_threshold else "gabor"
        return self.kernel_mode


class Conv:
    def __init__(self, c_in, c_out, mode, k, seed, stride=1):
        self.mode, self.stride = mode, stride
        if mode == "gabor":
            self.bank = init_gabor(c_in, c_out, seed, k=k)
        else:
            self.bank = init_direct(c_in, c_out, seed, k=k)
        self.bias = Tensor(np.zeros(c_out), requires_grad=True)

    @property
    def pointwise(self):
        return self.bank.k == 1

    def parameters(self):
        return self.bank.parameters() + [("bias", self.bias)]

    def __call__(self, x):
        return F.conv3d(x, self.bank.weights(), self.bias, stride=self.stride)


class GroupNorm:
    def __init__(self, c, groups, eps):
        self.groups, self.eps = groups, eps
        self.gamma = Tensor(np.ones(c), requires_grad=True)
        self.beta = Tensor(np.zeros(c), requires_grad=True)

    def parameters(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def __call__(self, x):
        return F.group_norm(x, self.groups, self.gamma, self.beta, self.eps)


class SegNet:
    def __init__(self, cfg: NetworkConfig, seed=0):
        self.cfg = cfg
        self.training = True
        self.layers = OrderedDict()
        self._seeds = np.random.SeedSequence(seed)
        ch, L = cfg.channels, cfg.levels

        self._conv("in.conv", cfg.in_channels, ch[0])
        for l in range(L):
            self._conv(f"enc{l}.conv1", ch[l], ch[l])
            self._conv(f"enc{l}.conv2", ch[l], ch[l])
            if l < L - 1:
                self._conv(f"down{l}.conv", ch[l], ch[l + 1], stride=2)
        for l in reversed(range(L - 1)):
            self._conv(f"dec{l}.up", ch[l + 1], ch[l])
            self._conv(f"dec{l}.conv1", 2 * ch[l], ch[l])
            self._conv(f"dec{l}.conv2", ch[l], ch[l])
        for l in range(L):
            self.layers[f"head{l}"] = Conv(ch[l], cfg.labels, "conventional", 1, self._next_seed())

    # construction -------------------------------------------------------------

    def _next_seed(self):
        return int(self._seeds.spawn(1)[0].generate_state(1)[0])

    def _conv(self, name, c_in, c_out, stride=1):
        mode = self.cfg.layer_mode(c_in, c_out)
        k = self.cfg.k_gabor if mode == "gabor" else self.cfg.k_conv
        self.layers[name] = Conv(c_in, c_out, mode, k, self._next_seed(), stride=stride)
        norm = name.rsplit(".", 1)[0] + ".gn" + name.rsplit(".", 1)[1].replace("conv", "")
        self.layers[norm] = GroupNorm(c_out, self.cfg.gn_groups, self.cfg.gn_eps)

    # parameters ---------------------------------------------------------------

    def parameters(self):
        out = []
        for lname, layer in self.layers.items():
            out.extend((f"{lname}.{pname}", t) for pname, t in layer.parameters())
        return out

    def state_dict(self):
        return OrderedDict((name, t.data.copy()) for name, t in self.parameters())

    def load_state_dict(self, state):
        params = dict(self.parameters())
        missing = set(params) - set(state)
        extra = set(state) - set(params)
        if missing or extra:
            raise ValueError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, t in params.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != t.shape:
                raise ValueError(f"{name}: expected shape {t.shape}, got {arr.shape}")
            t.data = arr.copy()

    def zero_grad(self):
        for _, t in self.parameters():
            t.grad = None

    def train(self, mode=True):
        self.training = mode
        return self

    def eval(self):
        return self.train(False)

    # forward ------------------------------------------------------------------

    def _cgr(self, name, x):
        """conv -> group norm -> ReLU for the layer called ``name``."""
        base, conv = name.rsplit(".", 1)
        gn = self.layers[f"{base}.gn{conv.replace('conv', '')}"]
        return gn(self.layers[name](x)).relu()

    def _dropout(self, x, rng):
        return F.spatial_dropout(x, self.cfg.dropout_rate, self.training, rng)

    def encoder_block(self, l, h, rng=None):
        a = self._cgr(f"enc{l}.conv1", h)
        b = self._cgr(f"enc{l}.conv2", a)
        return h + self._dropout(b, rng)

    def decoder_block(self, l, below, skip, rng=None):
        u = self._cgr(f"dec{l}.up", F.upsample3d(below, 2))
        a = self._cgr(f"dec{l}.conv1", concat([skip, u], axis=1))
        b = self._cgr(f"dec{l}.conv2", a)
        return a + self._dropout(b, rng)

    def level_outputs(self, x, rng=None):
        """Per-level decoder outputs, finest first."""
        cfg = self.cfg
        x = x if isinstance(x, Tensor) else Tensor(x)
        if x.ndim != 5 or x.shape[1] != cfg.in_channels:
            raise ValueError(f"expected input (n, {cfg.in_channels}, D, H, W), got {x.shape}")
        check_extents(x.shape[2:], cfg.downsampling)
        if self.training and cfg.dropout_rate > 0 and rng is None:
            raise ValueError("training-mode forward needs a numpy Generator for dropout")
        h = self._cgr("in.conv", x)
        skips = []
        for l in range(cfg.levels):
            h = self.encoder_block(l, h, rng)
            skips.append(h)
            if l < cfg.levels - 1:
                h = self._cgr(f"down{l}.conv", h)
        outs = [None] * cfg.levels
        outs[-1] = h
        for l in reversed(range(cfg.levels - 1)):
            h = self.decoder_block(l, h, skips[l], rng)
            outs[l] = h
        return outs

    def logits(self, x, rng=None):
        outs = self.level_outputs(x, rng)
        total = None
        for l, h in enumerate(outs):
            z = F.upsample3d(self.layers[f"head{l}"](h), 2 ** l)
            total = z if total is None else total + z
        return total

    def __call__(self, x, rng=None):
        return F.softmax_channel(self.logits(x, rng))

    forward = __call__


def check_extents(shape, factor):
    bad = [s for s in shape if s % factor]
    if bad:
        need = tuple(-(-s // factor) * factor for s in shape)
        raise ValueError(f"spatial extents {tuple(shape)} must be divisible by {factor}; "
                         f"pad the volume to {need}")


def build_network(cfg: NetworkConfig, seed=0) -> SegNet:
    return SegNet(cfg, seed)


@dataclass
class ParamReport:
    layers: list = field(default_factory=list)
    spatial: int = 0
    bias: int = 0
    norm: int = 0
    pointwise: int = 0

    @property
    def total(self):
        return self.spatial + self.bias + self.norm + self.pointwise

    def to_dict(self):
        return {"layers": self.layers, "totals": {
            "spatial": self.spatial, "bias": self.bias, "norm": self.norm,
            "pointwise": self.pointwise, "total": self.total}}


def count_params(model: SegNet) -> ParamReport:
    rep = ParamReport()
    for name, layer in model.layers.items():
        if isinstance(layer, Conv):
            n_w = layer.bank.n_trainable
            n_b = layer.bias.size
            entry = {"name": name, "kind": "conv", "mode": layer.bank.mode,
                     "k": layer.bank.k, "c_in": layer.bank.c_in, "c_out": layer.bank.c_out,
                     "weights": n_w, "bias": n_b}
            if layer.pointwise:
                rep.pointwise += n_w
            else:
                rep.spatial += n_w
            rep.bias += n_b
        else:
            n = layer.gamma.size + layer.beta.size
            entry = {"name": name, "kind": "norm", "params": n}
            rep.norm += n
        rep.layers.append(entry)
    return rep


def conv_layer_params(c_in, c_out, k, mode, bias=True):
    """Closed-form trainable count of one conv layer."""
    per_pair = 8 if mode == "gabor" else k ** 3
    return per_pair * c_in * c_out + (c_out if bias else 0)


def predict_scores(model: SegNet, volume):
    """Softmax scores ``(n, L, D, H, W)`` for ``volume`` in eval mode."""
    x = np.asarray(volume, dtype=np.float64)
    while x.ndim < 5:
        x = x[None]
    was = model.training
    model.eval()
    try:
        with no_grad():
            return model(x).data
    finally:
        model.train(was)


def predict_labels(model: SegNet, volume):
    """Argmax label map; ties go to the lowest label index."""
    vol = np.asarray(volume)
    check_extents(vol.shape[-3:], model.cfg.downsampling)
    scores = predict_scores(model, vol)
    labels = np.argmax(scores, axis=1).astype(np.uint8)
    return labels[0] if vol.ndim <= 4 and labels.shape[0] == 1 else labels
