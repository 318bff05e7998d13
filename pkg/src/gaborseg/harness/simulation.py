"""Score-trajectory simulation comparing the PCC and Dice losses.

A cubic image holds a centred cubic object.  Scores move linearly from pure
noise to a perfect prediction as ``t`` goes from 0 to 1: foreground voxels
follow N(0.5 + 0.5t, (0.5(1-t))^2), background voxels N(0.5(1-t),
(0.5(1-t))^2), both clipped to [0, 1].  Each ``(m, t)`` point owns its own
seeded generator, so the table is reproducible and order independent.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import losses
from ..tensor import no_grad

TRAJECTORY_FIELDS = ("m", "t", "l_pcc", "l_dice", "l_ce")


@dataclass(frozen=True)
class SimConfig:
    image_len: int = 100
    m_list: tuple = (5, 20, 50, 100)
    steps: int = 101
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "m_list", tuple(int(m) for m in self.m_list))
        if self.steps < 2:
            raise ValueError("steps must be at least 2")
        for m in self.m_list:
            if not 1 <= m <= self.image_len:
                raise ValueError(f"object side {m} must lie in [1, {self.image_len}]")


def cube_mask(m, image_len):
    if not 1 <= m <= image_len:
        raise ValueError(f"object side {m} must lie in [1, {image_len}]")
    mask = np.zeros((image_len,) * 3, dtype=bool)
    lo = (image_len - m) // 2
    mask[lo:lo + m, lo:lo + m, lo:lo + m] = True
    return mask


def simulate_scores(m, t, image_len=100, seed=0):
    """One draw of (scores, truth) at interpolation point ``t``."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    truth = cube_mask(m, image_len)
    rng = np.random.default_rng(seed)
    sd = 0.5 * (1.0 - t)
    noise = rng.standard_normal(truth.shape)
    mean = np.where(truth, 0.5 + 0.5 * t, 0.5 * (1.0 - t))
    scores = np.clip(mean + sd * noise, 0.0, 1.0)
    return scores, truth.astype(np.float64)


def point_losses(scores, truth, eps=losses.DEFAULT_EPS):
    """(L_PCC, L_Dice, L_CE) of one simulated volume.

    PCC and cross-entropy see a background/foreground channel pair; Dice
    sees the foreground channel only.
    """
    s2 = np.stack([1.0 - scores, scores])[None]
    y2 = np.stack([1.0 - truth, truth])[None]
    with no_grad():
        l_pcc = losses.pcc_loss(s2, y2, eps).item()
        l_dice = losses.dice_loss(scores[None, None], truth[None, None], eps).item()
        l_ce = losses.cross_entropy(s2, y2).item()
    return l_pcc, l_dice, l_ce


def point_seed(seed, m, i):
    return np.random.SeedSequence([int(seed), int(m), int(i)])


def loss_trajectory(cfg: SimConfig):
    """Rows ``(m, t, l_pcc, l_dice, l_ce)`` for every object size and step."""
    rows = []
    ts = np.linspace(0.0, 1.0, cfg.steps)
    for m in cfg.m_list:
        for i, t in enumerate(ts):
            scores, truth = simulate_scores(m, float(t), cfg.image_len, point_seed(cfg.seed, m, i))
            rows.append((m, float(t)) + point_losses(scores, truth))
    return rows


def dice_start_expectation(m, image_len=100, mu=0.5):
    """Expected soft Dice loss at t=0 when every score has mean ``mu``."""
    n = image_len ** 3
    fg = m ** 3
    return 1.0 - 2.0 * mu * fg / (mu * n + fg)


def sinusoid_curves(a_re, a_im, f_re, f_im, psi=0.0, x_range=(-3.0, 3.0), samples=601):
    """Rows ``(x, value)`` of the Gabor carrier ``A_re cos + A_im sin``."""
    from ..gabor import sinusoid_factor

    if samples < 2:
        raise ValueError("samples must be at least 2")
    x = np.linspace(float(x_range[0]), float(x_range[1]), int(samples))
    v = sinusoid_factor(x, a_re, a_im, f_re, f_im, psi)
    return list(zip(x.tolist(), v.tolist()))
