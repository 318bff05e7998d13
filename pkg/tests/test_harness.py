import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import clipped_normal_mean, nadam_scalar

from gaborseg.harness import (LR_PRESETS, AugmentConfig, Nadam, NadamState, SimConfig,
                              affine_resample, augment, loss_trajectory, nadam_step,
                              simulate_scores, sinusoid_curves, synth_dataset, train)
from gaborseg.harness.data import Dataset
from gaborseg.harness.simulation import cube_mask, dice_start_expectation
from gaborseg.losses import one_hot
from gaborseg.segnet import NetworkConfig, SegNet
from gaborseg.tensor import Tensor

# simulation -------------------------------------------------------------------


def test_scores_at_endpoints():
    s, y = simulate_scores(20, 1.0, image_len=40, seed=0)
    assert np.array_equal(s, y)
    s, _ = simulate_scores(20, 0.0, image_len=100, seed=1)
    assert abs(s.mean() - 0.5) <= 0.01
    assert s.min() >= 0 and s.max() <= 1
    with pytest.raises(ValueError):
        simulate_scores(20, 1.5)
    with pytest.raises(ValueError):
        cube_mask(101, 100)


def test_clipped_mean_is_half_at_start():
    assert abs(clipped_normal_mean(0.5, 0.5) - 0.5) <= 1e-15
    assert abs(dice_start_expectation(100) - 1 / 3) <= 1e-12


def test_trajectory_determinism_and_shape():
    cfg = SimConfig(image_len=30, m_list=(5, 10), steps=5, seed=3)
    a, b = loss_trajectory(cfg), loss_trajectory(cfg)
    assert a == b and len(a) == 10
    assert loss_trajectory(SimConfig(image_len=30, m_list=(10, 5), steps=5, seed=3))[5:] == a[:5]


def test_pcc_monotone_and_dice_start_ordering():
    rows = loss_trajectory(SimConfig(steps=21, seed=0))
    by_m = {}
    for m, t, l_pcc, l_dice, _ in rows:
        by_m.setdefault(m, []).append((t, l_pcc, l_dice))
    starts = []
    for m in sorted(by_m):
        pcc = [r[1] for r in by_m[m]]
        assert all(b <= a + 0.01 for a, b in zip(pcc, pcc[1:])), m
        starts.append(by_m[m][0][2])
    assert all(b < a for a, b in zip(starts, starts[1:]))


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(steps=1)
    with pytest.raises(ValueError):
        SimConfig(m_list=(0,))


def test_sinusoid_examples():
    rows = sinusoid_curves(1.7, 0.0, 0.0, 0.3, 0.0, samples=11)
    assert all(v == 1.7 for _, v in rows)
    rows = sinusoid_curves(0.6, 0.8, 0.25, 0.25, 0.0, (-4, 4), 8001)
    assert abs(max(abs(v) for _, v in rows) - 1.0) <= 1e-4
    x0 = dict(sinusoid_curves(0.6, 0.8, 0.1, 0.4, 0.7, (-1, 1), 3))[0.0]
    assert abs(x0 - (0.6 * math.cos(0.7) + 0.8 * math.sin(0.7))) <= 1e-15
    with pytest.raises(ValueError):
        sinusoid_curves(1, 1, 1, 1, 0, samples=1)

# data -------------------------------------------------------------------------


def test_synth_dataset_properties():
    a = synth_dataset(4, 24, 4, seed=11)
    b = synth_dataset(4, 24, 4, seed=11)
    assert np.array_equal(a.images, b.images) and np.array_equal(a.labels, b.labels)
    oh = one_hot(a.labels, 4)
    assert np.all(oh.sum(axis=1) == 1)
    assert np.mean(a.labels == 0) > 0.5
    for lab in a.labels:
        assert set(np.unique(lab)) == {0, 1, 2, 3}
    with pytest.raises(ValueError):
        synth_dataset(1, 30, 4, seed=0, downsampling=4)
    with pytest.raises(ValueError, match="disjoint"):
        synth_dataset(1, 12, 12, seed=0)


def test_dataset_split():
    d = synth_dataset(5, 16, 2, seed=0)
    tr, va, te = d.split(3, 1)
    assert (len(tr), len(va), len(te)) == (3, 1, 1)
    assert np.array_equal(te.images[0], d.images[4])
    with pytest.raises(ValueError):
        d.split(4, 2)
    with pytest.raises(ValueError):
        Dataset(d.images, d.labels[:2], 2)


def test_augment_identity_cases():
    d = synth_dataset(1, 16, 3, seed=2)
    img, lab = d.images[0], d.labels[0]
    rng = np.random.default_rng(0)
    i2, l2 = augment(img, lab, AugmentConfig(prob=0.0), rng)
    assert i2 is img and l2 is lab
    i3, l3 = affine_resample(img, lab)
    assert np.array_equal(i3, img) and np.array_equal(l3, lab)


@given(st.integers(0, 10_000))
@settings(max_examples=15, deadline=None)
def test_augment_never_invents_labels(seed):
    d = synth_dataset(1, 16, 4, seed=seed % 7)
    img, lab = augment(d.images[0], d.labels[0], AugmentConfig(prob=1.0),
                       np.random.default_rng(seed))
    assert set(np.unique(lab)) <= set(np.unique(d.labels[0]))
    assert img.shape == d.images[0].shape and lab.dtype == np.uint8


def test_augment_rotation_is_about_z():
    img = np.zeros((1, 9, 9, 9))
    lab = np.zeros((9, 9, 9), dtype=np.uint8)
    lab[6, 4, 2] = 1
    _, out = affine_resample(img, lab, angle_deg=90.0)
    moved = np.argwhere(out == 1)
    assert len(moved) == 1 and moved[0][2] == 2  # z coordinate untouched


def test_augment_config_validation():
    with pytest.raises(ValueError):
        AugmentConfig(prob=1.5)
    with pytest.raises(ValueError):
        AugmentConfig(scale_range=(0.0, 1.0))

# optimizer --------------------------------------------------------------------


def test_lr_presets():
    assert sorted(LR_PRESETS.values()) == [1e-4, 10 ** -3.5, 1e-3, 10 ** -2.5, 1e-2]


def test_nadam_zero_gradient_keeps_params():
    p = [np.array([1.0, -2.0])]
    nadam_step(NadamState(), p, [np.zeros(2)])
    assert np.array_equal(p[0], [1.0, -2.0])


def test_nadam_minimises_square():
    st_ = NadamState(lr=1e-2)
    th = [np.array([1.0])]
    for _ in range(500):
        nadam_step(st_, th, [2 * th[0]])
    assert abs(th[0][0]) < 0.05


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=30), st.sampled_from([0.0, 0.9]))
@settings(max_examples=50, deadline=None)
def test_nadam_matches_scalar_oracle(grads, b1):
    st_ = NadamState(lr=1e-2, beta1=b1)
    th = [np.array([0.3])]
    for g in grads:
        nadam_step(st_, th, [np.array([g])])
    assert abs(th[0][0] - nadam_scalar(0.3, grads, 1e-2, b1=b1)) <= 1e-12


def test_nadam_determinism_and_errors():
    def run():
        st_ = NadamState(lr=1e-3)
        p = [np.ones(3)]
        for g in np.random.default_rng(0).normal(size=(10, 3)):
            nadam_step(st_, p, [g])
        return p[0], st_
    (p1, s1), (p2, s2) = run(), run()
    assert np.array_equal(p1, p2) and np.array_equal(s1.m[0], s2.m[0]) and s1.t == 10
    with pytest.raises(ValueError):
        nadam_step(NadamState(), [np.ones(2)], [np.ones(3)])


def test_nadam_wrapper_updates_tensors():
    t = Tensor(np.ones(2), requires_grad=True)
    opt = Nadam([("t", t)], lr=0.1)
    (t * t).sum().backward()
    opt.step()
    assert np.all(t.data < 1.0)
    opt.zero_grad()
    assert t.grad is None

# training ---------------------------------------------------------------------

TINY = NetworkConfig(levels=2, channels=(4, 8), mixed_threshold=4, k_gabor=3, labels=3,
                     dropout_rate=0.0)


@pytest.fixture(scope="module")
def tiny_data():
    return synth_dataset(4, 16, 3, seed=1).split(3, 1, 0)[:2]


def test_epochs_zero_returns_initial_model(tiny_data):
    tr, va = tiny_data
    m = SegNet(TINY, seed=0)
    before = m.state_dict()
    res = train(m, tr, va, epochs=0)
    assert res.history == []
    for k, v in m.state_dict().items():
        assert np.array_equal(v, before[k])


def test_zero_lr_constant_loss(tiny_data):
    tr, va = tiny_data
    res = train(SegNet(TINY, seed=0), tr, va, lr=0.0, epochs=3, batch=2)
    losses_ = [h["train_loss"] for h in res.history]
    assert losses_[0] == losses_[1] == losses_[2]


def test_training_is_deterministic(tiny_data):
    tr, va = tiny_data
    cfg = AugmentConfig()
    runs = [train(SegNet(TINY, seed=0), tr, va, epochs=2, seed=4, augment_cfg=cfg).history
            for _ in range(2)]
    assert runs[0] == runs[1]


def test_divergence_is_reported_not_raised(tiny_data):
    tr, va = tiny_data
    bad = Dataset(np.full_like(tr.images, np.nan), tr.labels, tr.n_labels)
    res = train(SegNet(TINY, seed=0), bad, va, epochs=3)
    assert res.diverged and "non-finite" in res.message and res.history == []


def test_train_argument_checks(tiny_data):
    tr, va = tiny_data
    with pytest.raises(ValueError):
        train(SegNet(TINY, seed=0), tr.subset([]), va)
    with pytest.raises(ValueError):
        train(SegNet(TINY, seed=0), tr, va, batch=0)
    with pytest.raises(ValueError):
        train(SegNet(TINY, seed=0), tr, va, loss_name="jaccard")
