"""Analytic-vs-finite-difference gradient suites.

Each check compares ``backward`` against central differences (step 1e-5,
float64) and reports the largest relative error
``|a - n| / max(|a|, |n|, floor)``.  The floor keeps entries whose true
derivative is essentially zero from turning rounding noise into a failure.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import functional as F
from . import losses
from .gabor import PARAM_NAMES, init_gabor, materialize_bank
from .segnet import NetworkConfig, SegNet
from .tensor import Tensor, concat, finite_diff_grad, no_grad

STEP = 1e-5
TOLERANCE = 1e-4
FLOOR = 1e-6
SUITES = ("gabor", "losses", "model", "ops")


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    n: int
    max_rel_err: float
    tol: float = TOLERANCE

    @property
    def passed(self):
        return bool(self.max_rel_err <= self.tol)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.suite}/{self.name} n={self.n} max_rel_err={self.max_rel_err:.3e}"


def rel_error(analytic, numeric, floor=FLOOR):
    a = np.asarray(analytic, dtype=np.float64).ravel()
    b = np.asarray(numeric, dtype=np.float64).ravel()
    den = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / den)) if a.size else 0.0


def check_function(f, x, suite, name, step=STEP):
    """Compare d f / d x for a tensor-to-scalar ``f`` at array ``x``."""
    t = Tensor(np.array(x, dtype=np.float64), requires_grad=True)
    f(t).backward()
    numeric = finite_diff_grad(f, x, step)
    return CheckResult(suite, name, int(np.size(x)), rel_error(t.grad, numeric))


# suites ---------------------------------------------------------------------

def gabor_suite(seed=0):
    """Each of the eight Gabor scalars through materialize -> conv3d -> pcc_loss."""
    rng = np.random.default_rng([seed, 1])
    c_in, c_out, k = 2, 2, 5
    bank = init_gabor(c_in, c_out, int(rng.integers(2**31)), k=k)
    x = rng.uniform(-2, 2, (1, c_in, 5, 5, 5))
    labels = rng.integers(0, c_out, (1, 5, 5, 5))
    truth = losses.one_hot(labels, c_out)
    raw = {"sigma": "raw_sigma"}
    out = []
    for pname in PARAM_NAMES:
        key = raw.get(pname, pname)
        target = bank.tensors[key]

        def f(p, key=key, target=target):
            saved = bank.tensors[key]
            bank.tensors[key] = p
            try:
                return losses.pcc_loss(F.conv3d(x, materialize_bank(bank)), truth)
            finally:
                bank.tensors[key] = saved

        out.append(check_function(f, target.data, "gabor", pname))
    return out


def losses_suite(seed=0):
    rng = np.random.default_rng([seed, 2])
    shape = (2, 3, 4, 4, 4)  # 384 score entries
    scores = rng.uniform(0.05, 0.95, shape)
    truth = losses.one_hot(rng.integers(0, 3, (2, 4, 4, 4)), 3)
    fns = {"pcc": lambda s: losses.pcc_loss(s, truth),
           "dice": lambda s: losses.dice_loss(s, truth),
           "ce": lambda s: losses.cross_entropy(s, truth)}
    return [check_function(fn, scores, "losses", name) for name, fn in fns.items()]


def tiny_model(seed=0):
    cfg = NetworkConfig(levels=2, channels=(4, 8), kernel_mode="mixed", mixed_threshold=4,
                        k_gabor=3, labels=3, dropout_rate=0.0)
    return SegNet(cfg, seed=seed).eval()


def sample_model_params(model, n, rng):
    """``n`` (tensor name, flat index) picks covering every Gabor scalar type."""
    params = model.parameters()
    picks = []
    for pname in PARAM_NAMES:
        key = "raw_sigma" if pname == "sigma" else pname
        cands = [name for name, _ in params if name.endswith("." + key)]
        name = cands[int(rng.integers(len(cands)))]
        t = dict(params)[name]
        picks.append((name, int(rng.integers(t.size))))
    names = [name for name, _ in params]
    sizes = np.array([t.size for _, t in params], dtype=np.float64)
    while len(picks) < n:
        j = int(rng.choice(len(names), p=sizes / sizes.sum()))
        pick = (names[j], int(rng.integers(params[j][1].size)))
        if pick not in picks:
            picks.append(pick)
    return picks


def model_suite(seed=0, n_params=20):
    """End-to-end check of a two-level mixed model on an 8^3 input."""
    rng = np.random.default_rng([seed, 3])
    model = tiny_model(int(rng.integers(2**31)))
    x = rng.uniform(-2, 2, (1, 1, 8, 8, 8))
    truth = losses.one_hot(rng.integers(0, 3, (1, 8, 8, 8)), 3)
    params = dict(model.parameters())

    def loss():
        return losses.pcc_loss(model(x), truth)

    model.zero_grad()
    loss().backward()
    results = []
    for name, idx in sample_model_params(model, n_params, rng):
        t = params[name]
        analytic = t.grad.reshape(-1)[idx]
        flat = t.data.reshape(-1)
        orig = flat[idx]
        with no_grad():
            flat[idx] = orig + STEP
            fp = loss().item()
            flat[idx] = orig - STEP
            fm = loss().item()
        flat[idx] = orig
        numeric = (fp - fm) / (2 * STEP)
        results.append(CheckResult("model", f"{name}[{idx}]", 1, rel_error(analytic, numeric)))
    return results


def ops_suite(seed=0):
    rng = np.random.default_rng([seed, 4])
    u = lambda *s: rng.uniform(-2, 2, s)  # noqa: E731
    proj = {}

    def dot(out):
        # fixed random projection turns any tensor output into a scalar
        key = out.shape
        if key not in proj:
            proj[key] = rng.uniform(-1, 1, key)
        return (out * proj[key]).sum()

    w = u(3, 2, 3, 3, 3)
    x = u(1, 2, 5, 4, 6)
    w5 = u(2, 2, 5, 5, 5)
    b = u(3)
    gam, bet = u(4), u(4)
    xg = u(2, 4, 3, 3, 3)
    checks = [
        ("conv3d.same.x", lambda t: dot(F.conv3d(t, w, b)), x),
        ("conv3d.same.w", lambda t: dot(F.conv3d(x, t, b)), w),
        ("conv3d.same.bias", lambda t: dot(F.conv3d(x, w, t)), b),
        ("conv3d.valid.x", lambda t: dot(F.conv3d(t, w, padding="valid")), x),
        ("conv3d.stride2.x", lambda t: dot(F.conv3d(t, w, stride=2)), x),
        ("conv3d.stride2.w", lambda t: dot(F.conv3d(x, t, stride=2)), w),
        ("conv3d.k5.w", lambda t: dot(F.conv3d(x, t)), w5),
        ("upsample3d", lambda t: dot(F.upsample3d(t, 2)), u(1, 2, 2, 3, 2)),
        ("group_norm.x", lambda t: dot(F.group_norm(t, 2, gam, bet)), xg),
        ("group_norm.gamma", lambda t: dot(F.group_norm(xg, 2, t, bet)), gam),
        ("group_norm.beta", lambda t: dot(F.group_norm(xg, 2, gam, t)), bet),
        ("softmax_channel", lambda t: dot(F.softmax_channel(t)), u(2, 3, 2, 2, 2)),
        ("elementwise", lambda t: dot((t.exp() + t.sin() * t.cos()) / (t * t + 1.0)), u(4, 5)),
        ("log_sqrt", lambda t: dot((t * t + 0.5).log() + (t * t + 0.1).sqrt()), u(4, 5)),
        ("softplus_pow", lambda t: dot(t.softplus() ** 3), u(4, 5)),
        ("reduce_reshape", lambda t: dot(t.mean(axis=1, keepdims=True) * t.reshape(3, 4)
                                         .transpose(1, 0).reshape(4, 3)), u(4, 3)),
        ("getitem_concat", lambda t: dot(concat([t[1:, ::2], t[:2, 1::2] * 2.0], axis=0)),
         u(3, 4)),
    ]
    return [check_function(f, v, "ops", name) for name, f, v in checks]


_RUNNERS = {"gabor": gabor_suite, "losses": losses_suite, "model": model_suite,
            "ops": ops_suite}


def run_suites(seed=0, suites=SUITES):
    unknown = [s for s in suites if s not in _RUNNERS]
    if unknown:
        raise ValueError(f"unknown gradcheck suite(s) {unknown}; expected {list(SUITES)}")
    out = []
    for s in suites:
        out.extend(_RUNNERS[s](seed))
    return out


def report(results):
    lines = [r.line() for r in results]
    n_fail = sum(not r.passed for r in results)
    worst = max((r.max_rel_err for r in results), default=0.0)
    lines.append(f"{'PASS' if n_fail == 0 else 'FAIL'} total checks={len(results)} "
                 f"failed={n_fail} worst_rel_err={worst:.3e} tol={TOLERANCE:.0e}")
    return "\n".join(lines) + "\n"
