"""Time the numba and numpy kernel backends on representative shapes.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from gaborseg import _backend
from gaborseg.functional import conv3d
from gaborseg.tensor import Tensor


def cases(rng):
    xp = rng.normal(size=(8, 34, 34, 34))
    k, do = 3, 32
    cols = rng.normal(size=(8 * 27, do ** 3))
    d = 32
    vol = rng.normal(size=(d, d, d))
    labels = rng.integers(0, 4, size=(d, d, d)).astype(np.uint8)
    coords = rng.uniform(-2, d + 1, size=(3, d ** 3))
    x = rng.normal(size=(2, 8, 32, 32, 32))
    w = rng.normal(size=(8, 8, 3, 3, 3))

    def conv_fb(kern):
        xt = Tensor(x, requires_grad=True)
        wt = Tensor(w, requires_grad=True)
        conv3d(xt, wt, padding="same", kernels=kern).sum().backward()

    def conv_strided(kern):
        xt = Tensor(x, requires_grad=True)
        wt = Tensor(w, requires_grad=True)
        conv3d(xt, wt, stride=2, padding="same", kernels=kern).sum().backward()

    return {
        "im2col k3 s1": lambda kern: kern.im2col(xp, k, 1, do, do, do),
        "im2col k3 s2": lambda kern: kern.im2col(xp, k, 2, 16, 16, 16),
        "im2col_hw k3": lambda kern: kern.im2col_hw(xp, k),
        "col2im k3 s1": lambda kern: kern.col2im(cols, np.zeros_like(xp), k, 1, do, do, do),
        "trilinear 32^3": lambda kern: kern.trilinear(vol, coords),
        "nearest 32^3": lambda kern: kern.nearest(labels, coords),
        "conv3d fwd+bwd s1": conv_fb,
        "conv3d fwd+bwd s2": conv_strided,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    backends = [b for b in _backend.AVAILABLE if b != "numba" or _backend.HAS_NUMBA]
    mods = {b: _backend.get_kernels(b) for b in backends}
    print(f"{'kernel':<20}" + "".join(f"{b:>12}" for b in backends) + f"{'numpy/numba':>13}")
    for name, fn in cases(rng).items():
        times = {}
        for b, mod in mods.items():
            fn(mod)  # warm up, includes JIT compilation
            times[b] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        ratio = times["numpy"] / times["numba"] if "numba" in times else float("nan")
        print(f"{name:<20}" + "".join(f"{times[b] * 1e3:>10.2f}ms" for b in backends)
              + f"{ratio:>13.2f}")


if __name__ == "__main__":
    main()
