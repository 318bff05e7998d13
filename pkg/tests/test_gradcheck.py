import numpy as np
import pytest

from gaborseg import gradcheck
from gaborseg.gabor import PARAM_NAMES


def test_rel_error_floor():
    assert gradcheck.rel_error([1e-12], [0.0]) == pytest.approx(1e-6)
    assert gradcheck.rel_error([2.0], [1.0]) == 0.5


def test_detects_a_wrong_gradient():
    from gaborseg.tensor import Tensor

    def wrong(t):
        # forward is x^3 but the recorded backward claims 2x
        return Tensor._make(t.data ** 3, (t,), lambda g: (2 * t.data * g,)).sum()

    res = gradcheck.check_function(wrong, np.array([0.7, 1.3]), "t", "wrong")
    assert not res.passed


def test_model_sample_covers_every_gabor_type():
    model = gradcheck.tiny_model(0)
    picks = gradcheck.sample_model_params(model, 20, np.random.default_rng(0))
    assert len(picks) == 20 == len(set(picks))
    names = [n.rsplit(".", 1)[1] for n, _ in picks]
    for p in PARAM_NAMES:
        assert ("raw_sigma" if p == "sigma" else p) in names


def test_unknown_suite_rejected():
    with pytest.raises(ValueError):
        gradcheck.run_suites(0, ("nope",))


@pytest.mark.parametrize("seed", [0, 7])
def test_all_suites_pass(seed):
    results = gradcheck.run_suites(seed)
    assert all(r.passed for r in results), gradcheck.report(results)
    assert gradcheck.report(results) == gradcheck.report(gradcheck.run_suites(seed))
