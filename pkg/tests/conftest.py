import numpy as np
import pytest

from kgcanon import autodiff as ad


def gradcheck(fn, tensors, rng, h=1e-5, samples=5):
    """Central finite differences against the tape's gradients.

    fn() rebuilds and returns the scalar loss Tensor from `tensors`.
    Returns the worst relative error over sampled coordinates, with
    relative error |a - f| / max(1, |a|, |f|).
    """
    for t in tensors:
        t.requires_grad = True
        t.grad = None
    loss = fn()
    ad.backward(loss)
    worst = 0.0
    for t in tensors:
        assert t.grad is not None, "parameter did not receive a gradient"
        flat = t.data.reshape(-1)
        grad = t.grad.reshape(-1)
        if flat.size <= samples:
            idxs = np.arange(flat.size)
        else:
            idxs = rng.choice(flat.size, size=samples, replace=False)
        for i in idxs:
            keep = flat[i]
            flat[i] = keep + h
            f_plus = float(fn().data)
            flat[i] = keep - h
            f_minus = float(fn().data)
            flat[i] = keep
            fd = (f_plus - f_minus) / (2.0 * h)
            rel = abs(grad[i] - fd) / max(1.0, abs(grad[i]), abs(fd))
            worst = max(worst, rel)
    for t in tensors:
        t.grad = None
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
