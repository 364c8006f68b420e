import numpy as np
import pytest

from aiive import data


@pytest.fixture(scope="session")
def tiny_dataset() -> data.Dataset:
    """Small 7-class set (6x6 images) for fast training-path tests."""
    return data.generate_dataset(seed=123, counts=(70, 28, 14), side=6)


@pytest.fixture(scope="session")
def full_dataset() -> data.Dataset:
    """The paper-sized split; shared because generation costs a moment."""
    return data.generate_dataset(seed=1, counts=data.DEFAULT_COUNTS)


# -- oracles -----------------------------------------------------------------


def finite_difference_gradients(net, x, t_onehot, h=1e-5):
    """Central finite differences of the mean cross-entropy for every
    parameter. Independent of the backward pass: only forward + loss."""
    from aiive import nn

    grads = []
    for arr in net.arrays():
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = nn.cross_entropy(nn.forward(net, x).y, t_onehot)
            flat[i] = orig - h
            down = nn.cross_entropy(nn.forward(net, x).y, t_onehot)
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


def max_relative_gradient_error(analytic, numeric, floor=1e-6):
    """max over parameters of |a - f| / max(|a| + |f|, floor)."""
    worst = 0.0
    for a, f in zip(analytic, numeric):
        denom = np.maximum(np.abs(a) + np.abs(f), floor)
        worst = max(worst, float(np.max(np.abs(a - f) / denom)))
    return worst


def estimate_pitch(samples: np.ndarray, sample_rate: int) -> float:
    """Rising-zero-crossing frequency estimate in Hz."""
    s = np.asarray(samples, dtype=np.float64)
    rising = np.flatnonzero((s[:-1] < 0.0) & (s[1:] >= 0.0))
    if len(rising) < 2:
        return 0.0
    # Count cycles between the first and last crossing for an unbiased rate.
    cycles = len(rising) - 1
    span = (rising[-1] - rising[0]) / sample_rate
    return cycles / span
