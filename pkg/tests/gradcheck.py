"""Finite-difference gradient checking utilities shared by tests.

ReLU networks are only piecewise smooth; a pre-activation within the
finite-difference step of 0 puts central differences across the kink
where no derivative exists. Cases are therefore sampled with small
random biases and resampled until every pre-activation is safely away
from 0.
"""

import numpy as np

from nidb.neural import MlpArchitecture, MlpParams, bce_loss, forward, init_mlp
from nidb.neural import _forward_cached

FD_STEP = 1e-5
KINK_MARGIN = 1e-3


def finite_difference_gradients(params, X, y, h=FD_STEP):
    """Central differences of the actual loss pipeline."""
    grad_w = [np.zeros_like(w) for w in params.weights]
    grad_b = [np.zeros_like(b) for b in params.biases]
    for target, grads in ((params.weights, grad_w), (params.biases, grad_b)):
        for arr, out in zip(target, grads):
            flat = arr.ravel()
            flat_out = out.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = bce_loss(forward(params, X), y)
                flat[i] = orig - h
                down = bce_loss(forward(params, X), y)
                flat[i] = orig
                flat_out[i] = (up - down) / (2 * h)
    return grad_w, grad_b


def max_relative_error(analytic, numeric):
    worst = 0.0
    for a_list, n_list in zip(analytic, numeric):
        for a, nmr in zip(a_list, n_list):
            denom = np.maximum(np.maximum(np.abs(a), np.abs(nmr)), 1e-8)
            worst = max(worst, float(np.max(np.abs(a - nmr) / denom)))
    return worst


def sample_smooth_case(rng, max_tries=50):
    """Random small net + batch with all pre-activations off the kink."""
    for _ in range(max_tries):
        widths = tuple(int(w) for w in rng.integers(2, 7, size=5))
        arch = MlpArchitecture(int(rng.integers(2, 5)), widths)
        params = init_mlp(arch, seed=int(rng.integers(0, 2**31)))
        params.biases = [rng.normal(0.0, 0.3, size=b.shape)
                         for b in params.biases]
        n = int(rng.integers(1, 9))
        X = rng.normal(size=(n, arch.input_dim))
        y = rng.integers(0, 2, size=n)
        _, preacts, _ = _forward_cached(params, X)
        closest = min(float(np.min(np.abs(z))) for z in preacts[:-1])
        if closest > KINK_MARGIN:
            return params, X, y
    raise AssertionError("could not sample a smooth gradient-check case")
