"""Shared helpers: independent naive reference implementations.

These deliberately loop over ordered pairs and call eval_kernel point by
point, so they share no code path with the factorized production estimators.
"""

import numpy as np
import pytest

from dyadreg.kernels import eval_kernel


def naive_pair_average(data, kernel, h, w, use_y=True, tau=None):
    n = data.n_units
    w = np.asarray(w, dtype=float)
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            wij = np.concatenate([data.x[i], data.x[j]])
            kij = eval_kernel(kernel, (wij - w) / h) * h ** (-kernel.dim)
            if use_y:
                y = data.y[i, j]
                if tau is not None:
                    y = y if abs(y) < tau else 0.0
                total += y * kij
            else:
                total += kij
    return total / (n * (n - 1))


def naive_psi_hat(data, kernel, h, w):
    return naive_pair_average(data, kernel, h, w, use_y=True)


def naive_f_hat(data, kernel, h, w):
    return naive_pair_average(data, kernel, h, w, use_y=False)


def naive_nw(data, kernel, h, w):
    num = naive_psi_hat(data, kernel, h, w)
    den = naive_f_hat(data, kernel, h, w)
    if den <= 1e-12 * kernel.k_max * h ** (-kernel.dim):
        return np.nan, den
    return num / den, den


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
