"""NumPy implementations of the element kernels (fallback for the Cython core)."""

import numpy as np


def convection_blocks(coef, test_y, trial_y, test_x, trial_x):
    """Batched element matrices of a weighted tensor-product integrand.

    ``out[e, j, k, m, l] = sum_{a, b} coef[e, a, b] test_y[a, j] trial_y[a, m]
    test_x[b, k] trial_x[b, l]`` with ``a`` and ``b`` the y and x quadrature
    indices.  Sum factorization over x first keeps the cost at
    ``O(E Q^2 n^2 + E Q n^4)``.
    """
    t = np.einsum("eab,bk,bl->eakl", coef, test_x, trial_x, optimize=True)
    return np.einsum("aj,am,eakl->ejkml", test_y, trial_y, t, optimize=True)
