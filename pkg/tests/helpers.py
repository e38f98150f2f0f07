"""Shared test utilities, kept independent of the library's own verification code."""

import numpy as np


def fd_grad(f, arrays, eps=1e-5):
    """Central finite differences of a scalar function of numpy arrays.

    `f` takes no arguments and reads `arrays` (mutated in place), returning a
    python float. Returns one gradient array per input array.
    """
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        flat = a.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = f()
            flat[i] = orig - eps
            fm = f()
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * eps)
        grads.append(g)
    return grads


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.maximum(1e-8, np.abs(a) + np.abs(b))
    return float(np.max(np.abs(a - b) / denom))
