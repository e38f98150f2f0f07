"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from .tensor import mean, mul


def output_probe(model, batch, seed=0):
    """Scalar probe loss for whole-model gradient checks.

    Mean of the model output weighted by fixed random coefficients. The
    coefficients are drawn at scale 0.1: key-projection biases have exactly
    zero true gradient (softmax ignores uniform row shifts), so the numeric
    difference there is pure float64 cancellation noise proportional to the
    loss magnitude, and it must stay below the 1e-8 denominator floor of the
    relative-error formula. Gradient correctness itself is scale-invariant.
    """
    weights = 0.1 * np.random.default_rng(seed).standard_normal(
        (batch.n, model.config.d_y))

    def loss():
        return mean(mul(model.forward(batch), weights))

    return loss


def grad_check(forward, params, eps=1e-5, samples_per_param=3, seed=0):
    """Compare analytic gradients of a scalar loss against central differences.

    `forward` is a deterministic closure producing a scalar loss Tensor from
    the current parameter values. For each parameter, up to
    `samples_per_param` coordinates are sampled and perturbed by +/- eps.
    Returns the max over sampled coordinates of
    |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
    """
    rng = np.random.default_rng(seed)

    for p in params:
        p.zero_grad()
    loss = forward()
    if not np.isfinite(loss.data):
        raise ArithmeticError("grad_check: non-finite loss")
    loss.backward()

    analytic = {}
    for p in params:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if not np.all(np.isfinite(g)):
            raise ArithmeticError(f"grad_check: non-finite gradient at {p.name}")
        analytic[p.name] = g.copy()

    # numeric passes do not need the tape
    flags = [p.tensor.requires_grad for p in params]
    for p in params:
        p.tensor.requires_grad = False
    try:
        worst = 0.0
        for p in params:
            flat = p.data.reshape(-1)
            n = flat.size
            coords = rng.choice(n, size=min(samples_per_param, n), replace=False)
            for c in coords:
                orig = flat[c]
                flat[c] = orig + eps
                fp = float(forward().data)
                flat[c] = orig - eps
                fm = float(forward().data)
                flat[c] = orig
                if not (np.isfinite(fp) and np.isfinite(fm)):
                    raise ArithmeticError(f"grad_check: non-finite loss perturbing {p.name}")
                numeric = (fp - fm) / (2.0 * eps)
                a = float(analytic[p.name].reshape(-1)[c])
                err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
                worst = max(worst, err)
    finally:
        for p, f in zip(params, flags):
            p.tensor.requires_grad = f
        for p in params:
            p.zero_grad()
    return worst
