"""
A first look at the tensor core
===============================

Build a tiny computation, run reverse-mode backward, and confirm one
gradient coordinate against a finite difference computed by hand.
"""

import numpy as np

from fmtnet.tensor import Tensor, matmul, mean, relu

rng = np.random.default_rng(0)

# leaves: a parameter-like tensor and a fixed input
w = Tensor(rng.standard_normal((3, 2)), requires_grad=True)
x = Tensor(rng.standard_normal((4, 3)))

# forward: y = mean(relu(x @ w))
y = mean(relu(matmul(x, w)))
print("loss:", y.data)

# backward fills w.grad with dloss/dw
y.backward()
print("analytic dloss/dw[0, 0]:", w.grad[0, 0])

# the same derivative by central difference
eps = 1e-6
base = w.data.copy()
out = []
for sign in (+1.0, -1.0):
    w_shift = base.copy()
    w_shift[0, 0] += sign * eps
    shifted = mean(relu(matmul(x, Tensor(w_shift))))
    out.append(shifted.data)
numeric = (out[0] - out[1]) / (2 * eps)
print("numeric  dloss/dw[0, 0]:", numeric)
print("difference:", abs(w.grad[0, 0] - numeric))
