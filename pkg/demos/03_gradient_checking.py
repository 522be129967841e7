"""Finite-difference gradient checking, from one layer up to the full network.

Every backward pass in the library is validated against the same
central-difference oracle used here. The oracle never shares code with the
backward passes, so agreement is meaningful.
"""

import numpy as np

from trisim import finite_difference_gradient, max_relative_error
from trisim import layers, model

rng = np.random.default_rng(1)

# one convolution layer
x = rng.normal(size=(2, 8, 8))
w = rng.normal(size=(3, 2, 5, 5)) * 0.5
b = rng.normal(size=3)
y, cache = layers.conv_forward(x, w, b)
proj = rng.normal(size=y.shape)  # random projection makes the output scalar
gx, gw, gb = layers.conv_backward(cache, proj)
fd_w = finite_difference_gradient(
    lambda v: float(np.sum(layers.conv_forward(x, v, b)[0] * proj)), w, eps=1e-6)
print(f"conv weight gradient vs oracle: {max_relative_error(gw, fd_w):.2e}")

# the whole shrunken network, every parameter at once
net = model.build_gradcheck_network(d=2, seed=0)
image = rng.uniform(0, 1, (16, 16))
target = np.array([0.5, -0.5])

def loss_of(vec):
    model.set_flat_params(net, vec)
    emb, _ = model.forward(net, image)
    return 0.5 * float(np.sum((emb - target) ** 2))

vec0 = model.flat_params(net)
emb, trace = model.forward(net, image)
analytic = model.flat_grads(net, model.backward(net, trace, emb - target))
fd = finite_difference_gradient(loss_of, vec0, eps=1e-6)
model.set_flat_params(net, vec0)
print(f"whole network ({vec0.size} parameters) vs oracle: "
      f"{max_relative_error(analytic, fd):.2e}")
