"""Shared builders for the test modules."""

import numpy as np

from lipwgan.nets import (
    DiscriminatorNet,
    GeneratorNet,
    backward,
    discriminator_forward,
    generator_forward,
    init_discriminator,
    init_generator,
)

from oracles import central_difference


def random_generator(rng, depth=None, K1=2.0):
    depth = depth or int(rng.integers(2, 5))
    widths = [int(rng.integers(2, 7)) for _ in range(depth - 1)]
    d, D = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    net = init_generator(depth, d, D, widths, rng, K1)
    # non-zero offsets so that every parameter has a non-trivial gradient
    bs = [rng.uniform(-0.3, 0.3, size=b.shape) for b in net.biases]
    return net.replace(biases=bs)


def random_discriminator(rng, depth=None, K2=10.0, mode="scale"):
    depth = depth or int(rng.integers(2, 5))
    widths = [2 * int(rng.integers(1, 4)) for _ in range(depth - 1)]
    D = int(rng.integers(1, 4))
    net = init_discriminator(depth, D, widths, rng, K2, mode)
    bs = [rng.uniform(-0.3, 0.3, size=b.shape) for b in net.biases]
    return net.replace(biases=bs)


def _scalar_loss(net, x, upstream):
    if isinstance(net, GeneratorNet):
        return float(np.sum(upstream * generator_forward(net, x)))
    return float(upstream @ discriminator_forward(net, x))


def gradient_errors(net, rng, n=4, h=1e-5):
    """Relative error ||g - g_fd|| / max(||g||, ||g_fd||) for every parameter array."""
    if isinstance(net, GeneratorNet):
        x = rng.normal(size=(n, net.input_dim))
        up = rng.normal(size=(n, net.output_dim))
        _, cache = generator_forward(net, x, return_cache=True)
    else:
        x = rng.normal(size=(n, net.input_dim))
        up = rng.normal(size=n)
        _, cache = discriminator_forward(net, x, return_cache=True)
    grads = backward(net, up, cache)
    errors = []
    L = net.depth
    for i in range(2 * L):
        which, j = ("weights", i) if i < L else ("biases", i - L)

        def f(p, which=which, j=j):
            arrs = list(getattr(net, which))
            arrs[j] = p
            return _scalar_loss(net.replace(**{which: arrs}), x, up)

        fd = central_difference(f, getattr(net, which)[j], h)
        g = getattr(grads, which)[j]
        scale = max(np.linalg.norm(g), np.linalg.norm(fd))
        errors.append(0.0 if scale < 1e-12 else float(np.linalg.norm(g - fd) / scale))
    return errors


def affine_discriminator(u, b=0.0):
    """q = 2 net realizing x -> x.u + b (rows [u; u] then pick the max)."""
    u = np.asarray(u, dtype=np.float64)
    return DiscriminatorNet([np.stack([u, u]), np.array([[1.0, 0.0]])], [np.zeros(2), np.array([b])])
