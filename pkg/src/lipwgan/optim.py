"""First-order optimizers over the parameter tuples of a net."""

from dataclasses import dataclass
import math

import numpy as np


# "layer_adam" keeps one second-moment scalar per parameter array instead of
# one per entry, so each step follows the (momentum) gradient direction of the
# array rather than its coordinate-wise sign
OPTIMIZERS = ("sgd", "adam", "layer_adam")


@dataclass(frozen=True)
class OptimizerConfig:
    name: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.5
    beta2: float = 0.9
    eps: float = 1e-8

    def __post_init__(self):
        if self.name not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.name!r}")
        if self.lr < 0:
            raise ValueError("step size must be non-negative")


class Optimizer:
    """Minimizes: ``step`` moves parameters against the given gradients."""

    def __init__(self, cfg: OptimizerConfig):
        self.cfg = cfg
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params, grads, lr=None):
        cfg = self.cfg
        lr = cfg.lr if lr is None else lr
        self.t += 1
        if cfg.name == "sgd":
            return [p - lr * g for p, g in zip(params, grads)]
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros(() if cfg.name == "layer_adam" else p.shape) for p in params]
        b1, b2 = cfg.beta1, cfg.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        out = []
        layerwise = cfg.name == "layer_adam"
        for k, (p, g) in enumerate(zip(params, grads)):
            self.m[k] = b1 * self.m[k] + (1.0 - b1) * g
            self.v[k] = b2 * self.v[k] + (1.0 - b2) * (float(np.mean(g * g)) if layerwise else g * g)
            out.append(p - lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + cfg.eps))
        return out


def cosine_lr(base, step, total):
    """Cosine decay from ``base`` at step 0 to 0 at ``total``."""
    return base * 0.5 * (1.0 + math.cos(math.pi * min(step, total) / max(total, 1)))


def apply_step(net, opt: Optimizer, grads, lr=None):
    """New net after one optimizer step on ``grads`` (a GradientSet)."""
    d = net.depth
    params = list(net.weights) + list(net.biases)
    new = opt.step(params, grads.flat_params(), lr)
    return net.replace(new[:d], new[d:])
