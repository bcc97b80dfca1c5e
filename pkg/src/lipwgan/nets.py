"""ReLU generators and GroupSort discriminators with hand-written backprop.

A generator maps latent codes ``z in R^d`` to ``R^D`` through affine layers
separated by ReLU; a discriminator maps ``R^D`` to a scalar through affine
layers separated by pairwise GroupSort. Forward passes operate on batches
(rows are samples) and a single vector is accepted as a batch of one.

Parameter arrays are made read-only: every update builds a new net, and a
forward cache is tied to the exact arrays it was computed with.
"""

from dataclasses import dataclass, field
import json
import math

import numpy as np

from .linalg import (
    BJORCK_TOL,
    PRESCALE_TOL,
    as_matrix,
    as_vector,
    bjorck_orthonormalize,
    bjorck_residual,
    inf_norm,
    power_iteration,
    spectral_norm,
    two_inf_norm,
)

DEFAULT_K1 = 2.0
DEFAULT_K2 = 10.0
PROJECTION_MODES = ("scale", "bjorck")


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GeneratorNet:
    weights: tuple
    biases: tuple
    K1: float = DEFAULT_K1

    def __post_init__(self):
        ws = tuple(_frozen(as_matrix(w)) for w in self.weights)
        bs = tuple(_frozen(as_vector(b)) for b in self.biases)
        if len(ws) < 2 or len(ws) != len(bs):
            raise ValueError("a generator needs depth >= 2 and one offset per layer")
        _check_chain(ws, bs)
        if not self.K1 > 0:
            raise ValueError("K1 must be positive")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def depth(self):
        return len(self.weights)

    @property
    def input_dim(self):
        return self.weights[0].shape[1]

    @property
    def output_dim(self):
        return self.weights[-1].shape[0]

    @property
    def widths(self):
        return [w.shape[0] for w in self.weights[:-1]]

    def replace(self, weights=None, biases=None):
        return GeneratorNet(
            self.weights if weights is None else weights,
            self.biases if biases is None else biases,
            self.K1,
        )


@dataclass(frozen=True)
class DiscriminatorNet:
    weights: tuple
    biases: tuple
    K2: float = DEFAULT_K2

    def __post_init__(self):
        ws = tuple(_frozen(as_matrix(w)) for w in self.weights)
        bs = tuple(_frozen(as_vector(b)) for b in self.biases)
        if len(ws) < 2 or len(ws) != len(bs):
            raise ValueError("a discriminator needs depth >= 2 and one offset per layer")
        _check_chain(ws, bs)
        if ws[-1].shape[0] != 1:
            raise ValueError("the last discriminator layer must have a single output")
        if any(w.shape[0] % 2 for w in ws[:-1]):
            raise ValueError("discriminator hidden widths must be even")
        if not self.K2 >= 0:
            raise ValueError("K2 must be non-negative")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def depth(self):
        return len(self.weights)

    @property
    def input_dim(self):
        return self.weights[0].shape[1]

    @property
    def widths(self):
        return [w.shape[0] for w in self.weights[:-1]]

    def replace(self, weights=None, biases=None):
        return DiscriminatorNet(
            self.weights if weights is None else weights,
            self.biases if biases is None else biases,
            self.K2,
        )

    def negated(self):
        """Same net with the last layer's sign flipped; output is exactly ``-D``."""
        ws = list(self.weights)
        bs = list(self.biases)
        ws[-1] = -ws[-1]
        bs[-1] = -bs[-1]
        return self.replace(ws, bs)


def _check_chain(ws, bs):
    for i, (w, b) in enumerate(zip(ws, bs)):
        if b.shape[0] != w.shape[0]:
            raise ValueError(f"layer {i}: offset has {b.shape[0]} entries, expected {w.shape[0]}")
        if i > 0 and w.shape[1] != ws[i - 1].shape[0]:
            raise ValueError(
                f"layer {i}: weight expects {w.shape[1]} inputs but layer {i - 1} "
                f"outputs {ws[i - 1].shape[0]}"
            )


@dataclass
class GradientSet:
    """Gradients mirroring a net's parameters, plus the input gradient."""

    weights: list
    biases: list
    inputs: np.ndarray = None

    def flat_params(self):
        return list(self.weights) + list(self.biases)


@dataclass
class ForwardCache:
    kind: str
    params: tuple
    # pre-activations of every layer, and the inputs fed to every layer
    pre: list = field(default_factory=list)
    layer_inputs: list = field(default_factory=list)
    squeeze: bool = False


def _params(net):
    return net.weights + net.biases


def _as_batch(x, dim):
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != dim:
        raise ValueError(f"expected inputs of dimension {dim}, got shape {x.shape}")
    return x, squeeze


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------


def relu(x):
    return np.maximum(x, 0.0)


def groupsort(v):
    """Sort consecutive pairs in descending order along the last axis."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] % 2:
        raise ValueError("groupsort needs an even number of components")
    pairs = v.reshape(v.shape[:-1] + (-1, 2))
    out = np.empty_like(pairs)
    out[..., 0] = np.maximum(pairs[..., 0], pairs[..., 1])
    out[..., 1] = np.minimum(pairs[..., 0], pairs[..., 1])
    return out.reshape(v.shape)


def _groupsort_backward(pre, g):
    pairs = pre.reshape(pre.shape[:-1] + (-1, 2))
    gp = g.reshape(pairs.shape)
    # ties keep the identity ordering: max <- first, min <- second
    swap = pairs[..., 1] > pairs[..., 0]
    out = np.empty_like(gp)
    out[..., 0] = np.where(swap, gp[..., 1], gp[..., 0])
    out[..., 1] = np.where(swap, gp[..., 0], gp[..., 1])
    return out.reshape(pre.shape)


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------


def _forward(net, x, act, kind):
    h, squeeze = _as_batch(x, net.input_dim)
    cache = ForwardCache(kind, _params(net), squeeze=squeeze)
    last = net.depth - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        cache.layer_inputs.append(h)
        a = h @ w.T + b
        cache.pre.append(a)
        h = a if i == last else act(a)
    return h, cache


def generator_forward(net: GeneratorNet, z, return_cache=False):
    out, cache = _forward(net, z, relu, "generator")
    if cache.squeeze:
        out = out[0]
    return (out, cache) if return_cache else out


def discriminator_forward(net: DiscriminatorNet, x, return_cache=False):
    out, cache = _forward(net, x, groupsort, "discriminator")
    out = out[:, 0]
    if cache.squeeze:
        out = float(out[0])
    return (out, cache) if return_cache else out


def backward(net, upstream, cache: ForwardCache) -> GradientSet:
    """Reverse-mode gradients of ``sum_k <upstream_k, f(x_k)>``.

    For a discriminator ``upstream`` holds one weight per sample (a float for a
    single input); for a generator it is the output cotangent, shape ``(n, D)``
    or ``(D,)``. ReLU'(0) is 0; GroupSort routes gradients through the
    permutation chosen in the forward pass.
    """
    kind = "generator" if isinstance(net, GeneratorNet) else "discriminator"
    if not isinstance(cache, ForwardCache) or cache.kind != kind:
        raise ValueError("forward cache was produced by a different network family")
    params = _params(net)
    if len(params) != len(cache.params) or any(a is not b for a, b in zip(params, cache.params)):
        raise ValueError("forward cache is stale: it does not belong to these parameters")

    n = cache.layer_inputs[0].shape[0]
    if kind == "discriminator":
        g = np.asarray(upstream, dtype=np.float64).reshape(n, 1)
    else:
        g = np.asarray(upstream, dtype=np.float64).reshape(n, net.output_dim)

    last = net.depth - 1
    gw = [None] * net.depth
    gb = [None] * net.depth
    for i in range(last, -1, -1):
        if i != last:
            pre = cache.pre[i]
            if kind == "generator":
                g = g * (pre > 0)
            else:
                g = _groupsort_backward(pre, g)
        gw[i] = g.T @ cache.layer_inputs[i]
        gb[i] = g.sum(axis=0)
        g = g @ net.weights[i]
    inputs = g[0] if cache.squeeze else g
    return GradientSet(gw, gb, inputs)


# ---------------------------------------------------------------------------
# projections onto the constraint set
# ---------------------------------------------------------------------------


def _scale_to(a, norm, bound):
    if norm > bound:
        return a * (bound / norm)
    return a


def project_generator(net: GeneratorNet) -> GeneratorNet:
    """Rescale every weight to spectral norm <= K1 and every offset to ``||b|| <= K1``."""
    K1 = net.K1
    ws, bs = [], []
    changed = False
    for w, b in zip(net.weights, net.biases):
        # Frobenius bounds the spectral norm: skip the power iteration when possible
        if np.sqrt(np.sum(w * w)) > K1:
            s = spectral_norm(w)
            if s > K1:
                w = w * (K1 / s)
                changed = True
        nb = float(np.linalg.norm(b))
        if nb > K1:
            b = b * (K1 / nb)
            changed = True
        ws.append(w)
        bs.append(b)
    return net.replace(ws, bs) if changed else net


def _clip_rows_l2(w):
    norms = np.sqrt(np.sum(w * w, axis=1))
    if np.all(norms <= 1.0):
        return w, False
    scale = np.where(norms > 1.0, 1.0 / np.where(norms > 0, norms, 1.0), 1.0)
    return w * scale[:, None], True


def _clip_rows_l1(w):
    sums = np.sum(np.abs(w), axis=1)
    if np.all(sums <= 1.0):
        return w, False
    scale = np.where(sums > 1.0, 1.0 / np.where(sums > 0, sums, 1.0), 1.0)
    return w * scale[:, None], True


def _bjorck_first_layer(w):
    # only wide V1 (v1 <= D) is row-orthonormalized; a tall V1 cannot have
    # orthonormal rows and is left to the row clip
    if w.shape[0] > w.shape[1] or bjorck_residual(w) <= BJORCK_TOL:
        return w, False
    s = power_iteration(w, tol=PRESCALE_TOL).value
    if s == 0.0:
        return w, False
    return bjorck_orthonormalize(w / s), True


def project_discriminator(net: DiscriminatorNet, mode="scale") -> DiscriminatorNet:
    """Enforce ``||V1||_{2,inf} <= 1``, ``||Vi||_inf <= 1`` (i >= 2), ``|c| <= K2``.

    ``mode="bjorck"`` first replaces V1 by its Björck orthonormalization; the
    row-norm clip is applied afterwards in both modes so the constraint holds
    exactly rather than to the Björck tolerance.
    """
    if mode not in PROJECTION_MODES:
        raise ValueError(f"unknown projection mode {mode!r}")
    ws, bs = [], []
    changed = False
    for i, (w, c) in enumerate(zip(net.weights, net.biases)):
        if i == 0:
            if mode == "bjorck":
                w, changed = _bjorck_first_layer(w)
            w, ch = _clip_rows_l2(w)
        else:
            w, ch = _clip_rows_l1(w)
        changed |= ch
        if np.any(np.abs(c) > net.K2):
            c = np.clip(c, -net.K2, net.K2)
            changed = True
        ws.append(w)
        bs.append(c)
    return net.replace(ws, bs) if changed else net


def is_feasible_generator(net: GeneratorNet, slack=1e-9) -> bool:
    return all(
        spectral_norm(w) <= net.K1 + slack and np.linalg.norm(b) <= net.K1 + slack
        for w, b in zip(net.weights, net.biases)
    )


def is_feasible_discriminator(net: DiscriminatorNet, slack=1e-9) -> bool:
    ok = two_inf_norm(net.weights[0]) <= 1 + slack
    ok &= all(inf_norm(w) <= 1 + slack for w in net.weights[1:])
    ok &= all(np.max(np.abs(c)) <= net.K2 for c in net.biases)
    return bool(ok)


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def _uniform_layers(dims, rng):
    ws, bs = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        s = 1.0 / math.sqrt(fan_in)
        ws.append(rng.uniform(-s, s, size=(fan_out, fan_in)))
        bs.append(np.zeros(fan_out))
    return ws, bs


def init_generator(depth, input_dim, output_dim, width=20, rng=None, K1=DEFAULT_K1):
    """Uniform(+-1/sqrt(fan_in)) weights, zero offsets, then one projection."""
    if depth < 2:
        raise ValueError("generator depth must be >= 2")
    rng = np.random.default_rng(rng)
    widths = [width] * (depth - 1) if np.isscalar(width) else list(width)
    ws, bs = _uniform_layers([input_dim, *widths, output_dim], rng)
    return project_generator(GeneratorNet(ws, bs, K1))


def init_discriminator(depth, input_dim, width=20, rng=None, K2=DEFAULT_K2, mode="scale"):
    if depth < 2:
        raise ValueError("discriminator depth must be >= 2")
    rng = np.random.default_rng(rng)
    widths = [width] * (depth - 1) if np.isscalar(width) else list(width)
    ws, bs = _uniform_layers([input_dim, *widths, 1], rng)
    return project_discriminator(DiscriminatorNet(ws, bs, K2), mode)


def empirical_lipschitz(net, pairs) -> float:
    """Largest observed ``||f(x) - f(y)|| / ||x - y||`` over the given pairs.

    ``pairs`` is a sequence of ``(x, y)`` or a pair of ``(n, dim)`` arrays.
    Zero-distance pairs are skipped.
    """
    if isinstance(pairs, tuple) and len(pairs) == 2 and np.ndim(pairs[0]) == 2:
        xs, ys = (np.asarray(a, dtype=np.float64) for a in pairs)
    else:
        xs = np.array([p[0] for p in pairs], dtype=np.float64)
        ys = np.array([p[1] for p in pairs], dtype=np.float64)
    f = (lambda a: generator_forward(net, a)) if isinstance(net, GeneratorNet) else (
        lambda a: discriminator_forward(net, a)[:, None]
    )
    dx = np.linalg.norm(xs - ys, axis=1)
    keep = dx > 0
    if not np.any(keep):
        return 0.0
    df = np.linalg.norm(f(xs[keep]) - f(ys[keep]), axis=1)
    return float(np.max(df / dx[keep]))


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def net_to_dict(net, projection_mode="scale", seed=None) -> dict:
    gen = isinstance(net, GeneratorNet)
    dims = [net.input_dim] + [w.shape[0] for w in net.weights]
    d = {
        "family": "generator" if gen else "discriminator",
        "depth": net.depth,
        "dims": dims,
        "weights": [w.tolist() for w in net.weights],
        "offsets": [b.tolist() for b in net.biases],
        "projection_mode": projection_mode,
        "seed": seed,
    }
    if gen:
        d["K1"] = net.K1
    else:
        d["K2"] = net.K2
    return d


def net_from_dict(d):
    if d["family"] == "generator":
        net = GeneratorNet(d["weights"], d["offsets"], d["K1"])
    elif d["family"] == "discriminator":
        net = DiscriminatorNet(d["weights"], d["offsets"], d["K2"])
    else:
        raise ValueError(f"unknown network family {d['family']!r}")
    dims = [net.input_dim] + [w.shape[0] for w in net.weights]
    if dims != list(d["dims"]) or net.depth != d["depth"]:
        raise ValueError("checkpoint dims do not match its weight arrays")
    return net


def save_net(net, path, projection_mode="scale", seed=None):
    # json writes floats with repr(), which round-trips float64 exactly
    with open(path, "w") as fh:
        json.dump(net_to_dict(net, projection_mode, seed), fh)


def load_net(path):
    with open(path) as fh:
        return net_from_dict(json.load(fh))
