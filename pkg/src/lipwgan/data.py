"""Seeded samplers for Gaussian-mixture targets and latent codes.

Random streams come from numpy's PCG64 bit generator. Gaussian variates are
produced with Box-Muller from its uniform doubles, so outputs depend only on
the PCG64 stream and not on numpy's normal sampler.
"""

from dataclasses import dataclass, asdict
import json

import numpy as np

RNG_ALGORITHM = "PCG64"


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def split_seed(seed: int, index: int) -> int:
    """Child seed for task ``index``: first word of SeedSequence([seed, index])."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0])


def standard_normal(rng, size) -> np.ndarray:
    """Box-Muller normals of the given shape."""
    shape = (size,) if np.isscalar(size) else tuple(size)
    count = int(np.prod(shape))
    m = (count + 1) // 2
    u = rng.random((2, m))
    # 1 - u lies in (0, 1], so the log is finite
    r = np.sqrt(-2.0 * np.log1p(-u[0]))
    t = 2.0 * np.pi * u[1]
    z = np.concatenate([r * np.cos(t), r * np.sin(t)])[:count]
    return z.reshape(shape)


@dataclass(frozen=True)
class MixtureSpec:
    """Mixture of axis-aligned Gaussians: component k is N(means[k], diag(stddevs[k]**2))."""

    weights: tuple
    means: tuple
    stddevs: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        m = np.asarray(self.means, dtype=np.float64)
        s = np.asarray(self.stddevs, dtype=np.float64)
        if w.ndim != 1 or len(w) < 1:
            raise ValueError("need at least one component")
        if m.shape != (len(w), m.shape[-1]) or s.shape != m.shape:
            raise ValueError("means and stddevs must both have shape (K, dim)")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")
        if np.any(s <= 0):
            raise ValueError("stddevs must be positive")
        object.__setattr__(self, "weights", tuple(w.tolist()))
        object.__setattr__(self, "means", tuple(map(tuple, m.tolist())))
        object.__setattr__(self, "stddevs", tuple(map(tuple, s.tolist())))

    @property
    def K(self):
        return len(self.weights)

    @property
    def dim(self):
        return len(self.means[0])

    def mean(self) -> np.ndarray:
        return np.asarray(self.weights) @ np.asarray(self.means)

    def to_dict(self):
        return {k: [list(v) if isinstance(v, tuple) else v for v in vals]
                for k, vals in asdict(self).items()}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["weights"]), tuple(map(tuple, d["means"])), tuple(map(tuple, d["stddevs"])))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def gaussian(mean, stddev) -> MixtureSpec:
    mean = tuple(float(v) for v in mean)
    std = np.broadcast_to(np.asarray(stddev, dtype=np.float64), (len(mean),))
    return MixtureSpec((1.0,), (mean,), (tuple(std.tolist()),))


def grid_mixture(K, spacing=2.0, stddev=0.1) -> MixtureSpec:
    """K = s*s equally weighted components on a centred square grid."""
    side = int(round(np.sqrt(K)))
    if side * side != K:
        raise ValueError(f"grid mixtures need a square K, got {K}")
    ticks = (np.arange(side) - (side - 1) / 2.0) * spacing
    means = tuple((float(x), float(y)) for x in ticks for y in ticks)
    return MixtureSpec((1.0 / K,) * K, means, ((stddev, stddev),) * K)


def sample_mixture(spec: MixtureSpec, n: int, rng):
    """``n`` i.i.d. draws as an EmpiricalMeasure with unit weights.

    Normals are drawn first and component labels only when K > 1, so a
    one-component mixture consumes exactly the stream of a plain Gaussian.
    """
    from .ot import EmpiricalMeasure

    return EmpiricalMeasure(sample_mixture_points(spec, n, rng))


def sample_mixture_points(spec: MixtureSpec, n: int, rng) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = make_rng(rng)
    z = standard_normal(rng, (n, spec.dim))
    means = np.asarray(spec.means)
    stds = np.asarray(spec.stddevs)
    if spec.K == 1:
        return means[0] + stds[0] * z
    cdf = np.cumsum(spec.weights)
    labels = np.minimum(np.searchsorted(cdf, rng.random(n), side="right"), spec.K - 1)
    return means[labels] + stds[labels] * z


@dataclass(frozen=True)
class LatentSpec:
    dim: int = 2
    family: str = "gaussian"
    scale: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("latent dimension must be >= 1")
        if self.family not in ("gaussian", "uniform"):
            raise ValueError(f"unknown latent family {self.family!r}")
        if not self.scale > 0:
            raise ValueError("latent scale must be positive")


def sample_latent(spec: LatentSpec, n: int, rng) -> np.ndarray:
    """Gaussian: N(0, scale^2 I). Uniform: independent U[-scale, scale] coordinates."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = make_rng(rng)
    if spec.family == "gaussian":
        return spec.scale * standard_normal(rng, (n, spec.dim))
    return spec.scale * (2.0 * rng.random((n, spec.dim)) - 1.0)


def random_mixture_pair(K, rng, mean_box=(-5.0, 5.0), std_range=(0.2, 1.0), dim=2):
    """Two independent equally weighted K-component mixtures.

    Means are uniform in ``mean_box ** dim``, per-axis stddevs uniform in
    ``std_range``.
    """
    lo, hi = mean_box
    slo, shi = std_range
    if K < 1 or lo > hi or slo > shi or slo <= 0:
        raise ValueError("invalid component count or ranges")
    rng = make_rng(rng)

    def draw():
        means = rng.uniform(lo, hi, size=(K, dim)) if hi > lo else np.full((K, dim), lo)
        stds = rng.uniform(slo, shi, size=(K, dim)) if shi > slo else np.full((K, dim), slo)
        return MixtureSpec((1.0 / K,) * K, tuple(map(tuple, means)), tuple(map(tuple, stds)))

    return draw(), draw()
