"""Alternating projected-gradient WGAN training and model evaluation."""

from dataclasses import dataclass, field
import csv
import logging
import math
import time

import numpy as np

from .data import LatentSpec, MixtureSpec, make_rng, sample_latent, sample_mixture_points, split_seed
from .metrics import DEFAULT_K, RecallScore, recall
from .nets import (
    DEFAULT_K1,
    backward,
    discriminator_forward,
    generator_forward,
    init_discriminator,
    init_generator,
    project_discriminator,
    project_generator,
)
from .optim import Optimizer, OptimizerConfig, apply_step
from .ot import DiscConfig, EmpiricalMeasure, wasserstein1_exact

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class GeneratorConfig:
    depth: int = 3
    width: int = 20
    output_dim: int = 2
    K1: float = DEFAULT_K1
    latent: LatentSpec = field(default_factory=LatentSpec)

    def __post_init__(self):
        if self.depth < 2 or self.width < 1 or self.output_dim < 1:
            raise ValueError("generator needs depth >= 2 and positive widths")


@dataclass(frozen=True)
class TrainConfig:
    n_critic: int = 5
    batch_size: int = 256
    generator_steps: int = 3000
    disc_optimizer: OptimizerConfig = field(default_factory=lambda: OptimizerConfig("adam", 1e-3))
    gen_optimizer: OptimizerConfig = field(default_factory=lambda: OptimizerConfig("adam", 1e-3))
    mode: str = "asymptotic"
    n: int = 5000  # dataset size in finite mode
    projection: str = "scale"
    eval_every: int = 500
    n_eval: int = 1024
    recall_k: int = DEFAULT_K
    record_time: bool = False
    seed: int = 0

    def __post_init__(self):
        for name in ("n_critic", "batch_size", "generator_steps", "eval_every", "n", "n_eval"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.mode not in ("asymptotic", "finite"):
            raise ValueError(f"unknown training mode {self.mode!r}")
        if self.projection not in ("scale", "bjorck"):
            raise ValueError(f"unknown projection mode {self.projection!r}")


@dataclass
class EvalRecord:
    step: int
    ipm_obj: float
    w1: float
    recall: float
    elapsed_s: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    diverged: bool = False
    message: str = ""

    HEADER = ("step", "ipm_obj", "w1", "recall", "elapsed_s")

    def rows(self):
        for r in self.records:
            yield [r.step, *(f"{v:.17g}" for v in (r.ipm_obj, r.w1, r.recall, r.elapsed_s))]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.HEADER)
            w.writerows(self.rows())


def _finite(net):
    return all(np.all(np.isfinite(a)) for a in net.weights + net.biases)


def _target_sampler(target, cfg, rng):
    """Sampler for real minibatches, plus the frozen dataset in finite mode."""
    if isinstance(target, MixtureSpec):
        if cfg.mode == "asymptotic":
            return (lambda n, r: sample_mixture_points(target, n, r)), None
        data = sample_mixture_points(target, cfg.n, rng)
    else:
        if cfg.mode == "asymptotic":
            raise ValueError("asymptotic mode needs a MixtureSpec target")
        data = np.asarray(target, dtype=np.float64)
    return (lambda n, r: data[r.integers(0, len(data), size=n)]), data


def train_wgan(gen_cfg: GeneratorConfig, disc_cfg: DiscConfig, target, cfg: TrainConfig,
               eval_target: MixtureSpec = None, callback=None):
    """Train a WGAN by alternating projected gradient steps.

    Each generator step is preceded by ``cfg.n_critic`` discriminator ascent
    steps on ``mean D(X) - mean D(G(Z))``; every step is followed by the
    matching projection. ``target`` is a MixtureSpec or, in finite mode only,
    a fixed ``(n, D)`` dataset. Evaluation compares fresh generator samples to
    held-out samples of ``eval_target`` (defaults to ``target`` when it is a
    mixture, otherwise the dataset itself).

    Returns ``(generator, discriminator, history)``. On divergence the history
    is flagged and holds the last good evaluations.
    """
    root = cfg.seed
    init_rng = make_rng(split_seed(root, 0))
    data_rng = make_rng(split_seed(root, 1))
    batch_rng = make_rng(split_seed(root, 2))
    latent_rng = make_rng(split_seed(root, 3))

    gen = init_generator(gen_cfg.depth, gen_cfg.latent.dim, gen_cfg.output_dim, gen_cfg.width, init_rng, gen_cfg.K1)
    disc = init_discriminator(disc_cfg.depth, gen_cfg.output_dim, disc_cfg.width, init_rng, disc_cfg.K2,
                              cfg.projection)
    real_sampler, dataset = _target_sampler(target, cfg, data_rng)
    if eval_target is None:
        eval_target = target if isinstance(target, MixtureSpec) else dataset
    d_opt = Optimizer(cfg.disc_optimizer)
    g_opt = Optimizer(cfg.gen_optimizer)
    history = TrainHistory()
    t0 = time.perf_counter()
    B = cfg.batch_size
    up_real = np.full(B, 1.0 / B)
    up_both = np.concatenate([up_real, -up_real])

    def evaluate(step):
        rec = _evaluate_step(gen, disc, gen_cfg.latent, eval_target, cfg, split_seed(root, 1000 + step))
        elapsed = time.perf_counter() - t0 if cfg.record_time else math.nan
        history.records.append(EvalRecord(step, *rec, elapsed))
        if callback is not None:
            callback(step, gen, disc)

    evaluate(0)
    for step in range(1, cfg.generator_steps + 1):
        for _ in range(cfg.n_critic):
            x = real_sampler(B, batch_rng)
            fake = generator_forward(gen, sample_latent(gen_cfg.latent, B, latent_rng))
            out, cache = discriminator_forward(disc, np.concatenate([x, fake]), return_cache=True)
            obj = float(up_both @ out)
            grads = backward(disc, -up_both, cache)
            disc = project_discriminator(apply_step(disc, d_opt, grads), cfg.projection)

        z = sample_latent(gen_cfg.latent, B, latent_rng)
        fake, gcache = generator_forward(gen, z, return_cache=True)
        _, dcache = discriminator_forward(disc, fake, return_cache=True)
        # generator minimizes -mean D(G(z))
        dgrad = backward(disc, -up_real, dcache)
        grads = backward(gen, dgrad.inputs, gcache)
        gen = project_generator(apply_step(gen, g_opt, grads))

        if not (abs(obj) <= DIVERGENCE_LIMIT and _finite(gen) and _finite(disc)):
            history.diverged = True
            history.message = f"diverged at generator step {step}: objective {obj!r}"
            log.warning(history.message)
            break
        if step % cfg.eval_every == 0 or step == cfg.generator_steps:
            evaluate(step)
    return gen, disc, history


def _draw_target(target, n, rng):
    if isinstance(target, MixtureSpec):
        return sample_mixture_points(target, n, rng)
    data = np.asarray(target, dtype=np.float64)
    return data[rng.integers(0, len(data), size=n)]


def _evaluate_step(gen, disc, latent, eval_target, cfg, seed):
    real = _draw_target(eval_target, cfg.n_eval, make_rng(split_seed(seed, 0)))
    fake = generator_forward(gen, sample_latent(latent, cfg.n_eval, make_rng(split_seed(seed, 1))))
    ipm = abs(float(np.mean(discriminator_forward(disc, real)) - np.mean(discriminator_forward(disc, fake))))
    w1 = wasserstein1_exact(EmpiricalMeasure(real), EmpiricalMeasure(fake)).cost
    rec = recall(real, fake, cfg.recall_k).value
    return ipm, w1, rec


def evaluation_runs(gen, latent: LatentSpec, target, n_eval, runs, seed, k=DEFAULT_K, disc=None):
    """Per-run exact W1, recall and (if ``disc`` is given) critic gap.

    ``target`` is a MixtureSpec, a dataset array, or a sampler ``(n, rng)``.
    Run ``r`` uses the child seed ``split_seed(seed, r)``.
    """
    if n_eval < 2 or runs < 1:
        raise ValueError("need n_eval >= 2 and runs >= 1")
    w1s, recs, ipms = [], [], []
    for r in range(runs):
        s = split_seed(seed, r)
        rng_t, rng_z = make_rng(split_seed(s, 0)), make_rng(split_seed(s, 1))
        real = target(n_eval, rng_t) if callable(target) else _draw_target(target, n_eval, rng_t)
        fake = generator_forward(gen, sample_latent(latent, n_eval, rng_z))
        w1s.append(wasserstein1_exact(EmpiricalMeasure(real), EmpiricalMeasure(fake)).cost)
        recs.append(recall(real, fake, k).value)
        if disc is not None:
            ipms.append(abs(float(np.mean(discriminator_forward(disc, real))
                                  - np.mean(discriminator_forward(disc, fake)))))
    return w1s, recs, ipms


def evaluate_model(gen, latent: LatentSpec, target, n_eval=1024, runs=5, seed=0, k=DEFAULT_K):
    """Average exact W1 and recall between target samples and generator samples."""
    w1s, recs, _ = evaluation_runs(gen, latent, target, n_eval, runs, seed, k)
    return float(np.mean(w1s)), RecallScore(float(np.mean(recs)), k, n_eval, n_eval)
