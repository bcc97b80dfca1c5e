"""Batch pipelines: distance equivalence fits, depth sweeps, discriminator heatmaps.

Every stochastic piece draws from a child seed derived from the run seed and
the task's position in the grid, so cells can run in any order and replay
exactly.
"""

from dataclasses import dataclass, field, replace
import csv
import logging
import os

import numpy as np

from . import svg
from .data import grid_mixture, make_rng, random_mixture_pair, sample_mixture_points, split_seed
from .metrics import DEFAULT_K, FitResult, UnfittableError, band_width, fit_row, parabolic_fit_lre, write_fit_csv
from .nets import DiscriminatorNet, discriminator_forward
from .ot import (
    DiscConfig,
    EmpiricalMeasure,
    IpmConfig,
    neural_ipm,
    sampler_from_mixture,
    wasserstein1_sampled,
)
from .training import GeneratorConfig, TrainConfig, evaluation_runs, train_wgan

log = logging.getLogger(__name__)


def _g(v):
    return f"{v:.17g}"


# ---------------------------------------------------------------------------
# equivalence between the neural IPM and W1
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EquivConfig:
    n_w1: int = 1024
    runs: int = 5
    n_ipm: int = 1024
    width: int = 20
    K2: float = 10.0
    ipm: IpmConfig = field(default_factory=lambda: IpmConfig(projection="bjorck"))
    mean_box: tuple = (-5.0, 5.0)
    std_range: tuple = (0.2, 1.0)


@dataclass
class EquivPair:
    K: int
    q: int
    pair: int
    x: float  # neural IPM
    y: float  # averaged exact W1


@dataclass
class EquivFit:
    K: object  # component count, or "merged"
    q: int
    seed: int
    fit: FitResult = None
    error: str = ""

    @property
    def width(self):
        return band_width(self.fit) if self.fit is not None else float("nan")


@dataclass
class EquivResult:
    fits: list
    pairs: list

    def fit(self, K, q):
        for f in self.fits:
            if f.K == K and f.q == q:
                return f
        raise KeyError((K, q))


def _fit(K, q, seed, pts):
    try:
        return EquivFit(K, q, seed, parabolic_fit_lre([(p.x, p.y) for p in pts]))
    except UnfittableError as exc:
        return EquivFit(K, q, seed, None, str(exc))


def run_equivalence(K_list, q_list, n_pairs, eval_cfg=EquivConfig(), seed=0, out=None, pair_specs=None):
    """Fit W1 against the neural IPM on random mixture pairs, per (K, q).

    For each K, ``n_pairs`` mixture pairs are drawn; y is the exact W1 averaged
    over ``eval_cfg.runs`` sample pairs and x the neural IPM of each depth q on
    one further sample pair. With several K values a merged fit per q is added.
    ``pair_specs`` optionally maps K to a fixed list of mixture pairs.
    """
    if n_pairs < 3:
        raise ValueError("need at least three pairs")
    pairs = []
    for K in K_list:
        kseed = split_seed(seed, K)
        specs = pair_specs[K] if pair_specs else [
            random_mixture_pair(K, make_rng(split_seed(kseed, 3 * i)), eval_cfg.mean_box, eval_cfg.std_range)
            for i in range(n_pairs)
        ]
        for i, (mu, nu) in enumerate(specs):
            y, _ = wasserstein1_sampled(sampler_from_mixture(mu), sampler_from_mixture(nu),
                                        eval_cfg.n_w1, eval_cfg.runs, split_seed(kseed, 3 * i + 1))
            s = split_seed(kseed, 3 * i + 2)
            X = EmpiricalMeasure(sample_mixture_points(mu, eval_cfg.n_ipm, make_rng(split_seed(s, 0))))
            Y = EmpiricalMeasure(sample_mixture_points(nu, eval_cfg.n_ipm, make_rng(split_seed(s, 1))))
            for q in q_list:
                est = neural_ipm(X, Y, DiscConfig(q, eval_cfg.width, eval_cfg.K2), eval_cfg.ipm, split_seed(s, 2))
                pairs.append(EquivPair(K, q, i, est.value, y))
            log.info("equiv K=%s pair %d: W1=%.4f", K, i, y)

    fits = []
    for K in K_list:
        for q in q_list:
            fits.append(_fit(K, q, seed, [p for p in pairs if p.K == K and p.q == q]))
    if len(K_list) > 1:
        for q in q_list:
            fits.append(_fit("merged", q, seed, [p for p in pairs if p.q == q]))
    result = EquivResult(fits, pairs)
    if out is not None:
        write_equivalence(result, seed, out)
    return result


def write_equivalence(result: EquivResult, seed, out):
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "pairs.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["K", "q", "seed", "pair", "ipm", "w1"])
        for p in result.pairs:
            w.writerow([p.K, p.q, seed, p.pair, _g(p.x), _g(p.y)])
    rows = [fit_row(f.K, f.q, f.seed, f.fit) for f in result.fits if f.fit is not None]
    write_fit_csv(os.path.join(out, "fits.csv"), rows)
    with open(os.path.join(out, "unfittable.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["K", "q", "seed", "reason"])
        for f in result.fits:
            if f.fit is None:
                w.writerow([f.K, f.q, f.seed, f.error])
    for f in result.fits:
        pts = [p for p in result.pairs if p.q == f.q and (f.K == "merged" or p.K == f.K)]
        doc = svg.scatter_band_svg([p.x for p in pts], [p.y for p in pts], f.fit,
                                   title=f"K={f.K}, q={f.q}")
        svg.write(os.path.join(out, f"equiv_K{f.K}_q{f.q}.svg"), doc)


# ---------------------------------------------------------------------------
# depth sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalConfig:
    n_eval: int = 1024
    runs: int = 5
    k: int = DEFAULT_K


@dataclass(frozen=True)
class TargetConfig:
    K: int = 9
    spacing: float = 2.0
    stddev: float = 0.1

    def spec(self):
        return grid_mixture(self.K, self.spacing, self.stddev)


@dataclass
class CellRecord:
    p: int
    q: int
    seed: int
    w1: float
    recall: float
    ipm_obj: float
    status: str = "ok"


@dataclass
class SweepGrid:
    p_list: list
    q_list: list
    K: int
    mode: str
    seeds: int
    cells: dict = field(default_factory=dict)  # (p, q, seed index) -> CellRecord

    def records(self, p, q):
        return [self.cells[(p, q, s)] for s in range(self.seeds)]

    def _ok(self, p, q):
        return [r for r in self.records(p, q) if r.status == "ok"]

    def w1_sup(self, p, q):
        ok = self._ok(p, q)
        return max(r.w1 for r in ok) if ok else float("nan")

    def w1_median(self, p, q):
        ok = self._ok(p, q)
        return float(np.median([r.w1 for r in ok])) if ok else float("nan")

    def recall_mean(self, p, q):
        ok = self._ok(p, q)
        return float(np.mean([r.recall for r in ok])) if ok else float("nan")

    def recall_median(self, p, q):
        ok = self._ok(p, q)
        return float(np.median([r.recall for r in ok])) if ok else float("nan")


def cell_seed(train_cfg: TrainConfig, seed_index):
    return split_seed(train_cfg.seed, seed_index)


def run_sweep_cell(p, q, seed_index, target: TargetConfig, mode, train_cfg: TrainConfig, eval_cfg: EvalConfig,
                   gen_cfg: GeneratorConfig = GeneratorConfig(), disc_cfg: DiscConfig = DiscConfig(),
                   return_models=False):
    """Train and evaluate one (p, q, seed) cell.

    Evaluation uses the same child seeds as ``evaluate_model(gen, latent,
    spec, n_eval, runs, split_seed(cell seed, 1))``.
    """
    seed = cell_seed(train_cfg, seed_index)
    spec = target.spec()
    gcfg = GeneratorConfig(p, gen_cfg.width, spec.dim, gen_cfg.K1, gen_cfg.latent)
    dcfg = DiscConfig(q, disc_cfg.width, disc_cfg.K2)
    cfg = replace(train_cfg, seed=seed, mode=mode)
    gen, disc, hist = train_wgan(gcfg, dcfg, spec, cfg)
    if hist.diverged:
        rec = CellRecord(p, q, seed_index, float("nan"), float("nan"), float("nan"), "diverged")
    else:
        w1s, recs, ipms = evaluation_runs(gen, gcfg.latent, spec, eval_cfg.n_eval, eval_cfg.runs,
                                          split_seed(seed, 1), eval_cfg.k, disc)
        rec = CellRecord(p, q, seed_index, float(np.mean(w1s)), float(np.mean(recs)), float(np.mean(ipms)))
    return (rec, gen, disc, hist) if return_models else rec


def run_depth_sweep(p_list, q_list, target: TargetConfig, mode, seeds, train_cfg: TrainConfig,
                    eval_cfg: EvalConfig = EvalConfig(), gen_cfg: GeneratorConfig = GeneratorConfig(),
                    disc_cfg: DiscConfig = DiscConfig(), out=None, order=None):
    """Train one WGAN per (p, q, seed) and aggregate W1 and recall per depth pair.

    ``order`` optionally permutes the cell execution order; results do not
    depend on it.
    """
    if seeds < 1:
        raise ValueError("seeds must be >= 1")
    tasks = [(p, q, s) for p in p_list for q in q_list for s in range(seeds)]
    if order is not None:
        tasks = [tasks[i] for i in order]
    grid = SweepGrid(list(p_list), list(q_list), target.K, mode, seeds)
    for p, q, s in tasks:
        grid.cells[(p, q, s)] = run_sweep_cell(p, q, s, target, mode, train_cfg, eval_cfg, gen_cfg, disc_cfg)
        log.info("sweep cell p=%d q=%d seed=%d: %s", p, q, s, grid.cells[(p, q, s)])
    if out is not None:
        write_sweep(grid, out)
    return grid


def write_sweep(grid: SweepGrid, out):
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "cells.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "q", "seed", "w1", "recall", "ipm_obj", "status"])
        for key in sorted(grid.cells):
            r = grid.cells[key]
            w.writerow([r.p, r.q, r.seed, _g(r.w1), _g(r.recall), _g(r.ipm_obj), r.status])
    with open(os.path.join(out, "grid.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["K", "mode", "p", "q", "w1_sup", "recall_mean"])
        for p in grid.p_list:
            for q in grid.q_list:
                w.writerow([grid.K, grid.mode, p, q, _g(grid.w1_sup(p, q)), _g(grid.recall_mean(p, q))])
    w1 = [[grid.w1_sup(p, q) for q in grid.q_list] for p in grid.p_list]
    rc = [[grid.recall_mean(p, q) for q in grid.q_list] for p in grid.p_list]
    svg.write(os.path.join(out, "w1_sup.svg"),
              svg.heattable_svg(w1, grid.p_list, grid.q_list, f"max W1 over seeds, K={grid.K} ({grid.mode})"))
    svg.write(os.path.join(out, "recall.svg"),
              svg.heattable_svg(rc, grid.p_list, grid.q_list, f"mean recall, K={grid.K} ({grid.mode})"))


# ---------------------------------------------------------------------------
# heatmaps
# ---------------------------------------------------------------------------


@dataclass
class HeatmapGrid:
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # values[iy, ix] = D(xs[ix], ys[iy])

    def second_differences(self):
        v = self.values
        return np.abs(np.diff(v, 2, axis=1)), np.abs(np.diff(v, 2, axis=0))

    def kink_fraction(self, tol=1e-9):
        """Fraction of interior grid points where a discrete second difference exceeds ``tol``."""
        dx, dy = self.second_differences()
        bent = np.zeros(self.values.shape, dtype=bool)
        bent[:, 1:-1] |= dx > tol
        bent[1:-1, :] |= dy > tol
        return float(bent[1:-1, 1:-1].mean())


def render_heatmap(disc: DiscriminatorNet, x_range, y_range, resolution, out=None) -> HeatmapGrid:
    if disc.input_dim != 2:
        raise ValueError("heatmaps need a bivariate discriminator")
    nx, ny = (resolution, resolution) if np.isscalar(resolution) else resolution
    if nx < 2 or ny < 2:
        raise ValueError("resolution must be >= 2 per axis")
    xs = np.linspace(x_range[0], x_range[1], nx)
    ys = np.linspace(y_range[0], y_range[1], ny)
    gx, gy = np.meshgrid(xs, ys)
    vals = discriminator_forward(disc, np.column_stack([gx.ravel(), gy.ravel()])).reshape(ny, nx)
    grid = HeatmapGrid(xs, ys, vals)
    if out is not None:
        write_heatmap(grid, out)
    return grid


def write_heatmap(grid: HeatmapGrid, out, name="heatmap"):
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, f"{name}.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y\\x", *(_g(x) for x in grid.xs)])
        for y, row in zip(grid.ys, grid.values):
            w.writerow([_g(y), *(_g(v) for v in row)])
    svg.write(os.path.join(out, f"{name}.svg"),
              svg.heatmap_svg(grid.values, (grid.xs[0], grid.xs[-1]), (grid.ys[0], grid.ys[-1]),
                              "discriminator output"))
