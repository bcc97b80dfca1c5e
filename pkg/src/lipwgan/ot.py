"""Exact Wasserstein-1 between empirical measures, and the neural IPM.

Weights are integer counts so transport marginals are checked exactly. Two
exact solvers are provided: linear assignment for equal-size unit-weight
clouds, and a transportation simplex (north-west corner start, MODI
potentials, Bland's rule) for everything else.
"""

from collections import deque
from dataclasses import dataclass, field
from math import gcd
import csv

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .data import make_rng, split_seed
from .nets import (
    DEFAULT_K2,
    DiscriminatorNet,
    backward,
    discriminator_forward,
    generator_forward,
    init_discriminator,
    init_generator,
    project_discriminator,
)
from .optim import Optimizer, OptimizerConfig, apply_step, cosine_lr


@dataclass
class EmpiricalMeasure:
    points: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or len(pts) == 0:
            raise ValueError("an empirical measure needs a non-empty (n, dim) point array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if self.weights is None:
            w = np.ones(len(pts), dtype=np.int64)
        else:
            w = np.asarray(self.weights)
            if w.shape != (len(pts),) or not np.all(w == np.round(w)):
                raise ValueError("weights must be one integer count per point")
            w = w.astype(np.int64)
            if np.any(w < 1):
                raise ValueError("weights must be >= 1")
        self.points = pts
        self.weights = w

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def total(self):
        return int(self.weights.sum())

    @property
    def probs(self):
        return self.weights / self.total

    @property
    def unit(self):
        return bool(np.all(self.weights == 1))

    def __len__(self):
        return len(self.points)


@dataclass
class TransportResult:
    cost: float
    plan: list  # (source index, target index, integer flow)
    total: int
    method: str
    certified: bool = True
    iterations: int = 0

    def marginals(self, m, n):
        src = np.zeros(m, dtype=np.int64)
        dst = np.zeros(n, dtype=np.int64)
        for i, j, f in self.plan:
            src[i] += f
            dst[j] += f
        return src, dst


def _common_total(mu, nu):
    # rescale integer weights to a shared total, lcm of the two
    a, b = mu.total, nu.total
    L = a * b // gcd(a, b)
    return mu.weights * (L // a), nu.weights * (L // b), L


def wasserstein1_exact(mu: EmpiricalMeasure, nu: EmpiricalMeasure, method="auto") -> TransportResult:
    """Exact W1 with an optimal integer coupling.

    ``method`` is ``"auto"`` (assignment when both clouds are unit-weight and
    of equal size, simplex otherwise), ``"assignment"`` or ``"simplex"``.
    Unequal totals are brought to their least common multiple.
    """
    if mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    if mu.total == 0 or nu.total == 0:
        raise ValueError("zero total weight")
    C = cdist(mu.points, nu.points)
    fast = mu.unit and nu.unit and len(mu) == len(nu)
    if method == "auto":
        method = "assignment" if fast else "simplex"
    if method == "assignment":
        if not fast:
            raise ValueError("assignment needs equal-size unit-weight measures")
        rows, cols = linear_sum_assignment(C)
        n = len(mu)
        plan = [(int(i), int(j), 1) for i, j in zip(rows, cols)]
        return TransportResult(float(C[rows, cols].sum()) / n, plan, n, "assignment")
    if method != "simplex":
        raise ValueError(f"unknown method {method!r}")
    a, b, total = _common_total(mu, nu)
    plan, certified, iters = transportation_simplex(a, b, C)
    cost = sum(f * C[i, j] for i, j, f in plan) / total
    return TransportResult(float(cost), plan, total, "simplex", certified, iters)


def transportation_simplex(supply, demand, C, max_iter=None):
    """Solve ``min sum f_ij C_ij`` over integer flows with the given marginals.

    Returns ``(plan, certified, iterations)`` with ``plan`` the positive-flow
    cells. ``certified`` is True when every reduced cost is non-negative at
    termination.
    """
    supply = [int(s) for s in supply]
    demand = [int(d) for d in demand]
    if sum(supply) != sum(demand):
        raise ValueError("supply and demand totals differ")
    C = np.asarray(C, dtype=np.float64)
    m, n = C.shape
    if max_iter is None:
        max_iter = 50 * (m + n) * (m + n) + 1000
    eps = 1e-12 * (1.0 + float(np.max(np.abs(C))))

    # north-west corner: m + n - 1 basic cells, zero flows allowed
    flow = {}
    ar, br = supply[:], demand[:]
    i = j = 0
    while True:
        f = min(ar[i], br[j])
        flow[(i, j)] = f
        ar[i] -= f
        br[j] -= f
        if i == m - 1 and j == n - 1:
            break
        if ar[i] == 0 and i < m - 1:
            i += 1
        else:
            j += 1

    certified = False
    it = 0
    for it in range(1, max_iter + 1):
        u, v, adj = _potentials(flow, m, n, C)
        reduced = C - u[:, None] - v[None, :]
        neg = np.flatnonzero(reduced.ravel() < -eps)
        if len(neg) == 0:
            certified = True
            break
        # Bland: lowest-index improving cell enters
        ei, ej = divmod(int(neg[0]), n)
        path = _tree_path(adj, ei, m + ej, m)
        # path cells alternate -, +, -, ... starting next to the entering cell
        minus = path[0::2]
        plus = path[1::2]
        theta = min(flow[c] for c in minus)
        leaving = min((c for c in minus if flow[c] == theta), key=lambda c: c[0] * n + c[1])
        for c in minus:
            flow[c] -= theta
        for c in plus:
            flow[c] += theta
        del flow[leaving]
        flow[(ei, ej)] = theta
    plan = sorted((i, j, f) for (i, j), f in flow.items() if f > 0)
    return plan, certified, it


def _potentials(flow, m, n, C):
    # nodes 0..m-1 are sources, m..m+n-1 are sinks; basis cells are tree edges
    adj = [[] for _ in range(m + n)]
    for (i, j) in flow:
        adj[i].append(m + j)
        adj[m + j].append(i)
    pot = [None] * (m + n)
    pot[0] = 0.0
    queue = deque([0])
    while queue:
        a = queue.popleft()
        for b in adj[a]:
            if pot[b] is None:
                if a < m:
                    pot[b] = C[a, b - m] - pot[a]
                else:
                    pot[b] = C[b, a - m] - pot[a]
                queue.append(b)
    if any(p is None for p in pot):
        raise RuntimeError("transportation basis is not a spanning tree")
    pot = np.asarray(pot)
    return pot[:m], pot[m:], adj


def _tree_path(adj, src, dst, m):
    """Basis cells on the tree path from sink node ``dst`` back to source ``src``."""
    parent = {src: None}
    queue = deque([src])
    while queue:
        a = queue.popleft()
        if a == dst:
            break
        for b in adj[a]:
            if b not in parent:
                parent[b] = a
                queue.append(b)
    cells = []
    node = dst
    while parent[node] is not None:
        prev = parent[node]
        cells.append((prev, node - m) if prev < m else (node, prev - m))
        node = prev
    return cells


def sampler_from_mixture(spec):
    from .data import sample_mixture_points

    return lambda n, rng: sample_mixture_points(spec, n, rng)


def sampler_from_generator(gen, latent):
    from .data import sample_latent

    return lambda n, rng: generator_forward(gen, sample_latent(latent, n, rng))


def wasserstein1_sampled(sampler_mu, sampler_nu, n, runs, seed):
    """Mean and sample stddev of exact W1 over ``runs`` independent n-sample pairs.

    Samplers are callables ``(n, rng) -> (n, dim) array``. Run ``r`` draws from
    the child streams ``split_seed(seed, 2r)`` and ``split_seed(seed, 2r + 1)``.
    """
    if n < 2 or runs < 1:
        raise ValueError("need n >= 2 and runs >= 1")
    vals = []
    for r in range(runs):
        x = sampler_mu(n, make_rng(split_seed(seed, 2 * r)))
        y = sampler_nu(n, make_rng(split_seed(seed, 2 * r + 1)))
        vals.append(wasserstein1_exact(EmpiricalMeasure(x), EmpiricalMeasure(y)).cost)
    vals = np.asarray(vals)
    std = float(vals.std(ddof=1)) if runs > 1 else 0.0
    return float(vals.mean()), std


# ---------------------------------------------------------------------------
# neural IPM
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscConfig:
    depth: int = 2
    width: int = 20
    K2: float = DEFAULT_K2

    def __post_init__(self):
        if self.depth < 2 or self.width < 2 or self.width % 2:
            raise ValueError("discriminator needs depth >= 2 and an even width >= 2")


@dataclass(frozen=True)
class IpmConfig:
    steps: int = 2000
    lr: float = 5e-3
    batch_size: int = None  # None: full batch
    projection: str = "scale"
    optimizer: OptimizerConfig = field(default_factory=lambda: OptimizerConfig("layer_adam", 5e-3, 0.5, 0.9, 1e-8))

    def __post_init__(self):
        if self.steps < 0 or self.lr < 0:
            raise ValueError("steps and lr must be non-negative")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.projection not in ("scale", "bjorck"):
            raise ValueError(f"unknown projection mode {self.projection!r}")


@dataclass
class IpmEstimate:
    value: float
    witness: DiscriminatorNet
    inner_steps: int
    trace: list = field(default_factory=list)


def ipm_objective(disc, X: EmpiricalMeasure, Y: EmpiricalMeasure) -> float:
    """``E_X D - E_Y D`` under the measures' probabilities."""
    return float(X.probs @ discriminator_forward(disc, X.points) - Y.probs @ discriminator_forward(disc, Y.points))


def _as_measure(m):
    return m if isinstance(m, EmpiricalMeasure) else EmpiricalMeasure(m)


def neural_ipm(X, Y, disc_cfg=DiscConfig(), opt_cfg=IpmConfig(), seed=0) -> IpmEstimate:
    """Lower estimate of ``sup_D |E_X D - E_Y D|`` by projected gradient ascent.

    The discriminator is projected after every step. The returned value is the
    best full-sample ``|objective|`` seen, and the witness is oriented (negated
    if needed) so that its plain objective equals that value.
    """
    X, Y = _as_measure(X), _as_measure(Y)
    if X.dim != Y.dim:
        raise ValueError(f"dimension mismatch: {X.dim} vs {Y.dim}")
    rng = make_rng(seed)
    disc = init_discriminator(disc_cfg.depth, X.dim, disc_cfg.width, rng, disc_cfg.K2, opt_cfg.projection)
    ocfg = opt_cfg.optimizer
    opt = Optimizer(OptimizerConfig(ocfg.name, opt_cfg.lr, ocfg.beta1, ocfg.beta2, ocfg.eps))

    pts = np.concatenate([X.points, Y.points])
    # gradient of E_X D - E_Y D w.r.t. each output
    full_up = np.concatenate([X.probs, -Y.probs])
    nx = len(X)

    best_val, best_net = -1.0, disc
    trace = []
    for step in range(opt_cfg.steps + 1):
        out, cache = discriminator_forward(disc, pts, return_cache=True)
        obj = float(full_up @ out)
        trace.append(obj)
        if abs(obj) > best_val:
            best_val = abs(obj)
            best_net = disc if obj >= 0 else disc.negated()
        if step == opt_cfg.steps:
            break
        if opt_cfg.batch_size is None:
            grads = backward(disc, full_up, cache)
        else:
            bx = rng.choice(nx, size=min(opt_cfg.batch_size, nx), p=X.probs)
            by = rng.choice(len(Y), size=min(opt_cfg.batch_size, len(Y)), p=Y.probs)
            bpts = np.concatenate([X.points[bx], Y.points[by]])
            up = np.concatenate([np.full(len(bx), 1.0 / len(bx)), np.full(len(by), -1.0 / len(by))])
            _, bcache = discriminator_forward(disc, bpts, return_cache=True)
            grads = backward(disc, up, bcache)
        # ascend E_X D - E_Y D; negation covers the other sign
        grads.weights = [-g for g in grads.weights]
        grads.biases = [-g for g in grads.biases]
        disc = apply_step(disc, opt, grads, cosine_lr(opt_cfg.lr, step, opt_cfg.steps))
        disc = project_discriminator(disc, opt_cfg.projection)
    value = ipm_objective(best_net, X, Y)
    return IpmEstimate(max(value, 0.0), best_net, opt_cfg.steps, trace)


def t_gap_samples(gen_cfg, disc_cfg, mu_star_sampler, n_theta, n, seed, opt_cfg=IpmConfig()):
    """``d_Lip1 - d_D`` between n-samples of the target and of random feasible generators."""
    if n_theta < 1:
        raise ValueError("n_theta must be >= 1")
    from .data import sample_latent

    gaps = []
    for k in range(n_theta):
        base = split_seed(seed, k)
        gen = init_generator(gen_cfg.depth, gen_cfg.latent.dim, gen_cfg.output_dim, gen_cfg.width,
                             make_rng(split_seed(base, 0)), gen_cfg.K1)
        x = mu_star_sampler(n, make_rng(split_seed(base, 1)))
        y = generator_forward(gen, sample_latent(gen_cfg.latent, n, make_rng(split_seed(base, 2))))
        X, Y = EmpiricalMeasure(x), EmpiricalMeasure(y)
        w1 = wasserstein1_exact(X, Y).cost
        ipm = neural_ipm(X, Y, disc_cfg, opt_cfg, split_seed(base, 3)).value
        gaps.append(w1 - ipm)
    return gaps


def estimate_t_gap(gen_cfg, disc_cfg, mu_star_sampler, n_theta, n, seed, opt_cfg=IpmConfig()) -> float:
    """Monte Carlo lower bound on the worst-case gap between W1 and the neural IPM."""
    return float(max(t_gap_samples(gen_cfg, disc_cfg, mu_star_sampler, n_theta, n, seed, opt_cfg)))


# ---------------------------------------------------------------------------
# CSV point clouds
# ---------------------------------------------------------------------------


def read_cloud_csv(path) -> EmpiricalMeasure:
    """Read ``dim,<D>`` then rows of D floats with an optional integer weight."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows or rows[0][0].strip() != "dim":
        raise ValueError(f"{path}: first row must be 'dim,<D>'")
    D = int(rows[0][1])
    pts, wts = [], []
    for k, r in enumerate(rows[1:], start=2):
        if len(r) == D:
            pts.append([float(c) for c in r])
            wts.append(1)
        elif len(r) == D + 1:
            pts.append([float(c) for c in r[:D]])
            w = float(r[D])
            if w != int(w):
                raise ValueError(f"{path}:{k}: weight must be an integer")
            wts.append(int(w))
        else:
            raise ValueError(f"{path}:{k}: expected {D} or {D + 1} columns, got {len(r)}")
    return EmpiricalMeasure(np.array(pts, dtype=np.float64).reshape(-1, D), np.array(wts))


def write_cloud_csv(path, measure: EmpiricalMeasure, with_weights=None):
    if with_weights is None:
        with_weights = not measure.unit
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dim", measure.dim])
        for p, c in zip(measure.points, measure.weights):
            row = [repr(float(v)) for v in p]
            if with_weights:
                row.append(int(c))
            w.writerow(row)
