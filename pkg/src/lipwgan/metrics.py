"""k-NN recall for generative models, and the parabolic fit with its envelope."""

from dataclasses import dataclass
import csv

import numpy as np
from scipy.spatial.distance import cdist

DEFAULT_K = 3
_CHUNK = 2048


@dataclass(frozen=True)
class RecallScore:
    value: float
    k: int
    n_real: int
    n_gen: int


def knn_radii(points, k):
    """Distance from every point to its k-th nearest neighbour among the others."""
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    radii = np.empty(n)
    for s in range(0, n, _CHUNK):
        d = cdist(points[s:s + _CHUNK], points)
        # column k skips the zero self-distance at column 0
        radii[s:s + _CHUNK] = np.partition(d, k, axis=1)[:, k]
    return radii


def recall(real_pts, gen_pts, k=DEFAULT_K) -> RecallScore:
    """Fraction of real points inside at least one generated point's k-NN ball.

    The ball around a generated point has radius equal to its distance to its
    k-th nearest generated neighbour; boundaries count as covered.
    """
    real = np.asarray(real_pts, dtype=np.float64)
    gen = np.asarray(gen_pts, dtype=np.float64)
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(gen) <= k:
        raise ValueError(f"need more than k={k} generated points, got {len(gen)}")
    radii = knn_radii(gen, k)
    covered = np.zeros(len(real), dtype=bool)
    for s in range(0, len(real), _CHUNK):
        d = cdist(real[s:s + _CHUNK], gen)
        covered[s:s + _CHUNK] = np.any(d <= radii[None, :], axis=1)
    return RecallScore(float(covered.mean()), k, len(real), len(gen))


class UnfittableError(ValueError):
    pass


@dataclass(frozen=True)
class FitResult:
    """``f(x) = c2 x^2 + c1 x + c0`` with envelope ``a f(x) <= y <= b f(x)``."""

    c2: float
    c1: float
    c0: float
    a: float
    b: float
    lre: float
    n_points: int

    def f(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.c2 * x * x + self.c1 * x + self.c0


def _relative_objective(c, A):
    r = 1.0 - A @ c
    return float(r @ r)


def parabolic_fit_lre(pairs) -> FitResult:
    """Fit ``y ~ c2 x^2 + c1 x`` by least relative error with ``c2, c1 >= 0``.

    Minimizes ``sum ((y - f(x)) / y)^2``; the reported ``lre`` is that sum
    divided by the number of points. The envelope multipliers are the extreme
    ratios ``y / f(x)``.

    The constrained problem has two unknowns, so it is solved exactly by
    comparing the KKT candidates: the unconstrained solution and the two
    one-coefficient solutions.
    """
    pairs = np.asarray(pairs, dtype=np.float64)
    if pairs.ndim != 2 or pairs.shape[1] != 2 or len(pairs) < 3:
        raise UnfittableError("need at least three (x, y) pairs")
    x, y = pairs[:, 0], pairs[:, 1]
    if np.any(y <= 0) or np.any(x < 0):
        raise UnfittableError("need y > 0 and x >= 0")
    if np.ptp(x) == 0:
        raise UnfittableError("all x values coincide")
    if np.any(x == 0):
        raise UnfittableError("f(0) = 0, so the envelope is unbounded at x = 0")

    # rows of the relative least-squares system: [x^2/y, x/y] c ~ 1
    A = np.column_stack([x * x / y, x / y])
    ones = np.ones(len(x))
    candidates = []
    sol, *_ = np.linalg.lstsq(A, ones, rcond=None)
    if np.all(sol >= 0):
        candidates.append(sol)
    for k in (0, 1):
        col = A[:, k]
        c = np.zeros(2)
        c[k] = max(float(col @ ones) / float(col @ col), 0.0)
        candidates.append(c)
    c = min(candidates, key=lambda c: _relative_objective(c, A))
    c2, c1 = float(c[0]), float(c[1])
    fx = c2 * x * x + c1 * x
    if not np.all(fx > 0):
        raise UnfittableError("fitted curve is not positive on the observed x")
    ratio = y / fx
    return FitResult(c2, c1, 0.0, float(ratio.min()), float(ratio.max()),
                     _relative_objective(c, A) / len(x), len(x))


def band_width(fit: FitResult) -> float:
    return fit.b - fit.a


FIT_CSV_HEADER = ["K", "q", "seed", "c2", "c1", "a", "b", "lre", "width"]


def fit_row(K, q, seed, fit: FitResult):
    return [K, q, seed, *(f"{v:.17g}" for v in (fit.c2, fit.c1, fit.a, fit.b, fit.lre, band_width(fit)))]


def write_fit_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FIT_CSV_HEADER)
        w.writerows(rows)
