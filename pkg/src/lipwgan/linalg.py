"""Matrix norms used by the weight constraints, and Björck orthonormalization.

Matrices and vectors are plain float64 numpy arrays. ``as_matrix`` and
``as_vector`` validate shape and finiteness at API boundaries.
"""

from typing import NamedTuple
import math
import warnings

import numpy as np

SPECTRAL_TOL = 1e-10
SPECTRAL_MAX_ITER = 5000
BJORCK_TOL = 1e-8
BJORCK_MAX_ITER = 100
PRESCALE_TOL = 1e-6


def as_matrix(W) -> np.ndarray:
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] < 1 or W.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {W.shape}")
    if not np.all(np.isfinite(W)):
        raise ValueError("matrix entries must be finite")
    return W


def as_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    return v


class SpectralEstimate(NamedTuple):
    value: float
    converged: bool
    iterations: int


def power_iteration(W, tol=SPECTRAL_TOL, max_iter=SPECTRAL_MAX_ITER) -> SpectralEstimate:
    """Estimate ``||W||_2`` by power iteration on ``W^T W``.

    The start vector is the normalized all-ones vector. If it is (numerically)
    orthogonal to the top right-singular direction, the iteration restarts
    once from a fixed alternating-sign vector. Convergence is declared when the
    relative change of the estimate drops below ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    W = as_matrix(W)
    n = W.shape[1]
    fro = float(np.sqrt(np.sum(W * W)))
    if fro == 0.0:
        return SpectralEstimate(0.0, True, 0)

    starts = [np.ones(n), np.array([(-1.0) ** k * (k + 1) for k in range(n)])]
    est = SpectralEstimate(0.0, False, 0)
    for x in starts:
        x = x / np.linalg.norm(x)
        sigma = 0.0
        converged = False
        it = 0
        for it in range(1, max_iter + 1):
            y = W @ x
            z = W.T @ y
            nz = np.linalg.norm(z)
            new_sigma = math.sqrt(nz) if nz > 0 else 0.0
            if nz == 0.0:
                break
            x = z / nz
            if abs(new_sigma - sigma) <= tol * new_sigma:
                sigma = new_sigma
                converged = True
                break
            sigma = new_sigma
        # Rayleigh quotient of the final iterate is the sharper estimate
        rq = float(np.linalg.norm(W @ x))
        sigma = max(sigma, rq)
        est = SpectralEstimate(sigma, converged, it)
        if sigma > 1e-12 * fro:
            break
    return est


def spectral_norm(W, tol=SPECTRAL_TOL, max_iter=SPECTRAL_MAX_ITER) -> float:
    """``||W||_2`` via :func:`power_iteration`; warns if it did not converge."""
    est = power_iteration(W, tol, max_iter)
    if not est.converged:
        warnings.warn(
            f"power iteration did not converge in {max_iter} iterations; "
            f"returning last iterate {est.value!r}",
            RuntimeWarning,
            stacklevel=2,
        )
    return est.value


def inf_norm(W) -> float:
    """Maximum absolute row sum."""
    W = as_matrix(W)
    return float(np.max(np.sum(np.abs(W), axis=1)))


def two_inf_norm(W) -> float:
    """``sup_{||x||_2 = 1} ||Wx||_inf``, i.e. the largest Euclidean row norm."""
    W = as_matrix(W)
    return float(np.max(np.sqrt(np.sum(W * W, axis=1))))


def bjorck_orthonormalize(W, iters=BJORCK_MAX_ITER, tol=BJORCK_TOL) -> np.ndarray:
    """Row-orthonormalize a wide matrix with the first-order Björck iteration.

    ``W <- W (I + (I - W^T W) / 2)`` until ``||W W^T - I||_F <= tol``.
    Requires ``rows <= cols`` and ``||W||_2 < sqrt(3)``; callers pre-scale by
    the spectral norm. Returns the last iterate if ``iters`` runs out.
    """
    W = as_matrix(W)
    r, c = W.shape
    if r > c:
        raise ValueError(f"row-orthonormalization needs rows <= cols, got {W.shape}")
    # a loose estimate suffices here; clustered spectra converge slowly at 1e-10
    if power_iteration(W, tol=PRESCALE_TOL).value >= math.sqrt(3.0):
        raise ValueError("input must be pre-scaled so that its spectral norm is < sqrt(3)")
    eye_r = np.eye(r)
    for _ in range(iters):
        gram = W @ W.T
        if np.linalg.norm(gram - eye_r) <= tol:
            break
        # W (I + (I - W^T W)/2) == 1.5 W - 0.5 (W W^T) W
        W = 1.5 * W - 0.5 * (gram @ W)
    return W


def bjorck_residual(W) -> float:
    W = as_matrix(W)
    return float(np.linalg.norm(W @ W.T - np.eye(W.shape[0])))
