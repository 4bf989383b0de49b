"""Deterministic numeric kernels: SPD solves, projections, quantiles, RNG.

Everything here is a pure function on immutable inputs. Random sampling goes
through an explicitly seeded generator; no global RNG state is touched.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
from scipy.special import ndtr, ndtri

from .exceptions import DomainError, NotPositiveDefinite

# Columns of a thin QR whose R diagonal falls below this fraction of the
# largest diagonal are treated as numerically dependent and dropped.
QR_RANK_RTOL = 1e-10

# Cholesky pivots below trace/dim times this floor mean "not positive
# definite"; callers may retry after adding ridge ~1e-8 * Id.
SPD_PIVOT_RTOL = 1e-12


def make_rng(seed: int) -> np.random.Generator:
    """Seeded counter-based generator (PCG64); same seed, same stream."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def sample_normal(rng: np.random.Generator, n: int) -> np.ndarray:
    """n i.i.d. standard-normal draws."""
    return rng.standard_normal(int(n))


def sample_rademacher(rng: np.random.Generator, n: int) -> np.ndarray:
    """n i.i.d. draws from {-1, +1}, each with probability 1/2."""
    return rng.integers(0, 2, size=int(n)).astype(float) * 2.0 - 1.0


def solve_spd(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve gram @ s = rhs for symmetric positive definite gram.

    Raises NotPositiveDefinite when a Cholesky pivot falls below the floor
    SPD_PIVOT_RTOL * trace/dim, which signals (near-)singularity.
    """
    gram = np.asarray(gram, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    dim = gram.shape[0]
    if gram.shape != (dim, dim):
        raise DomainError("gram matrix must be square")
    floor = SPD_PIVOT_RTOL * max(np.trace(gram), 0.0) / max(dim, 1)
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    pivots = np.diag(chol) ** 2
    if pivots.min() <= floor:
        raise NotPositiveDefinite(
            f"pivot {pivots.min():.3e} below floor {floor:.3e}"
        )
    half = scipy.linalg.solve_triangular(chol, rhs, lower=True)
    return scipy.linalg.solve_triangular(chol.T, half, lower=False)


def orthonormal_range(basis: np.ndarray) -> np.ndarray:
    """Orthonormal basis for the numerical column space of `basis`.

    Thin QR with column pivoting; columns with |R_ii| below QR_RANK_RTOL
    times the largest diagonal are discarded, so exactly collinear inputs
    (e.g. a full dummy set after centering) are handled silently.
    """
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    if basis.ndim != 2:
        raise DomainError("expected a 2-d array")
    q_mat, r_mat, _ = scipy.linalg.qr(basis, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r_mat))
    if diag.size == 0 or diag[0] == 0.0:
        return np.zeros((basis.shape[0], 0))
    rank = int(np.sum(diag >= QR_RANK_RTOL * diag[0]))
    return q_mat[:, :rank]


def project_columns(anchors: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Orthogonal projection of each column of `values` onto col(anchors).

    Never materializes the n-by-n projector; cost is O(n q m).
    """
    values = np.asarray(values, dtype=float)
    basis = orthonormal_range(anchors)
    flat = values if values.ndim > 1 else values[:, None]
    out = basis @ (basis.T @ flat)
    return out if values.ndim > 1 else out[:, 0]


def residual_columns(anchors: np.ndarray, values: np.ndarray) -> np.ndarray:
    """(Id - projection) applied columnwise; orthogonal to col(anchors)."""
    return np.asarray(values, dtype=float) - project_columns(anchors, values)


def normal_quantile(p: float) -> float:
    """Standard-normal quantile, |error| <= 1e-9 on (0, 1)."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {p}")
    return float(ndtri(p))


def chi2_1_quantile(alpha: float) -> float:
    """alpha-quantile of the chi-squared distribution with 1 df.

    Computed as the squared normal quantile of (1 + alpha)/2.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    return normal_quantile((1.0 + alpha) / 2.0) ** 2


def chi2_1_cdf(x: float) -> float:
    """CDF of the chi-squared distribution with 1 df."""
    if x <= 0.0:
        return 0.0
    root = np.sqrt(x)
    return float(ndtr(root) - ndtr(-root))
