"""l1-penalized anchor regression via cyclic coordinate descent.

The penalized problem min ||Yt - Xt b||^2 + 2*lam*||b||_1 is solved on the
gamma-transformed data by soft-thresholded coordinate updates with warm
starts along the lambda grid. The equal-weight variant gives every discrete
anchor level the same weight regardless of its size; it reduces to the same
solver through row rescaling.

Note the penalty convention: the objective carries 2*lam*||b||_1, so lambda
values from halved conventions must be doubled before comparison.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import numkern
from .datamodel import AnchorDataset
from .estimators import AnchorFit, _require_centered, fit_anchor, gamma_transform
from .exceptions import DomainError, EmptyLevel, InvalidConfig

MAX_SWEEPS = 100_000
# stop when the largest coordinate move in a sweep drops below
# CONVERGENCE_RTOL * std(transformed response)
CONVERGENCE_RTOL = 1e-9


def soft_threshold(z: float, threshold: float) -> float:
    if z > threshold:
        return z - threshold
    if z < -threshold:
        return z + threshold
    return 0.0


def lasso_coordinate_descent(
    design: np.ndarray,
    response: np.ndarray,
    lam: float,
    start: np.ndarray | None = None,
    max_sweeps: int = MAX_SWEEPS,
):
    """Cyclic coordinate descent for min ||y - Xb||^2 + 2*lam*||b||_1.

    Returns (coef, sweeps, final_move, converged). Inactive coordinates are
    exact zeros. The objective is nonincreasing across sweeps.
    """
    design = np.asarray(design, dtype=float)
    response = np.asarray(response, dtype=float).ravel()
    n, d = design.shape
    col_sq = np.einsum("ij,ij->j", design, design)
    b = np.zeros(d) if start is None else np.array(start, dtype=float)
    resid = response - design @ b
    tol = CONVERGENCE_RTOL * max(float(response.std()), 1e-300)
    move = np.inf
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        move = 0.0
        for k in range(d):
            if col_sq[k] == 0.0:
                b[k] = 0.0
                continue
            old = b[k]
            z = design[:, k] @ resid + col_sq[k] * old
            new = soft_threshold(z, lam) / col_sq[k]
            if new != old:
                resid += design[:, k] * (old - new)
                b[k] = new
                move = max(move, abs(new - old))
        if move < tol:
            return b, sweeps, move, True
    return b, sweeps, move, False


def kkt_violation(design: np.ndarray, response: np.ndarray, b: np.ndarray, lam: float) -> float:
    """Largest violation of the lasso stationarity conditions at b."""
    grad = design.T @ (response - design @ b)
    worst = 0.0
    for k in range(b.shape[0]):
        if b[k] != 0.0:
            worst = max(worst, abs(grad[k] - lam * np.sign(b[k])))
        else:
            worst = max(worst, max(abs(grad[k]) - lam, 0.0))
    return worst


def lambda_max(ds: AnchorDataset, gamma: float) -> float:
    """Smallest lambda with an all-zero solution: ||Xt' Yt||_inf.

    Padded by a relative 1e-12 so the zero solution survives rounding in the
    correlation recomputation inside the solver.
    """
    xt, yt = gamma_transform(ds, gamma)
    return float(np.max(np.abs(xt.T @ yt))) * (1.0 + 1e-12)


def _finish_fit(ds, gamma, lam, design, response, b, sweeps, move, converged):
    if not converged:
        warnings.warn(
            f"coordinate descent stopped after {sweeps} sweeps "
            f"(last move {move:.3e}); returning best iterate",
            RuntimeWarning,
        )
    resid = response - design @ b
    objective = float(resid @ resid + 2.0 * lam * np.abs(b).sum())
    return AnchorFit(
        gamma=float(gamma),
        lam=float(lam),
        coef=b,
        objective=objective,
        iterations=sweeps,
        final_tol=move,
        converged=converged,
        x_means=ds.x_means,
        y_mean=ds.y_mean,
        predictor_names=ds.predictor_names,
    )


def fit_anchor_lasso(
    ds: AnchorDataset,
    gamma: float,
    lam: float,
    start: np.ndarray | None = None,
) -> AnchorFit:
    """Solve the transformed lasso min ||Yt - Xt b||^2 + 2*lam*||b||_1."""
    if gamma < 0 or lam < 0:
        raise DomainError("gamma and lambda must be nonnegative")
    ds = _require_centered(ds)
    if lam == 0.0 and ds.n > ds.d:
        # unpenalized and well-posed: the exact normal-equation solve is both
        # faster and tighter than running descent to machine precision
        return fit_anchor(ds, gamma)
    xt, yt = gamma_transform(ds, gamma)
    b, sweeps, move, converged = lasso_coordinate_descent(xt, yt, lam, start)
    return _finish_fit(ds, gamma, lam, xt, yt, b, sweeps, move, converged)


@dataclass(frozen=True)
class LambdaPath:
    """Warm-started solutions along a decreasing lambda grid."""

    lambdas: np.ndarray
    fits: tuple
    active_sizes: tuple

    def coefficients(self) -> np.ndarray:
        return np.stack([fit.coef for fit in self.fits])


def lambda_path(
    ds: AnchorDataset,
    gamma: float,
    n_lambdas: int = 50,
    ratio: float = 1e-3,
) -> LambdaPath:
    """Log-spaced grid from lambda_max down to ratio * lambda_max."""
    if n_lambdas < 2:
        raise InvalidConfig("n_lambdas must be at least 2")
    if not 0.0 < ratio < 1.0:
        raise InvalidConfig("ratio must lie in (0, 1)")
    ds = _require_centered(ds)
    top = lambda_max(ds, gamma)
    grid = top * np.exp(np.linspace(0.0, np.log(ratio), n_lambdas))
    xt, yt = gamma_transform(ds, gamma)
    fits = []
    warm = None
    for lam in grid:
        b, sweeps, move, converged = lasso_coordinate_descent(xt, yt, lam, warm)
        fits.append(_finish_fit(ds, gamma, lam, xt, yt, b, sweeps, move, converged))
        warm = b
    return LambdaPath(
        lambdas=grid,
        fits=tuple(fits),
        active_sizes=tuple(int(np.count_nonzero(f.coef)) for f in fits),
    )


def _level_blocks(ds: AnchorDataset):
    if ds.anchor_levels is None:
        raise EmptyLevel("dataset carries no discrete anchor levels")
    blocks = []
    for label, idx in ds.anchor_levels.items():
        idx = np.asarray(idx)
        if idx.size == 0:
            raise EmptyLevel(f"anchor level {label!r} has no rows")
        blocks.append((label, idx))
    return blocks


@dataclass(frozen=True)
class EqualWeightRisk:
    """Per-level breakdown of the equal-weight objective."""

    counts: tuple
    within_moments: tuple  # mean squared within-level-centered residual
    level_means: tuple  # mean residual per level
    gamma: float

    @property
    def value(self) -> float:
        k = len(self.counts)
        within = sum(self.within_moments) / k
        between = self.gamma * sum(m * m for m in self.level_means) / k
        return within + between


def equal_weight_breakdown(ds: AnchorDataset, b: np.ndarray, gamma: float) -> EqualWeightRisk:
    blocks = _level_blocks(ds)
    resid = ds.Y - ds.X @ np.asarray(b, dtype=float)
    counts, within, means = [], [], []
    for _, idx in blocks:
        r = resid[idx]
        mean = float(r.mean())
        counts.append(idx.size)
        means.append(mean)
        within.append(float(np.mean((r - mean) ** 2)))
    return EqualWeightRisk(
        counts=tuple(counts),
        within_moments=tuple(within),
        level_means=tuple(means),
        gamma=float(gamma),
    )


def equal_weight_objective(ds: AnchorDataset, b: np.ndarray, gamma: float) -> float:
    """Equal-weight empirical risk: every anchor level counts the same."""
    return equal_weight_breakdown(ds, b, gamma).value


def _equal_weight_design(ds: AnchorDataset, gamma: float):
    """Row-rescaled stacked system whose residual energy is n * risk."""
    blocks = _level_blocks(ds)
    n, k = ds.n, len(blocks)
    x_rows, y_rows = [], []
    for _, idx in blocks:
        xa, ya = ds.X[idx], ds.Y[idx]
        x_mean, y_mean = xa.mean(axis=0), ya.mean()
        within_scale = np.sqrt(n / (k * idx.size))
        x_rows.append((xa - x_mean) * within_scale)
        y_rows.append((ya - y_mean) * within_scale)
        mean_scale = np.sqrt(n * gamma / k)
        x_rows.append(x_mean[None, :] * mean_scale)
        y_rows.append(np.array([y_mean * mean_scale]))
    return np.vstack(x_rows), np.concatenate(y_rows)


def fit_equal_weight_lasso(ds: AnchorDataset, gamma: float, lam: float) -> AnchorFit:
    """Minimize n * equal-weight risk + 2*lam*||b||_1 by coordinate descent."""
    if gamma < 0 or lam < 0:
        raise DomainError("gamma and lambda must be nonnegative")
    ds = _require_centered(ds)
    design, response = _equal_weight_design(ds, gamma)
    b, sweeps, move, converged = lasso_coordinate_descent(design, response, lam)
    return _finish_fit(ds, gamma, lam, design, response, b, sweeps, move, converged)


def _project_l1_ball(v: np.ndarray, radius: float) -> np.ndarray:
    norm = np.abs(v).sum()
    if norm <= radius:
        return v
    if radius <= 0.0:
        return np.zeros_like(v)
    # Duchi et al. simplex projection applied to |v|
    u = np.sort(np.abs(v))[::-1]
    cumsum = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, v.size + 1) > (cumsum - radius))[0][-1]
    theta = (cumsum[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(np.abs(v) - theta, 0.0)


def anchor_compatibility(
    ds: AnchorDataset,
    gamma: float,
    active: np.ndarray,
    stretch: float = 8.0,
    restarts: int = 50,
    iterations: int = 400,
    seed: int = 0,
) -> float:
    """Heuristic lower bound on the restricted-eigenvalue-type constant.

    Minimizes |S| b' G b over the cone {||b_S||_1 = 1, ||b_-S||_1 <= L} by
    projected subgradient descent with random restarts, where G pools the
    per-level second-moment matrices with equal level weights; the reported
    value is min(gamma, 1) times the best cone value found. This is a
    search-based bound, not a certificate, and is never used inside
    estimation.
    """
    active = np.asarray(active, dtype=int)
    if active.size == 0:
        raise DomainError("active set must be nonempty")
    ds = _require_centered(ds)
    blocks = _level_blocks(ds)
    k = len(blocks)
    gram = np.zeros((ds.d, ds.d))
    for _, idx in blocks:
        xa = ds.X[idx]
        gram += xa.T @ xa / idx.size
    gram /= k
    rest = np.setdiff1d(np.arange(ds.d), active)
    lip = max(float(np.linalg.eigvalsh(gram).max()), 1e-12)
    rng = numkern.make_rng(seed)

    def cone_project(b):
        s_norm = np.abs(b[active]).sum()
        if s_norm < 1e-12:
            b[active] = 1.0 / active.size
            s_norm = 1.0
        b[active] /= s_norm
        if rest.size:
            b[rest] = _project_l1_ball(b[rest], stretch)
        return b

    best = np.inf
    for _ in range(restarts):
        b = rng.standard_normal(ds.d)
        b = cone_project(b)
        for it in range(iterations):
            step = 1.0 / (lip * (1.0 + it / 50.0))
            b = cone_project(b - step * 2.0 * (gram @ b))
        value = active.size * float(b @ gram @ b)
        best = min(best, value)
    return min(gamma, 1.0) * best


def excess_risk_scaling(
    scm,
    gamma: float,
    n_grid,
    replicates: int,
    seed: int = 0,
    lam_scale: float = 1.0,
) -> dict:
    """Log-log slope of population excess equal-weight risk against n_min.

    For each n, fits the equal-weight lasso with lam proportional to
    sqrt((log d + log k)/n_min) and evaluates the population excess risk
    through the model oracle; returns the regression slope over the grid.
    """
    from . import scm as scm_mod

    if replicates < 1:
        raise InvalidConfig("replicates must be positive")
    n_grid = [int(n) for n in n_grid]
    if len(n_grid) < 2:
        raise InvalidConfig("need at least two sample sizes")
    target = scm_mod.population_anchor(scm, gamma)
    base_risk = scm_mod.population_equal_weight_risk(scm, target, gamma)
    rng = numkern.make_rng(seed)
    log_n, log_excess = [], []
    mean_excess = []
    for n in n_grid:
        excesses = []
        for _ in range(replicates):
            ds = scm_mod.sample(scm, n, rng)
            n_min = min(len(ix) for ix in ds.anchor_levels.values())
            k = len(ds.anchor_levels)
            lam_pop = lam_scale * np.sqrt(
                (np.log(ds.d) + np.log(k)) / n_min
            )
            fit = fit_equal_weight_lasso(ds, gamma, n * lam_pop)
            excess = scm_mod.population_equal_weight_risk(scm, fit.coef, gamma) - base_risk
            excesses.append(max(excess, 1e-15))
        log_n.append(np.log(n))
        mean = float(np.mean(excesses))
        mean_excess.append(mean)
        log_excess.append(np.log(mean))
    slope = float(np.polyfit(log_n, log_excess, 1)[0])
    return {
        "slope": slope,
        "n_grid": n_grid,
        "mean_excess": mean_excess,
    }
