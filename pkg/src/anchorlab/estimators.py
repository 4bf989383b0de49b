"""Low-dimensional anchor regression and its endpoints.

The estimator solves

    argmin_b ||(Id - P)(Y - Xb)||^2 + gamma ||P(Y - Xb)||^2,

with P the projection onto the anchor columns. gamma = 0 partials the
anchors out, gamma = 1 is OLS, gamma -> infinity is two-stage least squares.
The infinite endpoint gets its own code path (`fit_iv`) because the
transformed design's conditioning degrades linearly in gamma.

A scikit-learn style wrapper (`AnchorRegression`) is provided at the bottom
so the estimator composes with pipelines and grid search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numkern
from .datamodel import AnchorDataset, center
from .exceptions import (
    DimensionMismatch,
    DomainError,
    NotPositiveDefinite,
    SingularDesign,
    Underidentified,
)

GAMMA_INF = math.inf


@dataclass(frozen=True)
class AnchorFit:
    """Fitted coefficients with (gamma, lambda) provenance."""

    gamma: float
    lam: float
    coef: np.ndarray
    objective: float
    iterations: int = 0
    final_tol: float = 0.0
    converged: bool = True
    x_means: np.ndarray | None = None
    y_mean: float = 0.0
    predictor_names: tuple = ()


def _require_centered(ds: AnchorDataset) -> AnchorDataset:
    return ds if ds.centered else center(ds)


def gamma_transform(ds: AnchorDataset, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Return (Id + (sqrt(gamma) - 1) P) applied columnwise to X and Y."""
    if gamma < 0:
        raise DomainError(f"gamma must be nonnegative, got {gamma}")
    ds = _require_centered(ds)
    shrink = np.sqrt(gamma) - 1.0
    xt = ds.X + shrink * numkern.project_columns(ds.A, ds.X)
    yt = ds.Y + shrink * numkern.project_columns(ds.A, ds.Y)
    return xt, yt


def anchor_objective(ds: AnchorDataset, b: np.ndarray, gamma: float) -> float:
    """Penalized criterion at b: off-anchor residual energy + gamma on-anchor."""
    ds = _require_centered(ds)
    resid = ds.Y - ds.X @ b
    on_anchor = numkern.project_columns(ds.A, resid)
    off_anchor = resid - on_anchor
    return float(off_anchor @ off_anchor + gamma * (on_anchor @ on_anchor))


def fit_anchor(ds: AnchorDataset, gamma: float) -> AnchorFit:
    """Plug-in estimator: OLS on the gamma-transformed data.

    gamma = inf is routed to `fit_iv`. Raises SingularDesign when the
    transformed Gram matrix is not positive definite (in particular n <= d).
    """
    if gamma == GAMMA_INF:
        return fit_iv(ds)
    if gamma < 0:
        raise DomainError(f"gamma must be nonnegative, got {gamma}")
    ds = _require_centered(ds)
    if ds.n <= ds.d:
        raise SingularDesign(
            f"n={ds.n} <= d={ds.d}; use the l1-penalized solver for this regime"
        )
    xt, yt = gamma_transform(ds, gamma)
    try:
        coef = numkern.solve_spd(xt.T @ xt, xt.T @ yt)
    except NotPositiveDefinite as exc:
        raise SingularDesign(
            "transformed design is singular; add ridge or reduce d"
        ) from exc
    return AnchorFit(
        gamma=float(gamma),
        lam=0.0,
        coef=coef,
        objective=anchor_objective(ds, coef, gamma),
        x_means=ds.x_means,
        y_mean=ds.y_mean,
        predictor_names=ds.predictor_names,
    )


def fit_iv(ds: AnchorDataset) -> AnchorFit:
    """Two-stage least squares: minimize the anchor-projected residual only.

    Raises Underidentified when rank(P X) < d, in which case the minimizer
    is not unique and no pseudo-inverse solution is returned.
    """
    ds = _require_centered(ds)
    x_proj = numkern.project_columns(ds.A, ds.X)
    y_proj = numkern.project_columns(ds.A, ds.Y)
    # rank relative to the unprojected design's scale, so an (almost) fully
    # annihilated X is reported as rank deficient rather than rank d
    sv = np.linalg.svd(x_proj, compute_uv=False)
    scale = max(float(np.linalg.norm(ds.X, ord=2)), 1e-300)
    rank = int(np.sum(sv > numkern.QR_RANK_RTOL * scale))
    if rank < ds.d:
        raise Underidentified(
            f"anchor-projected design has rank {rank} < d={ds.d}"
        )
    try:
        coef = numkern.solve_spd(x_proj.T @ x_proj, x_proj.T @ y_proj)
    except NotPositiveDefinite as exc:
        raise Underidentified(str(exc)) from exc
    resid_proj = y_proj - x_proj @ coef
    return AnchorFit(
        gamma=GAMMA_INF,
        lam=0.0,
        coef=coef,
        objective=float(resid_proj @ resid_proj),
        x_means=ds.x_means,
        y_mean=ds.y_mean,
        predictor_names=ds.predictor_names,
    )


def predict(fit: AnchorFit, x_new: np.ndarray) -> np.ndarray:
    """ (x_new - training means) @ coef + training Y mean."""
    x_new = np.atleast_2d(np.asarray(x_new, dtype=float))
    if x_new.shape[1] != fit.coef.shape[0]:
        raise DimensionMismatch(
            f"expected {fit.coef.shape[0]} columns, got {x_new.shape[1]}"
        )
    x_means = fit.x_means if fit.x_means is not None else 0.0
    return (x_new - x_means) @ fit.coef + fit.y_mean


class AnchorRegression:
    """scikit-learn style front end for anchor regression.

    Parameters
    ----------
    gamma : float or math.inf, default 1.0
        Penalty weight on the anchor-projected residual.
    lam : float, default 0.0
        l1 penalty; positive values delegate to the coordinate-descent
        solver, which also covers n <= d.
    """

    def __init__(self, gamma: float = 1.0, lam: float = 0.0):
        self.gamma = gamma
        self.lam = lam

    def get_params(self, deep: bool = True) -> dict:
        return {"gamma": self.gamma, "lam": self.lam}

    def set_params(self, **params) -> "AnchorRegression":
        for key, value in params.items():
            if key not in ("gamma", "lam"):
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, value)
        return self

    def fit(self, X, y, anchors) -> "AnchorRegression":
        ds = center(AnchorDataset(X=X, Y=y, A=anchors))
        if self.lam > 0:
            from .sparse import fit_anchor_lasso

            self.fit_ = fit_anchor_lasso(ds, self.gamma, self.lam)
        else:
            self.fit_ = fit_anchor(ds, self.gamma)
        self.coef_ = self.fit_.coef
        self.intercept_ = float(
            self.fit_.y_mean - self.fit_.x_means @ self.fit_.coef
        )
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "fit_"):
            raise RuntimeError("estimator is not fitted yet")
        return predict(self.fit_, X)

    def score(self, X, y) -> float:
        y = np.asarray(y, dtype=float).ravel()
        resid = y - self.predict(X)
        total = y - y.mean()
        return 1.0 - float(resid @ resid) / float(total @ total)
