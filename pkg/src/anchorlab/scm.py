"""Linear structural-causal-model oracle.

A model is the equation system (X, Y, H) = B (X, Y, H) + noise + M A with
component order (X_1..X_d, Y, H_1..H_r). Everything downstream — sampling,
exact covariances, population coefficients, shift risks, worst-case sets,
replicability scenarios and causal effects — is derived from (B, M, noise
scales, anchor distribution). The equilibrium reading requires Id - B to be
invertible; for cyclic graphs with spectral radius >= 1 a warning is issued
because the iterate-to-equilibrium interpretation no longer applies.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import numkern
from .datamodel import AnchorDataset
from .exceptions import (
    AssumptionViolated,
    CyclicGraph,
    DomainError,
    ProjectabilityViolated,
)

RANK_TOL = 1e-9


@dataclass(frozen=True)
class AnchorDistribution:
    """Distribution of the exogenous anchor vector A.

    kind "gaussian" draws N(0, gram); kind "discrete" draws rows of `levels`
    with probabilities `probs` (uniform by default). Rademacher anchors are
    the discrete two-level case {-1, +1}.
    """

    kind: str
    gram: np.ndarray | None = None
    levels: np.ndarray | None = None
    probs: np.ndarray | None = None

    @staticmethod
    def rademacher() -> "AnchorDistribution":
        return AnchorDistribution.discrete([[-1.0], [1.0]])

    @staticmethod
    def gaussian(gram) -> "AnchorDistribution":
        return AnchorDistribution(kind="gaussian", gram=np.atleast_2d(np.asarray(gram, float)))

    @staticmethod
    def discrete(levels, probs=None) -> "AnchorDistribution":
        levels = np.atleast_2d(np.asarray(levels, dtype=float))
        k = levels.shape[0]
        probs = np.full(k, 1.0 / k) if probs is None else np.asarray(probs, float)
        if probs.shape != (k,) or abs(probs.sum() - 1.0) > 1e-12 or (probs < 0).any():
            raise DomainError("level probabilities must be a distribution")
        return AnchorDistribution(kind="discrete", levels=levels, probs=probs)

    @property
    def q(self) -> int:
        if self.kind == "gaussian":
            return self.gram.shape[0]
        return self.levels.shape[1]

    def second_moment(self) -> np.ndarray:
        """E[A A'] (the Gram matrix of the anchor)."""
        if self.kind == "gaussian":
            return self.gram
        return (self.levels * self.probs[:, None]).T @ self.levels

    def draw(self, rng: np.random.Generator, n: int):
        """Returns (values n x q, labels or None)."""
        if self.kind == "gaussian":
            chol = np.linalg.cholesky(
                self.gram + 1e-15 * np.eye(self.q) * max(np.trace(self.gram), 1.0)
            )
            return rng.standard_normal((n, self.q)) @ chol.T, None
        idx = rng.choice(self.levels.shape[0], size=n, p=self.probs)
        return self.levels[idx], idx


@dataclass(frozen=True)
class Shift:
    """Deterministic shift vector or a mean-zero random shift covariance."""

    vector: np.ndarray | None = None
    covariance: np.ndarray | None = None

    def __post_init__(self):
        if (self.vector is None) == (self.covariance is None):
            raise DomainError("specify exactly one of vector or covariance")
        if self.vector is not None:
            object.__setattr__(self, "vector", np.asarray(self.vector, float).ravel())
        else:
            object.__setattr__(self, "covariance", np.atleast_2d(np.asarray(self.covariance, float)))


@dataclass(frozen=True)
class LinearScm:
    """Structural system over (X_1..X_d, Y, H_1..H_r) driven by anchors A."""

    d: int
    r: int
    B: np.ndarray
    M: np.ndarray
    noise_scales: np.ndarray
    anchor: AnchorDistribution

    def __post_init__(self):
        p = self.p
        B = np.asarray(self.B, dtype=float).reshape(p, p)
        M = np.asarray(self.M, dtype=float).reshape(p, self.q)
        scales = np.asarray(self.noise_scales, dtype=float).ravel()
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "noise_scales", scales)
        if scales.shape != (p,):
            raise DomainError(f"noise_scales must have length {p}")
        sv_min = np.linalg.svd(np.eye(p) - B, compute_uv=False).min()
        if sv_min <= 1e-10:
            raise DomainError("Id - B is numerically singular")
        if not self.is_acyclic:
            rho = np.max(np.abs(np.linalg.eigvals(B)))
            if rho >= 1.0:
                warnings.warn(
                    f"cyclic system with spectral radius {rho:.3f} >= 1: the "
                    "iterate-to-equilibrium interpretation does not apply",
                    RuntimeWarning,
                )

    @property
    def p(self) -> int:
        return self.d + 1 + self.r

    @property
    def q(self) -> int:
        return self.anchor.q

    @property
    def y_index(self) -> int:
        return self.d

    @property
    def is_acyclic(self) -> bool:
        # self-cycles (diagonal entries) are allowed and ignored here
        off = np.asarray(self.B) != 0
        np.fill_diagonal(off, False)
        remaining = list(range(self.p))
        adj = off.copy()
        while remaining:
            sinks = [k for k in remaining if not adj[:, k][remaining].any()]
            if not sinks:
                return False
            for k in sinks:
                remaining.remove(k)
        return True

    def unmixing(self) -> np.ndarray:
        """(Id - B)^{-1}; maps structural inputs to equilibrium values."""
        return np.linalg.inv(np.eye(self.p) - self.B)

    def noise_covariance(self) -> np.ndarray:
        return np.diag(self.noise_scales**2)

    def residual_weights(self, b: np.ndarray) -> np.ndarray:
        """Vector w with Y - X'b = w'(noise + M A) at equilibrium."""
        inv = self.unmixing()
        b = np.asarray(b, dtype=float).ravel()
        return inv[self.y_index, :] - b @ inv[: self.d, :]


def example_iv_chain() -> LinearScm:
    """Classic one-predictor IV setting with a hidden confounder.

    A -> X, H -> X, H -> Y (weight 2), X -> Y; Rademacher anchor, unit
    noise. Partialling out gives 2, OLS 5/3, the IV endpoint 1.
    """
    B = np.zeros((3, 3))
    B[0, 2] = 1.0  # X <- H
    B[1, 0] = 1.0  # Y <- X
    B[1, 2] = 2.0  # Y <- 2H
    M = np.array([[1.0], [0.0], [0.0]])
    return LinearScm(
        d=1, r=1, B=B, M=M,
        noise_scales=np.ones(3),
        anchor=AnchorDistribution.rademacher(),
    )


def example_confounder_shift() -> LinearScm:
    """A -> H -> {X, Y}, X -> Y; shifts act on the hidden confounder."""
    B = np.zeros((3, 3))
    B[0, 2] = 1.0  # X <- H
    B[1, 0] = 1.0  # Y <- X
    B[1, 2] = 2.0  # Y <- 2H
    M = np.array([[0.0], [0.0], [1.0]])
    return LinearScm(
        d=1, r=1, B=B, M=M,
        noise_scales=np.ones(3),
        anchor=AnchorDistribution.rademacher(),
    )


def sample(
    scm: LinearScm,
    n: int,
    rng: np.random.Generator,
    shift: Shift | None = None,
    return_hidden: bool = False,
):
    """Draw n equilibrium rows; under a shift, v replaces the anchor input.

    The anchor column is filled either way; under a shift it does not enter
    the system. Discrete anchors populate `anchor_levels`.
    """
    if n < 1:
        raise DomainError("n must be positive")
    inv = scm.unmixing()
    noise = rng.standard_normal((n, scm.p)) * scm.noise_scales
    a_vals, labels = scm.anchor.draw(rng, n)
    if shift is None:
        inputs = noise + a_vals @ scm.M.T
    elif shift.vector is not None:
        inputs = noise + shift.vector
    else:
        chol = np.linalg.cholesky(
            shift.covariance + 1e-15 * np.eye(scm.p) * max(np.trace(shift.covariance), 1.0)
        )
        inputs = noise + rng.standard_normal((n, scm.p)) @ chol.T
    values = inputs @ inv.T
    anchor_levels = None
    if labels is not None:
        anchor_levels = {
            int(lev): np.flatnonzero(labels == lev) for lev in np.unique(labels)
        }
    ds = AnchorDataset(
        X=values[:, : scm.d],
        Y=values[:, scm.y_index],
        A=a_vals,
        anchor_levels=anchor_levels,
    )
    if return_hidden:
        return ds, values[:, scm.d + 1 :]
    return ds


def population_covariance(scm: LinearScm) -> np.ndarray:
    """Exact joint covariance of (X, Y, H, A), in that block order."""
    inv = scm.unmixing()
    gram = scm.anchor.second_moment()
    sigma_v = inv @ (scm.noise_covariance() + scm.M @ gram @ scm.M.T) @ inv.T
    cross = inv @ scm.M @ gram  # Cov((X,Y,H), A)
    top = np.hstack([sigma_v, cross])
    bottom = np.hstack([cross.T, gram])
    return np.vstack([top, bottom])


def _moment_blocks(scm: LinearScm):
    joint = population_covariance(scm)
    d, p = scm.d, scm.p
    sxx = joint[:d, :d]
    sxy = joint[:d, d]
    sax = joint[p:, :d]
    say = joint[p:, d]
    gram = scm.anchor.second_moment()
    return sxx, sxy, sax, say, gram


def population_anchor(scm: LinearScm, gamma: float) -> np.ndarray:
    """Population coefficient for penalty weight gamma (inf for the IV limit)."""
    if gamma == math.inf:
        return population_iv(scm)
    if gamma < 0:
        raise DomainError(f"gamma must be nonnegative, got {gamma}")
    sxx, sxy, sax, say, gram = _moment_blocks(scm)
    gram_inv_ax = np.linalg.solve(gram, sax)
    lhs = sxx + (gamma - 1.0) * sax.T @ gram_inv_ax
    rhs = sxy + (gamma - 1.0) * gram_inv_ax.T @ say
    return numkern.solve_spd(lhs, rhs)


def population_iv(scm: LinearScm) -> np.ndarray:
    """Training-MSE minimizer subject to E[A (Y - X'b)] = 0.

    Solved by the null-space method of the equality-constrained quadratic
    program; requires the constraint system to be consistent
    (projectability), otherwise the limit does not exist.
    """
    sxx, sxy, sax, say, _ = _moment_blocks(scm)
    check = projectability_check(scm)
    if not check["holds"]:
        raise ProjectabilityViolated(
            "rank(Cov(A,X)) < rank([Cov(A,X) | Cov(A,Y)]); the penalty "
            "cannot be driven to zero"
        )
    particular, *_ = np.linalg.lstsq(sax, say, rcond=None)
    # null space of the constraint matrix
    _, sv, vt = np.linalg.svd(sax)
    rank = int(np.sum(sv > RANK_TOL * (sv[0] if sv.size else 1.0)))
    null = vt[rank:].T
    if null.shape[1] == 0:
        return particular
    reduced = null.T @ sxx @ null
    z = numkern.solve_spd(reduced, null.T @ (sxy - sxx @ particular))
    return particular + null @ z


def shift_risk(scm: LinearScm, b: np.ndarray, shift: Shift | None = None) -> float:
    """Exact population MSE of b under the shifted distribution.

    Decomposes as (risk with no anchor input) + energy of the shift along
    the residual weight vector.
    """
    w = scm.residual_weights(b)
    base = float(w @ scm.noise_covariance() @ w)
    if shift is None:
        return base
    if shift.vector is not None:
        return base + float(w @ shift.vector) ** 2
    return base + float(w @ shift.covariance @ w)


def worst_case_risk(scm: LinearScm, b: np.ndarray, gamma: float) -> float:
    """Penalized criterion at b; equals the supremum of shift_risk over the
    gamma-perturbation ellipsoid."""
    if gamma < 0:
        raise DomainError(f"gamma must be nonnegative, got {gamma}")
    w = scm.residual_weights(b)
    base = float(w @ scm.noise_covariance() @ w)
    gram = scm.anchor.second_moment()
    mw = scm.M.T @ w
    return base + gamma * float(mw @ gram @ mw)


def population_equal_weight_risk(scm: LinearScm, b: np.ndarray, gamma: float) -> float:
    """Equal-weight population risk for discrete anchors: every level of A
    contributes with weight 1/k regardless of its probability."""
    if scm.anchor.kind != "discrete":
        raise DomainError("equal-weight risk requires a discrete anchor")
    w = scm.residual_weights(b)
    base = float(w @ scm.noise_covariance() @ w)
    level_means = scm.anchor.levels @ (scm.M.T @ w)
    return base + gamma * float(np.mean(level_means**2))


@dataclass(frozen=True)
class PerturbationSet:
    """Ellipsoid of shifts {v : v v' <= Q} with Q = gamma * M G M'."""

    gamma: float
    bound: np.ndarray
    _eigvals: np.ndarray = field(repr=False, default=None)
    _eigvecs: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        vals, vecs = np.linalg.eigh(self.bound)
        object.__setattr__(self, "_eigvals", vals)
        object.__setattr__(self, "_eigvecs", vecs)

    def contains(self, v, tol: float = 1e-9) -> bool:
        """v is inside iff v lies in range(Q) and v' Q^+ v <= 1."""
        v = np.asarray(v, dtype=float).ravel()
        scale = max(float(self._eigvals.max()), 1e-300)
        coords = self._eigvecs.T @ v
        in_range = self._eigvals > RANK_TOL * scale
        off_range = coords[~in_range]
        if off_range.size and np.abs(off_range).max() > tol * max(1.0, np.linalg.norm(v)):
            return False
        quad = float(np.sum(coords[in_range] ** 2 / self._eigvals[in_range]))
        return quad <= 1.0 + tol

    def boundary_grid(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Points v = Q^{1/2} u with u uniform on the sphere in range(Q)."""
        scale = max(float(self._eigvals.max()), 1e-300)
        keep = self._eigvals > RANK_TOL * scale
        half = self._eigvecs[:, keep] * np.sqrt(self._eigvals[keep])
        dim = int(keep.sum())
        if dim == 0:
            return np.zeros((count, self.bound.shape[0]))
        u = rng.standard_normal((count, dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return u @ half.T


def perturbation_set(scm: LinearScm, gamma: float) -> PerturbationSet:
    if gamma < 0:
        raise DomainError(f"gamma must be nonnegative, got {gamma}")
    gram = scm.anchor.second_moment()
    return PerturbationSet(gamma=float(gamma), bound=gamma * scm.M @ gram @ scm.M.T)


def invariance_set_residual(scm: LinearScm, b: np.ndarray) -> np.ndarray:
    """E[A (Y - X'b)] = Cov(A,Y) - Cov(A,X) b; zero iff the residual
    distribution is invariant to shifts in span(M)."""
    _, _, sax, say, _ = _moment_blocks(scm)
    return say - sax @ np.asarray(b, dtype=float).ravel()


def _rank(mat: np.ndarray) -> int:
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > RANK_TOL * sv[0]))


def projectability_check(model_or_ds) -> dict:
    """Rank test: can the anchor-projected residual be driven to zero?

    Works on a LinearScm (exact covariances) or an AnchorDataset (sample
    covariances). Returns {"holds": bool, "penalty_min": float} where
    penalty_min is the achieved minimum of E[(P_A (Y - X'b))^2].
    """
    if isinstance(model_or_ds, LinearScm):
        _, _, sax, say, gram = _moment_blocks(model_or_ds)
    else:
        ds = model_or_ds
        x = ds.X - ds.X.mean(axis=0)
        y = ds.Y - ds.Y.mean()
        a = ds.A - ds.A.mean(axis=0)
        n = ds.n
        sax, say, gram = a.T @ x / n, a.T @ y / n, a.T @ a / n
    holds = _rank(sax) == _rank(np.column_stack([sax, say]))
    # weight by G^{-1/2}: min_b ||G^{-1/2}(Cov(A,Y) - Cov(A,X) b)||^2
    vals, vecs = np.linalg.eigh(gram)
    keep = vals > RANK_TOL * max(float(vals.max()), 1e-300)
    white = vecs[:, keep] / np.sqrt(vals[keep])
    wax, way = white.T @ sax, white.T @ say
    sol, *_ = np.linalg.lstsq(wax, way, rcond=None)
    resid = way - wax @ sol
    return {"holds": bool(holds), "penalty_min": float(resid @ resid)}


@dataclass(frozen=True)
class ReplicabilityScenario:
    """Train/test pair sharing (B, M) but with rescaled anchors and noise.

    The anchor input is kappa * A + xi with xi mean-zero noise independent
    of A; the test side uses its own anchor distribution, kappa and xi, and
    noise covariance L times the training one (unless overridden to create
    a counterexample).
    """

    base: LinearScm
    kappa: float = 1.0
    xi_cov: np.ndarray | None = None
    test_anchor: AnchorDistribution | None = None
    kappa_test: float = 1.0
    xi_cov_test: np.ndarray | None = None
    noise_factor: float = 1.0
    test_noise_scales: np.ndarray | None = None

    def __post_init__(self):
        if self.kappa == 0.0 or self.kappa_test == 0.0:
            raise DomainError("kappa must be nonzero on both sides")
        if self.noise_factor <= 0.0:
            raise DomainError("noise factor must be positive")


def _side_moments(scm, anchor, kappa, xi_cov, noise_cov):
    """Covariance blocks for one side of a replicability scenario."""
    gram = anchor.second_moment()
    q = gram.shape[0]
    delta_cov = kappa**2 * gram
    if xi_cov is not None:
        delta_cov = delta_cov + np.asarray(xi_cov, float).reshape(q, q)
    inv = scm.unmixing()
    sigma_v = inv @ (noise_cov + scm.M @ delta_cov @ scm.M.T) @ inv.T
    cross = kappa * gram @ scm.M.T @ inv.T  # Cov(A, (X,Y,H))
    d = scm.d
    return {
        "sxx": sigma_v[:d, :d],
        "sxy": sigma_v[:d, d],
        "sax": cross[:, :d],
        "say": cross[:, d],
    }


def _constrained_min(blocks) -> np.ndarray:
    sax, say = blocks["sax"], blocks["say"]
    rank_a = _rank(sax)
    if rank_a != _rank(np.column_stack([sax, say])):
        raise ProjectabilityViolated("constraint system E[A(Y - X'b)] = 0 infeasible")
    particular, *_ = np.linalg.lstsq(sax, say, rcond=None)
    _, sv, vt = np.linalg.svd(sax)
    rank = int(np.sum(sv > RANK_TOL * (sv[0] if sv.size else 1.0)))
    null = vt[rank:].T
    if null.shape[1] == 0:
        return particular
    reduced = null.T @ blocks["sxx"] @ null
    z = numkern.solve_spd(reduced, null.T @ (blocks["sxy"] - blocks["sxx"] @ particular))
    return particular + null @ z


def replicability_experiment(scen: ReplicabilityScenario) -> dict:
    """Population IV-limit coefficients on both sides and their gap."""
    scm = scen.base
    train_noise = scm.noise_covariance()
    if scen.test_noise_scales is not None:
        test_noise = np.diag(np.asarray(scen.test_noise_scales, float) ** 2)
    else:
        test_noise = scen.noise_factor * train_noise
    train = _side_moments(scm, scm.anchor, scen.kappa, scen.xi_cov, train_noise)
    test_anchor = scen.test_anchor if scen.test_anchor is not None else scm.anchor
    test = _side_moments(scm, test_anchor, scen.kappa_test, scen.xi_cov_test, test_noise)
    b_train = _constrained_min(train)
    b_test = _constrained_min(test)
    return {
        "b_train": b_train,
        "b_test": b_test,
        "discrepancy": float(np.max(np.abs(b_train - b_test))),
    }


def total_causal_effect(scm: LinearScm) -> np.ndarray:
    """Gradient of E[Y | do(X = x)]: cut all edges into X, re-solve."""
    if not scm.is_acyclic:
        raise CyclicGraph("total causal effects require an acyclic graph")
    cut = scm.B.copy()
    cut[: scm.d, :] = 0.0
    inv = np.linalg.inv(np.eye(scm.p) - cut)
    return inv[scm.y_index, : scm.d].copy()


# --- graph machinery -------------------------------------------------------

def graph_parents(scm: LinearScm) -> list:
    """Parent lists over nodes 0..p-1 = (X, Y, H) and p..p+q-1 = anchors.

    Self-cycles are dropped; anchors never have parents.
    """
    p, q = scm.p, scm.q
    parents = [set() for _ in range(p + q)]
    for k in range(p):
        for l in range(p):
            if k != l and scm.B[k, l] != 0.0:
                parents[k].add(l)
        for j in range(q):
            if scm.M[k, j] != 0.0:
                parents[k].add(p + j)
    return [sorted(s) for s in parents]


def d_separated(scm: LinearScm, first, second, given=()) -> bool:
    """Bayes-ball reachability on the induced directed graph.

    Node ids: 0..d-1 the predictors, d the response, d+1..p-1 the hidden
    variables, p..p+q-1 the anchors.
    """
    if not scm.is_acyclic:
        raise CyclicGraph("d-separation is defined on acyclic graphs only")
    parents = graph_parents(scm)
    n_nodes = len(parents)
    children = [[] for _ in range(n_nodes)]
    for node, pars in enumerate(parents):
        for par in pars:
            children[par].append(node)
    first = {int(v) for v in np.atleast_1d(first)}
    second = {int(v) for v in np.atleast_1d(second)}
    conditioned = {int(v) for v in np.atleast_1d(given)} if len(np.atleast_1d(given)) else set()

    # nodes with a conditioned descendant (colliders these open)
    has_cond_desc = set(conditioned)
    frontier = list(conditioned)
    while frontier:
        node = frontier.pop()
        for par in parents[node]:
            if par not in has_cond_desc:
                has_cond_desc.add(par)
                frontier.append(par)

    # ball states: (node, direction); direction "up" = entered from a child
    visited = set()
    queue = [(s, "up") for s in first]
    while queue:
        node, direction = queue.pop()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node not in conditioned and node in second:
            return False
        if direction == "up":
            if node not in conditioned:
                for par in parents[node]:
                    queue.append((par, "up"))
                for child in children[node]:
                    queue.append((child, "down"))
        else:  # entered from a parent
            if node not in conditioned:
                for child in children[node]:
                    queue.append((child, "down"))
            if node in has_cond_desc:
                for par in parents[node]:
                    queue.append((par, "up"))
    return True


def anchor_stability_causal_check(
    scm: LinearScm,
    gamma_grid=(0.25, 0.5, 1.0, 2.0, 4.0, 16.0, 64.0),
    tol: float = 1e-6,
) -> dict:
    """Certify the stability-implies-causality chain on a population model.

    Preconditions: acyclic graph, projectability, and every predictor is
    directly shifted by some anchor. Reports the full gamma path, whether
    it collapses to a single vector, agreement with the do-gradient, and
    absence of hidden X-Y confounders.
    """
    if not scm.is_acyclic:
        raise AssumptionViolated("graph must be acyclic", which="acyclic")
    if not projectability_check(scm)["holds"]:
        raise AssumptionViolated("projectability fails", which="projectability")
    shifted = {k for k in range(scm.d) if np.any(scm.M[k, :] != 0.0)}
    if shifted != set(range(scm.d)):
        raise AssumptionViolated(
            "every predictor needs a direct anchor shift", which="anchor_coverage"
        )
    b_zero = population_anchor(scm, 0.0)
    b_inf = population_iv(scm)
    path = {float(g): population_anchor(scm, g) for g in gamma_grid}
    scale = max(float(np.max(np.abs(b_zero))), 1.0)
    endpoint_gap = float(np.max(np.abs(b_zero - b_inf)))
    path_gap = max(
        (float(np.max(np.abs(bg - b_zero))) for bg in path.values()), default=0.0
    )
    stable = endpoint_gap < tol * scale and path_gap < tol * scale
    report = {
        "stable": stable,
        "endpoint_gap": endpoint_gap,
        "path_gap": path_gap,
        "b_zero": b_zero,
        "b_infinity": b_inf,
        "gamma_path": path,
    }
    if stable:
        effect = total_causal_effect(scm)
        report["total_effect"] = effect
        report["effect_gap"] = float(np.max(np.abs(b_zero - effect)))
        report["matches_total_effect"] = report["effect_gap"] < tol * scale
        # a hidden confounder is a common cause: a directed path into some
        # X_k plus a directed path into Y that does not run through X
        predictors = frozenset(range(scm.d))
        report["hidden_confounder"] = any(
            _has_directed_path(scm, h, scm.y_index, blocked=predictors)
            and any(_has_directed_path(scm, h, k) for k in range(scm.d))
            for h in range(scm.d + 1, scm.p)
        )
    return report


def _has_directed_path(scm: LinearScm, source: int, target: int, blocked=frozenset()) -> bool:
    parents = graph_parents(scm)
    children = [[] for _ in parents]
    for node, pars in enumerate(parents):
        for par in pars:
            children[par].append(node)
    seen, stack = set(), [source]
    while stack:
        node = stack.pop()
        for child in children[node]:
            if child == target:
                return True
            if child not in seen and child not in blocked:
                seen.add(child)
                stack.append(child)
    return False


# --- serialization ---------------------------------------------------------

def scm_to_dict(scm: LinearScm) -> dict:
    anchor = {"kind": scm.anchor.kind}
    if scm.anchor.kind == "gaussian":
        anchor["gram"] = scm.anchor.gram.tolist()
    else:
        anchor["levels"] = scm.anchor.levels.tolist()
        anchor["probs"] = scm.anchor.probs.tolist()
    return {
        "d": scm.d,
        "r": scm.r,
        "q": scm.q,
        "B": scm.B.tolist(),
        "M": scm.M.tolist(),
        "noise_scales": scm.noise_scales.tolist(),
        "anchor": anchor,
    }


def scm_from_dict(spec: dict) -> LinearScm:
    anchor_spec = spec["anchor"]
    kind = anchor_spec["kind"]
    if kind == "gaussian":
        anchor = AnchorDistribution.gaussian(anchor_spec["gram"])
    elif kind == "rademacher":
        anchor = AnchorDistribution.rademacher()
    elif kind == "discrete":
        anchor = AnchorDistribution.discrete(
            anchor_spec["levels"], anchor_spec.get("probs")
        )
    else:
        raise DomainError(f"unknown anchor kind {kind!r}")
    return LinearScm(
        d=int(spec["d"]),
        r=int(spec["r"]),
        B=np.asarray(spec["B"], dtype=float),
        M=np.asarray(spec["M"], dtype=float),
        noise_scales=np.asarray(spec["noise_scales"], dtype=float),
        anchor=anchor,
    )


def load_scm(path) -> LinearScm:
    with open(path, encoding="utf-8") as fh:
        return scm_from_dict(json.load(fh))


def save_scm(path, scm: LinearScm) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scm_to_dict(scm), fh, indent=2)
