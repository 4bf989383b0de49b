import numpy as np
import pytest

from anchorlab import numkern, scm, sparse
from anchorlab.datamodel import center, from_levels
from anchorlab.estimators import fit_anchor
from anchorlab.exceptions import DomainError, EmptyLevel, InsufficientLevels
from anchorlab.modelsel import (
    anchor_stability_test,
    assign_level_folds,
    conditional_mse_quantiles,
    cv_gamma,
    nearest_rank_quantile,
    quantile_gamma,
    replicability_rank,
    subset_rows,
)
from anchorlab.scm import AnchorDistribution, LinearScm


def heterogeneous_model(n_levels=20, spread=2.5):
    """Anchored chain with a hidden confounder and a many-level anchor."""
    levels = np.linspace(-spread, spread, n_levels)[:, None]
    B = np.zeros((3, 3))
    B[0, 2] = 1.0
    B[1, 0] = 1.0
    B[1, 2] = 2.0
    return LinearScm(
        d=1, r=1, B=B, M=np.array([[1.0], [0.0], [0.0]]),
        noise_scales=np.ones(3),
        anchor=AnchorDistribution.discrete(levels),
    )


def ranking_model():
    """X1 an invariant cause, X2 anchor-driven and confounded, not a cause."""
    B = np.zeros((4, 4))
    B[1, 3] = 1.0  # X2 <- H
    B[2, 0] = 1.0  # Y <- X1
    B[2, 3] = 1.0  # Y <- H
    return LinearScm(
        d=2, r=1, B=B, M=np.array([[1.0], [3.0], [0.0], [0.0]]),
        noise_scales=np.ones(4),
        anchor=AnchorDistribution.rademacher(),
    )


class TestQuantileGamma:
    def test_95_percent(self):
        assert quantile_gamma(0.95) == pytest.approx(3.8415, abs=1e-4)

    def test_unit_gamma_alpha(self):
        # the alpha whose optimal penalty weight is exactly 1
        assert numkern.chi2_1_cdf(1.0) == pytest.approx(0.6827, abs=1e-4)
        assert quantile_gamma(0.6827) == pytest.approx(1.0, abs=1e-3)

    def test_small_alpha_limit(self):
        assert quantile_gamma(1e-10) < 1e-8

    def test_domain(self):
        with pytest.raises(DomainError):
            quantile_gamma(1.0)


class TestNearestRank:
    def test_lower_median_of_two(self):
        assert nearest_rank_quantile(np.array([9.0, 1.0]), 0.5) == 1.0

    def test_max_at_high_alpha(self):
        assert nearest_rank_quantile(np.array([3.0, 1.0, 2.0]), 0.99) == 3.0

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            nearest_rank_quantile(np.array([]), 0.5)


class TestConditionalMse:
    def test_single_level_equals_overall(self):
        rng = numkern.make_rng(0)
        ds = from_levels(rng.standard_normal((50, 1)), rng.standard_normal(50), ["a"] * 50)
        report = conditional_mse_quantiles(ds, np.zeros(1), [0.1, 0.5, 0.9])
        overall = float(np.mean(ds.Y**2))
        assert all(q == pytest.approx(overall) for q in report.quantiles)

    def test_two_level_median(self):
        x = np.zeros((4, 1))
        y = np.array([1.0, -1.0, 3.0, -3.0])  # level MSEs 1 and 9
        ds = from_levels(x, y, ["a", "a", "b", "b"])
        report = conditional_mse_quantiles(ds, np.zeros(1), [0.5])
        assert report.quantiles[0] == 1.0

    def test_quantiles_nondecreasing(self):
        rng = numkern.make_rng(1)
        ds = scm.sample(heterogeneous_model(), 2000, rng)
        report = conditional_mse_quantiles(ds, np.array([1.5]), [0.1, 0.5, 0.9])
        assert list(report.quantiles) == sorted(report.quantiles)

    def test_requires_levels(self):
        rng = numkern.make_rng(2)
        from anchorlab.datamodel import AnchorDataset

        ds = AnchorDataset(
            X=rng.standard_normal((10, 1)),
            Y=rng.standard_normal(10),
            A=rng.standard_normal((10, 1)),
        )
        with pytest.raises(EmptyLevel):
            conditional_mse_quantiles(ds, np.zeros(1), [0.5])

    def test_quantile_identity_monte_carlo(self):
        # Gaussian anchors: the alpha-quantile of the anchor-conditional MSE
        # equals the penalized criterion at gamma = chi-squared quantile
        rng = numkern.make_rng(3)
        model = LinearScm(
            d=1, r=1, B=heterogeneous_model().B,
            M=np.array([[1.0], [0.0], [0.0]]),
            noise_scales=np.ones(3),
            anchor=AnchorDistribution.gaussian([[1.0]]),
        )
        b = np.array([1.4])
        w = model.residual_weights(b)
        base = float(w @ model.noise_covariance() @ w)
        draws = rng.standard_normal(2000)
        cond = base + (draws * float((model.M.T @ w)[0])) ** 2
        for alpha in (0.5, 0.9):
            gamma = quantile_gamma(alpha)
            predicted = scm.worst_case_risk(model, b, gamma)
            empirical = float(np.quantile(cond, alpha))
            assert abs(empirical - predicted) / predicted < 0.03


class TestFolds:
    def test_round_robin_balance(self):
        levels = {chr(97 + i): [i] for i in range(10)}
        folds = assign_level_folds(levels, 5, seed=0)
        counts = np.bincount(list(folds.values()))
        assert np.all(counts == 2)

    def test_too_few_levels(self):
        with pytest.raises(InsufficientLevels):
            assign_level_folds({"a": [0], "b": [1]}, 3)

    def test_subset_rows_rebuilds_levels(self):
        rng = numkern.make_rng(4)
        ds = scm.sample(heterogeneous_model(6), 120, rng)
        keep = np.arange(0, 120, 2)
        sub = subset_rows(ds, keep)
        assert sub.n == 60
        covered = np.concatenate([np.asarray(v) for v in sub.anchor_levels.values()])
        assert sorted(covered) == list(range(60))


class TestCvGamma:
    def test_fold_hygiene_and_selection(self):
        rng = numkern.make_rng(5)
        ds = scm.sample(heterogeneous_model(), 2000, rng)
        grid = (0.25, 1.0, 4.0, 16.0)
        res = cv_gamma(ds, [0.5, 0.9], grid, folds=5, seed=0)
        assert set(res.selected.values()) <= set(grid)
        assert res.curves.shape == (2, 4)
        fold_ids = set(res.fold_of_level.values())
        assert fold_ids == set(range(5))

    def test_single_gamma_grid(self):
        rng = numkern.make_rng(6)
        ds = scm.sample(heterogeneous_model(8), 400, rng)
        res = cv_gamma(ds, [0.5], [1.0], folds=2, seed=1)
        assert res.selected[0.5] == 1.0

    def test_homogeneous_data_flat_curve(self):
        # anchors unrelated to anything: curves vary only by noise
        rng = numkern.make_rng(7)
        x = rng.standard_normal((2000, 1))
        y = x[:, 0] + 0.5 * rng.standard_normal(2000)
        labels = rng.choice(list("abcdefgh"), size=2000)
        ds = from_levels(x, y, labels)
        res = cv_gamma(ds, [0.5], (0.25, 1.0, 4.0), folds=4, seed=2)
        curve = res.curves[0]
        assert (curve.max() - curve.min()) / curve.mean() < 0.05

    def test_monotone_trend_small(self):
        # selected gamma should grow with alpha in most replicates
        model = heterogeneous_model()
        grid = [0.125, 0.25, 0.5, 1, 2, 4, 8, 16, 32, 64]
        alphas = (0.05, 0.5, 0.9)
        ok = 0
        for rep in range(10):
            rng = numkern.make_rng(1000 + rep)
            ds = scm.sample(model, 3000, rng)
            res = cv_gamma(ds, alphas, grid, folds=5, seed=rep)
            sel = [res.selected[a] for a in alphas]
            ok += sel[0] <= sel[1] <= sel[2]
        assert ok >= 8

    def test_insufficient_levels(self):
        rng = numkern.make_rng(8)
        ds = from_levels(rng.standard_normal((20, 1)), rng.standard_normal(20), ["a"] * 20)
        with pytest.raises(InsufficientLevels):
            cv_gamma(ds, [0.5], [1.0], folds=2)


class TestStabilityTest:
    def test_stable_construction(self):
        from anchorlab.batteries import random_stable_scm

        model = random_stable_scm(numkern.make_rng(9), d=2)
        ds = scm.sample(model, 100_000, numkern.make_rng(10))
        report = anchor_stability_test(ds)
        assert report["stable"]
        assert report["relative_gap"] < 0.05

    def test_confounded_example_unstable(self):
        model = scm.example_iv_chain()
        ds = scm.sample(model, 100_000, numkern.make_rng(11))
        report = anchor_stability_test(ds)
        assert not report["stable"]
        assert report["max_gap"] == pytest.approx(1.0, abs=0.05)
        assert report["iv_included"]

    def test_degenerate_grid_warns_in_report(self):
        model = scm.example_iv_chain()
        ds = scm.sample(model, 5000, numkern.make_rng(12))
        report = anchor_stability_test(ds, gamma_grid=(1.0,))
        assert "warning" in report


class TestReplicabilityRank:
    def _dataset(self, seed, n=1000):
        return center(scm.sample(ranking_model(), n, numkern.make_rng(seed)))

    def test_dominance(self):
        ds = self._dataset(13)
        lam = 0.03 * sparse.lambda_max(ds, 0.0)
        table = replicability_rank(ds, lam, gamma_range=(0.0, 1.0))
        assert np.all(table.a_scores <= table.l_scores + 1e-12)
        assert table.gamma_grid[0] == 0.0

    def test_huge_lambda_all_zero(self):
        ds = self._dataset(14)
        table = replicability_rank(ds, 1e9, gamma_range=(0.0, 1.0))
        assert np.array_equal(table.a_scores, np.zeros(2))
        assert np.array_equal(table.l_scores, np.zeros(2))

    def test_invariant_outranks_confounded_small(self):
        wins = 0
        for rep in range(10):
            ds = self._dataset(2000 + rep)
            lam = 0.03 * sparse.lambda_max(ds, 0.0)
            table = replicability_rank(ds, lam, gamma_range=(0.0, 1.0))
            wins += table.a_scores[0] > table.a_scores[1]
        assert wins >= 9

    def test_validation(self):
        ds = self._dataset(15)
        with pytest.raises(DomainError):
            replicability_rank(ds, -1.0)
        with pytest.raises(DomainError):
            replicability_rank(ds, 1.0, gamma_range=(2.0, 1.0))
