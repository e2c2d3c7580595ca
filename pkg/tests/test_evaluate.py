"""Tests for held-out scoring, diagnostics, and recovery metrics."""

import csv
import os

import numpy as np
import pytest

from shotfactor.court import CountMatrix, CourtGrid, ShotEvent
from shotfactor.evaluate import (
    EvalConfig,
    EvalEntry,
    EvalReport,
    basis_recovery_score,
    empirical_correlation,
    heldout_loglik,
    run_comparison,
    write_eval_report,
)
from shotfactor.gp import KernelHyper
from shotfactor.lgcp import IntensitySurface, LgcpConfig
from shotfactor.nmf import NmfConfig
from shotfactor.synth import make_planted_bases

DESK = CourtGrid(tile_size=(2.5, 2.0))


class TestHeldoutLoglik:
    def test_zero_counts_give_negative_scaled_mass(self):
        """With no test shots the log-likelihood is minus the test mass."""
        v = DESK.n_tiles
        surface = IntensitySurface(
            np.full(v, 1.0 / (v * DESK.tile_area)), DESK, normalized=True
        )
        value = heldout_loglik(np.zeros(v), surface, train_volume=90.0, fraction=0.1)
        np.testing.assert_allclose(value, -10.0, atol=1e-9)

    def test_uniform_surface_single_shot(self):
        """One test shot under a flat surface adds log(mass / V)."""
        v = DESK.n_tiles
        surface = IntensitySurface(
            np.full(v, 1.0 / (v * DESK.tile_area)), DESK, normalized=True
        )
        counts = np.zeros(v)
        counts[17] = 1
        m = 90.0 * 0.1 / 0.9
        value = heldout_loglik(counts, surface, train_volume=90.0, fraction=0.1)
        np.testing.assert_allclose(value, -m + np.log(m / v), atol=1e-9)

    def test_zero_surface_floored_to_finite(self):
        """A dead tile cannot produce an infinite penalty."""
        grid = CourtGrid(width=2.0, length=2.0, tile_size=1.0)
        surface = IntensitySurface(
            np.array([0.5, 0.5, 0.0, 0.0]), grid, normalized=True
        )
        counts = np.array([0.0, 0.0, 3.0, 0.0])
        value = heldout_loglik(counts, surface, train_volume=50.0, fraction=0.1)
        assert np.isfinite(value)
        assert value < -20.0

    def test_invalid_fraction_rejected(self):
        """Holdout fractions outside (0, 1) are errors."""
        surface = IntensitySurface(
            np.full(4, 0.25), CourtGrid(2.0, 2.0, 1.0), normalized=True
        )
        for bad in (0.0, 1.0, -0.2):
            with pytest.raises(ValueError, match="fraction"):
                heldout_loglik(np.zeros(4), surface, 10.0, bad)


class TestEmpiricalCorrelation:
    def _count_matrix(self, counts):
        n = counts.shape[0]
        grid = CourtGrid(
            width=2.0 * counts.shape[1], length=2.0, tile_size=2.0
        )
        return CountMatrix(counts, [f"p{i}" for i in range(n)], grid)

    def test_anchor_correlates_perfectly_with_itself(self):
        """A non-constant anchor column has correlation 1 with itself."""
        rng = np.random.default_rng(42)
        cm = self._count_matrix(rng.poisson(5.0, size=(8, 6)).astype(float))
        corr = empirical_correlation(cm, 2)
        np.testing.assert_allclose(corr[2], 1.0, atol=1e-12)

    def test_proportional_columns_correlate_perfectly(self):
        """Exactly proportional columns give correlation 1."""
        base = np.array([1.0, 4.0, 2.0, 7.0, 5.0])
        counts = np.column_stack([base, 3.0 * base, base[::-1]])
        corr = empirical_correlation(self._count_matrix(counts), 0)
        np.testing.assert_allclose(corr[1], 1.0, atol=1e-12)

    def test_constant_column_flagged_zero(self):
        """Zero-variance tiles report correlation 0 with a flag."""
        counts = np.array(
            [[1.0, 5.0, 2.0], [2.0, 5.0, 1.0], [3.0, 5.0, 4.0], [4.0, 5.0, 2.0]]
        )
        corr, flags = empirical_correlation(
            self._count_matrix(counts), 0, return_flags=True
        )
        assert corr[1] == 0.0
        np.testing.assert_array_equal(flags, [False, True, False])
        # a constant anchor zeroes the whole vector
        corr_const = empirical_correlation(self._count_matrix(counts), 1)
        np.testing.assert_array_equal(corr_const, np.zeros(3))

    def test_outputs_bounded(self):
        """Correlations always lie in [-1, 1]."""
        rng = np.random.default_rng(42)
        for _ in range(20):
            counts = rng.poisson(3.0, size=(6, 10)).astype(float)
            corr = empirical_correlation(self._count_matrix(counts), 4)
            assert np.all(corr >= -1.0) and np.all(corr <= 1.0)

    def test_validation(self):
        """Too few players or an out-of-range anchor are errors."""
        counts = np.ones((2, 4))
        with pytest.raises(ValueError, match="3 players"):
            empirical_correlation(self._count_matrix(counts), 0)
        good = np.random.default_rng(0).poisson(2.0, size=(5, 4)).astype(float)
        with pytest.raises(IndexError):
            empirical_correlation(self._count_matrix(good), 9)

    def test_far_arc_tiles_outcorrelate_equidistant_interior(self):
        """Across players, two wing tiles on the same arc correlate more
        strongly than an arc tile and an equally distant interior tile."""
        bases = make_planted_bases(DESK, 5, seed=0)
        centers = DESK.tile_centers()
        arc = bases[3]
        left = np.where(centers[:, 0] < 10)[0]
        right = np.where(centers[:, 0] > 25)[0]
        arc1 = int(left[np.argmax(arc[left])])
        arc2 = int(right[np.argmax(arc[right])])
        span = np.linalg.norm(centers[arc1] - centers[arc2])
        mid = bases[4]
        cand = np.where(mid > 0.3 * mid.max())[0]
        dists = np.linalg.norm(centers[cand] - centers[arc1], axis=1)
        interior = int(cand[np.argmin(np.abs(dists - span))])

        rng = np.random.default_rng(0)
        n = 60
        weights = rng.dirichlet(np.ones(5), size=n)
        budgets = rng.integers(300, 700, size=n)
        lam = (weights * budgets[:, None]) @ bases * DESK.tile_area
        cm = CountMatrix(
            rng.poisson(lam).astype(float), [f"p{i}" for i in range(n)], DESK
        )
        corr = empirical_correlation(cm, arc1)
        assert cm.counts[:, interior].std() > 0, "interior tile must vary"
        assert corr[arc2] > corr[interior] + 0.3


class TestBasisRecoveryScore:
    def test_identical_bases_score_one(self):
        """Perfect estimates match with mean cosine similarity 1."""
        rng = np.random.default_rng(42)
        b = rng.uniform(0.0, 1.0, size=(4, 30))
        score = basis_recovery_score(b, b)
        np.testing.assert_allclose(score.mean, 1.0, atol=1e-12)

    def test_row_permutation_still_scores_one(self):
        """Recovery is invariant to the order of estimated bases."""
        rng = np.random.default_rng(42)
        b = rng.uniform(0.0, 1.0, size=(4, 30))
        perm = [2, 0, 3, 1]
        score = basis_recovery_score(b[perm], b)
        np.testing.assert_allclose(score.mean, 1.0, atol=1e-12)
        assert sorted(score.pairs, key=lambda p: p[1]) == [
            (perm.index(j), j) for j in range(4)
        ]

    def test_multiplicative_noise_scores_above_095(self):
        """Ten percent relative noise keeps mean similarity above 0.95."""
        rng = np.random.default_rng(42)
        for _ in range(10):
            b = rng.uniform(0.1, 1.0, size=(4, 50))
            noisy = b * (1.0 + 0.1 * rng.standard_normal(b.shape))
            assert basis_recovery_score(np.abs(noisy), b).mean > 0.95

    def test_extra_estimates_allowed_but_fewer_rejected(self):
        """K estimated rows may exceed the truth, never undershoot it."""
        rng = np.random.default_rng(42)
        b = rng.uniform(0.0, 1.0, size=(3, 20))
        extra = np.vstack([b, rng.uniform(0.0, 1.0, size=(2, 20))])
        score = basis_recovery_score(extra, b)
        assert len(score.pairs) == 3
        np.testing.assert_allclose(score.mean, 1.0, atol=1e-12)
        with pytest.raises(ValueError, match="at least as many"):
            basis_recovery_score(b[:2], b)
        with pytest.raises(ValueError, match="disagree"):
            basis_recovery_score(b[:, :10], b)


def _two_basis_shots(rng, n_players, per_player):
    """Shots from two separated bumps on a small court."""
    grid = CourtGrid(width=10.0, length=8.0, tile_size=2.0)
    shots = []
    for i in range(n_players):
        lean = rng.uniform(0.2, 0.8)
        for _ in range(per_player):
            if rng.random() < lean:
                x, y = rng.uniform(0.0, 4.0), rng.uniform(0.0, 4.0)
            else:
                x, y = rng.uniform(6.0, 10.0), rng.uniform(4.0, 8.0)
            made = int(rng.random() < 0.45)
            shots.append(ShotEvent(f"p{i}", float(x), float(y), made))
    return shots, grid


@pytest.fixture(scope="module")
def report_and_truth():
    rng = np.random.default_rng(42)
    shots, grid = _two_basis_shots(rng, 6, 220)
    truth = np.zeros((2, grid.n_tiles))
    centers = grid.tile_centers()
    truth[0, (centers[:, 0] < 5) & (centers[:, 1] < 4)] = 1.0
    truth[1, (centers[:, 0] > 5) & (centers[:, 1] > 4)] = 1.0
    truth /= truth.sum(axis=1, keepdims=True) * grid.tile_area
    config = EvalConfig(
        fraction=0.2,
        min_attempts=20,
        seed=0,
        hyper=KernelHyper(variance=1.0, length_scale=2.0),
        lgcp=LgcpConfig(burn_in=100, n_samples=100, thinning=1, seed=0),
        nmf=NmfConfig(max_iters=400, restarts=2, seed=0),
    )
    report = run_comparison(shots, grid, [1, 2], config, truth_bases=truth)
    return report, truth


class TestRunComparison:
    def test_every_model_scored_at_every_k(self, report_and_truth):
        """The report holds one entry per requested model and K."""
        report, _ = report_and_truth
        seen = {(e.model, e.k) for e in report.entries}
        for model in ("lgcp", "nmf_kl", "nmf_frobenius", "nmf_counts", "pca"):
            for k in (1, 2):
                assert (model, k) in seen

    def test_independent_lgcp_constant_across_k(self, report_and_truth):
        """The no-factorization baseline does not depend on K."""
        report, _ = report_and_truth
        np.testing.assert_array_equal(
            report.entry("lgcp", 1).per_player,
            report.entry("lgcp", 2).per_player,
        )

    def test_averages_equal_per_player_means(self, report_and_truth):
        """Summary means are exactly the mean of the per-player columns."""
        report, _ = report_and_truth
        for e in report.entries:
            np.testing.assert_allclose(e.mean, e.per_player.mean(), atol=1e-12)
            assert len(e.per_player) == len(report.players)

    def test_recovery_scored_when_truth_given(self, report_and_truth):
        """NMF bases are matched against the planted ones at K >= K*."""
        report, _ = report_and_truth
        assert ("nmf_kl", 2) in report.recovery
        assert ("nmf_kl", 1) not in report.recovery
        score = report.recovery[("nmf_kl", 2)]
        assert 0.0 < score.mean <= 1.0

    def test_missing_entry_raises(self, report_and_truth):
        """Looking up a model/K pair that was not fitted is an error."""
        report, _ = report_and_truth
        with pytest.raises(KeyError):
            report.entry("lgcp", 99)

    def test_config_validation(self):
        """Fractions and model names are checked up front."""
        with pytest.raises(ValueError, match="fraction"):
            EvalConfig(fraction=1.5)
        with pytest.raises(ValueError, match="unknown models"):
            EvalConfig(models=("lgcp", "mystery"))


class TestWriteEvalReport:
    def test_files_written_and_parse_back(self, tmp_path):
        """Summary, per-player, and text files land with matching numbers."""
        entries = [
            EvalEntry("lgcp", 2, np.array([-5.0, -7.0, -6.0])),
            EvalEntry("nmf_kl", 2, np.array([-4.5, -6.5, -5.5])),
        ]
        report = EvalReport(
            entries=entries, players=["a", "b", "c"], fraction=0.1, seed=3
        )
        files = write_eval_report(tmp_path, report)
        assert all(os.path.exists(p) for p in files.values())
        with open(files["summary"], newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["model", "k", "mean", "stderr", "per_player_file"]
        assert rows[1][0] == "lgcp" and float(rows[1][2]) == -6.0
        with open(files["per_player"], newline="") as f:
            per_rows = list(csv.reader(f))
        assert len(per_rows) == 1 + 2 * 3
        with open(files["text"]) as f:
            text = f.read()
        assert "nmf_kl" in text and "held-out log-likelihood" in text
