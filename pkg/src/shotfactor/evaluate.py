"""Held-out comparison of intensity models, plus recovery diagnostics.

Every model is reduced to the same contract before scoring: a unit-volume
surface per player and a train-mass volume.  The held-out likelihood scales
that surface to the expected test mass, so models with different internals
(MCMC surfaces, factorized reconstructions, mixed-sign PCA) compete under
identical terms.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .court import CountMatrix, CourtGrid, ShotEvent, build_count_matrix, split_holdout
from .gp import KernelHyper, build_cov_factor
from .lgcp import IntensitySurface, LgcpConfig, fit_cohort, poisson_count_loglik
from .nmf import NmfConfig, fit_nmf, fit_pca, pca_reconstruct

EPS = 1e-12

MODEL_NAMES = ("lgcp", "nmf_kl", "nmf_frobenius", "nmf_counts", "pca")


@dataclass
class EvalConfig:
    fraction: float = 0.1
    min_attempts: int = 50
    seed: int = 0
    hyper: KernelHyper = field(default_factory=KernelHyper)
    lgcp: LgcpConfig = field(default_factory=LgcpConfig)
    nmf: NmfConfig = field(default_factory=NmfConfig)
    models: tuple = MODEL_NAMES

    def __post_init__(self):
        if not 0 < self.fraction < 1:
            raise ValueError("holdout fraction must lie in (0, 1)")
        unknown = set(self.models) - set(MODEL_NAMES)
        if unknown:
            raise ValueError(f"unknown models: {sorted(unknown)}")


@dataclass(eq=False)
class EvalEntry:
    model: str
    k: int
    per_player: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.per_player.mean())

    @property
    def stderr(self) -> float:
        n = len(self.per_player)
        if n < 2:
            return 0.0
        return float(self.per_player.std(ddof=1) / np.sqrt(n))


@dataclass(eq=False)
class RecoveryScore:
    """Greedy best-cosine matching of estimated bases to true ones."""

    pairs: list  # (estimated index, true index)
    similarities: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.similarities.mean())


@dataclass(eq=False)
class EvalReport:
    entries: list
    players: list
    fraction: float
    seed: int
    recovery: dict = field(default_factory=dict)

    def entry(self, model: str, k: int) -> EvalEntry:
        for e in self.entries:
            if e.model == model and e.k == k:
                return e
        raise KeyError(f"no entry for ({model}, {k})")


def heldout_loglik(
    test_counts: np.ndarray,
    surface: IntensitySurface,
    train_volume: float,
    fraction: float,
) -> float:
    """Poisson log-likelihood of test counts under the rescaled surface.

    The unit-volume surface is scaled to the expected test mass,
    train_volume * f/(1-f), and floored at a tiny rate so empty tiles
    cannot produce infinities.
    """
    if not 0 < fraction < 1:
        raise ValueError("holdout fraction must lie in (0, 1)")
    scale = train_volume * fraction / (1.0 - fraction)
    rates = np.maximum(surface.values * scale, EPS)
    return poisson_count_loglik(test_counts, rates, surface.grid.tile_area)


def empirical_correlation(
    cm: CountMatrix, anchor: int, return_flags: bool = False
):
    """Across-player Pearson correlation of every tile with an anchor tile.

    Constant tiles (including a constant anchor) produce 0 and are flagged.
    """
    counts = np.asarray(cm.counts, dtype=np.float64)
    n, v = counts.shape
    if n < 3:
        raise ValueError("need at least 3 players for correlations")
    if not 0 <= anchor < v:
        raise IndexError(f"anchor tile {anchor} out of range")
    centered = counts - counts.mean(axis=0)
    std = centered.std(axis=0)
    flags = std == 0
    corr = np.zeros(v)
    if not flags[anchor]:
        ok = ~flags
        corr[ok] = (centered[:, ok] * centered[:, [anchor]]).mean(axis=0) / (
            std[ok] * std[anchor]
        )
    corr = np.clip(corr, -1.0, 1.0)
    if return_flags:
        return corr, flags
    return corr


def basis_recovery_score(b_hat: np.ndarray, b_star: np.ndarray) -> RecoveryScore:
    """Match each true basis to its best remaining estimate by cosine."""
    b_hat = np.asarray(b_hat, dtype=np.float64)
    b_star = np.asarray(b_star, dtype=np.float64)
    if b_hat.shape[1] != b_star.shape[1]:
        raise ValueError("basis matrices disagree on V")
    if b_hat.shape[0] < b_star.shape[0]:
        raise ValueError("need at least as many estimated bases as true ones")
    hn = np.linalg.norm(b_hat, axis=1)
    sn = np.linalg.norm(b_star, axis=1)
    cosine = (b_hat @ b_star.T) / np.outer(np.maximum(hn, EPS), np.maximum(sn, EPS))
    pairs, sims = [], []
    free_hat = set(range(b_hat.shape[0]))
    free_star = set(range(b_star.shape[0]))
    while free_star:
        best = max(
            ((i, j) for i in free_hat for j in free_star),
            key=lambda ij: cosine[ij],
        )
        pairs.append(best)
        sims.append(cosine[best])
        free_hat.discard(best[0])
        free_star.discard(best[1])
    return RecoveryScore(pairs=pairs, similarities=np.array(sims))


def _unit_rows(matrix: np.ndarray, area: float) -> tuple[np.ndarray, np.ndarray]:
    """Clamp, then scale each row to unit volume; returns (rows, volumes)."""
    matrix = np.maximum(matrix, EPS)
    volumes = matrix.sum(axis=1) * area
    return matrix / volumes[:, None], volumes


def run_comparison(
    shots: list[ShotEvent],
    grid: CourtGrid,
    k_list: list[int],
    config: EvalConfig | None = None,
    truth_bases: np.ndarray | None = None,
) -> EvalReport:
    """Fit every requested model on a train split and score the holdout.

    The LGCP stage runs once; factorizations reuse its normalized surfaces.
    When planted bases are supplied, NMF bases are scored against them at
    each K large enough to cover the truth.
    """
    config = config or EvalConfig()
    train, test = split_holdout(shots, config.fraction, config.seed)
    cm_train = build_count_matrix(train, grid, min_attempts=config.min_attempts)
    cm_test = build_count_matrix(test, grid, min_attempts=0, players=cm_train.players)

    factor = build_cov_factor(grid, config.hyper)
    unit_surfaces, volumes = fit_cohort(cm_train.counts, factor, grid, config.lgcp)
    return compare_surfaces(
        cm_train, cm_test, unit_surfaces, volumes, k_list, config, truth_bases
    )


def compare_surfaces(
    cm_train: CountMatrix,
    cm_test: CountMatrix,
    unit_surfaces: np.ndarray,
    volumes: np.ndarray,
    k_list: list[int],
    config: EvalConfig,
    truth_bases: np.ndarray | None = None,
) -> EvalReport:
    """Score all models given pre-fitted per-player unit surfaces."""
    grid = cm_train.grid
    players = cm_train.players
    area = grid.tile_area

    def score(rows: np.ndarray, vols: np.ndarray) -> np.ndarray:
        out = np.empty(len(players))
        for i in range(len(players)):
            surf = IntensitySurface(rows[i], grid, normalized=True)
            out[i] = heldout_loglik(cm_test.counts[i], surf, vols[i], config.fraction)
        return out

    entries: list[EvalEntry] = []
    recovery: dict = {}

    lgcp_scores = score(unit_surfaces, volumes) if "lgcp" in config.models else None

    for k in k_list:
        if lgcp_scores is not None:
            entries.append(EvalEntry("lgcp", k, lgcp_scores))
        for model, loss in (("nmf_kl", "kl"), ("nmf_frobenius", "frobenius")):
            if model not in config.models:
                continue
            fit = fit_nmf(unit_surfaces, k, loss=loss, config=config.nmf)
            rows, _ = _unit_rows(fit.weights @ fit.bases, area)
            entries.append(EvalEntry(model, k, score(rows, volumes)))
            if truth_bases is not None and k >= truth_bases.shape[0]:
                recovery[(model, k)] = basis_recovery_score(fit.bases, truth_bases)
        if "nmf_counts" in config.models:
            # passing the CountMatrix itself turns on the automatic jitter
            fit = fit_nmf(cm_train, k, loss="kl", config=config.nmf)
            rows, vols = _unit_rows((fit.weights @ fit.bases) / area, area)
            entries.append(EvalEntry("nmf_counts", k, score(rows, vols)))
            if truth_bases is not None and k >= truth_bases.shape[0]:
                recovery[("nmf_counts", k)] = basis_recovery_score(
                    fit.bases, truth_bases
                )
        if "pca" in config.models:
            k_pca = min(k, len(players) - 1, grid.n_tiles)
            pca = fit_pca(unit_surfaces, k_pca)
            rows, _ = _unit_rows(pca_reconstruct(pca), area)
            entries.append(EvalEntry("pca", k, score(rows, volumes)))

    return EvalReport(
        entries=entries,
        players=players,
        fraction=config.fraction,
        seed=config.seed,
        recovery=recovery,
    )


# ---------------------------------------------------------------------------
# Report persistence
# ---------------------------------------------------------------------------


def write_eval_report(out_dir, report: EvalReport) -> dict:
    """Write the summary CSV, the per-player CSV, and a plain-text table."""
    os.makedirs(out_dir, exist_ok=True)
    per_player_path = os.path.join(out_dir, "eval_per_player.csv")
    summary_path = os.path.join(out_dir, "eval_report.csv")
    text_path = os.path.join(out_dir, "eval_report.txt")

    with open(per_player_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["model", "k", "player", "loglik"])
        for e in report.entries:
            for player, value in zip(report.players, e.per_player):
                writer.writerow([e.model, e.k, player, repr(float(value))])

    with open(summary_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["model", "k", "mean", "stderr", "per_player_file"])
        for e in report.entries:
            writer.writerow(
                [
                    e.model,
                    e.k,
                    repr(e.mean),
                    repr(e.stderr),
                    os.path.basename(per_player_path),
                ]
            )

    with open(text_path, "w") as f:
        f.write(
            f"held-out log-likelihood (fraction={report.fraction}, "
            f"seed={report.seed}, {len(report.players)} players)\n"
        )
        f.write(f"{'model':<14}{'K':>4}{'mean':>14}{'stderr':>12}\n")
        for e in report.entries:
            f.write(f"{e.model:<14}{e.k:>4}{e.mean:>14.4f}{e.stderr:>12.4f}\n")
        if report.recovery:
            f.write("\nbasis recovery (mean matched cosine)\n")
            for (model, k), scorer in sorted(report.recovery.items()):
                f.write(f"{model:<14}{k:>4}{scorer.mean:>14.4f}\n")

    return {
        "summary": summary_path,
        "per_player": per_player_path,
        "text": text_path,
    }
