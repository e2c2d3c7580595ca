"""Non-negative factorization of stacked intensity surfaces, with a PCA
baseline.  Both losses use the classic multiplicative updates."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .court import CourtGrid
from .lgcp import IntensitySurface

EPS_FLOOR = 1e-12


COUNT_JITTER = 1e-8


@dataclass
class NmfConfig:
    max_iters: int = 2000
    tol: float = 1e-6
    restarts: int = 5
    seed: int = 0
    eps: float = EPS_FLOOR
    # Added to the data before fitting.  None means automatic: raw count
    # matrices get COUNT_JITTER, intensity matrices get nothing.
    jitter: float | None = None


@dataclass(eq=False)
class IntensityMatrix:
    """Rows are unit-volume surfaces, one per player."""

    matrix: np.ndarray
    players: list[str]
    grid: CourtGrid

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if np.any(self.matrix < 0):
            raise ValueError("intensity matrix must be non-negative")
        volumes = self.matrix.sum(axis=1) * self.grid.tile_area
        if np.any(np.abs(volumes - 1.0) > 1e-9):
            raise ValueError("every row must have unit volume within 1e-9")


@dataclass(eq=False)
class FactorModel:
    """Non-negative weights (N x K) and bases (K x V) with the fit record."""

    weights: np.ndarray
    bases: np.ndarray
    loss: str
    final_loss: float
    trace: np.ndarray
    n_iters: int
    seed: int = 0

    @property
    def k(self) -> int:
        return self.weights.shape[1]


@dataclass(eq=False)
class PcaModel:
    """Mean row plus orthonormal components and per-player scores."""

    mean: np.ndarray
    scores: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray


def build_intensity_matrix(
    surfaces: Sequence[IntensitySurface], players: Sequence[str]
) -> IntensityMatrix:
    if len(surfaces) != len(players):
        raise ValueError("one surface per player required")
    grid = surfaces[0].grid
    return IntensityMatrix(
        np.vstack([s.values for s in surfaces]), list(players), grid
    )


def _as_matrix(data) -> np.ndarray:
    if isinstance(data, IntensityMatrix):
        return data.matrix
    if hasattr(data, "counts"):  # CountMatrix
        return np.asarray(data.counts, dtype=np.float64)
    return np.asarray(data, dtype=np.float64)


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def frobenius_loss(x: np.ndarray, y: np.ndarray) -> float:
    """Sum of squared entrywise differences."""
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return float(((x - y) ** 2).sum())


def kl_loss(x: np.ndarray, y: np.ndarray) -> float:
    """Generalized KL divergence sum(x log(x/y) - x + y), with 0 log 0 = 0.

    Returns inf when some x > 0 sits where y = 0.
    """
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    pos = x > 0
    if np.any(y[pos] <= 0):
        return float("inf")
    ratio = np.zeros_like(x)
    ratio[pos] = x[pos] * np.log(x[pos] / y[pos])
    return float(ratio.sum() - x.sum() + y.sum())


# ---------------------------------------------------------------------------
# Multiplicative updates
# ---------------------------------------------------------------------------


def nmf_step_frobenius(w, b, target, eps: float = EPS_FLOOR):
    """One multiplicative update pair under the squared loss: W first, then B
    using the updated W.  Factors are floored at eps."""
    w = w * (target @ b.T) / (w @ (b @ b.T) + eps)
    w = np.maximum(w, eps)
    b = b * (w.T @ target) / ((w.T @ w) @ b + eps)
    b = np.maximum(b, eps)
    return w, b


def nmf_step_kl(w, b, target, eps: float = EPS_FLOOR):
    """One multiplicative update pair under the generalized KL loss."""
    ratio = target / np.maximum(w @ b, eps)
    w = w * (ratio @ b.T) / (b.sum(axis=1)[None, :] + eps)
    w = np.maximum(w, eps)
    ratio = target / np.maximum(w @ b, eps)
    b = b * (w.T @ ratio) / (w.sum(axis=0)[:, None] + eps)
    b = np.maximum(b, eps)
    return w, b


_STEPS = {"frobenius": nmf_step_frobenius, "kl": nmf_step_kl}
_LOSSES = {"frobenius": frobenius_loss, "kl": kl_loss}


def _init_factors(target, k, rng, eps):
    n, v = target.shape
    w = rng.uniform(0.1, 1.0, size=(n, k))
    b = rng.uniform(0.1, 1.0, size=(k, v))
    # match the data's total mass at the start
    scale = np.sqrt(target.sum() / max((w @ b).sum(), eps))
    return w * scale, b * scale


def fit_nmf(data, k: int, loss: str = "kl", config: NmfConfig | None = None) -> FactorModel:
    """Factorize a non-negative matrix, keeping the best of several restarts.

    Iterates the per-loss multiplicative update until the relative loss change
    drops below ``config.tol`` or ``config.max_iters`` is reached.  A positive
    ``config.jitter`` is added to the data first (needed for raw count
    matrices under the KL loss).
    """
    if loss not in _STEPS:
        raise ValueError(f"loss must be one of {sorted(_STEPS)}, got {loss!r}")
    config = config or NmfConfig()
    target = _as_matrix(data)
    jitter = config.jitter
    if jitter is None:
        jitter = COUNT_JITTER if hasattr(data, "counts") else 0.0
    if jitter > 0:
        target = target + jitter
    n, v = target.shape
    if not 1 <= k <= min(n, v):
        raise ValueError(f"k must be in [1, {min(n, v)}], got {k}")
    step, loss_fn = _STEPS[loss], _LOSSES[loss]

    best: FactorModel | None = None
    for restart in range(config.restarts):
        # stream tag 3: restart inits stay disjoint from other stages
        rng = np.random.default_rng([config.seed, 3, restart])
        w, b = _init_factors(target, k, rng, config.eps)
        prev = loss_fn(target, w @ b)
        trace = [prev]
        for _ in range(config.max_iters):
            w, b = step(w, b, target, config.eps)
            cur = loss_fn(target, w @ b)
            trace.append(cur)
            if prev - cur < config.tol * max(abs(prev), 1e-300):
                prev = cur
                break
            prev = cur
        model = FactorModel(
            weights=w,
            bases=b,
            loss=loss,
            final_loss=trace[-1],
            trace=np.array(trace),
            n_iters=len(trace) - 1,
            seed=config.seed,
        )
        if best is None or model.final_loss < best.final_loss:
            best = model
    return best


def reconstruct(model: FactorModel, n: int) -> np.ndarray:
    """Player n's reconstruction sum_k W[n, k] * B[k, :]."""
    if not 0 <= n < model.weights.shape[0]:
        raise IndexError(f"player index {n} out of range")
    return model.weights[n] @ model.bases


# ---------------------------------------------------------------------------
# PCA baseline
# ---------------------------------------------------------------------------


def fit_pca(data, k: int) -> PcaModel:
    """Top-k principal components of the row-centered matrix.

    Sign convention: each component's largest-magnitude entry is positive.
    """
    matrix = _as_matrix(data)
    n, v = matrix.shape
    if not 1 <= k <= min(n - 1, v):
        raise ValueError(f"k must be in [1, {min(n - 1, v)}], got {k}")
    mean = matrix.mean(axis=0)
    centered = matrix - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:k].copy()
    for i in range(k):
        j = int(np.argmax(np.abs(components[i])))
        if components[i, j] < 0:
            components[i] = -components[i]
    scores = centered @ components.T
    return PcaModel(
        mean=mean,
        scores=scores,
        components=components,
        explained_variance=s[:k] ** 2 / max(n - 1, 1),
    )


def pca_reconstruct(model: PcaModel, n: int | None = None) -> np.ndarray:
    """Mean plus the top-k projection, for one row or the whole matrix."""
    if n is None:
        return model.mean + model.scores @ model.components
    return model.mean + model.scores[n] @ model.components


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def write_factor_model(prefix, model: FactorModel, players: Sequence[str]) -> list:
    """Write <prefix>_W.csv, <prefix>_B.csv and <prefix>_manifest.txt."""
    w_path = f"{prefix}_W.csv"
    b_path = f"{prefix}_B.csv"
    m_path = f"{prefix}_manifest.txt"
    with open(w_path, "w", newline="") as f:
        writer = csv.writer(f)
        for player, row in zip(players, model.weights):
            writer.writerow([player] + [repr(float(x)) for x in row])
    with open(b_path, "w", newline="") as f:
        writer = csv.writer(f)
        for i, row in enumerate(model.bases):
            writer.writerow([f"basis{i}"] + [repr(float(x)) for x in row])
    with open(m_path, "w") as f:
        json.dump(
            {
                "loss": model.loss,
                "k": model.k,
                "final_loss": model.final_loss,
                "iterations": model.n_iters,
                "seed": model.seed,
            },
            f,
            indent=2,
            sort_keys=True,
        )
        f.write("\n")
    return [w_path, b_path, m_path]


def read_factor_model(prefix) -> tuple[FactorModel, list[str]]:
    with open(f"{prefix}_manifest.txt") as f:
        meta = json.load(f)

    def load(path):
        ids, rows = [], []
        with open(path, newline="") as f:
            for row in csv.reader(f):
                ids.append(row[0])
                rows.append([float(x) for x in row[1:]])
        return ids, np.array(rows)

    players, weights = load(f"{prefix}_W.csv")
    _, bases = load(f"{prefix}_B.csv")
    model = FactorModel(
        weights=weights,
        bases=bases,
        loss=meta["loss"],
        final_loss=meta["final_loss"],
        trace=np.array([meta["final_loss"]]),
        n_iters=meta["iterations"],
        seed=meta["seed"],
    )
    return model, players
