"""Hierarchical latent-variable model of shot outcomes.

Each attempt gets a latent type drawn from the player's factor mixture, and
the make probability depends on a per-player, per-type logit with a global
mean and a per-type variance.  Inference is Gibbs: type assignments are
resampled from their posterior, the stacked logit block is updated with
elliptical slice sampling, and the variances are conjugate draws.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import backend
from .lgcp import ess_update
from .nmf import FactorModel


@dataclass(eq=False)
class AdjustedLoadings:
    """Weights folded with basis mass, next to row-normalized bases.

    ``bases`` rows sum to 1, so each is a distribution over tiles and
    ``weights[n]`` carries all of player n's mass.
    """

    weights: np.ndarray
    bases: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bases = np.asarray(self.bases, dtype=np.float64)
        if self.weights.shape[1] != self.bases.shape[0]:
            raise ValueError("weights and bases disagree on K")
        if np.any(self.weights < 0) or np.any(self.bases < 0):
            raise ValueError("loadings must be non-negative")
        sums = self.bases.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValueError("bases rows must sum to 1 within 1e-9")

    @property
    def n_players(self) -> int:
        return self.weights.shape[0]

    @property
    def k(self) -> int:
        return self.bases.shape[0]


@dataclass(eq=False)
class EfficiencyModel:
    """Global logit means, per-type variances, and per-player logits."""

    beta0: np.ndarray
    sigma2: np.ndarray
    beta: np.ndarray
    sigma0_sq: float = 100.0
    a: float = 0.1
    b: float = 0.1

    def __post_init__(self):
        self.beta0 = np.asarray(self.beta0, dtype=np.float64)
        self.sigma2 = np.asarray(self.sigma2, dtype=np.float64)
        self.beta = np.asarray(self.beta, dtype=np.float64)
        if np.any(self.sigma2 <= 0):
            raise ValueError("variances must be strictly positive")
        if not (np.all(np.isfinite(self.beta0)) and np.all(np.isfinite(self.beta))):
            raise ValueError("logits must be finite")


@dataclass
class EfficiencyConfig:
    sweeps: int = 2000
    burn_in: int = 500
    seed: int = 0
    sigma0_sq: float = 100.0
    a: float = 0.1
    b: float = 0.1

    def __post_init__(self):
        if self.sweeps < 1 or not 0 <= self.burn_in < self.sweeps:
            raise ValueError("need sweeps >= 1 and 0 <= burn_in < sweeps")
        if self.sigma0_sq <= 0 or self.a <= 0 or self.b <= 0:
            raise ValueError("hyperparameters must be positive")


@dataclass(eq=False)
class EfficiencyFit:
    """Posterior means plus the per-sweep hyperparameter traces."""

    model: EfficiencyModel
    prob: np.ndarray  # posterior mean of expit(beta), N x K
    prob_global: np.ndarray  # posterior mean of expit(beta0), length K
    beta0_trace: np.ndarray
    sigma2_trace: np.ndarray
    config: EfficiencyConfig


def adjust_weights(model: FactorModel) -> AdjustedLoadings:
    """Fold each basis's total mass into the weights and normalize the rows.

    Reconstructions are unchanged: weights[n] @ bases == W[n] @ B.  Bases
    with zero mass cannot carry any shot and are dropped with a warning.
    """
    mass = model.bases.sum(axis=1)
    keep = mass > 0
    if not np.all(keep):
        warnings.warn(
            f"dropping {int((~keep).sum())} zero-mass bases", stacklevel=2
        )
    mass = mass[keep]
    bases = model.bases[keep] / mass[:, None]
    weights = model.weights[:, keep] * mass[None, :]
    return AdjustedLoadings(weights=weights, bases=bases)


def shot_type_posterior(
    tile: int, weights_row: np.ndarray, bases: np.ndarray, return_flag: bool = False
):
    """p(k | tile) for one attempt: weights times basis density, normalized.

    A tile that no basis can produce gets a uniform vector and, when
    ``return_flag`` is set, a True degeneracy flag.
    """
    raw = np.asarray(weights_row, dtype=np.float64) * bases[:, tile]
    total = raw.sum()
    degenerate = total <= 0
    if degenerate:
        probs = np.full(len(raw), 1.0 / len(raw))
    else:
        probs = raw / total
    if return_flag:
        return probs, degenerate
    return probs


def predict_fg_pct(
    tile: int, weights_row: np.ndarray, bases: np.ndarray, logits_row: np.ndarray
) -> float:
    """Make probability at a tile: type posterior mixed over per-type rates."""
    probs = shot_type_posterior(tile, weights_row, bases)
    return float(probs @ expit(np.asarray(logits_row, dtype=np.float64)))


def sample_shot_types(
    players: np.ndarray, tiles: np.ndarray, loadings: AdjustedLoadings, rng
) -> np.ndarray:
    """Draw one latent type per shot from its posterior."""
    players = np.ascontiguousarray(players, dtype=np.int64)
    tiles = np.ascontiguousarray(tiles, dtype=np.int64)
    uniforms = rng.random(len(players))
    return backend.draw_type_indices(
        loadings.weights, loadings.bases, players, tiles, uniforms
    )


def gibbs_sigma_update(beta_col: np.ndarray, beta0_k: float, a: float, b: float, rng) -> float:
    """Conjugate variance draw given the player logits of one type.

    Inverse-Gamma(a + N/2, b + half the squared deviations from the mean),
    realized as the reciprocal of a Gamma draw.
    """
    beta_col = np.asarray(beta_col, dtype=np.float64)
    shape = a + beta_col.size / 2.0
    rate = b + 0.5 * float(((beta_col - beta0_k) ** 2).sum())
    return 1.0 / rng.gamma(shape, 1.0 / rate)


def _stack(beta0, beta):
    return np.concatenate([beta0, beta.ravel()])


def _unstack(stacked, n, k):
    return stacked[:k], stacked[k:].reshape(n, k)


def _prior_draw(n, k, sigma0_sq, sigma2, rng):
    nu0 = rng.normal(0.0, np.sqrt(sigma0_sq), size=k)
    nu = nu0[None, :] + rng.normal(0.0, np.sqrt(sigma2)[None, :], size=(n, k))
    return _stack(nu0, nu)


def gibbs_beta_step(
    beta0: np.ndarray,
    beta: np.ndarray,
    sigma2: np.ndarray,
    makes: np.ndarray,
    attempts: np.ndarray,
    rng,
    sigma0_sq: float = 100.0,
):
    """One slice update of the stacked (global, per-player) logit block.

    The stacked vector is jointly zero-mean Gaussian (globals are centered at
    zero, players at their global), so a single elliptical slice move covers
    the whole hierarchy.  Returns the new globals, logits, and log-likelihood.
    """
    n, k = beta.shape
    makes64 = np.ascontiguousarray(makes, dtype=np.float64).ravel()
    attempts64 = np.ascontiguousarray(attempts, dtype=np.float64).ravel()

    def loglik(stacked):
        logits = np.ascontiguousarray(stacked[k:])
        return backend.bernoulli_logits_loglik(makes64, attempts64, logits)

    aux = _prior_draw(n, k, sigma0_sq, sigma2, rng)
    stacked, cur = ess_update(_stack(beta0, beta), aux, loglik, rng)
    beta0, beta = _unstack(stacked, n, k)
    return beta0, beta, cur


def fit_efficiency(
    players: np.ndarray,
    tiles: np.ndarray,
    made: np.ndarray,
    loadings: AdjustedLoadings,
    config: EfficiencyConfig | None = None,
    rng=None,
) -> EfficiencyFit:
    """Gibbs sampler over types, logits, and variances.

    Per sweep: resample every shot's latent type, aggregate outcomes to
    per-player, per-type make/attempt counts, slice-update the logit block,
    then draw each type variance.  Posterior means are taken over the sweeps
    after burn-in, including the mean of the per-logit make probabilities
    (which differs from the probability at the mean logit).
    """
    config = config or EfficiencyConfig()
    players = np.ascontiguousarray(players, dtype=np.int64)
    tiles = np.ascontiguousarray(tiles, dtype=np.int64)
    made = np.ascontiguousarray(made, dtype=np.int64)
    if players.size == 0:
        raise ValueError("no shots to fit")
    n, k = loadings.n_players, loadings.k
    if players.min() < 0 or players.max() >= n:
        raise ValueError("shot references a player without loadings")
    if rng is None:
        # stream tag 4: the Gibbs chain stays disjoint from other stages
        rng = np.random.default_rng([config.seed, 4])

    # Data-informed start: per-cell rates shrunk toward the pooled rate by a
    # few pseudo-attempts put every coordinate of the first state inside its
    # posterior typical set.  Sparse cells start essentially at the global
    # logit (where their posterior concentrates) and dense cells at their
    # empirical logit.  This matters because the slice angle is shared across
    # the stacked block: likelihood-tight coordinates cap it, so coordinates
    # that start far from their posterior move there only slowly.
    types = sample_shot_types(players, tiles, loadings, rng)
    makes, attempts = backend.aggregate_outcomes(players, types, made, n, k)
    pooled = (makes.sum(axis=0) + 1.0) / (attempts.sum(axis=0) + 2.0)
    beta0 = np.log(pooled) - np.log1p(-pooled)
    cell = (makes + 8.0 * pooled) / (attempts + 8.0)
    beta = np.log(cell) - np.log1p(-cell)
    sigma2 = np.maximum(((beta - beta0) ** 2).mean(axis=0), 1e-2)

    beta0_trace = np.empty((config.sweeps, k))
    sigma2_trace = np.empty((config.sweeps, k))
    kept = 0
    beta0_sum = np.zeros(k)
    beta_sum = np.zeros((n, k))
    sigma2_sum = np.zeros(k)
    prob_sum = np.zeros((n, k))
    prob0_sum = np.zeros(k)

    for sweep in range(config.sweeps):
        types = sample_shot_types(players, tiles, loadings, rng)
        makes, attempts = backend.aggregate_outcomes(players, types, made, n, k)
        beta0, beta, _ = gibbs_beta_step(
            beta0, beta, sigma2, makes, attempts, rng, config.sigma0_sq
        )
        for j in range(k):
            sigma2[j] = gibbs_sigma_update(beta[:, j], beta0[j], config.a, config.b, rng)
        beta0_trace[sweep] = beta0
        sigma2_trace[sweep] = sigma2
        if sweep >= config.burn_in:
            kept += 1
            beta0_sum += beta0
            beta_sum += beta
            sigma2_sum += sigma2
            prob_sum += expit(beta)
            prob0_sum += expit(beta0)

    model = EfficiencyModel(
        beta0=beta0_sum / kept,
        sigma2=sigma2_sum / kept,
        beta=beta_sum / kept,
        sigma0_sq=config.sigma0_sq,
        a=config.a,
        b=config.b,
    )
    return EfficiencyFit(
        model=model,
        prob=prob_sum / kept,
        prob_global=prob0_sum / kept,
        beta0_trace=beta0_trace,
        sigma2_trace=sigma2_trace,
        config=config,
    )


def efficiency_surface(
    loadings: AdjustedLoadings, model: EfficiencyModel, player: int | None = None
) -> np.ndarray:
    """Per-tile make probability for one player, or the global surface.

    The global surface replaces the player logits with the global means and
    weights the type posterior by the cohort-average loadings.
    """
    if player is None:
        weights = loadings.weights.mean(axis=0)
        logits = model.beta0
    else:
        weights = loadings.weights[player]
        logits = model.beta[player]
    return backend.mixture_probability_surface(
        np.ascontiguousarray(weights),
        np.ascontiguousarray(loadings.bases),
        np.ascontiguousarray(logits, dtype=np.float64),
    )


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def write_efficiency_csv(prefix, model: EfficiencyModel, players) -> list:
    """Write <prefix>_beta.csv (player rows) and <prefix>_global.csv."""
    beta_path = f"{prefix}_beta.csv"
    global_path = f"{prefix}_global.csv"
    with open(beta_path, "w", newline="") as f:
        writer = csv.writer(f)
        for player, row in zip(players, model.beta):
            writer.writerow([player] + [repr(float(x)) for x in row])
    with open(global_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["beta0"] + [repr(float(x)) for x in model.beta0])
        writer.writerow(["sigma2"] + [repr(float(x)) for x in model.sigma2])
    return [beta_path, global_path]


def read_efficiency_csv(prefix) -> tuple[EfficiencyModel, list[str]]:
    players, rows = [], []
    with open(f"{prefix}_beta.csv", newline="") as f:
        for row in csv.reader(f):
            players.append(row[0])
            rows.append([float(x) for x in row[1:]])
    labeled = {}
    with open(f"{prefix}_global.csv", newline="") as f:
        for row in csv.reader(f):
            labeled[row[0]] = np.array([float(x) for x in row[1:]])
    model = EfficiencyModel(
        beta0=labeled["beta0"], sigma2=labeled["sigma2"], beta=np.array(rows)
    )
    return model, players
