"""Gaussian mixture fitting, density evaluation, and sampling.

Fitting is plain expectation-maximization with k-means++ hard-assignment
initialization and multiple restarts. To make the fit invariant to the row
order of the input, EM runs on a lexicographically sorted copy of the data:
every rng draw and every float accumulation then sees the identical array
regardless of how the caller ordered the rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .errors import DegenerateFitError, InsufficientDataError, ValidationError

_LOG_2PI = float(np.log(2.0 * np.pi))
_COV_TYPES = ("full", "diagonal")


@dataclass(frozen=True)
class EmConfig:
    """EM fit settings.

    tol is the stopping threshold on the improvement of the mean
    log-likelihood between iterations; reg_covar is added to covariance
    diagonals every M step to keep them positive definite.
    """

    n_components: int
    covariance_type: str = "full"
    max_iters: int = 200
    tol: float = 1e-6
    reg_covar: float = 1e-6
    restarts: int = 3
    seed: int = 0

    def __post_init__(self):
        if int(self.n_components) < 1:
            raise ValidationError("n_components must be >= 1")
        if self.covariance_type not in _COV_TYPES:
            raise ValidationError(f"covariance_type must be one of {_COV_TYPES}")
        if int(self.max_iters) < 1:
            raise ValidationError("max_iters must be >= 1")
        if float(self.tol) < 0.0:
            raise ValidationError("tol must be >= 0")
        if float(self.reg_covar) < 0.0:
            raise ValidationError("reg_covar must be >= 0")
        if int(self.restarts) < 1:
            raise ValidationError("restarts must be >= 1")


@dataclass(frozen=True)
class GmmModel:
    """A fitted mixture: weights (C,), means (C, k), and covariances,
    (C, k, k) for covariance_type "full" or (C, k) variances for "diagonal".
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    covariance_type: str

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        mu = np.asarray(self.means, dtype=np.float64)
        cov = np.asarray(self.covariances, dtype=np.float64)
        if self.covariance_type not in _COV_TYPES:
            raise ValidationError(f"covariance_type must be one of {_COV_TYPES}")
        if w.ndim != 1 or w.shape[0] == 0:
            raise ValidationError("weights must be a non-empty vector")
        c = w.shape[0]
        if mu.ndim != 2 or mu.shape[0] != c:
            raise ValidationError("means must have shape (n_components, dim)")
        k = mu.shape[1]
        if w.min() < 0.0 or abs(w.sum() - 1.0) > 1e-9:
            raise ValidationError("weights must be non-negative and sum to 1")
        if self.covariance_type == "full":
            if cov.shape != (c, k, k):
                raise ValidationError("full covariances must have shape (C, k, k)")
        else:
            if cov.shape != (c, k):
                raise ValidationError("diagonal covariances must have shape (C, k)")
            if cov.min() <= 0.0:
                raise ValidationError("diagonal variances must be positive")
        if not (np.isfinite(w).all() and np.isfinite(mu).all() and np.isfinite(cov).all()):
            raise ValidationError("model parameters contain non-finite values")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covariances", cov)

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def save(self, path) -> None:
        # Write through an open handle so the archive lands at exactly the
        # requested path (np.savez appends ".npz" to bare string paths).
        with open(path, "wb") as handle:
            np.savez(
                handle,
                weights=self.weights,
                means=self.means,
                covariances=self.covariances,
                covariance_type=np.array(self.covariance_type),
            )

    @classmethod
    def load(cls, path) -> "GmmModel":
        with np.load(path) as data:
            return cls(
                weights=data["weights"],
                means=data["means"],
                covariances=data["covariances"],
                covariance_type=str(data["covariance_type"]),
            )


@dataclass(frozen=True)
class EmFitDiagnostics:
    """Fit telemetry: trace of the winning restart and per-restart finals."""

    final_log_likelihood: float
    n_iterations: int
    best_restart: int
    converged: bool
    log_likelihood_trace: np.ndarray
    restart_log_likelihoods: tuple[float, ...]


def _component_log_densities(data, means, covariances, covariance_type) -> np.ndarray:
    """log N(x | mu_c, Sigma_c) for every row and component, shape (R, C)."""
    n_comp = means.shape[0]
    k = means.shape[1]
    out = np.empty((data.shape[0], n_comp), dtype=np.float64)
    for c in range(n_comp):
        diff = data - means[c]
        if covariance_type == "full":
            try:
                chol = np.linalg.cholesky(covariances[c])
            except np.linalg.LinAlgError as exc:
                raise DegenerateFitError(
                    f"covariance of component {c} is not positive definite", component=c
                ) from exc
            sol = solve_triangular(chol, diff.T, lower=True)
            maha = np.square(sol).sum(axis=0)
            logdet = 2.0 * np.log(np.diag(chol)).sum()
        else:
            var = covariances[c]
            if var.min() <= 0.0:
                raise DegenerateFitError(
                    f"variance of component {c} is not positive", component=c
                )
            maha = (np.square(diff) / var).sum(axis=1)
            logdet = np.log(var).sum()
        out[:, c] = -0.5 * (k * _LOG_2PI + logdet + maha)
    return out


def _validate_data(data) -> np.ndarray:
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
        raise ValidationError(f"data must be a non-empty (rows, dim) array, got {x.shape}")
    if not np.isfinite(x).all():
        raise ValidationError("data contains non-finite values")
    return x


def _kmeans_pp_centers(data, n_comp, rng) -> np.ndarray:
    """k-means++ seeding on the (already canonically sorted) data."""
    n = data.shape[0]
    centers = np.empty((n_comp, data.shape[1]), dtype=np.float64)
    centers[0] = data[rng.integers(n)]
    closest = np.square(data - centers[0]).sum(axis=1)
    for c in range(1, n_comp):
        total = closest.sum()
        if total > 0.0:
            nxt = rng.choice(n, p=closest / total)
        else:
            nxt = rng.integers(n)
        centers[c] = data[nxt]
        closest = np.minimum(closest, np.square(data - centers[c]).sum(axis=1))
    return centers


def _m_step(data, resp, covariance_type, reg_covar):
    n, k = data.shape
    nk = resp.sum(axis=0)
    nk_safe = nk + 10.0 * np.finfo(np.float64).eps
    means = (resp.T @ data) / nk_safe[:, None]
    if covariance_type == "full":
        covs = np.empty((resp.shape[1], k, k), dtype=np.float64)
        eye = reg_covar * np.eye(k)
        for c in range(resp.shape[1]):
            diff = data - means[c]
            covs[c] = ((resp[:, c][:, None] * diff).T @ diff) / nk_safe[c] + eye
    else:
        avg_sq = (resp.T @ np.square(data)) / nk_safe[:, None]
        covs = avg_sq - np.square(means) + reg_covar
        # float cancellation can push a tiny variance below the added reg
        covs = np.maximum(covs, reg_covar if reg_covar > 0 else 1e-12)
    weights = nk / n
    return weights, means, covs


def _run_em(data, config: EmConfig, rng):
    centers = _kmeans_pp_centers(data, config.n_components, rng)
    d2 = np.square(data[:, None, :] - centers[None, :, :]).sum(axis=2)
    labels = d2.argmin(axis=1)
    resp = np.zeros((data.shape[0], config.n_components), dtype=np.float64)
    resp[np.arange(data.shape[0]), labels] = 1.0
    weights, means, covs = _m_step(data, resp, config.covariance_type, config.reg_covar)

    trace = []
    converged = False
    for _ in range(config.max_iters):
        log_dens = _component_log_densities(data, means, covs, config.covariance_type)
        weighted = log_dens + np.log(np.maximum(weights, 1e-300))[None, :]
        norm = logsumexp(weighted, axis=1)
        mean_ll = float(norm.mean())
        trace.append(mean_ll)
        if len(trace) > 1 and mean_ll - trace[-2] < config.tol:
            converged = True
            break
        resp = np.exp(weighted - norm[:, None])
        weights, means, covs = _m_step(data, resp, config.covariance_type, config.reg_covar)

    if not converged:
        # Budget ran out right after an M step; record the LL of the
        # parameters actually being returned.
        log_dens = _component_log_densities(data, means, covs, config.covariance_type)
        weighted = log_dens + np.log(np.maximum(weights, 1e-300))[None, :]
        trace.append(float(logsumexp(weighted, axis=1).mean()))

    model = GmmModel(
        weights=weights,
        means=means,
        covariances=covs,
        covariance_type=config.covariance_type,
    )
    return model, np.asarray(trace, dtype=np.float64), converged


def fit_em(data, config: EmConfig):
    """Fit a Gaussian mixture by EM with restarts.

    Runs config.restarts independent fits seeded from config.seed and keeps
    the one with the highest final mean log-likelihood (first wins ties).
    The fit depends only on the multiset of rows, not their order.

    Args:
        data: (rows, dim) array, rows >= n_components.
        config: EmConfig.

    Returns:
        (GmmModel, EmFitDiagnostics); the diagnostics trace holds the mean
        log-likelihood at every EM iteration of the winning restart.

    Raises:
        InsufficientDataError: fewer rows than components.
        DegenerateFitError: a covariance collapsed despite regularization.
    """
    x = _validate_data(data)
    if x.shape[0] < config.n_components:
        raise InsufficientDataError(
            f"{x.shape[0]} rows cannot support {config.n_components} components"
        )
    order = np.lexsort(x.T[::-1])  # canonical row order: content-keyed fit
    x = np.ascontiguousarray(x[order])

    seeds = np.random.SeedSequence(config.seed).spawn(config.restarts)
    best = None
    finals = []
    for r in range(config.restarts):
        model, trace, converged = _run_em(x, config, np.random.default_rng(seeds[r]))
        finals.append(float(trace[-1]))
        if best is None or finals[-1] > best[0]:
            best = (finals[-1], r, model, trace, converged)

    final_ll, best_r, model, trace, converged = best
    diag = EmFitDiagnostics(
        final_log_likelihood=final_ll,
        n_iterations=int(trace.shape[0]),
        best_restart=best_r,
        converged=converged,
        log_likelihood_trace=trace,
        restart_log_likelihoods=tuple(finals),
    )
    return model, diag


def log_likelihood(model: GmmModel, data) -> float:
    """Mean per-row log-likelihood of `data` under the mixture."""
    x = _validate_data(data)
    if x.shape[1] != model.dim:
        raise ValidationError(
            f"data dimension {x.shape[1]} does not match model dimension {model.dim}"
        )
    log_dens = _component_log_densities(
        x, model.means, model.covariances, model.covariance_type
    )
    weighted = log_dens + np.log(np.maximum(model.weights, 1e-300))[None, :]
    return float(logsumexp(weighted, axis=1).mean())


def gmm_sample(model: GmmModel, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n_samples rows from the mixture.

    Component labels are drawn first, then one standard-normal block which
    is transformed per component, so the draw sequence is deterministic for
    a given rng state.
    """
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    comps = rng.choice(model.n_components, size=n_samples, p=model.weights)
    z = rng.standard_normal((n_samples, model.dim))
    out = np.empty((n_samples, model.dim), dtype=np.float64)
    for c in np.unique(comps):
        mask = comps == c
        if model.covariance_type == "full":
            chol = np.linalg.cholesky(model.covariances[c])
            out[mask] = model.means[c] + z[mask] @ chol.T
        else:
            out[mask] = model.means[c] + z[mask] * np.sqrt(model.covariances[c])
    return out
