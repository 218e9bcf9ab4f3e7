"""Two-dimensional Gaussian mixtures fitted by Expectation-Maximization.

The functional layer (``gaussian_pdf``, ``responsibilities``, ``m_step``,
``init_model``, ``em_fit``) works on immutable :class:`GmmModel` values.
:class:`GaussianMixtureEM` wraps it in the scikit-learn estimator protocol.

All densities are evaluated in log space with a max shift; 2x2 covariances
are inverted in closed form so every per-point quantity is an element-wise
computation.
"""
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, DensityMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_uv_points
from .exceptions import (DegenerateDataError, EmptyComponentError, FitFailedError,
                         InvalidModelError)

__all__ = [
    "GaussianComponent", "GmmModel", "FitConfig", "FitReport",
    "gaussian_pdf", "gmm_log_density", "component_log_prob", "log_likelihood",
    "responsibilities", "m_step", "init_model", "em_fit", "GaussianMixtureEM",
    "LOG_DENSITY_FLOOR",
]

_LOG_2PI = float(np.log(2.0 * np.pi))
LOG_DENSITY_FLOOR = -1e300
EMPTY_COMPONENT_MASS = 1e-8
MAX_REINIT = 5
# relative log-likelihood drop treated as real rather than rounding
FLOOR_TRIGGER = 1e-13


def _check_cov(cov):
    cov = np.asarray(cov, dtype=np.float64)
    if cov.shape != (2, 2) or not np.all(np.isfinite(cov)):
        raise InvalidModelError(f"covariance must be a finite 2x2 matrix, got {cov!r}")
    scale = max(abs(cov[0, 1]), abs(cov[1, 0]), 1e-300)
    if abs(cov[0, 1] - cov[1, 0]) > 1e-12 * scale:
        raise InvalidModelError("covariance is not symmetric")
    if not (cov[0, 0] > 0 and cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0] > 0):
        raise InvalidModelError("covariance is not positive-definite")
    return cov


@dataclass(frozen=True)
class GaussianComponent:
    weight: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(2)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", _check_cov(self.cov))
        w = float(self.weight)
        if not 0.0 < w <= 1.0:
            raise InvalidModelError(f"component weight {w} outside (0, 1]")
        object.__setattr__(self, "weight", w)


@dataclass(frozen=True, eq=False)
class GmmModel:
    """Mixture of ``K`` bivariate normals stored as stacked arrays.

    ``weights`` has shape ``(K,)``, ``means`` ``(K, 2)`` and ``covs``
    ``(K, 2, 2)``.  Arrays are copied and made read-only on construction.
    """

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        k = w.shape[0]
        if k < 1:
            raise InvalidModelError("a mixture needs at least one component")
        mu = np.array(self.means, dtype=np.float64).reshape(k, 2)
        cov = np.array(self.covs, dtype=np.float64).reshape(k, 2, 2)
        if np.any(w <= 0) or np.any(w > 1) or not np.all(np.isfinite(mu)):
            raise InvalidModelError("weights must lie in (0, 1] and means be finite")
        if abs(w.sum() - 1.0) > 1e-9:
            raise InvalidModelError(f"weights sum to {w.sum()!r}, not 1")
        for c in cov:
            _check_cov(c)
        for name, arr in (("weights", w), ("means", mu), ("covs", cov)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_components(cls, components):
        components = list(components)
        return cls(
            weights=[c.weight for c in components],
            means=[c.mean for c in components],
            covs=[c.cov for c in components],
        )

    @property
    def n_components(self):
        return self.weights.shape[0]

    @property
    def components(self):
        return tuple(GaussianComponent(w, m, c) for w, m, c in zip(self.weights, self.means, self.covs))

    def __eq__(self, other):
        if not isinstance(other, GmmModel):
            return NotImplemented
        return (np.array_equal(self.weights, other.weights)
                and np.array_equal(self.means, other.means)
                and np.array_equal(self.covs, other.covs))

    __hash__ = None


def _log_normal(X, mean, cov):
    a, b, d = cov[0, 0], cov[0, 1], cov[1, 1]
    det = a * d - b * b
    dx = X[:, 0] - mean[0]
    dy = X[:, 1] - mean[1]
    q = (d * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det
    return -_LOG_2PI - 0.5 * np.log(det) - 0.5 * q


def gaussian_pdf(x, c):
    """Bivariate normal density of component ``c`` at point ``x``."""
    if not isinstance(c, GaussianComponent):
        raise InvalidModelError("expected a GaussianComponent")
    X = np.asarray(x, dtype=np.float64).reshape(1, 2)
    return float(np.exp(_log_normal(X, c.mean, c.cov))[0])


def component_log_prob(X, m):
    """``(n, K)`` matrix of ``log(pi_k) + log N(x_n | mu_k, Sigma_k)``."""
    X = check_uv_points(X)
    out = np.empty((X.shape[0], m.n_components))
    for k in range(m.n_components):
        out[:, k] = np.log(m.weights[k]) + _log_normal(X, m.means[k], m.covs[k])
    return out


def _logsumexp_rows(L):
    top = L.max(axis=1)
    finite = np.isfinite(top)
    shift = np.where(finite, top, 0.0)
    with np.errstate(divide="ignore"):
        out = shift + np.log(np.exp(L - shift[:, None]).sum(axis=1))
    return np.where(finite, out, LOG_DENSITY_FLOOR)


def gmm_log_density(x, m):
    """Mixture log-density at one point (returns float) or at each row of ``x``."""
    if not isinstance(m, GmmModel):
        raise InvalidModelError("expected a GmmModel")
    arr = np.asarray(x, dtype=np.float64)
    dens = _logsumexp_rows(component_log_prob(arr, m))
    return float(dens[0]) if arr.ndim == 1 else dens


def log_likelihood(data, m):
    return float(gmm_log_density(check_uv_points(data), m).sum())


def _responsibilities_from_log(L):
    top = L.max(axis=1, keepdims=True)
    bad = ~np.isfinite(top[:, 0])
    R = np.exp(L - np.where(np.isfinite(top), top, 0.0))
    if np.any(bad):
        # every component underflowed: no information, split evenly
        R[bad] = 1.0
    R /= R.sum(axis=1, keepdims=True)
    return R


def responsibilities(data, m):
    """E-step: posterior component memberships, shape ``(n_points, K)``."""
    if not isinstance(m, GmmModel):
        raise InvalidModelError("expected a GmmModel")
    return _responsibilities_from_log(component_log_prob(data, m))


def _m_step_stats(X, gamma, reg_eps):
    nk = gamma.sum(axis=0)
    empty = nk < EMPTY_COMPONENT_MASS
    safe = np.where(empty, 1.0, nk)
    means = (gamma.T @ X) / safe[:, None]
    covs = np.empty((gamma.shape[1], 2, 2))
    for k in range(gamma.shape[1]):
        g = gamma[:, k]
        dx = X[:, 0] - means[k, 0]
        dy = X[:, 1] - means[k, 1]
        sxy = np.dot(g, dx * dy) / safe[k]
        covs[k] = [[np.dot(g, dx * dx) / safe[k] + reg_eps, sxy],
                   [sxy, np.dot(g, dy * dy) / safe[k] + reg_eps]]
    return nk, means, covs, empty


def m_step(data, gamma, reg_eps=1e-6):
    """M-step: maximum-likelihood weights, means and regularised covariances.

    Raises :class:`EmptyComponentError` when a component's responsibility
    mass falls below ``1e-8``.
    """
    X = check_uv_points(data)
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.ndim != 2 or gamma.shape[0] != X.shape[0]:
        raise ValueError(f"gamma shape {gamma.shape} does not match {X.shape[0]} points")
    nk, means, covs, empty = _m_step_stats(X, gamma, reg_eps)
    if np.any(empty):
        raise EmptyComponentError(np.flatnonzero(empty))
    return GmmModel(nk / nk.sum(), means, covs)


def _global_cov(X, reg_eps):
    d = X - X.mean(axis=0)
    c = (d.T @ d) / X.shape[0]
    c[0, 1] = c[1, 0] = 0.5 * (c[0, 1] + c[1, 0])
    return c + reg_eps * np.eye(2)


def _kmeans_pp(X, k, rng, n_refine=20):
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        idx = rng.choice(n, p=d2 / d2.sum())
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    centers = np.array(centers)
    labels = None
    for _ in range(n_refine):
        dist = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = dist.argmin(axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            members = labels == j
            if members.any():
                centers[j] = X[members].mean(axis=0)
    return centers


def init_model(data, K, seed=0, reg_eps=1e-6):
    """Seeded starting point for EM.

    Means come from k-means++ seeding followed by a few Lloyd iterations;
    every covariance is the global sample covariance plus ``reg_eps * I``
    and weights are uniform.
    """
    X = check_uv_points(data)
    if K < 1:
        raise ValueError("K must be positive")
    n_distinct = np.unique(X, axis=0).shape[0]
    if n_distinct < K:
        raise DegenerateDataError(f"{n_distinct} distinct point(s) cannot seed {K} components")
    if K == 1:
        means = X.mean(axis=0)[None, :]
    else:
        means = _kmeans_pp(X, K, np.random.default_rng(seed))
    cov = _global_cov(X, reg_eps)
    return GmmModel(np.full(K, 1.0 / K), means, np.repeat(cov[None], K, axis=0))


@dataclass(frozen=True)
class FitConfig:
    n_components: int = 1
    rel_tol: float = 1e-6
    max_iters: int = 500
    reg_eps: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.n_components < 1:
            raise ValueError("n_components must be >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.reg_eps > 0:
            raise ValueError("reg_eps must be > 0")


@dataclass(frozen=True)
class FitReport:
    """Diagnostics of one EM run.

    ``trace[0]`` is the log-likelihood of the initial model and ``trace[i]``
    the value after the i-th M-step.  ``reinit_iters`` lists the iterations
    where an empty component was re-seeded; the trace is monotone between
    those points.  ``floored_iters`` lists the iterations that fell back to
    eigenvalue-floored covariances (see :func:`em_fit`).
    """

    n_iter: int
    log_likelihood: float
    converged: bool
    trace: tuple = field(repr=False)
    reinit_iters: tuple = ()
    floored_iters: tuple = ()


def _floor_covs(covs, reg_eps):
    # undo the diagonal shift, then clamp eigenvalues at reg_eps
    out = np.empty_like(covs)
    for k, c in enumerate(covs):
        vals, vecs = np.linalg.eigh(c - reg_eps * np.eye(2))
        out[k] = (vecs * np.maximum(vals, reg_eps)) @ vecs.T
        out[k, 0, 1] = out[k, 1, 0] = 0.5 * (out[k, 0, 1] + out[k, 1, 0])
    return out


def em_fit(data, cfg=FitConfig()):
    """Fit a ``cfg.n_components`` mixture to ``data`` by EM.

    Iterates until the relative change of the total log-likelihood drops
    below ``cfg.rel_tol`` or ``cfg.max_iters`` M-steps have run.

    Adding ``reg_eps * I`` to a covariance is not the likelihood-optimal
    update, so near a collapsed component (two or three points, scatter at
    the floor) it can lower the log-likelihood by a hair.  When that
    happens the step is redone with the weighted scatter's eigenvalues
    clamped at ``reg_eps``, which maximises the EM objective over all
    covariances with eigenvalues >= ``reg_eps``.  The previous model lies in
    that set, so the likelihood cannot drop.
    """
    X = check_uv_points(data)
    K = cfg.n_components
    model = init_model(X, K, cfg.seed, cfg.reg_eps)
    reinit_rng = np.random.default_rng([cfg.seed, 0x5EED])

    L = component_log_prob(X, model)
    ll = float(_logsumexp_rows(L).sum())
    trace = [ll]
    reinit_iters = []
    floored_iters = []
    converged = False
    n_iter = 0
    while n_iter < cfg.max_iters:
        n_iter += 1
        gamma = _responsibilities_from_log(L)
        nk, means, covs, empty = _m_step_stats(X, gamma, cfg.reg_eps)
        if np.any(empty):
            if len(reinit_iters) >= MAX_REINIT:
                raise FitFailedError(
                    f"components {np.flatnonzero(empty).tolist()} still empty after "
                    f"{MAX_REINIT} re-initialisations")
            reinit_iters.append(n_iter)
            glob = _global_cov(X, cfg.reg_eps)
            for k in np.flatnonzero(empty):
                means[k] = X[reinit_rng.integers(X.shape[0])]
                covs[k] = glob
                nk[k] = X.shape[0] / K
        model = GmmModel(nk / nk.sum(), means, covs)
        L = component_log_prob(X, model)
        new_ll = float(_logsumexp_rows(L).sum())
        if ll - new_ll > FLOOR_TRIGGER * abs(ll) and not np.any(empty):
            floored_iters.append(n_iter)
            model = GmmModel(nk / nk.sum(), means, _floor_covs(covs, cfg.reg_eps))
            L = component_log_prob(X, model)
            new_ll = float(_logsumexp_rows(L).sum())
        trace.append(new_ll)
        if not np.any(empty) and abs(new_ll - ll) < cfg.rel_tol * abs(new_ll):
            converged = True
            ll = new_ll
            break
        ll = new_ll
    return model, FitReport(n_iter, ll, converged, tuple(trace), tuple(reinit_iters),
                           tuple(floored_iters))


class GaussianMixtureEM(DensityMixin, BaseEstimator):
    """scikit-learn style wrapper around :func:`em_fit` for 2-D data.

    Parameters
    ----------
    n_components : int, default=1
    rel_tol : float, default=1e-6
        Relative log-likelihood change that stops the iteration.
    max_iter : int, default=500
    reg_eps : float, default=1e-6
        Added to the covariance diagonals on every M-step.
    random_state : int or None, default=0
        Seed for the k-means++ initialisation; ``None`` means 0 so that
        fits stay reproducible.
    """

    def __init__(self, n_components=1, rel_tol=1e-6, max_iter=500, reg_eps=1e-6, random_state=0):
        self.n_components = n_components
        self.rel_tol = rel_tol
        self.max_iter = max_iter
        self.reg_eps = reg_eps
        self.random_state = random_state

    def _config(self):
        seed = 0 if self.random_state is None else int(self.random_state)
        return FitConfig(self.n_components, self.rel_tol, self.max_iter, self.reg_eps, seed)

    def fit(self, X, y=None):
        self.model_, self.fit_report_ = em_fit(X, self._config())
        self.weights_ = self.model_.weights
        self.means_ = self.model_.means
        self.covariances_ = self.model_.covs
        self.converged_ = self.fit_report_.converged
        self.n_iter_ = self.fit_report_.n_iter
        self.n_features_in_ = 2
        return self

    def score_samples(self, X):
        check_is_fitted(self, "model_")
        return gmm_log_density(check_uv_points(X), self.model_)

    def score(self, X, y=None):
        return float(self.score_samples(X).mean())

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        return responsibilities(X, self.model_)

    def predict(self, X):
        return self.predict_proba(X).argmax(axis=1)
