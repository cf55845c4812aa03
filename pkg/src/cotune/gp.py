"""Gaussian-process surrogate with an ARD squared-exponential kernel."""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize
from scipy.special import ndtr

from . import kernels

LOG_2PI = math.log(2.0 * math.pi)


class GaussianProcess:
    """Exact GP regression on a growing training set.

    Targets are centred on their empirical mean (and scaled by their standard
    deviation when ``normalize``); hyperparameters are refit by maximizing
    the log marginal likelihood every ``refit_every`` additions and reused in
    between.
    """

    def __init__(self, dim, lengthscale=1.0, signal_variance=1.0, noise_variance=1e-4,
                 lengthscale_bounds=(1e-2, 1e2), signal_bounds=(1e-2, 1e2), noise_bounds=(1e-6, 1.0),
                 refit_every=5, normalize=True, fit_maxiter=40):
        self.dim = int(dim)
        self.lengthscales = np.full(self.dim, float(lengthscale))
        self.signal_variance = float(signal_variance)
        self.noise_variance = float(noise_variance)
        self.lengthscale_bounds = lengthscale_bounds
        self.signal_bounds = signal_bounds
        self.noise_bounds = noise_bounds
        self.refit_every = refit_every
        self.normalize = normalize
        self.fit_maxiter = fit_maxiter
        self.X = np.empty((0, self.dim))
        self.y = np.empty(0)
        self._since_fit = 0
        self._fitted = False
        self._factor()

    @property
    def n(self) -> int:
        return len(self.y)

    # -- data ---------------------------------------------------------------

    def add(self, x, y) -> None:
        x = np.asarray(x, dtype=float).reshape(1, self.dim)
        if not math.isfinite(float(y)):
            raise ValueError("non-finite target")
        self.X = np.vstack([self.X, x])
        self.y = np.append(self.y, float(y))
        self._since_fit += 1
        if self.refit_every and self._since_fit >= self.refit_every:
            self.fit()
        else:
            self._factor()

    def set_data(self, X, y) -> None:
        self.X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        self.y = np.asarray(y, dtype=float).ravel()
        self._factor()

    def _targets(self):
        if self.n == 0:
            return 0.0, 1.0, self.y
        mean = float(self.y.mean())
        scale = 1.0
        if self.normalize and self.n > 1:
            sd = float(self.y.std())
            if sd > 1e-12:
                scale = sd
        return mean, scale, (self.y - mean) / scale

    def _factor(self) -> None:
        self.y_mean, self.y_scale, yn = self._targets()
        if self.n == 0:
            self._L = np.empty((0, 0))
            self._alpha = np.empty(0)
            return
        K = kernels.sq_exp_kernel(self.X, self.X, self.lengthscales, self.signal_variance)
        K[np.diag_indices_from(K)] += self.noise_variance
        self._L = _cholesky(K)
        self._alpha = cho_solve((self._L, True), yn)

    # -- inference ----------------------------------------------------------

    @property
    def prior_variance(self) -> float:
        return self.signal_variance * self.y_scale ** 2

    def predict(self, Xq) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and (non-negative) variance at query points."""
        Xq = np.asarray(Xq, dtype=float).reshape(-1, self.dim)
        if self.n == 0:
            return np.full(len(Xq), self.y_mean), np.full(len(Xq), self.prior_variance)
        Ks = kernels.sq_exp_kernel(Xq, self.X, self.lengthscales, self.signal_variance)
        mean = self.y_mean + self.y_scale * (Ks @ self._alpha)
        v = solve_triangular(self._L, Ks.T, lower=True, check_finite=False)
        var = self.signal_variance - (v * v).sum(0)
        return mean, np.maximum(var, 0.0) * self.y_scale ** 2

    # -- hyperparameters ----------------------------------------------------

    def _pack(self):
        return np.concatenate([np.log(self.lengthscales), [math.log(self.signal_variance),
                                                           math.log(self.noise_variance)]])

    def _bounds(self):
        lb = [tuple(map(math.log, self.lengthscale_bounds))] * self.dim
        return lb + [tuple(map(math.log, self.signal_bounds)), tuple(map(math.log, self.noise_bounds))]

    def neg_log_marginal_likelihood(self, theta, sqdiff=None, yn=None):
        """NLL of the (normalized) targets and its gradient in log-parameter space."""
        if yn is None:
            yn = self._targets()[2]
        if sqdiff is None:
            sqdiff = _pairwise_sqdiff(self.X)
        D = self.dim
        ls = np.exp(theta[:D])
        sf, sn = math.exp(theta[D]), math.exp(theta[D + 1])
        Kf = kernels.sq_exp_kernel(self.X, self.X, ls, sf)
        K = Kf.copy()
        K[np.diag_indices_from(K)] += sn
        try:
            L = np.linalg.cholesky(K)
        except np.linalg.LinAlgError:
            return 1e25, np.zeros_like(theta)
        alpha = cho_solve((L, True), yn)
        n = len(yn)
        nll = 0.5 * yn @ alpha + np.log(np.diag(L)).sum() + 0.5 * n * LOG_2PI
        Kinv = cho_solve((L, True), np.eye(n))
        W = np.outer(alpha, alpha) - Kinv
        M = (W * Kf).ravel()
        grad = np.empty_like(theta)
        grad[:D] = -0.5 * (sqdiff @ M) / ls ** 2
        grad[D] = -0.5 * M.sum()
        grad[D + 1] = -0.5 * sn * np.trace(W)
        return float(nll), grad

    def fit(self) -> None:
        self._since_fit = 0
        if self.n < 2:
            self._factor()
            return
        yn = self._targets()[2]
        sqdiff = _pairwise_sqdiff(self.X)
        bounds = self._bounds()
        starts = [self._pack()]
        if not self._fitted:
            starts.append(np.concatenate([np.zeros(self.dim), [0.0, math.log(1e-3)]]))
        self._fitted = True
        best = None
        for x0 in starts:
            x0 = np.clip(x0, [b[0] for b in bounds], [b[1] for b in bounds])
            res = minimize(self.neg_log_marginal_likelihood, x0, args=(sqdiff, yn), jac=True,
                           method="L-BFGS-B", bounds=bounds, options={"maxiter": self.fit_maxiter})
            if best is None or res.fun < best.fun:
                best = res
        theta = best.x
        self.lengthscales = np.exp(theta[: self.dim])
        self.signal_variance = float(math.exp(theta[self.dim]))
        self.noise_variance = float(math.exp(theta[self.dim + 1]))
        self._factor()


def _pairwise_sqdiff(X):
    """Per-dimension squared differences, shape (D, n*n)."""
    diff = X[:, None, :] - X[None, :, :]
    return np.ascontiguousarray((diff * diff).transpose(2, 0, 1).reshape(X.shape[1], -1))


def _cholesky(K):
    jitter = 0.0
    scale = float(np.mean(np.diag(K))) if len(K) else 1.0
    for _ in range(8):
        try:
            return np.linalg.cholesky(K + jitter * np.eye(len(K)))
        except np.linalg.LinAlgError:
            jitter = scale * 1e-10 if jitter == 0 else jitter * 10
    raise np.linalg.LinAlgError("kernel matrix is not positive definite")


def expected_improvement(mean, std, best):
    """EI for minimization against the incumbent ``best``."""
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    imp = best - mean
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(std > 0, imp / std, 0.0)
    pdf = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    ei = imp * ndtr(z) + std * pdf
    return np.where(std > 0, ei, np.maximum(imp, 0.0))
