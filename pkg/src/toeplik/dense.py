"""Brute-force reference implementations, capped at small sizes.

Everything here is deliberately independent of the fast paths: the DFT is
materialized as an explicit matrix, covariances are filled entrywise, and
likelihood quantities go through dense Cholesky factorizations.  These are
the oracles the O(n log n) code is tested against.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from ._gk import adaptive_gk
from .errors import MatrixNotPDError, UsageError
from .spectral_models import SpectralModel

_DENSE_CAP = 8192
_DERIV_CAP = 4096
_QUAD_CAP = 1024


def dense_covariance(acov_values, n):
    """n x n symmetric Toeplitz fill from h_0..h_{n-1}."""
    h = np.asarray(acov_values, dtype=float)
    if n > _DENSE_CAP:
        raise UsageError(f"dense covariance capped at n <= {_DENSE_CAP}")
    if h.size < n:
        raise UsageError("autocovariance table shorter than n")
    return scipy.linalg.toeplitz(h[:n])


def _chol(sigma):
    try:
        return scipy.linalg.cholesky(sigma, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise MatrixNotPDError("covariance matrix is not positive definite") from exc


def dense_nll(sigma, y):
    """(1/2)(log|Sigma| + y^T Sigma^{-1} y) by Cholesky."""
    L = _chol(sigma)
    alpha = scipy.linalg.solve_triangular(L, y, lower=True)
    return float(np.sum(np.log(np.diag(L))) + 0.5 * np.dot(alpha, alpha))


def dense_gradient(sigma, sigma_partials, y):
    """Gradient entries (1/2)(tr(Sigma^{-1} Sigma_j) - y^T Sigma^{-1} Sigma_j Sigma^{-1} y)."""
    n = sigma.shape[0]
    if n > _DERIV_CAP:
        raise UsageError(f"dense gradient capped at n <= {_DERIV_CAP}")
    L = _chol(sigma)
    cho = (L, True)
    alpha = scipy.linalg.cho_solve(cho, y)
    out = np.empty(len(sigma_partials))
    for j, sj in enumerate(sigma_partials):
        K = scipy.linalg.cho_solve(cho, sj)
        out[j] = 0.5 * (np.trace(K) - alpha @ sj @ alpha)
    return out


def dense_fisher(sigma, sigma_partials):
    """Expected information (1/2) tr(Sigma^{-1} Sigma_j Sigma^{-1} Sigma_k)."""
    n = sigma.shape[0]
    if n > _DERIV_CAP:
        raise UsageError(f"dense Fisher capped at n <= {_DERIV_CAP}")
    L = _chol(sigma)
    cho = (L, True)
    Ks = [scipy.linalg.cho_solve(cho, sj) for sj in sigma_partials]
    p = len(Ks)
    out = np.empty((p, p))
    for j in range(p):
        for k in range(j, p):
            out[j, k] = out[k, j] = 0.5 * float(np.sum(Ks[j] * Ks[k].T))
    return out


def dft_matrix(n):
    """The explicit unitary frequency-ordered DFT matrix."""
    j = (np.arange(n) - n // 2)[:, None]
    return np.exp(-2j * np.pi * j * np.arange(n)[None, :] / n) / np.sqrt(n)


def dense_dft_covariance(sigma):
    """F Sigma F^H by explicit matrix conjugation (no FFT)."""
    F = dft_matrix(sigma.shape[0])
    return F @ sigma @ F.conj().T


def _dirichlet_shifted(x, n):
    """sin(pi n x) / sin(pi x), stable at the removable singularities."""
    x = np.asarray(x, dtype=float)
    m = np.round(x)
    d = x - m
    tiny = np.abs(d) < 1e-13
    dsafe = np.where(tiny, 1.0, d)
    ratio = np.sin(np.pi * n * dsafe) / np.sin(np.pi * dsafe)
    ratio = np.where(tiny, float(n), ratio)
    sign = np.where((m.astype(np.int64) * (n - 1)) % 2 == 0, 1.0, -1.0)
    return sign * ratio


def dft_cov_quadrature(model: SpectralModel, theta, n, k, kp, rel_tol=1e-10):
    """Cov(J_n(w_k), J_n(w_kp)) by direct quadrature against Dirichlet kernels.

    ``k`` and ``kp`` are 0-based indices into the ascending frequency grid.
    The kernel product is integrated adaptively with the domain pre-split at
    the rough points, at w_k and w_kp, and at the kernel oscillation scale;
    the complex prefactor makes the result match (F Sigma F^H)_{k,kp}.
    """
    if n > _QUAD_CAP:
        raise UsageError(f"DFT-covariance quadrature capped at n <= {_QUAD_CAP}")
    theta = model.as_theta(theta)
    grid = (np.arange(n) - n // 2) / n
    wk, wkp = grid[k], grid[kp]

    def integrand(w):
        return (
            _dirichlet_shifted(wk - w, n)
            * _dirichlet_shifted(wkp - w, n)
            * model.value_fn(theta, w)
        )

    pts = np.concatenate(
        [
            np.linspace(-0.5, 0.5, n + 1),
            np.asarray(model.rough_points, dtype=float),
            [wk, wkp],
        ]
    )
    pts = np.unique(pts)
    value, _ = adaptive_gk(integrand, pts, rel_tol=rel_tol, abs_tol=1e-14)
    pref = np.exp(-1j * np.pi * (n - 1) * (k - kp) / n) / n
    return complex(pref * value)
