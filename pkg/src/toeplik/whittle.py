"""Baseline spectral likelihoods: periodogram, Whittle, debiased Whittle.

The debiased variant replaces the asymptotic variances S(w_j) with the exact
finite-sample variances of the DFT coefficients, computed from the
autocovariance sequence with a single FFT; the sequence itself comes from
the quadrature/expansion engine, so no closed-form autocovariance is ever
required.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.fft as sfft

from .acov import AcovTable
from .errors import FrequencyDomainError
from .spectral_models import SpectralModel
from .toeplitz import dft_apply, frequency_grid


def periodogram(y):
    """|J_n(w_j)|^2 on the shifted frequency grid; sums to ||y||^2 (Parseval)."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size < 2:
        raise ValueError("periodogram needs a 1-D series of length >= 2")
    J = dft_apply(y)
    return np.abs(J) ** 2


def whittle_nll(model: SpectralModel, theta, y):
    """(1/2) sum_j [log S(w_j) + |J_n(w_j)|^2 / S(w_j)]."""
    y = np.asarray(y, dtype=float)
    theta = model.as_theta(theta)
    S = model.sdf(theta, frequency_grid(y.size))
    if np.any(S <= 0):
        raise FrequencyDomainError(
            "Whittle likelihood requires S > 0 at every grid frequency"
        )
    return 0.5 * float(np.sum(np.log(S) + periodogram(y) / S))


def finite_sample_variances(acov, n=None):
    """Exact DFT-coefficient variances S_n(w_j, w_j) from the autocovariances.

    Uses the time-domain identity
    S_n(w_j, w_j) = 2 Re sum_{k<n} (1 - k/n) h_k e^{-2 pi i w_j k} - h_0,
    evaluated with one size-n FFT of the triangularly weighted sequence.
    Nonpositive outputs (possible only through rounding for a valid model)
    trigger a warning; callers clamp inside logs only, never silently.
    """
    h = acov.values if isinstance(acov, AcovTable) else np.asarray(acov, dtype=float)
    if n is None:
        n = h.size
    if h.size < n:
        raise ValueError(f"need at least n={n} autocovariances, got {h.size}")
    w = (1.0 - np.arange(n) / n) * h[:n]
    t = sfft.fftshift(sfft.fft(w))
    out = 2.0 * t.real - h[0]
    if np.any(out <= 0):
        warnings.warn(
            "finite-sample variance numerically nonpositive at some frequency; "
            "values will be clamped inside logarithms only",
            RuntimeWarning,
        )
    return out


def debiased_whittle_nll(model: SpectralModel, theta, y, acov):
    """Whittle likelihood with finite-sample variances in place of S(w_j)."""
    y = np.asarray(y, dtype=float)
    model.as_theta(theta)
    sn = finite_sample_variances(acov, y.size)
    log_term = np.log(np.maximum(sn, 1e-300))
    return 0.5 * float(np.sum(log_term + periodogram(y) / sn))
