"""Exact Gaussian sampling of stationary series.

The workhorse is periodic (circulant) embedding of the autocovariance into
length 2n-1, whose spectrum diagonalizes on the DFT basis: complex normals
scaled by the root spectrum and transformed back give exact draws.  Each
draw consumes its own spawned seed stream, so results are reproducible and
independent of evaluation order.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft

from .acov import AcovTable
from .errors import EmbeddingFailureError
from .toeplitz import dft_adjoint


def circulant_embedding_sample(acov, n, count=1, seed=0):
    """Draw ``count`` exact N(0, Sigma) series of length n.

    The 2n-1 embedding spectrum must be nonnegative; entries in
    [-eps * max, 0) are clipped to zero (eps = 1e-12), anything lower raises
    an embedding failure.  Returns an array of shape (count, n).
    """
    h = acov.values if isinstance(acov, AcovTable) else np.asarray(acov, dtype=float)
    if h.size < n:
        raise ValueError(f"need at least n={n} autocovariances, got {h.size}")
    c = np.concatenate([h[:n], h[n - 1:0:-1]])
    m = c.size
    spectrum = sfft.fft(c)
    lam = spectrum.real
    mx = float(np.max(lam))
    if mx <= 0:
        raise EmbeddingFailureError("embedding spectrum has no positive mass")
    if float(np.min(lam)) < -1e-12 * mx:
        raise EmbeddingFailureError(
            f"embedding spectrum entry {float(np.min(lam)):.3e} is significantly "
            "negative; check the model (larger embeddings are out of scope)"
        )
    root = np.sqrt(np.clip(lam, 0.0, None))
    out = np.empty((count, n))
    streams = np.random.SeedSequence(seed).spawn(count)
    for i, stream in enumerate(streams):
        rng = np.random.default_rng(stream)
        z = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2.0)
        x = np.sqrt(m) * sfft.ifft(root * z)
        out[i] = np.sqrt(2.0) * x[:n].real
    return out


def sample_via_factor(opr, seed=0):
    """One draw through the symmetric factor: sqrt(2) Re(F^H W z).

    Validation-only alternative to circulant embedding; a complex standard
    normal z yields two independent real samples and we keep the real part.
    Distributional equivalence with the embedding sampler is checked
    statistically in the test suite.
    """
    n = opr.n
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
    x = dft_adjoint(opr.factor().apply(z))
    return np.sqrt(2.0) * x.real
