"""DFT conventions, circulant embedding, and O(n log n) Toeplitz kernels.

The DFT convention throughout is the unitary transform with rows ordered by
frequency ("fftshift" order): row j of the matrix F is
n^{-1/2} e^{-2 pi i j k / n} for j = -floor(n/2) .. ceil(n/2) - 1, so the
first output coordinate is the most negative frequency.  ``dft_adjoint``
applies F^H and inverts ``dft_apply`` exactly.

A symmetric Toeplitz matrix built from first column h_0..h_{n-1} embeds in a
circulant of length 2n-1 with first column [h_0..h_{n-1}, h_{n-1}..h_1]; the
stored ``embedded_spectrum`` is the DFT of that embedding.  Matrix-vector
products run through a zero-padded circulant of the next fast transform
length >= 2n-1, which is the same linear map (padding inserts zeros between
the two halves of the embedding) evaluated at composite FFT sizes; exact
2n-1 length transforms are available via ``exact_embedding=True``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft


@dataclass(frozen=True)
class DftConvention:
    """Unitary, negative-exponent, frequency-ordered DFT of size n."""

    n: int

    def apply(self, x):
        return dft_apply(x)

    def adjoint(self, y):
        return dft_adjoint(y)


def frequency_grid(n):
    """Fourier frequencies w_j = (j - floor(n/2)) / n for j = 0..n-1, ascending."""
    if n < 2:
        raise ValueError("frequency grid requires n >= 2")
    return (np.arange(n) - n // 2) / n


def dft_apply(x, axis=0):
    """Unitary shifted DFT: y_j = n^{-1/2} sum_k e^{-2 pi i j k / n} x_k."""
    x = np.asarray(x)
    n = x.shape[axis]
    y = sfft.fft(x, axis=axis, norm="ortho")
    return sfft.fftshift(y, axes=axis)


def dft_adjoint(y, axis=0):
    """Adjoint (= inverse) of ``dft_apply``."""
    y = np.asarray(y)
    return sfft.ifft(sfft.ifftshift(y, axes=axis), axis=axis, norm="ortho")


class ToeplitzOperator:
    """Symmetric Toeplitz matrix with O(n log n) matvec via circulant embedding."""

    def __init__(self, first_column, exact_embedding=False):
        h = np.asarray(first_column, dtype=float)
        if h.ndim != 1 or h.size == 0:
            raise ValueError("first_column must be a nonempty 1-D real array")
        self.first_column = h
        n = h.size
        self.n = n
        m = 2 * n - 1
        emb = np.concatenate([h, h[:0:-1]])
        self.embedded_spectrum = sfft.fft(emb)
        self._exact = exact_embedding or n == 1
        if self._exact:
            self._mfast = m
            self._spectrum_fast = self.embedded_spectrum
        else:
            self._mfast = sfft.next_fast_len(m)
            padded = np.concatenate([h, np.zeros(self._mfast - m), h[:0:-1]])
            self._spectrum_fast = sfft.fft(padded)

    @property
    def shape(self):
        return (self.n, self.n)

    def matvec(self, v):
        """Toeplitz product Sigma v for v of shape (n,) or (n, cols)."""
        v = np.asarray(v)
        if v.shape[0] != self.n:
            raise ValueError(f"vector length {v.shape[0]} != operator size {self.n}")
        spec = self._spectrum_fast
        if v.ndim == 1:
            fv = sfft.fft(v, n=self._mfast)
            out = sfft.ifft(spec * fv)[: self.n]
        else:
            fv = sfft.fft(v, n=self._mfast, axis=0)
            out = sfft.ifft(spec[:, None] * fv, axis=0)[: self.n]
        if np.isrealobj(v):
            return out.real
        return out

    def dense(self):
        """Dense n x n array (test-sized instances only)."""
        import scipy.linalg

        return scipy.linalg.toeplitz(self.first_column)


def toeplitz_matvec(T: ToeplitzOperator, v):
    """Sigma v through the circulant embedding of T."""
    return T.matvec(v)


def whittle_residual_matvec(T: ToeplitzOperator, D, v):
    """(F Sigma F^H - diag(D)) v with two size-n DFTs and one embedded product.

    D holds the spectral density on ``frequency_grid(n)``; the result is the
    action of the Whittle-correction matrix E on v.
    """
    v = np.asarray(v, dtype=complex)
    if v.shape[0] != T.n:
        raise ValueError(f"vector length {v.shape[0]} != operator size {T.n}")
    D = np.asarray(D, dtype=float)
    if D.shape[0] != T.n:
        raise ValueError("diagonal length mismatch")
    u = dft_adjoint(v)
    w = T.matvec(u)
    out = dft_apply(w)
    if v.ndim == 1:
        return out - D * v
    return out - D[:, None] * v
