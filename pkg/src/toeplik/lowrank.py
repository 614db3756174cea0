"""Diagonal-plus-low-rank algebra and randomized compression.

A ``DiagPlusLowRank`` represents A = diag(D) + U V^H with real D and complex
n x r factors.  Everything needed downstream of the compressed Whittle
correction lives here: the randomized rangefinder, Woodbury solves, the
determinant-lemma log-determinant, exact trace products, recompression of
low-rank sums, and the symmetric factorization W W^H = diag(D) + U L U^H.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    FrequencyDomainError,
    IndefinitenessError,
    MatrixNotPDError,
    ResidualToleranceError,
)

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class DiagPlusLowRank:
    """A = diag(D) + U V^H.  D real (n,), U and V complex (n, r); r may be 0."""

    D: np.ndarray
    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        D = np.asarray(self.D, dtype=float)
        U = np.asarray(self.U, dtype=complex)
        V = np.asarray(self.V, dtype=complex)
        if U.ndim != 2 or V.ndim != 2 or U.shape != V.shape or U.shape[0] != D.size:
            raise ValueError("factor shapes must be (n, r) matching diag length")
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)

    @property
    def n(self):
        return self.D.size

    @property
    def rank(self):
        return self.U.shape[1]

    def apply(self, x):
        """A x for x of shape (n,) or (n, k)."""
        x = np.asarray(x)
        d = self.D if x.ndim == 1 else self.D[:, None]
        out = d * x
        if self.rank:
            out = out + self.U @ (self.V.conj().T @ x)
        return out

    def dense(self):
        """Dense matrix (test-sized instances only)."""
        A = np.diag(self.D).astype(complex)
        if self.rank:
            A = A + self.U @ self.V.conj().T
        return A


@dataclass(frozen=True)
class EigCorrection:
    """Hermitian correction U diag(lam) U^H with orthonormal U."""

    U: np.ndarray
    lam: np.ndarray

    @property
    def rank(self):
        return self.lam.size


def zero_eig_correction(n):
    return EigCorrection(U=np.zeros((n, 0), dtype=complex), lam=np.zeros(0))


def randomized_rangefinder(apply_fn, n, rank, oversample=5, seed=None, apply_adjoint=None):
    """Randomized low-rank factorization A ~ U V^H from matvec access alone.

    Draws a real standard-normal sketch with rank + oversample columns,
    orthonormalizes Y = A Omega, and sets U to the resulting basis Q and
    V = A^H Q (callers pass ``apply_adjoint`` for non-Hermitian A; by default
    the operator is assumed Hermitian so V = A Q).  Numerically null sketch
    columns are dropped, so the returned width can be smaller than requested;
    a zero operator yields width-0 factors.
    """
    width = rank + oversample
    if width > n:
        raise ValueError(f"rank + oversample = {width} exceeds dimension n = {n}")
    rng = np.random.default_rng(seed)
    omega = rng.standard_normal((n, width))
    Y = np.asarray(apply_fn(omega))
    Q, R, _ = scipy.linalg.qr(Y, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        keep = 0
    else:
        keep = int(np.sum(diag > max(Y.shape) * _EPS * diag[0]))
    Q = np.ascontiguousarray(Q[:, :keep]).astype(complex)
    if keep == 0:
        return Q, Q.copy()
    V = np.asarray((apply_adjoint or apply_fn)(Q))
    return Q, V


def to_eigen_form(U, V, trunc_tol=1e-12):
    """Convert a near-Hermitian correction U V^H to U' diag(lam) U'^H.

    Projects the Hermitian part onto the column space of U, eigendecomposes
    the small core, and discards eigenvalues below ``trunc_tol`` times the
    largest magnitude (degenerate directions only hurt conditioning).
    """
    U = np.asarray(U, dtype=complex)
    V = np.asarray(V, dtype=complex)
    n, r = U.shape
    if r == 0:
        return zero_eig_correction(n)
    gram = U.conj().T @ U
    if np.linalg.norm(gram - np.eye(r)) <= 1e-8 * np.sqrt(r):
        Q = U
        core = Q.conj().T @ V
        core = 0.5 * (core + core.conj().T)
    else:
        Q, R = np.linalg.qr(U)
        core = R @ (V.conj().T @ Q)
        core = 0.5 * (core + core.conj().T)
    lam, Z = np.linalg.eigh(core)
    order = np.argsort(-np.abs(lam))
    lam = lam[order]
    Z = Z[:, order]
    if lam.size == 0 or np.abs(lam[0]) == 0.0:
        return zero_eig_correction(n)
    keep = np.abs(lam) >= trunc_tol * np.abs(lam[0])
    return EigCorrection(U=Q @ Z[:, keep], lam=lam[keep])


def eig_to_dplr(D, eig: EigCorrection) -> DiagPlusLowRank:
    """diag(D) + U diag(lam) U^H as a DiagPlusLowRank (U scaled by lam)."""
    return DiagPlusLowRank(D=D, U=eig.U * eig.lam, V=eig.U)


def _capacitance(A: DiagPlusLowRank):
    Dinv = 1.0 / A.D
    return np.eye(A.rank) + A.V.conj().T @ (Dinv[:, None] * A.U), Dinv


def dplr_solve(A: DiagPlusLowRank, b):
    """x = A^{-1} b by Sherman-Morrison-Woodbury in O(n r + r^3)."""
    b = np.asarray(b)
    if b.shape[0] != A.n:
        raise ValueError("right-hand side length mismatch")
    if A.rank == 0:
        d = A.D if b.ndim == 1 else A.D[:, None]
        return b / d
    cap, Dinv = _capacitance(A)
    d = Dinv if b.ndim == 1 else Dinv[:, None]
    y = b * d
    try:
        core = np.linalg.solve(cap, A.V.conj().T @ y)
    except np.linalg.LinAlgError as exc:
        raise IndefinitenessError(
            "singular capacitance matrix in Woodbury solve; check the "
            "correction rank and model validity"
        ) from exc
    x = y - (Dinv[:, None] * A.U) @ core
    if not np.all(np.isfinite(x if np.isrealobj(x) else x.view(float))):
        raise IndefinitenessError("non-finite result in Woodbury solve")
    return x


def dplr_logdet(A: DiagPlusLowRank):
    """log|A| via the matrix determinant lemma; requires Hermitian PD A."""
    if np.any(A.D <= 0):
        raise FrequencyDomainError(
            "log-determinant requires strictly positive diagonal"
        )
    base = float(np.sum(np.log(A.D)))
    if A.rank == 0:
        return base
    cap, _ = _capacitance(A)
    sign, logabs = np.linalg.slogdet(cap)
    if sign == 0:
        raise IndefinitenessError("capacitance matrix is singular")
    angle = abs(float(np.angle(sign)))
    if angle > 1e-10 or np.real(sign) <= 0:
        raise IndefinitenessError(
            f"capacitance determinant not positive real (angle {angle:.2e}); "
            "the represented matrix is numerically indefinite"
        )
    return base + float(logabs)


def dplr_trace_product(A: DiagPlusLowRank, B: DiagPlusLowRank):
    """tr(A B) exactly in O(n (r_A + r_B) + n r_A r_B)."""
    if A.n != B.n:
        raise ValueError("size mismatch")
    total = complex(np.dot(A.D, B.D))
    if B.rank:
        total += np.dot(A.D, np.sum(B.U * B.V.conj(), axis=1))
    if A.rank:
        total += np.dot(B.D, np.sum(A.U * A.V.conj(), axis=1))
    if A.rank and B.rank:
        total += np.trace((A.V.conj().T @ B.U) @ (B.V.conj().T @ A.U))
    scale = float(
        np.abs(total)
        + np.linalg.norm(A.D) * np.linalg.norm(B.D)
        + np.linalg.norm(A.U) * np.linalg.norm(A.V) * 1e-3
        + np.linalg.norm(B.U) * np.linalg.norm(B.V) * 1e-3
    )
    if abs(total.imag) > 1e-9 * max(scale, 1e-300):
        raise ResidualToleranceError(
            f"trace product imaginary residual {abs(total.imag):.3e} too large"
        )
    return float(total.real)


def recompress_sum(terms, target_rank, oversample=5, seed=None, n=None):
    """Compress M = sum_i A_i B_i^H back to a single factor pair (A, B).

    Each term is an (n, r_i) factor pair; the summed operator is sketched at
    width target_rank + oversample and re-factored as in the rangefinder, so
    M ~ A B^H exactly (to rounding) whenever target_rank >= rank(M).
    """
    terms = [(np.asarray(a), np.asarray(b)) for a, b in terms]
    if n is None:
        if not terms:
            raise ValueError("empty term list needs explicit n")
        n = terms[0][0].shape[0]

    def apply_fn(X):
        out = np.zeros((n, X.shape[1]), dtype=complex)
        for a, b in terms:
            out += a @ (b.conj().T @ X)
        return out

    def adjoint_fn(X):
        out = np.zeros((n, X.shape[1]), dtype=complex)
        for a, b in terms:
            out += b @ (a.conj().T @ X)
        return out

    return randomized_rangefinder(
        apply_fn,
        n,
        min(target_rank, n - oversample),
        oversample,
        seed,
        apply_adjoint=adjoint_fn,
    )


class SymmetricFactor:
    """W with W W^H = diag(D) + U diag(lam) U^H, invertible in O(n r).

    W v = sqrt(D) * (v + Ut X (Ut^H v)) with Ut = U / sqrt(D).
    """

    def __init__(self, D_sqrt, Utilde, X):
        self.D_sqrt = D_sqrt
        self.Utilde = Utilde
        self.X = X
        self._gram = Utilde.conj().T @ Utilde

    @property
    def rank(self):
        return self.Utilde.shape[1]

    def _corr(self, v, X):
        if self.rank == 0:
            return v
        return v + self.Utilde @ (X @ (self.Utilde.conj().T @ v))

    def _corr_inv(self, v, X):
        # (I + Ut X Ut^H)^{-1} = I - Ut X (I + (Ut^H Ut) X)^{-1} Ut^H
        if self.rank == 0:
            return v
        rhs = self.Utilde.conj().T @ v
        core = X @ np.linalg.solve(np.eye(self.rank) + self._gram @ X, rhs)
        return v - self.Utilde @ core

    def _scale(self, v, s):
        return v * (s if np.asarray(v).ndim == 1 else s[:, None])

    def apply(self, v):
        """W v."""
        return self._scale(self._corr(np.asarray(v, dtype=complex), self.X), self.D_sqrt)

    def apply_h(self, v):
        """W^H v."""
        u = self._scale(np.asarray(v, dtype=complex), self.D_sqrt)
        return self._corr(u, self.X.conj().T)

    def solve(self, v):
        """W^{-1} v."""
        u = self._scale(np.asarray(v, dtype=complex), 1.0 / self.D_sqrt)
        return self._corr_inv(u, self.X)

    def solve_h(self, v):
        """W^{-H} v."""
        u = self._corr_inv(np.asarray(v, dtype=complex), self.X.conj().T)
        return self._scale(u, 1.0 / self.D_sqrt)


def build_symmetric_factor(D, eig: EigCorrection) -> SymmetricFactor:
    """Symmetric factor of diag(D) + U diag(lam) U^H (must be positive definite).

    With Ut = D^{-1/2} U:  Ut^H Ut = L L^H,  I + L^H diag(lam) L = G G^H,
    X = L^{-H} (G - I) L^{-1}; then (I + Ut X Ut^H)(I + Ut X Ut^H)^H
    = I + Ut diag(lam) Ut^H exactly.
    """
    D = np.asarray(D, dtype=float)
    if np.any(D <= 0):
        raise MatrixNotPDError("diagonal part must be strictly positive")
    ds = np.sqrt(D)
    if eig.rank == 0:
        return SymmetricFactor(ds, np.zeros((D.size, 0), dtype=complex), np.zeros((0, 0)))
    Ut = eig.U / ds[:, None]
    gram = Ut.conj().T @ Ut
    try:
        L = scipy.linalg.cholesky(gram, lower=True)
        core = np.eye(eig.rank) + (L.conj().T * eig.lam) @ L
        G = scipy.linalg.cholesky(core, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise MatrixNotPDError(
            "symmetric factorization failed: I + L^H diag(lam) L is not positive "
            "definite (correction rank too small or model invalid)"
        ) from exc
    Z = scipy.linalg.solve_triangular(L.conj().T, G - np.eye(eig.rank), lower=False)
    X = scipy.linalg.solve_triangular(L.conj().T, Z.conj().T, lower=False).conj().T
    return SymmetricFactor(ds, Ut, X)
