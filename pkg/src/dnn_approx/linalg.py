"""Shared linear-algebra kernels: symmetric eigendecompositions, cone
projections, the projection Jacobian, Gram factorizations, and small
Krylov solvers.

Everything here works on dense symmetric matrices of moderate order
(a few hundred at most); constraint operators with many rows are kept
sparse and only their actions are used.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse

# Eigenvalues within this relative band of the largest magnitude count as
# nonpositive, so exact-zero ties land in the inactive block.
POS_EIG_RTOL = 1e-12


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of a symmetric matrix, eigenvalues sorted descending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        p = self.eigenvectors
        return (p * self.eigenvalues) @ p.T


def eig_sym(m: np.ndarray) -> SpectralDecomposition:
    """Full eigendecomposition of a symmetric matrix, descending order."""
    w, p = np.linalg.eigh(m)
    return SpectralDecomposition(w[::-1].copy(), p[:, ::-1].copy())


def _positive_threshold(eigenvalues: np.ndarray) -> float:
    if eigenvalues.size == 0:
        return 0.0
    return POS_EIG_RTOL * max(1.0, abs(eigenvalues[0]))


def project_psd(
    m: np.ndarray, decomp: SpectralDecomposition | None = None
) -> tuple[np.ndarray, SpectralDecomposition]:
    """Frobenius projection onto the psd cone.

    Returns the projection together with the decomposition of ``m`` so
    callers that need the same eigenpairs again (Jacobians, the mirrored
    projection of ``-m``) can reuse it.
    """
    if decomp is None:
        decomp = eig_sym(m)
    w = decomp.eigenvalues
    thr = _positive_threshold(w)
    clipped = np.where(w > thr, w, 0.0)
    p = decomp.eigenvectors
    proj = (p * clipped) @ p.T
    return symmetrize(proj), decomp


def project_nonneg(m: np.ndarray) -> np.ndarray:
    """Entrywise projection onto the nonnegative orthant."""
    return np.maximum(m, 0.0)


def mirror_project_psd(decomp: SpectralDecomposition) -> np.ndarray:
    """Projection of ``-m`` onto the psd cone, reusing ``m``'s eigenpairs.

    Thresholded the same way as ``project_psd`` applied to ``-m``, so the
    result is exactly psd.
    """
    w = decomp.eigenvalues
    neg = -w
    if w.size == 0:
        return decomp.reconstruct()
    thr = POS_EIG_RTOL * max(1.0, abs(neg[-1]))
    clipped = np.where(neg > thr, neg, 0.0)
    p = decomp.eigenvectors
    return symmetrize((p * clipped) @ p.T)


@dataclass(frozen=True)
class PsdJacobian:
    """One element of the generalized Jacobian of the psd projection.

    The action on a symmetric ``h`` is ``p (omega * (p.T h p)) p.T`` where
    ``omega`` has ones on positive-positive pairs, the eigenvalue ratio on
    mixed pairs, and zeros on nonpositive-nonpositive pairs.
    """

    eigenvectors: np.ndarray
    omega: np.ndarray
    rank: int

    def apply(self, h: np.ndarray) -> np.ndarray:
        p = self.eigenvectors
        inner = p.T @ h @ p
        return symmetrize(p @ (self.omega * inner) @ p.T)


def psd_jacobian(decomp: SpectralDecomposition) -> PsdJacobian:
    """Jacobian element of ``project_psd`` at the decomposed point."""
    w = decomp.eigenvalues
    n = w.size
    thr = _positive_threshold(w)
    pos = w > thr
    r = int(np.count_nonzero(pos))
    omega = np.zeros((n, n))
    if r:
        omega[:r, :r] = 1.0
        if r < n:
            lam_pos = w[:r]
            lam_neg = w[r:]
            # lam_pos > thr >= lam_neg keeps the denominator positive.
            ratio = lam_pos[:, None] / (lam_pos[:, None] - lam_neg[None, :])
            omega[:r, r:] = ratio
            omega[r:, :r] = ratio.T
    return PsdJacobian(decomp.eigenvectors, omega, r)


class LinearMap:
    """Adjoint-consistent pair mapping symmetric matrices to row vectors.

    ``forward`` evaluates all rows at once; ``adjoint`` assembles the
    symmetric combination of the row matrices.
    """

    n: int
    m: int

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def forward_flat(self, x_flat: np.ndarray) -> np.ndarray:
        return self.forward(x_flat.reshape(self.n, self.n))

    def adjoint_flat(self, v: np.ndarray) -> np.ndarray:
        return self.adjoint(v).ravel()

    def gram_apply(self, v: np.ndarray) -> np.ndarray:
        return self.forward_flat(self.adjoint_flat(v))


class SparseRowMap(LinearMap):
    """Rows stored as one CSR matrix over the flattened matrix space."""

    def __init__(self, rows: scipy.sparse.csr_matrix, n: int):
        if rows.shape[1] != n * n:
            raise ValueError("row length does not match matrix order")
        self.rows = rows.tocsr()
        # Transposed copy kept in CSR so adjoint applications skip the
        # per-call format conversion.
        self.rows_t = self.rows.T.tocsr()
        self.n = n
        self.m = rows.shape[0]

    @classmethod
    def from_matrices(
        cls, mats: Sequence[np.ndarray | scipy.sparse.spmatrix], n: int
    ) -> "SparseRowMap":
        flat = []
        for a in mats:
            a = scipy.sparse.coo_matrix(a)
            if a.shape != (n, n):
                raise ValueError("constraint row has wrong shape")
            dense_check = a.toarray()
            if not np.allclose(dense_check, dense_check.T, atol=1e-12):
                raise ValueError("constraint row matrix must be symmetric")
            flat.append(a.reshape(1, n * n))
        if not flat:
            return cls(scipy.sparse.csr_matrix((0, n * n)), n)
        return cls(scipy.sparse.vstack(flat).tocsr(), n)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.rows @ x.ravel()

    def adjoint(self, v: np.ndarray) -> np.ndarray:
        # Each row is symmetric, so the weighted sum already is; the (i,j)
        # and (j,i) accumulations run over identical values in identical
        # order and agree bitwise.
        return (self.rows_t @ v).reshape(self.n, self.n)

    def forward_flat(self, x_flat: np.ndarray) -> np.ndarray:
        return self.rows @ x_flat

    def adjoint_flat(self, v: np.ndarray) -> np.ndarray:
        return self.rows_t @ v

    def row_matrix(self) -> scipy.sparse.csr_matrix:
        return self.rows


@dataclass
class DenseGram:
    """Cholesky factorization of a small Gram matrix ``R R^T``.

    ``ridge`` records the diagonal shift added when the factorization of a
    rank-deficient Gram fails; zero means the clean factorization went
    through.
    """

    chol: tuple[np.ndarray, bool]
    m: int
    ridge: float = 0.0

    def solve(self, r: np.ndarray) -> np.ndarray:
        if self.m == 0:
            return np.zeros(0)
        return scipy.linalg.cho_solve(self.chol, r)


def build_gram(op: LinearMap) -> DenseGram:
    """Factor the Gram matrix of a row map, adding a tiny ridge if singular."""
    m = op.m
    if m == 0:
        return DenseGram((np.zeros((0, 0)), True), 0)
    if isinstance(op, SparseRowMap):
        gram = (op.rows @ op.rows.T).toarray()
    else:
        gram = np.column_stack(
            [op.gram_apply(col) for col in np.eye(m)]
        )
    gram = 0.5 * (gram + gram.T)
    ridge = 0.0
    base = 1e-12 * np.trace(gram) / m if np.trace(gram) > 0 else 1e-12
    for attempt in range(4):
        try:
            c = scipy.linalg.cho_factor(gram + ridge * np.eye(m))
            return DenseGram(c, m, ridge)
        except np.linalg.LinAlgError:
            ridge = base if ridge == 0.0 else ridge * 100.0
    raise np.linalg.LinAlgError("Gram matrix could not be factored")


def power_lambda_max(
    apply_op: Callable[[np.ndarray], np.ndarray],
    dim: int,
    tol: float = 1e-9,
    max_iter: int = 5000,
) -> float:
    """Largest eigenvalue of a self-adjoint psd operator by power iteration.

    Deterministic start vector; returns 0 for the zero operator. The
    Rayleigh quotient estimates from below, so callers using the result as
    a Lipschitz constant should inflate it slightly.
    """
    if dim == 0:
        return 0.0
    rng = np.random.default_rng(20240301)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        av = apply_op(v)
        norm_av = np.linalg.norm(av)
        if norm_av <= 1e-300:
            return 0.0
        lam_new = float(v @ av)
        v = av / norm_av
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new
        lam = lam_new
    return lam


@dataclass
class CgResult:
    x: np.ndarray
    iterations: int
    residual_norm: float
    converged: bool


def cg_solve(
    apply_op: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    tol_abs: float,
    max_iter: int = 300,
) -> CgResult:
    """Conjugate gradients with an absolute residual target.

    The target is floored at 1e-16 relative to the right-hand side so a
    zero-residual request terminates. Nonpositive curvature breaks out
    with the current iterate (the caller regularizes, so this is a
    safety net, not an expected path).
    """
    x = np.zeros_like(rhs)
    r = rhs.copy()
    target = max(tol_abs, 1e-16 * np.linalg.norm(rhs))
    rn = np.linalg.norm(r)
    if rn <= target:
        return CgResult(x, 0, rn, True)
    p = r.copy()
    rr = rn * rn
    for it in range(1, max_iter + 1):
        ap = apply_op(p)
        curv = float(p @ ap)
        if curv <= 0.0:
            return CgResult(x, it - 1, rn, False)
        alpha = rr / curv
        x += alpha * p
        r -= alpha * ap
        rn = np.linalg.norm(r)
        if rn <= target:
            return CgResult(x, it, rn, True)
        rr_new = rn * rn
        p = r + (rr_new / rr) * p
        rr = rr_new
    return CgResult(x, max_iter, rn, False)
