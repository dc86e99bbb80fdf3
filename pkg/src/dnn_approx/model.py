"""Problem instances: the constrained matrix-nearness data, dual points,
binary-quadratic input files, and the lifted relaxation built from them.

An instance bundles the target matrix ``G`` with an equality system
``A(X) = b``, an inequality system ``B(X) >= d``, and the implicit cone
constraints (psd and entrywise nonnegative). Both constraint systems are
row maps over symmetric matrices.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse

from .linalg import DenseGram, LinearMap, SparseRowMap, build_gram, power_lambda_max
from .validation import ensure_symmetric, ensure_vector

# Safety margin applied when a power-iteration estimate is used as a
# Lipschitz constant: the Rayleigh quotient approaches from below.
LIPSCHITZ_MARGIN = 1.02


@dataclass
class BestApproxInstance:
    """Data of one matrix-nearness problem over the doubly nonnegative cone."""

    G: np.ndarray
    eq: LinearMap
    b: np.ndarray
    ineq: LinearMap
    d: np.ndarray
    name: str = ""

    @property
    def n(self) -> int:
        return self.G.shape[0]

    @cached_property
    def eq_gram(self) -> DenseGram:
        return build_gram(self.eq)

    @cached_property
    def lambda_max_bbt(self) -> float:
        """Power-iteration estimate of the largest eigenvalue of B B^T."""
        if self.ineq.m == 0:
            return 0.0
        return power_lambda_max(self.ineq.gram_apply, self.ineq.m)

    @cached_property
    def norm_g(self) -> float:
        return float(np.linalg.norm(self.G))

    def lipschitz_bbt(self) -> float:
        return LIPSCHITZ_MARGIN * self.lambda_max_bbt


@dataclass
class DualPoint:
    """Multipliers for the equalities (y), psd cone (S), inequalities (z),
    and the nonnegativity constraint (Z)."""

    y: np.ndarray
    S: np.ndarray
    z: np.ndarray
    Z: np.ndarray

    @classmethod
    def zeros(cls, inst: BestApproxInstance) -> "DualPoint":
        n = inst.n
        return cls(
            np.zeros(inst.eq.m), np.zeros((n, n)),
            np.zeros(inst.ineq.m), np.zeros((n, n)),
        )

    def copy(self) -> "DualPoint":
        return DualPoint(self.y.copy(), self.S.copy(), self.z.copy(), self.Z.copy())


def primal_from_dual(inst: BestApproxInstance, w: DualPoint) -> np.ndarray:
    """Primal matrix recovered from a dual point: G + A^*y + B^*z + S + Z."""
    x = inst.G + inst.eq.adjoint(w.y) + w.S + w.Z
    if inst.ineq.m:
        x = x + inst.ineq.adjoint(w.z)
    return x


def make_custom_instance(
    G,
    eq_rows: Sequence,
    b,
    ineq_rows: Sequence = (),
    d=(),
    name: str = "",
) -> BestApproxInstance:
    """Build an instance from explicit symmetric coefficient matrices."""
    G = ensure_symmetric(G, "G")
    n = G.shape[0]
    eq = SparseRowMap.from_matrices(eq_rows, n)
    ineq = SparseRowMap.from_matrices(ineq_rows, n)
    b = ensure_vector(b, eq.m, "b")
    d = ensure_vector(d, ineq.m, "d") if ineq.m else np.zeros(0)
    return BestApproxInstance(G, eq, b, ineq, d, name)


# ---------------------------------------------------------------------------
# Binary quadratic input files


@dataclass(frozen=True)
class BiqData:
    """Minimization data extracted from a binary-quadratic weight file:
    off-diagonal couplings ``Q`` (zero diagonal) and linear terms ``c``."""

    n: int
    Q: np.ndarray
    c: np.ndarray


def biq_from_triplets(n: int, triplets: Iterable[tuple[int, int, float]]) -> BiqData:
    """Assemble minimization data from 1-based upper-triangular weights.

    The file convention is a maximization, so weights are negated: an
    off-diagonal weight w becomes Q[i,j] = Q[j,i] = -w, a diagonal weight
    becomes c[i] = -w.
    """
    q = np.zeros((n, n))
    c = np.zeros(n)
    for i, j, w in triplets:
        if i == j:
            c[i - 1] = -w
        else:
            q[i - 1, j - 1] = -w
            q[j - 1, i - 1] = -w
    return BiqData(n, q, c)


def load_biq(source) -> BiqData:
    """Parse a sparse weight file: header ``n nnz`` then 1-based ``i j w``
    triplets with ``i <= j``; blank lines and ``#`` comments are skipped.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    header: tuple[int, int] | None = None
    triplets: list[tuple[int, int, float]] = []
    seen: dict[tuple[int, int], int] = {}
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if header is None:
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: header must be 'n nnz'")
            n, nnz = (int(p) for p in parts)
            if n < 1 or nnz < 0:
                raise ValueError(f"line {lineno}: invalid header values")
            header = (n, nnz)
            continue
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'i j w' triplet")
        i, j = int(parts[0]), int(parts[1])
        w = float(parts[2])
        n = header[0]
        if not (1 <= i <= j <= n):
            raise ValueError(
                f"line {lineno}: indices ({i},{j}) outside 1 <= i <= j <= {n}"
            )
        if (i, j) in seen:
            raise ValueError(
                f"line {lineno}: duplicate entry ({i},{j}), first at line {seen[i, j]}"
            )
        seen[i, j] = lineno
        triplets.append((i, j, w))
    if header is None:
        raise ValueError("empty weight file")
    if len(triplets) != header[1]:
        raise ValueError(
            f"header announced {header[1]} triplets, found {len(triplets)}"
        )
    return biq_from_triplets(header[0], triplets)


def write_biq(path, n: int, triplets: Sequence[tuple[int, int, float]]) -> None:
    """Write triplets back out in the sparse weight-file grammar."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{n} {len(triplets)}\n")
        for i, j, w in triplets:
            w_repr = int(w) if float(w).is_integer() else w
            fh.write(f"{i} {j} {w_repr}\n")


def make_random_biq(
    n: int, density: float = 0.1, seed: int = 0, weight_max: int = 100
) -> list[tuple[int, int, float]]:
    """Random weight triplets in the style of the classic binary-quadratic
    benchmark families: integer weights uniform in [-weight_max, weight_max]
    excluding zero, each upper-triangular position present with the given
    probability."""
    rng = np.random.default_rng(seed)
    triplets = []
    for i in range(1, n + 1):
        for j in range(i, n + 1):
            if rng.random() < density:
                w = int(rng.integers(1, weight_max + 1))
                if rng.random() < 0.5:
                    w = -w
                triplets.append((i, j, float(w)))
    return triplets


# ---------------------------------------------------------------------------
# Lifted relaxation of the binary quadratic problem


def build_ex_biq(data: BiqData, name: str = "") -> BestApproxInstance:
    """Lift minimization data to the matrix-nearness instance over
    (n+1) x (n+1) symmetric matrices.

    The lifted variable is [[Y, x], [x^T, alpha]]. Equalities force
    diag(Y) = x and alpha = 1; every index pair i < j contributes the three
    linearized product inequalities; the target is -(1/2) [[Q, c], [c^T, 0]].
    """
    n = data.n
    if n < 2:
        raise ValueError("lifting needs at least two binary variables")
    ns = n + 1
    g = np.zeros((ns, ns))
    g[:n, :n] = data.Q
    g[:n, n] = data.c
    g[n, :n] = data.c
    g *= -0.5

    eq = _ex_biq_equalities(n)
    b = np.zeros(ns)
    b[n] = 1.0

    ineq = _ex_biq_inequalities(n)
    npairs = n * (n - 1) // 2
    d = np.tile([0.0, 0.0, -1.0], npairs)
    return BestApproxInstance(g, eq, b, ineq, d, name=name)


def _ex_biq_equalities(n: int) -> SparseRowMap:
    ns = n + 1
    rows_i, cols_j, vals, ptr = [], [], [], [0]
    for i in range(n):
        rows_i += [i, i, n]
        cols_j += [i, n, i]
        vals += [1.0, -0.5, -0.5]
        ptr.append(len(vals))
    rows_i.append(n)
    cols_j.append(n)
    vals.append(1.0)
    ptr.append(len(vals))
    flat = np.asarray(rows_i) * ns + np.asarray(cols_j)
    mat = scipy.sparse.csr_matrix(
        (np.asarray(vals), flat, np.asarray(ptr)), shape=(n + 1, ns * ns)
    )
    return SparseRowMap(mat, ns)


def _ex_biq_inequalities(n: int) -> SparseRowMap:
    """Three rows per pair (i, j), pairs in lexicographic order:
    x_i - Y_ij >= 0, x_j - Y_ij >= 0, Y_ij - x_i - x_j >= -1."""
    ns = n + 1
    ii, jj = np.triu_indices(n, k=1)
    npairs = ii.size
    # Nonzero layout per pair: 4 + 4 + 6 entries for the three rows, every
    # coefficient split evenly across the two symmetric positions.
    cols = np.empty((npairs, 14), dtype=np.int64)
    y_u, y_l = ii * ns + jj, jj * ns + ii
    xi_u, xi_l = ii * ns + n, n * ns + ii
    xj_u, xj_l = jj * ns + n, n * ns + jj
    for slot, col in enumerate(
        [y_u, y_l, xi_u, xi_l,
         y_u, y_l, xj_u, xj_l,
         y_u, y_l, xi_u, xi_l, xj_u, xj_l]
    ):
        cols[:, slot] = col
    vals = np.tile(
        np.array([-0.5, -0.5, 0.5, 0.5,
                  -0.5, -0.5, 0.5, 0.5,
                  0.5, 0.5, -0.5, -0.5, -0.5, -0.5]),
        (npairs, 1),
    )
    indptr = np.concatenate(
        [[0], np.cumsum(np.tile([4, 4, 6], npairs))]
    ).astype(np.int64)
    mat = scipy.sparse.csr_matrix(
        (vals.ravel(), cols.ravel(), indptr), shape=(3 * npairs, ns * ns)
    )
    return SparseRowMap(mat, ns)


# ---------------------------------------------------------------------------
# Instance persistence (compressed archive of the CSR pieces)


def save_instance(path, inst: BestApproxInstance) -> None:
    eq = inst.eq.row_matrix() if isinstance(inst.eq, SparseRowMap) else None
    ineq = inst.ineq.row_matrix() if isinstance(inst.ineq, SparseRowMap) else None
    if eq is None or ineq is None:
        raise ValueError("only sparse-row instances can be persisted")
    np.savez_compressed(
        path,
        G=inst.G,
        b=inst.b,
        d=inst.d,
        name=np.array(inst.name),
        n=np.array(inst.n),
        eq_data=eq.data, eq_indices=eq.indices, eq_indptr=eq.indptr,
        eq_shape=np.array(eq.shape),
        ineq_data=ineq.data, ineq_indices=ineq.indices, ineq_indptr=ineq.indptr,
        ineq_shape=np.array(ineq.shape),
    )


def load_instance(path) -> BestApproxInstance:
    with np.load(path, allow_pickle=False) as z:
        n = int(z["n"])
        eq = scipy.sparse.csr_matrix(
            (z["eq_data"], z["eq_indices"], z["eq_indptr"]),
            shape=tuple(z["eq_shape"]),
        )
        ineq = scipy.sparse.csr_matrix(
            (z["ineq_data"], z["ineq_indices"], z["ineq_indptr"]),
            shape=tuple(z["ineq_shape"]),
        )
        return BestApproxInstance(
            G=z["G"], eq=SparseRowMap(eq, n), b=z["b"],
            ineq=SparseRowMap(ineq, n), d=z["d"], name=str(z["name"]),
        )
