"""Shared fixtures: tiny closed-form instances, a small lifted benchmark
instance, and a random strongly convex two-block quadratic with exact
majorized block solves for the decay-envelope checks.
"""

import numpy as np
import pytest

from dnn_approx.engine import MajorizedTwoBlockProblem
from dnn_approx.linalg import SparseRowMap
from dnn_approx.model import (
    BestApproxInstance,
    biq_from_triplets,
    build_ex_biq,
    make_custom_instance,
    make_random_biq,
)
from dnn_approx.subsolvers import ZetaEliminated, xi_value_grad


@pytest.fixture
def tiny_instance() -> BestApproxInstance:
    """1x1 problem X11 = 1 with G = 1: the optimum is X = 1, all duals 0."""
    return make_custom_instance(
        np.array([[1.0]]), [np.array([[1.0]])], [1.0], name="tiny"
    )


@pytest.fixture
def shifted_instance() -> BestApproxInstance:
    """1x1 problem X11 = 1 with G = 2: optimum X = 1 with y = -1."""
    return make_custom_instance(
        np.array([[2.0]]), [np.array([[1.0]])], [1.0], name="shifted"
    )


@pytest.fixture
def cross_instance() -> BestApproxInstance:
    """2x2 problem with unit diagonal and X12 >= 0 against G pushing X12
    negative: the optimum is the identity matrix."""
    e12 = np.array([[0.0, 0.5], [0.5, 0.0]])
    return make_custom_instance(
        np.array([[0.0, -1.0], [-1.0, 0.0]]),
        [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])],
        [1.0, 1.0],
        [e12],
        [0.0],
        name="cross",
    )


@pytest.fixture
def biq2_instance() -> BestApproxInstance:
    """Lifted relaxation of two binary variables with Q12 = -5, c = 0."""
    return build_ex_biq(biq_from_triplets(2, [(1, 2, 5.0)]), name="biq2")


@pytest.fixture(scope="session")
def small_biq_instance() -> BestApproxInstance:
    """Lifted relaxation of a random 6-variable problem, dense enough to
    keep every constraint family active during solves."""
    return build_ex_biq(
        biq_from_triplets(6, make_random_biq(6, density=0.5, seed=3)), name="biq6"
    )


def random_row_map(rng: np.random.Generator, m: int, n: int) -> SparseRowMap:
    """m random dense symmetric constraint rows over n x n matrices."""
    rows = []
    for _ in range(m):
        r = rng.standard_normal((n, n))
        rows.append(0.5 * (r + r.T))
    return SparseRowMap.from_matrices(rows, n)


def make_xi_problem(seed: int):
    """Random small equality-block data (operator, shifted target, rhs).

    The rhs is the image of a positive definite matrix, so the reduced
    objective is bounded below and its minimum is attained."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 6))
    m = int(rng.integers(2, n + 1))
    eq = random_row_map(rng, m, n)
    g = rng.standard_normal((n, n))
    g1 = 0.5 * (g + g.T)
    r = rng.standard_normal((n, n))
    b = eq.forward(r @ r.T + 0.1 * np.eye(n))
    return eq, g1, b


def make_zeta_problem(seed: int, c: float = 1.0) -> ZetaEliminated:
    """Random small inequality-block objective with prox weight ``c``."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 6))
    m = int(rng.integers(2, 7))
    ineq = random_row_map(rng, m, n)
    g = rng.standard_normal((n, n))
    g2 = 0.5 * (g + g.T)
    d = rng.standard_normal(m)
    z0 = np.abs(rng.standard_normal(m))
    dense = ineq.row_matrix().toarray()
    lip = float(np.linalg.eigvalsh(dense @ dense.T).max()) + c
    return ZetaEliminated(ineq, g2, d, c, z0, lip)


def xi_gd_oracle(eq, g1, b, y0, grad_tol=1e-9, max_iter=200_000):
    """Backtracking gradient descent on the equality-block objective,
    independent of the Newton solver under test."""
    y = np.asarray(y0, dtype=float).copy()
    val, grad, _ = xi_value_grad(eq, g1, b, y)
    step = 1.0
    for _ in range(max_iter):
        gn = float(np.linalg.norm(grad))
        if gn <= grad_tol:
            break
        while True:
            cand = y - step * grad
            cand_val, cand_grad, _ = xi_value_grad(eq, g1, b, cand)
            if cand_val <= val - 1e-4 * step * gn * gn:
                break
            step *= 0.5
            if step < 1e-18:
                return y, val
        y, val, grad = cand, cand_val, cand_grad
        step = min(step * 1.3, 1e6)
    return y, val


def zeta_pg_oracle(prob: ZetaEliminated, z_init, res_tol=1e-12, max_iter=500_000):
    """Fixed-step projected gradient on the inequality-block objective,
    independent of the Newton/APG solver under test."""
    z = np.asarray(z_init, dtype=float).copy()
    step = 1.0 / prob.lipschitz
    for _ in range(max_iter):
        grad = prob.grad(z)
        nxt = np.maximum(z - step * grad, 0.0)
        if np.linalg.norm(nxt - z) <= res_tol * (1.0 + np.linalg.norm(z)):
            z = nxt
            break
        z = nxt
    return z, prob.value(z)


class TwoBlockQuadratic:
    """theta(w) = 0.5 w'Aw - g'w with A positive definite, split into a
    u block and a v block, majorized by Q-hat = A + diag(d1 I, d2 I).

    Block solves are closed-form; a positive ``eps`` perturbs them by a
    random direction scaled so the error has Q-hat-block norm exactly eps.
    """

    def __init__(self, seed: int):
        rng = np.random.default_rng(seed)
        self.du = int(rng.integers(2, 11))
        self.dv = int(rng.integers(2, 11))
        dim = self.du + self.dv
        m = rng.standard_normal((dim, dim))
        self.a = m @ m.T + (0.5 + rng.random()) * np.eye(dim)
        self.g = rng.standard_normal(dim)
        self.d1 = 0.1 + rng.random()
        self.d2 = 0.1 + rng.random()
        du = self.du
        self.a_uv = self.a[:du, du:]
        self.q11 = self.a[:du, :du] + self.d1 * np.eye(du)
        self.q22 = self.a[du:, du:] + self.d2 * np.eye(self.dv)
        self.w_star = np.linalg.solve(self.a, self.g)
        self.theta_star = self.theta(self.w_star)
        self.w0 = rng.standard_normal(dim)
        self._noise_rng = np.random.default_rng(seed + 10_000)

    def theta(self, w: np.ndarray) -> float:
        return 0.5 * float(w @ self.a @ w) - float(self.g @ w)

    def _grad(self, w: np.ndarray) -> np.ndarray:
        return self.a @ w - self.g

    def _noise(self, q_block: np.ndarray, eps: float) -> np.ndarray:
        r = self._noise_rng.standard_normal(q_block.shape[0])
        return r * (eps / np.sqrt(float(r @ q_block @ r)))

    def solve_u(self, w: np.ndarray, eps: float) -> np.ndarray:
        u = w[: self.du] - np.linalg.solve(self.q11, self._grad(w)[: self.du])
        if eps > 0.0:
            u = u + self._noise(self.q11, eps)
        return u

    def solve_v(self, w: np.ndarray, u_t: np.ndarray, eps: float) -> np.ndarray:
        rhs = self._grad(w)[self.du :] + self.a_uv.T @ (u_t - w[: self.du])
        v = w[self.du :] - np.linalg.solve(self.q22, rhs)
        if eps > 0.0:
            v = v + self._noise(self.q22, eps)
        return v

    def norm_h_sq(self, x: np.ndarray) -> float:
        """Squared envelope seminorm: d1 on the u block, d2 plus the v-v
        Hessian block on the v block."""
        xu, xv = x[: self.du], x[self.du :]
        h_vv = self.d2 * np.eye(self.dv) + self.a[self.du :, self.du :]
        return self.d1 * float(xu @ xu) + float(xv @ h_vv @ xv)

    @property
    def r0(self) -> float:
        return self.norm_h_sq(self.w0 - self.w_star)

    def problem(self) -> MajorizedTwoBlockProblem:
        return MajorizedTwoBlockProblem(
            dim_u=self.du,
            dim_v=self.dv,
            theta=self.theta,
            solve_u=self.solve_u,
            solve_v=self.solve_v,
            norm_h_sq=self.norm_h_sq,
        )
