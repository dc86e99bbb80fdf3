"""Inner solvers for the two dual block subproblems.

The equality/psd block reduces to smooth unconstrained minimization over
the equality multipliers and is handled by a semismooth Newton-CG method
with Armijo line search. The inequality/nonnegativity block reduces to a
bound-constrained problem in the inequality multipliers and is handled by
a semismooth Newton method on the natural residual map, safeguarded by
accelerated projected gradient steps. A block-diagonal majorization that
splits the inequality multipliers into independent groups lives here too.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .linalg import (
    LinearMap,
    SparseRowMap,
    SpectralDecomposition,
    cg_solve,
    eig_sym,
    mirror_project_psd,
    psd_jacobian,
    symmetrize,
    _positive_threshold,
)

# ---------------------------------------------------------------------------
# Equality/psd block: smooth reduced objective, semismooth Newton-CG


@dataclass
class SncgOptions:
    """Line search and Newton-CG knobs for the equality-block solver."""

    mu: float = 1e-4
    eta: float = 0.1
    tau: float = 0.5
    rho: float = 0.5
    cg_max_iter: int = 300
    newton_max_iter: int = 200
    armijo_max_backtracks: int = 50


@dataclass
class SncgStats:
    newton_iters: int = 0
    cg_iters: int = 0
    fallback_steps: int = 0
    grad_norm: float = np.inf
    converged: bool = False
    step_sizes: list = field(default_factory=list)


def xi_value_grad(
    eq: LinearMap, g1: np.ndarray, b: np.ndarray, y: np.ndarray
) -> tuple[float, np.ndarray, SpectralDecomposition]:
    """Reduced objective of the equality/psd block after eliminating the
    psd multiplier, with its gradient and the decomposition it was
    evaluated from."""
    n_mat = g1 + eq.adjoint(y)
    decomp = eig_sym(n_mat)
    w = decomp.eigenvalues
    thr = _positive_threshold(w)
    clipped = np.where(w > thr, w, 0.0)
    value = 0.5 * float(clipped @ clipped) - float(b @ y)
    p = decomp.eigenvectors
    proj = symmetrize((p * clipped) @ p.T)
    grad = eq.forward(proj) - b
    return value, grad, decomp


def sncg_solve(
    eq: LinearMap,
    g1: np.ndarray,
    b: np.ndarray,
    y0: np.ndarray,
    grad_tol: float,
    opts: SncgOptions | None = None,
) -> tuple[np.ndarray, np.ndarray, SncgStats]:
    """Minimize the reduced equality-block objective from ``y0`` until the
    gradient norm drops to ``grad_tol``.

    Returns the multiplier, the recovered psd-cone multiplier, and solve
    statistics. Each Newton system is the constraint Gram of one projection
    Jacobian element, regularized proportionally to the gradient norm, and
    solved by CG to the forcing accuracy min(eta, ||grad||^(1+tau)).
    """
    opts = opts or SncgOptions()
    stats = SncgStats()
    y = np.asarray(y0, dtype=float).copy()
    if eq.m == 0:
        decomp = eig_sym(g1)
        stats.converged = True
        stats.grad_norm = 0.0
        return y, mirror_project_psd(decomp), stats

    value, grad, decomp = xi_value_grad(eq, g1, b, y)
    recent: list[float] = []
    for _ in range(opts.newton_max_iter):
        gn = float(np.linalg.norm(grad))
        stats.grad_norm = gn
        if gn <= grad_tol:
            stats.converged = True
            break
        recent.append(gn)
        # Four steps without a 10% cut means the method is at its
        # numerical floor for this subproblem; more iterations only burn
        # factorizations.
        if len(recent) >= 5 and gn > 0.9 * recent[-5]:
            break
        jac = psd_jacobian(decomp)
        lam_reg = min(1e-4, gn)

        def newton_matvec(v, _jac=jac, _lam=lam_reg):
            return eq.forward(_jac.apply(eq.adjoint(v))) + _lam * v

        forcing = min(opts.eta, gn ** (1.0 + opts.tau))
        cg = cg_solve(newton_matvec, -grad, forcing, opts.cg_max_iter)
        stats.cg_iters += cg.iterations
        direction = cg.x
        slope = float(grad @ direction)
        if not np.all(np.isfinite(direction)) or slope >= 0.0:
            direction = -grad
            slope = -gn * gn
            stats.fallback_steps += 1

        accepted = False
        for _ in range(2):
            step = 1.0
            for _ in range(opts.armijo_max_backtracks + 1):
                y_trial = y + step * direction
                v_trial, g_trial, d_trial = xi_value_grad(eq, g1, b, y_trial)
                if v_trial <= value + opts.mu * step * slope:
                    accepted = True
                    break
                step *= opts.rho
            if accepted:
                break
            # Newton direction rejected along the whole backtrack: retry
            # once with steepest descent before giving up.
            direction = -grad
            slope = -gn * gn
            stats.fallback_steps += 1
        if not accepted:
            break
        y, value, grad, decomp = y_trial, v_trial, g_trial, d_trial
        stats.newton_iters += 1
        stats.step_sizes.append(step)
    else:
        stats.grad_norm = float(np.linalg.norm(grad))
        stats.converged = stats.grad_norm <= grad_tol

    s_mat = mirror_project_psd(decomp)
    return y, s_mat, stats


# ---------------------------------------------------------------------------
# Inequality/nonnegativity block: natural residual map, Newton + APG safeguard


@dataclass
class ApgSncgOptions:
    """Knobs for the safeguarded semismooth Newton solver on the
    inequality block."""

    eta: float = 0.1
    gamma: float = 0.5
    rho: float = 0.5
    line_search_max: int = 30
    newton_max_iter: int = 200
    krylov_max_iter: int = 300
    apg_total_cap: int = 100_000


@dataclass
class ApgSncgStats:
    newton_iters: int = 0
    newton_accepted: int = 0
    krylov_iters: int = 0
    apg_iters: int = 0
    residual: float = np.inf
    converged: bool = False

    @property
    def inner_iters(self) -> int:
        return self.newton_iters + self.apg_iters


class BoxObjective:
    """Smooth strongly convex objective minimized over the nonnegative
    orthant; subclasses provide gradient, generalized Hessian action, and
    a Lipschitz constant of the gradient."""

    lipschitz: float

    def grad(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess_apply_at(self, z: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
        raise NotImplementedError

    def active_hess_apply(
        self, z: np.ndarray, active: np.ndarray
    ) -> Callable[[np.ndarray], np.ndarray] | None:
        """Action of the Hessian block restricted to the active rows and
        columns, when the structure allows forming it cheaply; None keeps
        callers on the full-space path."""
        return None


class ZetaEliminated(BoxObjective):
    """Inequality-block objective with the nonnegativity multiplier
    eliminated: 0.5 ||max(B^* z + G2, 0)||^2 - <d, z> + (c/2) ||z - z0||^2."""

    def __init__(self, ineq: LinearMap, g2: np.ndarray, d: np.ndarray,
                 c: float, z0: np.ndarray, lipschitz: float):
        self.ineq = ineq
        self.g2 = g2
        self.g2_flat = np.asarray(g2, dtype=float).ravel()
        self.d = d
        self.c = c
        self.z0 = z0
        self.lipschitz = lipschitz

    def inner_matrix(self, z: np.ndarray) -> np.ndarray:
        return self.ineq.adjoint(z) + self.g2

    def _inner_flat(self, z: np.ndarray) -> np.ndarray:
        inner = self.ineq.adjoint_flat(z)
        inner += self.g2_flat
        return inner

    def value(self, z: np.ndarray) -> float:
        clipped = np.maximum(self._inner_flat(z), 0.0)
        prox = z - self.z0
        return (
            0.5 * float(clipped @ clipped)
            - float(self.d @ z)
            + 0.5 * self.c * float(prox @ prox)
        )

    def grad(self, z: np.ndarray) -> np.ndarray:
        inner = self._inner_flat(z)
        np.maximum(inner, 0.0, out=inner)
        g = self.ineq.forward_flat(inner)
        g -= self.d
        g += self.c * (z - self.z0)
        return g

    def hess_apply_at(self, z: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
        mask = self._inner_flat(z) > 0.0

        def apply(v: np.ndarray) -> np.ndarray:
            inner = self.ineq.adjoint_flat(v)
            inner *= mask
            out = self.ineq.forward_flat(inner)
            out += self.c * v
            return out

        return apply

    def active_hess_apply(self, z, active):
        rows = getattr(self.ineq, "rows", None)
        if rows is None:
            return None
        mask = (self._inner_flat(z) > 0.0).astype(float)
        r_a = rows[np.flatnonzero(active)]
        r_a_t = r_a.T.tocsr()
        c = self.c

        def apply(v: np.ndarray) -> np.ndarray:
            inner = r_a_t @ v
            inner *= mask
            out = r_a @ inner
            out += c * v
            return out

        return apply


class ZetaQuadratic(BoxObjective):
    """Plain strongly convex quadratic 0.5 <z, Q z> - <h, z> over z >= 0.

    ``op`` optionally names the row map whose Gram matrix is Q, which lets
    Jacobian systems restrict to active rows."""

    def __init__(self, q_apply: Callable[[np.ndarray], np.ndarray],
                 h: np.ndarray, lipschitz: float,
                 op: LinearMap | None = None):
        self.q_apply = q_apply
        self.h = h
        self.lipschitz = lipschitz
        self.op = op

    def value(self, z: np.ndarray) -> float:
        return 0.5 * float(z @ self.q_apply(z)) - float(self.h @ z)

    def grad(self, z: np.ndarray) -> np.ndarray:
        return self.q_apply(z) - self.h

    def hess_apply_at(self, z: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
        return self.q_apply

    def active_hess_apply(self, z, active):
        rows = getattr(self.op, "rows", None)
        if rows is None:
            return None
        r_a = rows[np.flatnonzero(active)]
        r_a_t = r_a.T.tocsr()

        def apply(v: np.ndarray) -> np.ndarray:
            return r_a @ (r_a_t @ v)

        return apply


def zeta_value_grad(
    ineq: LinearMap, g2: np.ndarray, d: np.ndarray, c: float,
    z0: np.ndarray, z: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Value and gradient of the eliminated inequality-block objective."""
    prob = ZetaEliminated(ineq, g2, d, c, z0, lipschitz=0.0)
    return prob.value(z), prob.grad(z)


def f_residual(prob: BoxObjective, z: np.ndarray) -> np.ndarray:
    """Natural residual of the bound-constrained problem at ``z``."""
    return z - np.maximum(z - prob.grad(z), 0.0)


def _residual_from_grad(z: np.ndarray, grad: np.ndarray) -> np.ndarray:
    return z - np.maximum(z - grad, 0.0)


def _bicgstab(
    apply_a: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    abs_target: float,
    max_matvecs: int,
) -> tuple[np.ndarray, int]:
    """Unpreconditioned BiCGStab from a zero start, stopping on an absolute
    residual target. Returns the iterate and the matvec count; breakdown
    just returns the current iterate for the caller to verify."""
    x = np.zeros_like(b)
    r = b.copy()
    b_norm = float(np.linalg.norm(r))
    if b_norm <= abs_target:
        return x, 0
    # Residual growth past this is divergence (singular or indefinite
    # system); stop early and let the caller's verification reject it.
    blowup = 1e8 * b_norm
    r_hat = r.copy()
    rho = 1.0
    alpha = 1.0
    omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    n = 0
    while n < max_matvecs:
        rho_new = float(r_hat @ r)
        if rho_new == 0.0 or not np.isfinite(rho_new):
            break
        if n == 0:
            p[:] = r
        else:
            if omega == 0.0:
                break
            beta = (rho_new / rho) * (alpha / omega)
            p = r + beta * (p - omega * v)
        rho = rho_new
        v = apply_a(p)
        n += 1
        denom = float(r_hat @ v)
        if denom == 0.0 or not np.isfinite(denom):
            break
        alpha = rho / denom
        s = r - alpha * v
        snorm = float(np.linalg.norm(s))
        if snorm <= abs_target:
            x += alpha * p
            return x, n
        if not np.isfinite(snorm) or snorm > blowup:
            break
        t = apply_a(s)
        n += 1
        tt = float(t @ t)
        if tt == 0.0 or not np.isfinite(tt):
            break
        omega = float(t @ s) / tt
        x += alpha * p
        x += omega * s
        r = s - omega * t
        rnorm = float(np.linalg.norm(r))
        if rnorm <= abs_target:
            return x, n
        if not np.isfinite(rnorm) or rnorm > blowup:
            break
    return x, n


def f_jacobian_solve(
    prob: BoxObjective,
    z: np.ndarray,
    rhs: np.ndarray,
    rtol: float,
    max_iter: int = 300,
    grad: np.ndarray | None = None,
) -> tuple[np.ndarray, float, int, bool]:
    """Solve one generalized-Jacobian system of the residual map at ``z``.

    The Jacobian element is I - D + D H with D the active-set indicator of
    the projection (boundary entries inactive) and H the generalized
    Hessian of the smooth part. Rows outside the active set are identity
    rows, so those step entries are read off the right-hand side and only
    the active block goes through a stabilized nonsymmetric Krylov solve
    when the objective exposes the restricted Hessian action. Returns the
    step, the achieved relative residual, the matvec count, and whether
    the requested accuracy was met (verified on the full system, not
    trusted from the solver's recurrence).
    """
    if grad is None:
        grad = prob.grad(z)
    active = (z - grad) > 0.0
    hess = prob.hess_apply_at(z)

    def jac_apply(v: np.ndarray) -> np.ndarray:
        hv = hess(v)
        return np.where(active, hv, v)

    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return np.zeros_like(rhs), 0.0, 0, True
    if not active.any():
        return rhs.copy(), 0.0, 0, True
    target = max(rtol, 1e-14) * rhs_norm
    max_matvecs = 2 * max_iter

    reduced = None if active.all() else prob.active_hess_apply(z, active)
    if reduced is None:
        x, n_matvec = _bicgstab(jac_apply, rhs, target, max_matvecs)
    else:
        # Fixing the identity entries leaves the active block coupled to
        # them through one Hessian application; the reduced residual then
        # equals the full residual, so the absolute target carries over.
        x = np.where(active, 0.0, rhs)
        coupling = hess(x)
        idx = np.flatnonzero(active)
        x_a, mv = _bicgstab(reduced, rhs[idx] - coupling[idx], target, max_matvecs)
        n_matvec = mv + 1
        x[idx] = x_a

    if not np.all(np.isfinite(x)):
        return np.zeros_like(rhs), np.inf, n_matvec, False
    achieved = float(np.linalg.norm(jac_apply(x) - rhs))
    rel = achieved / rhs_norm
    return x, rel, n_matvec, rel <= rtol


def apg_sncg_solve(
    prob: BoxObjective,
    z_init: np.ndarray,
    tol: float,
    opts: ApgSncgOptions | None = None,
) -> tuple[np.ndarray, ApgSncgStats]:
    """Minimize a smooth strongly convex objective over the nonnegative
    orthant by semismooth Newton steps on the natural residual, falling
    back to accelerated projected gradient until the residual contracts.

    Terminates when the residual norm at a feasible point reaches ``tol``;
    the returned point is always entrywise nonnegative.
    """
    opts = opts or ApgSncgOptions()
    stats = ApgSncgStats()
    z = np.maximum(np.asarray(z_init, dtype=float), 0.0)
    if z.size == 0:
        stats.converged = True
        stats.residual = 0.0
        return z, stats
    lip = max(prob.lipschitz, 1e-12)

    grad_z = prob.grad(z)
    res = _residual_from_grad(z, grad_z)
    res_norm = float(np.linalg.norm(res))
    while True:
        if res_norm <= tol:
            # The loop can wander slightly outside the orthant through
            # Newton steps; report at the clipped point and only stop once
            # the residual there is small too.
            z_clip = np.maximum(z, 0.0)
            if z_clip is not z and not np.array_equal(z_clip, z):
                grad_clip = prob.grad(z_clip)
                res_clip = _residual_from_grad(z_clip, grad_clip)
                rn_clip = float(np.linalg.norm(res_clip))
                if rn_clip <= tol:
                    stats.residual = rn_clip
                    stats.converged = True
                    return z_clip, stats
                z, grad_z, res, res_norm = z_clip, grad_clip, res_clip, rn_clip
                continue
            stats.residual = res_norm
            stats.converged = True
            return z, stats

        if stats.newton_iters >= opts.newton_max_iter or (
            stats.apg_iters >= opts.apg_total_cap
        ):
            break

        cycle_ref = res_norm
        target = opts.gamma * cycle_ref
        # Newton phase: semismooth steps are taken while they keep
        # improving the residual; the cycle closes as soon as the combined
        # contraction reaches gamma. A step that missed its Krylov
        # tolerance still gets its line-search chance. Far from the
        # solution the full step overshoots and the workable scale sits
        # deep in the ladder, so backtracking continues while the trial
        # residual keeps decreasing down the ladder.
        history: list[float] = []
        while (
            res_norm > target
            and res_norm > tol
            and stats.newton_iters < opts.newton_max_iter
        ):
            stats.newton_iters += 1
            # Loose directions are all the ladder needs while the active
            # set is still moving; near the end the Krylov error budget
            # scales with the requested accuracy rather than the shrinking
            # residual, which caps the cost of the last few systems.
            if res_norm > 3e-4:
                forcing = opts.eta
            else:
                forcing = min(
                    opts.eta, max(res_norm, 0.25 * tol / res_norm)
                )
            step_dir, rel, mv, ok = f_jacobian_solve(
                prob, z, -res, forcing, opts.krylov_max_iter, grad=grad_z
            )
            stats.krylov_iters += mv
            step_norm = float(np.linalg.norm(step_dir))
            if not np.isfinite(step_norm) or step_norm == 0.0:
                break
            base_z = z
            scale = 1.0
            improved = False
            prev_try = np.inf
            for trial in range(opts.line_search_max + 1):
                z_try = base_z + scale * step_dir
                grad_try = prob.grad(z_try)
                res_try = _residual_from_grad(z_try, grad_try)
                rn_try = float(np.linalg.norm(res_try))
                if rn_try < res_norm:
                    # First improving scale wins; the next Newton system
                    # is built there.
                    z, grad_z, res, res_norm = z_try, grad_try, res_try, rn_try
                    improved = True
                    break
                if rn_try >= prev_try or trial >= 12:
                    break
                prev_try = rn_try
                scale *= opts.rho
            if not improved:
                break
            history.append(res_norm)
            if len(history) >= 3 and res_norm > 0.985 * history[-3]:
                break
        if res_norm <= target or res_norm <= tol:
            if res_norm <= opts.gamma * cycle_ref:
                stats.newton_accepted += 1
            continue

        # Safeguard: accelerated projected gradient until the residual
        # contracts by gamma relative to the cycle start.
        target = opts.gamma * cycle_ref
        beta = 1.0
        x_tilde_prev = np.maximum(z, 0.0)
        point = z.copy()
        point_grad = grad_z
        best_z, best_rn = z, res_norm
        contracted = False
        while stats.apg_iters < opts.apg_total_cap:
            stats.apg_iters += 1
            x_tilde = np.maximum(point - point_grad / lip, 0.0)
            grad_t = prob.grad(x_tilde)
            res_t = _residual_from_grad(x_tilde, grad_t)
            rn_t = float(np.linalg.norm(res_t))
            if rn_t < best_rn:
                best_z, best_rn = x_tilde, rn_t
            if rn_t <= target or rn_t <= tol:
                z, grad_z, res, res_norm = x_tilde, grad_t, res_t, rn_t
                contracted = True
                break
            beta_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * beta * beta))
            coef = (beta - 1.0) / beta_next
            point = x_tilde + coef * (x_tilde - x_tilde_prev)
            # The extrapolated point is feasible-adjacent but not clipped;
            # its gradient is what the next proximal step needs.
            point_grad = prob.grad(point)
            x_tilde_prev = x_tilde
            beta = beta_next
        if not contracted:
            # Cap exhausted: return the best feasible point seen.
            z = np.maximum(best_z, 0.0)
            grad_z = prob.grad(z)
            res = _residual_from_grad(z, grad_z)
            res_norm = float(np.linalg.norm(res))
            break

    z = np.maximum(z, 0.0)
    res_norm = float(np.linalg.norm(f_residual(prob, z)))
    stats.residual = res_norm
    stats.converged = res_norm <= tol
    return z, stats


def solve_inequality_block(
    ineq: LinearMap,
    g2: np.ndarray,
    d: np.ndarray,
    c: float,
    z0: np.ndarray,
    tol: float,
    opts: ApgSncgOptions | None = None,
    lipschitz: float | None = None,
) -> tuple[np.ndarray, np.ndarray, ApgSncgStats]:
    """Solve the inequality/nonnegativity block around prox center ``z0``.

    Returns the inequality multiplier, the recovered nonnegativity
    multiplier max(-B^* z - G2, 0), and solver statistics. With no
    inequality rows the multiplier is empty and the matrix part is exact.
    """
    if ineq.m == 0:
        stats = ApgSncgStats(residual=0.0, converged=True)
        return np.zeros(0), np.maximum(-g2, 0.0), stats
    if lipschitz is None:
        raise ValueError("lipschitz bound for B B^T is required")
    prob = ZetaEliminated(ineq, g2, d, c, z0, lipschitz + c)
    z, stats = apg_sncg_solve(prob, z0, tol, opts)
    z_big = np.maximum(-(ineq.adjoint(z) + g2), 0.0)
    return z, z_big, stats


# ---------------------------------------------------------------------------
# Block-diagonal majorization of the inequality Gram


@dataclass
class PartitionMajorizer:
    """Block-diagonal operator M >= B B^T built from a row partition."""

    groups: list[slice]
    blocks: list[np.ndarray]
    block_lams: list[float]

    @property
    def q(self) -> int:
        return len(self.groups)

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        for sl, blk in zip(self.groups, self.blocks):
            out[sl] = blk @ v[sl]
        return out


def _sqrt_psd(a: np.ndarray) -> np.ndarray:
    w, p = np.linalg.eigh(a)
    floor = -1e-10 * max(1.0, float(w[-1]) if w.size else 1.0)
    if w.size and w[0] < floor:
        raise ValueError(
            f"matrix square root of an indefinite block (min eig {w[0]:.3e})"
        )
    w = np.clip(w, 0.0, None)
    return (p * np.sqrt(w)) @ p.T


def build_partition_majorizer(ineq: SparseRowMap, q: int) -> PartitionMajorizer:
    """Split the inequality rows into ``q`` contiguous groups and build the
    per-group dense blocks B_i B_i^T + sum_j sqrt(B_i B_j^T B_j B_i^T)."""
    m = ineq.m
    if not 1 <= q:
        raise ValueError("partition count must be at least 1")
    q = min(q, m) if m else 1
    rows = ineq.row_matrix()
    sizes = [m // q + (1 if i < m % q else 0) for i in range(q)]
    groups, start = [], 0
    for s in sizes:
        groups.append(slice(start, start + s))
        start += s
    parts = [rows[sl] for sl in groups]
    cross = [[parts[i] @ parts[j].T for j in range(q)] for i in range(q)]
    blocks, lams = [], []
    for i in range(q):
        block = np.asarray(cross[i][i].toarray(), dtype=float)
        for j in range(q):
            if j == i:
                continue
            bij = cross[i][j]
            block = block + _sqrt_psd((bij @ bij.T).toarray())
        block = 0.5 * (block + block.T)
        blocks.append(block)
        if block.shape[0]:
            lam = float(
                scipy.linalg.eigh(
                    block, eigvals_only=True,
                    subset_by_index=[block.shape[0] - 1, block.shape[0] - 1],
                )[0]
            )
        else:
            lam = 0.0
        lams.append(lam)
    return PartitionMajorizer(groups, blocks, lams)


def solve_z_decomposed(
    ineq: LinearMap,
    majorizer: PartitionMajorizer,
    g2: np.ndarray,
    d: np.ndarray,
    c: float,
    z0: np.ndarray,
    z_big0: np.ndarray,
    tol: float,
    opts: ApgSncgOptions | None = None,
) -> tuple[np.ndarray, np.ndarray, ApgSncgStats]:
    """Solve the inequality block under the block-diagonal majorization.

    The extra proximal term decouples the problem: the nonnegativity
    multiplier has the closed form max(-(G2 - Z0 + B^* z0)/2, 0) and the
    inequality multiplier splits into independent per-group quadratics
    solved to a combined residual of ``tol``.
    """
    bz0 = ineq.adjoint(z0)
    h = d + c * z0 + 2.0 * majorizer.apply(z0) - ineq.forward(g2 + z_big0 + bz0)
    z = np.empty_like(z0)
    total = ApgSncgStats(residual=0.0, converged=True)
    group_tol = tol / np.sqrt(max(majorizer.q, 1))
    for sl, blk, lam in zip(majorizer.groups, majorizer.blocks, majorizer.block_lams):
        prob = ZetaQuadratic(
            lambda v, _b=blk: 2.0 * (_b @ v) + c * v, h[sl], 2.0 * lam + c
        )
        zi, st = apg_sncg_solve(prob, np.maximum(z0[sl], 0.0), group_tol, opts)
        z[sl] = zi
        total.newton_iters += st.newton_iters
        total.newton_accepted += st.newton_accepted
        total.krylov_iters += st.krylov_iters
        total.apg_iters += st.apg_iters
        total.residual = float(np.hypot(total.residual, st.residual))
        total.converged = total.converged and st.converged
    z_big = np.maximum(-(g2 - z_big0 + bz0) / 2.0, 0.0)
    return z, z_big, total
