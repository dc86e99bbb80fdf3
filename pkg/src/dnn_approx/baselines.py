"""Reference solvers the accelerated method is benchmarked against: a
majorized accelerated block gradient scheme, plain and modified cyclic
block descent, and two randomized accelerated block variants.

All share the outer monitoring, tolerance schedule, and result shape of
the main solver, so traces and summaries are directly comparable.
"""

from __future__ import annotations

import numpy as np

from .engine import (
    RunMonitor,
    SolveOptions,
    SolveResult,
    extrapolate,
    extrapolation_coefficient,
    momentum_next,
    solve_imabcd,
)
from .linalg import eig_sym, mirror_project_psd, project_psd
from .model import BestApproxInstance, DualPoint
from .subsolvers import ZetaQuadratic, apg_sncg_solve


def _residual_matrix(inst: BestApproxInstance, w: DualPoint) -> np.ndarray:
    r = inst.eq.adjoint(w.y) + w.S + w.Z + inst.G
    if inst.ineq.m:
        r = r + inst.ineq.adjoint(w.z)
    return r


def solve_abcgd(inst: BestApproxInstance,
                opts: SolveOptions | None = None) -> SolveResult:
    """Accelerated block gradient descent with half-step majorized updates.

    The equality/psd pair takes half-steps against the Gram and identity
    majorizations, the inequality multiplier a projected gradient step with
    the Gram spectral bound, the nonnegativity multiplier a half-step, and
    all four blocks are extrapolated with the accelerated momentum.
    """
    opts = opts or SolveOptions()
    mon = RunMonitor(inst, opts, "abcgd")
    gram = inst.eq_gram
    lam = inst.lipschitz_bbt()
    w_tilde = DualPoint.zeros(inst)
    w = w_tilde.copy()
    t = 1.0
    reason = "iteration_cap"
    k = 0
    for k in range(1, opts.max_iter + 1):
        r_half = _residual_matrix(inst, w)
        y_t = w.y - 0.5 * gram.solve(inst.eq.forward(r_half) - inst.b)
        s_t, _ = project_psd(w.S - 0.5 * r_half)
        r_full = inst.eq.adjoint(y_t) + s_t + w.Z + inst.G
        if inst.ineq.m:
            r_full = r_full + inst.ineq.adjoint(w.z)
            z_t = np.maximum(
                w.z - (inst.ineq.forward(r_full) - inst.d) / (2.0 * lam), 0.0
            )
        else:
            z_t = w.z
        zz_t = np.maximum(w.Z - 0.5 * r_full, 0.0)
        w_new = DualPoint(y_t, s_t, z_t, zz_t)
        t_next = momentum_next(t)
        w = extrapolate(w_new, w_tilde, extrapolation_coefficient(t, t_next))
        w_tilde = w_new
        t = t_next
        reason = mon.observe(k, w_tilde, 0.0)
        if reason:
            break
    return mon.finalize(k, w_tilde, reason)


def _bcd_sweep_setup(inst: BestApproxInstance, opts: SolveOptions):
    gram = inst.eq_gram
    lam = inst.lipschitz_bbt()
    schedule = opts.schedule_for(inst)
    return gram, lam, schedule


def solve_bcd(inst: BestApproxInstance,
              opts: SolveOptions | None = None) -> SolveResult:
    """Cyclic four-block descent; the inequality block is the only one
    without a closed form and is solved by the safeguarded Newton method
    to the schedule tolerance."""
    opts = opts or SolveOptions()
    gram, lam, schedule = _bcd_sweep_setup(inst, opts)
    mon = RunMonitor(inst, opts, "bcd")
    w = DualPoint.zeros(inst)
    bz = np.zeros_like(inst.G)
    reason = "iteration_cap"
    k = 0
    for k in range(1, opts.max_iter + 1):
        base = bz + w.Z + inst.G
        w.y = gram.solve(inst.b - inst.eq.forward(w.S + base))
        ay = inst.eq.adjoint(w.y)
        w.S = mirror_project_psd(eig_sym(ay + base))
        z_inner = 0
        if inst.ineq.m:
            m2 = ay + w.S + w.Z + inst.G
            prob = ZetaQuadratic(
                inst.ineq.gram_apply, inst.d - inst.ineq.forward(m2), lam,
                op=inst.ineq,
            )
            w.z, zst = apg_sncg_solve(prob, w.z, schedule.eps_v(k), opts.apg)
            z_inner = zst.inner_iters
            bz = inst.ineq.adjoint(w.z)
        w.Z = np.maximum(-(ay + w.S + bz + inst.G), 0.0)
        reason = mon.observe(k, w, schedule.eps_v(k), z_inner=z_inner)
        if reason:
            break
    return mon.finalize(k, w, reason)


def solve_mbcd(inst: BestApproxInstance,
               opts: SolveOptions | None = None) -> SolveResult:
    """Cyclic four-block descent with the inequality block replaced by a
    single projected gradient step at the Gram spectral bound."""
    opts = opts or SolveOptions()
    gram, lam, schedule = _bcd_sweep_setup(inst, opts)
    mon = RunMonitor(inst, opts, "mbcd")
    w = DualPoint.zeros(inst)
    bz = np.zeros_like(inst.G)
    reason = "iteration_cap"
    k = 0
    for k in range(1, opts.max_iter + 1):
        base = bz + w.Z + inst.G
        w.y = gram.solve(inst.b - inst.eq.forward(w.S + base))
        ay = inst.eq.adjoint(w.y)
        w.S = mirror_project_psd(eig_sym(ay + base))
        if inst.ineq.m:
            m2 = ay + w.S + w.Z + inst.G
            grad = inst.ineq.forward(m2 + bz) - inst.d
            w.z = np.maximum(w.z - grad / lam, 0.0)
            bz = inst.ineq.adjoint(w.z)
        w.Z = np.maximum(-(ay + w.S + bz + inst.G), 0.0)
        reason = mon.observe(k, w, 0.0)
        if reason:
            break
    return mon.finalize(k, w, reason)


def _alpha_next(alpha: float) -> float:
    """Accelerated randomized step-size recurrence, alpha0 = 1/4."""
    a2 = alpha * alpha
    return 0.5 * (np.sqrt(a2 * a2 + 4.0 * a2) - a2)


def _mix(a: DualPoint, b: DualPoint, coef: float) -> DualPoint:
    return DualPoint(
        (1.0 - coef) * a.y + coef * b.y,
        (1.0 - coef) * a.S + coef * b.S,
        (1.0 - coef) * a.z + coef * b.z,
        (1.0 - coef) * a.Z + coef * b.Z,
    )


def _solve_erabcd_family(inst: BestApproxInstance, opts: SolveOptions,
                         prox_gradient_z: bool) -> SolveResult:
    name = "erabcd2" if prox_gradient_z else "erabcd"
    mon = RunMonitor(inst, opts, name)
    gram = inst.eq_gram
    lam = inst.lipschitz_bbt()
    norm_b = float(np.sqrt(lam))
    schedule = opts.schedule_for(inst)
    rng = np.random.default_rng(opts.seed)
    w = DualPoint.zeros(inst)
    w_tilde = DualPoint.zeros(inst)
    alpha = 0.25
    reason = "iteration_cap"
    k = 0
    for k in range(1, opts.max_iter + 1):
        alpha = _alpha_next(alpha)
        w_hat = _mix(w, w_tilde, alpha)
        r_hat = _residual_matrix(inst, w_hat)
        block = int(rng.integers(1, 5))
        w_new = w_tilde.copy()
        z_inner = 0
        scale = 4.0 * alpha
        if block == 1:
            w_new.y = w_tilde.y + gram.solve(
                inst.b - inst.eq.forward(r_hat)
            ) / scale
        elif block == 2 and inst.ineq.m:
            grad_z = inst.ineq.forward(r_hat) - inst.d
            if prox_gradient_z:
                w_new.z = np.maximum(
                    w_tilde.z - grad_z / (scale * (lam + norm_b)), 0.0
                )
            else:
                def q_apply(v, _s=scale):
                    return _s * (inst.ineq.gram_apply(v) + norm_b * v)

                h = q_apply(w_tilde.z) - grad_z
                prob = ZetaQuadratic(q_apply, h, scale * (lam + norm_b))
                w_new.z, zst = apg_sncg_solve(
                    prob, w_tilde.z, schedule.eps_v(k), opts.apg
                )
                z_inner = zst.inner_iters
        elif block == 3:
            w_new.Z = np.maximum(w_tilde.Z - r_hat / scale, 0.0)
        elif block == 4:
            w_new.S = mirror_project_psd(eig_sym(r_hat / scale - w_tilde.S))
        w_next = w_hat.copy()
        if block == 1:
            w_next.y = w_hat.y + scale * (w_new.y - w_tilde.y)
        elif block == 2:
            w_next.z = w_hat.z + scale * (w_new.z - w_tilde.z)
        elif block == 3:
            w_next.Z = w_hat.Z + scale * (w_new.Z - w_tilde.Z)
        else:
            w_next.S = w_hat.S + scale * (w_new.S - w_tilde.S)
        w, w_tilde = w_next, w_new
        reason = mon.observe(k, w_tilde, schedule.eps_v(k), z_inner=z_inner)
        if reason:
            break
    return mon.finalize(k, w_tilde, reason)


def solve_erabcd(inst: BestApproxInstance,
                 opts: SolveOptions | None = None) -> SolveResult:
    """Randomized accelerated block descent: each iteration updates one of
    the four multiplier blocks, chosen uniformly with the seeded generator,
    at the randomized momentum mixing point."""
    opts = opts or SolveOptions()
    return _solve_erabcd_family(inst, opts, prox_gradient_z=False)


def solve_erabcd2(inst: BestApproxInstance,
                  opts: SolveOptions | None = None) -> SolveResult:
    """Variant of the randomized solver whose inequality-block update is a
    single prox-gradient step instead of an inner Newton solve."""
    opts = opts or SolveOptions()
    return _solve_erabcd_family(inst, opts, prox_gradient_z=True)


SOLVERS = {
    "imabcd": solve_imabcd,
    "abcgd": solve_abcgd,
    "bcd": solve_bcd,
    "mbcd": solve_mbcd,
    "erabcd": solve_erabcd,
    "erabcd2": solve_erabcd2,
}
