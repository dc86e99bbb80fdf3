"""Solution quality measures and reporting: relative KKT residuals, the
duality gap, convergence traces with a fixed CSV schema, theoretical decay
envelopes, and performance profiles rendered to SVG without a plotting
dependency.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import SpectralDecomposition, project_psd
from .model import BestApproxInstance, DualPoint, primal_from_dual

TRACE_COLUMNS = (
    "iter", "time_s", "eta1", "eta2", "eta3", "eta4", "eta", "eta_gap",
    "obj_p", "obj_d", "eps_k", "newton_iters", "cg_iters", "z_inner_iters",
)


@dataclass(frozen=True)
class KktResidual:
    """Relative KKT residuals of a dual point and the matching objectives."""

    eta1: float
    eta2: float
    eta3: float
    eta4: float
    eta_gap: float
    obj_p: float
    obj_d: float

    @property
    def eta(self) -> float:
        return max(self.eta1, self.eta2, self.eta3, self.eta4)

    def as_dict(self) -> dict:
        return {
            "eta1": self.eta1, "eta2": self.eta2, "eta3": self.eta3,
            "eta4": self.eta4, "eta": self.eta, "eta_gap": self.eta_gap,
            "obj_p": self.obj_p, "obj_d": self.obj_d,
        }


def duality_gap(inst: BestApproxInstance, w: DualPoint,
                x: np.ndarray | None = None) -> tuple[float, float, float]:
    """Primal objective, dual objective, and their normalized signed gap."""
    if x is None:
        x = primal_from_dual(inst, w)
    diff = x - inst.G
    obj_p = 0.5 * float(np.sum(diff * diff))
    obj_d = (
        -0.5 * float(np.sum(x * x))
        + float(inst.b @ w.y)
        + (float(inst.d @ w.z) if inst.ineq.m else 0.0)
        + 0.5 * float(np.sum(inst.G * inst.G))
    )
    gap = (obj_p - obj_d) / (1.0 + abs(obj_p) + abs(obj_d))
    return obj_p, obj_d, gap


def kkt_residual(
    inst: BestApproxInstance,
    w: DualPoint,
    xs_decomp: SpectralDecomposition | None = None,
) -> KktResidual:
    """Relative KKT residuals at a dual point.

    ``xs_decomp`` may carry a precomputed eigendecomposition of ``X - S``
    for reuse; it must belong to exactly that matrix.
    """
    x = primal_from_dual(inst, w)
    eta1 = float(np.linalg.norm(inst.eq.forward(x) - inst.b)) / (
        1.0 + float(np.linalg.norm(inst.b))
    )
    if inst.ineq.m:
        slack = inst.ineq.forward(x) - inst.d
        eta2 = float(np.linalg.norm(slack - np.maximum(slack - w.z, 0.0))) / (
            1.0 + float(np.linalg.norm(inst.d))
        )
    else:
        eta2 = 0.0
    xs = x - w.S
    proj_xs, _ = project_psd(xs, xs_decomp)
    nx = float(np.linalg.norm(x))
    eta3 = float(np.linalg.norm(x - proj_xs)) / (
        1.0 + nx + float(np.linalg.norm(w.S))
    )
    xz = x - w.Z
    eta4 = float(np.linalg.norm(x - np.maximum(xz, 0.0))) / (
        1.0 + nx + float(np.linalg.norm(w.Z))
    )
    obj_p, obj_d, gap = duality_gap(inst, w, x)
    return KktResidual(eta1, eta2, eta3, eta4, gap, obj_p, obj_d)


@dataclass
class ConvergenceTrace:
    """Per-check records of one solver run, serializable to a fixed CSV
    schema. Inner-effort columns report the work of the recorded iteration."""

    iters: list[int] = field(default_factory=list)
    time_s: list[float] = field(default_factory=list)
    kkt: list[KktResidual] = field(default_factory=list)
    eps_k: list[float] = field(default_factory=list)
    newton_iters: list[int] = field(default_factory=list)
    cg_iters: list[int] = field(default_factory=list)
    z_inner_iters: list[int] = field(default_factory=list)

    def append(self, k: int, elapsed: float, kkt: KktResidual, eps: float,
               newton: int = 0, cg: int = 0, z_inner: int = 0) -> None:
        self.iters.append(k)
        self.time_s.append(elapsed)
        self.kkt.append(kkt)
        self.eps_k.append(eps)
        self.newton_iters.append(newton)
        self.cg_iters.append(cg)
        self.z_inner_iters.append(z_inner)

    def __len__(self) -> int:
        return len(self.iters)

    def rows(self, canonical: bool = False):
        for i in range(len(self.iters)):
            k = self.kkt[i]
            yield (
                self.iters[i],
                0.0 if canonical else self.time_s[i],
                k.eta1, k.eta2, k.eta3, k.eta4, k.eta, k.eta_gap,
                k.obj_p, k.obj_d, self.eps_k[i],
                self.newton_iters[i], self.cg_iters[i], self.z_inner_iters[i],
            )

    def to_csv(self, canonical: bool = False) -> str:
        lines = [",".join(TRACE_COLUMNS)]
        for row in self.rows(canonical):
            lines.append(",".join(_csv_cell(v) for v in row))
        return "\n".join(lines) + "\n"

    def write_csv(self, path, canonical: bool = False) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_csv(canonical))


def _csv_cell(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


# ---------------------------------------------------------------------------
# Theoretical decay envelope


@dataclass(frozen=True)
class EnvelopeReport:
    passed: bool
    max_violation: float
    c0: float
    consistent: bool


def complexity_envelope(
    theta_values: Sequence[float],
    theta_star: float,
    r0_h_sq: float,
    inexact: bool = False,
    slack: float = 1e-8,
) -> EnvelopeReport:
    """Check objective gaps against the accelerated O(1/k^2) envelope.

    ``theta_values[k-1]`` is the objective at outer iteration k. In exact
    mode the gap must satisfy gap_k <= 2 R0 / (k+1)^2 + slack. In inexact
    mode the smallest constant c0 >= 0 with gap_k <= (2 R0 + c0)/(k+1)^2
    is fitted and reported. A gap below -slack flags an inconsistent
    reference value.
    """
    gaps = np.asarray(theta_values, dtype=float) - theta_star
    k = np.arange(1, gaps.size + 1, dtype=float)
    bound = 2.0 * r0_h_sq / (k + 1.0) ** 2
    consistent = bool(np.all(gaps >= -slack))
    if not inexact:
        viol = gaps - bound
        max_v = float(viol.max()) if viol.size else 0.0
        return EnvelopeReport(max_v <= slack and consistent, max_v, 0.0, consistent)
    c0 = float(np.max(gaps * (k + 1.0) ** 2 - 2.0 * r0_h_sq, initial=0.0))
    c0 = max(c0, 0.0)
    return EnvelopeReport(consistent and np.isfinite(c0), 0.0, c0, consistent)


# ---------------------------------------------------------------------------
# Performance profiles


@dataclass
class PerfProfileCurve:
    """Distribution of per-problem time ratios for one solver."""

    solver: str
    ratios: np.ndarray

    def value(self, x: float) -> float:
        if self.ratios.size == 0:
            return 0.0
        return float(np.mean(self.ratios <= x))

    def breakpoints(self) -> np.ndarray:
        finite = self.ratios[np.isfinite(self.ratios)]
        return np.unique(finite)


def performance_profile(
    solvers: Sequence[str],
    times: np.ndarray,
    solved: np.ndarray,
) -> list[PerfProfileCurve]:
    """Time-ratio profile curves over a solver-by-problem result grid.

    ``times[s, p]`` is the wall time of solver s on problem p and
    ``solved[s, p]`` whether it reached tolerance; unsolved cells get an
    infinite ratio. Each curve reports, as a function of x >= 1, the
    fraction of problems solved within x times the best time.
    """
    times = np.asarray(times, dtype=float)
    solved = np.asarray(solved, dtype=bool)
    if times.shape != solved.shape or times.shape[0] != len(solvers):
        raise ValueError("result grid shapes do not agree")
    eff = np.where(solved, times, np.inf)
    best = eff.min(axis=0)
    curves = []
    for s, name in enumerate(solvers):
        with np.errstate(invalid="ignore"):
            ratios = np.where(
                np.isfinite(eff[s]) & np.isfinite(best), eff[s] / best, np.inf
            )
        curves.append(PerfProfileCurve(name, ratios))
    return curves


_SVG_COLORS = ("#1f6fb2", "#d1495b", "#3a7d44", "#8d5a97", "#c77f2e", "#4a4a4a")


def render_profile_svg(curves: Sequence[PerfProfileCurve],
                       title: str = "Performance profile") -> str:
    """Step-curve profile plot as a standalone SVG document."""
    width, height = 640, 420
    left, right, top, bottom = 60, 20, 40, 50
    plot_w, plot_h = width - left - right, height - top - bottom
    finite = np.concatenate(
        [c.breakpoints() for c in curves] or [np.array([1.0])]
    )
    x_max = float(finite.max()) if finite.size else 1.0
    x_max = max(2.0, min(x_max * 1.05, 50.0))

    def sx(x: float) -> float:
        return left + (x - 1.0) / (x_max - 1.0) * plot_w

    def sy(y: float) -> float:
        return top + (1.0 - y) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" '
        f'y2="{top + plot_h}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" '
        f'stroke="black"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = sy(frac)
        parts.append(
            f'<line x1="{left - 4}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" '
            f'stroke="black"/>'
        )
        parts.append(
            f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{frac:g}</text>'
        )
    n_ticks = 5
    for t in range(n_ticks + 1):
        x = 1.0 + t * (x_max - 1.0) / n_ticks
        px = sx(x)
        parts.append(
            f'<line x1="{px:.1f}" y1="{top + plot_h}" x2="{px:.1f}" '
            f'y2="{top + plot_h + 4}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{px:.1f}" y="{top + plot_h + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{x:.1f}</text>'
        )
    parts.append(
        f'<text x="{left + plot_w / 2}" y="{height - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">time ratio to best solver</text>'
    )
    for idx, curve in enumerate(curves):
        color = _SVG_COLORS[idx % len(_SVG_COLORS)]
        xs = [1.0, *curve.breakpoints().tolist(), x_max]
        pts = []
        y_prev = curve.value(1.0)
        pts.append((sx(1.0), sy(y_prev)))
        for x in xs[1:]:
            x_c = min(x, x_max)
            y_new = curve.value(x_c)
            pts.append((sx(x_c), sy(y_prev)))
            pts.append((sx(x_c), sy(y_new)))
            y_prev = y_new
        path = " ".join(f"{px:.2f},{py:.2f}" for px, py in pts)
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.8" '
            f'points="{path}"/>'
        )
        ly = top + 16 + 16 * idx
        parts.append(
            f'<line x1="{left + plot_w - 130}" y1="{ly - 4}" '
            f'x2="{left + plot_w - 104}" y2="{ly - 4}" stroke="{color}" '
            f'stroke-width="1.8"/>'
        )
        parts.append(
            f'<text x="{left + plot_w - 98}" y="{ly}" font-family="sans-serif" '
            f'font-size="12">{curve.solver}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


# ---------------------------------------------------------------------------
# Run summaries


def make_summary(
    instance: str,
    solver: str,
    seed: int,
    tol: float,
    iterations: int,
    reason: str,
    final: KktResidual,
    config: dict,
    time_s: float,
) -> dict:
    return {
        "instance": instance,
        "solver": solver,
        "seed": seed,
        "tol": tol,
        "iterations": iterations,
        "reason": reason,
        "final": final.as_dict(),
        "config": config,
        "time_s": time_s,
    }


def summary_to_json(summary: dict, canonical: bool = False) -> str:
    """Serialize a run summary deterministically; the canonical form drops
    wall-clock fields so byte comparison is meaningful across runs."""
    payload = dict(summary)
    if canonical:
        payload.pop("time_s", None)
        payload.pop("timestamp", None)
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"
