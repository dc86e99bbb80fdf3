"""Command line front end.

Subcommands: ``solve`` runs one solver on one instance, ``bench`` runs a
solver-by-instance grid in parallel, ``profile`` re-renders a profile plot
from bench results, ``gen`` builds and persists instances.

Run settings resolve with precedence command line > config file > defaults.
Instances are named by path (sparse weight file or prepared ``.npz``) or by
a generator spec like ``synth:biq:n=50,density=0.1,seed=3``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .baselines import SOLVERS
from .engine import SolveOptions, SolveResult
from .metrics import (
    make_summary,
    performance_profile,
    render_profile_svg,
    summary_to_json,
)
from .model import (
    BestApproxInstance,
    biq_from_triplets,
    build_ex_biq,
    load_biq,
    load_instance,
    make_random_biq,
    save_instance,
    write_biq,
)


@dataclass
class RunConfig:
    """Effective settings for one solver run."""

    solver: str = "imabcd"
    instance: str | None = None
    tol: float = 1e-6
    max_iter: int = 50_000
    time_limit_s: float | None = None
    prox_c: float = 1e-4
    eps0: float | None = None
    eps_power: float = 2.5
    check_every: int = 1
    seed: int = 0
    partition_q: int = 0
    output: str | None = None

    def to_options(self) -> SolveOptions:
        return SolveOptions(
            tol=self.tol,
            max_iter=self.max_iter,
            time_limit_s=self.time_limit_s,
            prox_c=self.prox_c,
            eps0=self.eps0,
            eps_power=self.eps_power,
            check_every=self.check_every,
            seed=self.seed,
            partition_q=self.partition_q,
        )


_RUN_FIELD_NAMES = tuple(f.name for f in fields(RunConfig))


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with run settings")
    p.add_argument("--solver", choices=sorted(SOLVERS))
    p.add_argument("--instance", help="weight file, .npz instance, or synth: spec")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--time-limit-s", type=float, dest="time_limit_s")
    p.add_argument("--prox-c", type=float, dest="prox_c")
    p.add_argument("--eps0", type=float)
    p.add_argument("--eps-power", type=float, dest="eps_power")
    p.add_argument("--check-every", type=int, dest="check_every")
    p.add_argument("--seed", type=int)
    p.add_argument("--partition-q", type=int, dest="partition_q")
    p.add_argument("--output", help="directory for summary and trace files")


def _load_config_file(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(data) - set(_RUN_FIELD_NAMES))
    if unknown:
        raise ValueError(f"unknown config keys in {path}: {', '.join(unknown)}")
    return data


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, an optional config file, and command-line flags."""
    merged: dict = {}
    if getattr(args, "config", None):
        merged.update(_load_config_file(args.config))
    for name in _RUN_FIELD_NAMES:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    return RunConfig(**merged)


# ---------------------------------------------------------------------------
# Instance resolution


def parse_synth_spec(spec: str) -> tuple[int, float, int, int]:
    """Parse ``synth:biq:n=...,density=...,seed=...,wmax=...``."""
    parts = spec.split(":")
    if len(parts) != 3 or parts[0] != "synth" or parts[1] != "biq":
        raise ValueError(f"bad generator spec {spec!r}")
    kv = {}
    for item in parts[2].split(","):
        if not item:
            continue
        key, _, value = item.partition("=")
        if not value:
            raise ValueError(f"bad generator parameter {item!r} in {spec!r}")
        kv[key] = value
    allowed = {"n", "density", "seed", "wmax"}
    unknown = sorted(set(kv) - allowed)
    if unknown:
        raise ValueError(f"unknown generator keys {unknown} in {spec!r}")
    if "n" not in kv:
        raise ValueError(f"generator spec {spec!r} needs n=")
    return (
        int(kv["n"]),
        float(kv.get("density", 0.1)),
        int(kv.get("seed", 0)),
        int(kv.get("wmax", 100)),
    )


def _synth_name(n: int, density: float, seed: int) -> str:
    return f"synth-biq-n{n}-d{density:g}-s{seed}"


def build_synthetic(spec: str) -> BestApproxInstance:
    n, density, seed, wmax = parse_synth_spec(spec)
    triplets = make_random_biq(n, density=density, seed=seed, weight_max=wmax)
    data = biq_from_triplets(n, triplets)
    return build_ex_biq(data, name=_synth_name(n, density, seed))


def resolve_instance(spec: str) -> BestApproxInstance:
    """Turn an instance argument into a solvable problem."""
    if spec.startswith("synth:"):
        return build_synthetic(spec)
    path = Path(spec)
    if path.suffix == ".npz":
        return load_instance(path)
    return build_ex_biq(load_biq(path), name=path.stem)


# ---------------------------------------------------------------------------
# solve


def _run_one(cfg: RunConfig) -> tuple[BestApproxInstance, SolveResult, float]:
    if not cfg.instance:
        raise ValueError("no instance given (use --instance or a config file)")
    if cfg.solver not in SOLVERS:
        raise ValueError(f"unknown solver {cfg.solver!r}")
    inst = resolve_instance(cfg.instance)
    start = time.perf_counter()
    result = SOLVERS[cfg.solver](inst, cfg.to_options())
    return inst, result, time.perf_counter() - start


def _write_run_outputs(
    out_dir: Path,
    inst: BestApproxInstance,
    cfg: RunConfig,
    result: SolveResult,
    elapsed: float,
    canonical: bool,
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    result.trace.write_csv(out_dir / "trace.csv", canonical=canonical)
    summary = make_summary(
        instance=inst.name or str(cfg.instance),
        solver=cfg.solver,
        seed=cfg.seed,
        tol=cfg.tol,
        iterations=result.iterations,
        reason=result.reason,
        final=result.kkt,
        config=asdict(cfg),
        time_s=elapsed,
    )
    (out_dir / "summary.json").write_text(
        summary_to_json(summary, canonical=canonical), encoding="utf-8"
    )


def _result_line(name: str, solver: str, result: SolveResult,
                 elapsed: float) -> str:
    return (
        f"{name} {solver}: reason={result.reason} iters={result.iterations} "
        f"eta={result.kkt.eta:.3e} gap={result.kkt.eta_gap:.3e} "
        f"time_s={elapsed:.2f}"
    )


def cmd_solve(args: argparse.Namespace) -> int:
    cfg = build_run_config(args)
    inst, result, elapsed = _run_one(cfg)
    if cfg.output:
        _write_run_outputs(
            Path(cfg.output), inst, cfg, result, elapsed, args.canonical
        )
    print(_result_line(inst.name or str(cfg.instance), cfg.solver, result,
                       elapsed))
    return 0 if result.converged else 2


# ---------------------------------------------------------------------------
# bench


def _worker_count(n_cells: int) -> int:
    cap = os.cpu_count() or 1
    env = os.environ.get("DNN_APPROX_THREADS")
    if env:
        cap = min(cap, max(1, int(env)))
    return max(1, min(cap, n_cells))


def _bench_cell(payload: dict) -> dict:
    """One grid cell; runs in a worker process, so returns plain data."""
    cfg = RunConfig(**payload)
    try:
        inst, result, elapsed = _run_one(cfg)
    except Exception as exc:  # noqa: BLE001 - cell failures must not kill the batch
        return {
            "instance": str(cfg.instance),
            "solver": cfg.solver,
            "error": str(exc),
        }
    summary = make_summary(
        instance=inst.name or str(cfg.instance),
        solver=cfg.solver,
        seed=cfg.seed,
        tol=cfg.tol,
        iterations=result.iterations,
        reason=result.reason,
        final=result.kkt,
        config=asdict(cfg),
        time_s=elapsed,
    )
    return {
        "instance": inst.name or str(cfg.instance),
        "solver": cfg.solver,
        "summary": summary,
        "trace_csv": result.trace.to_csv(),
    }


_RESULTS_COLUMNS = (
    "instance", "solver", "seed", "iterations", "time_s", "eta", "reason",
    "solved",
)


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = build_run_config(args)
    solvers = [s for chunk in args.solvers for s in chunk.split(",") if s]
    unknown = sorted(set(solvers) - set(SOLVERS))
    if unknown:
        raise ValueError(f"unknown solvers: {', '.join(unknown)}")
    if not args.instances:
        raise ValueError("bench needs at least one instance")
    if not cfg.output:
        raise ValueError("bench needs --output")
    out_dir = Path(cfg.output)
    out_dir.mkdir(parents=True, exist_ok=True)

    payloads = []
    for spec in args.instances:
        for solver in solvers:
            cell = asdict(cfg)
            cell.update(instance=spec, solver=solver, output=None)
            payloads.append(cell)

    workers = _worker_count(len(payloads))
    if workers == 1:
        outcomes = [_bench_cell(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_bench_cell, payloads))

    rows = []
    for cell in outcomes:
        if "error" in cell:
            print(
                f"{cell['instance']} {cell['solver']}: error {cell['error']}",
                file=sys.stderr,
            )
            rows.append({
                "instance": cell["instance"], "solver": cell["solver"],
                "seed": cfg.seed, "iterations": 0, "time_s": float("nan"),
                "eta": float("nan"), "reason": "error", "solved": 0,
            })
            continue
        summary = cell["summary"]
        slug = f"{summary['instance']}__{summary['solver']}".replace(os.sep, "-")
        cell_dir = out_dir / slug
        cell_dir.mkdir(parents=True, exist_ok=True)
        (cell_dir / "summary.json").write_text(
            summary_to_json(summary), encoding="utf-8"
        )
        (cell_dir / "trace.csv").write_text(cell["trace_csv"], encoding="utf-8")
        rows.append({
            "instance": summary["instance"], "solver": summary["solver"],
            "seed": summary["seed"], "iterations": summary["iterations"],
            "time_s": summary["time_s"], "eta": summary["final"]["eta"],
            "reason": summary["reason"],
            "solved": int(summary["reason"] == "tolerance"),
        })
        print(
            f"{summary['instance']} {summary['solver']}: "
            f"reason={summary['reason']} iters={summary['iterations']} "
            f"time_s={summary['time_s']:.2f}"
        )

    with open(out_dir / "results.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_RESULTS_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)

    curves = _curves_from_rows(rows)
    (out_dir / "profile.svg").write_text(
        render_profile_svg(curves), encoding="utf-8"
    )
    return 0


def _curves_from_rows(rows: list[dict]):
    solvers = list(dict.fromkeys(r["solver"] for r in rows))
    instances = list(dict.fromkeys(r["instance"] for r in rows))
    times = np.full((len(solvers), len(instances)), np.inf)
    solved = np.zeros((len(solvers), len(instances)), dtype=bool)
    for r in rows:
        i = solvers.index(r["solver"])
        j = instances.index(r["instance"])
        times[i, j] = float(r["time_s"])
        solved[i, j] = bool(int(r["solved"]))
    return performance_profile(solvers, times, solved)


def cmd_profile(args: argparse.Namespace) -> int:
    with open(args.results, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"no result rows in {args.results}")
    curves = _curves_from_rows(rows)
    svg = render_profile_svg(curves, title=args.title)
    Path(args.output).write_text(svg, encoding="utf-8")
    print(f"wrote {args.output}")
    return 0


# ---------------------------------------------------------------------------
# gen


def cmd_gen(args: argparse.Namespace) -> int:
    spec = args.spec
    if spec.startswith("synth:"):
        n, density, seed, wmax = parse_synth_spec(spec)
        triplets = make_random_biq(n, density=density, seed=seed,
                                   weight_max=wmax)
        if args.weights_out:
            write_biq(args.weights_out, n, triplets)
            print(f"wrote {args.weights_out}")
        data = biq_from_triplets(n, triplets)
        inst = build_ex_biq(data, name=_synth_name(n, density, seed))
    else:
        if args.weights_out:
            raise ValueError("--weights-out only applies to synth: specs")
        path = Path(spec)
        inst = build_ex_biq(load_biq(path), name=path.stem)
    if args.output:
        save_instance(args.output, inst)
        print(f"wrote {args.output}")
    print(
        f"{inst.name}: n={inst.n} m_eq={inst.eq.m} m_ineq={inst.ineq.m}"
    )
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dnn-approx",
        description="Nearest-matrix solvers over psd plus nonnegativity "
                    "constraints",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run one solver on one instance")
    _add_run_flags(p_solve)
    p_solve.add_argument(
        "--canonical", action="store_true",
        help="write byte-stable outputs (wall-clock fields zeroed/dropped)",
    )
    p_solve.set_defaults(func=cmd_solve)

    p_bench = sub.add_parser("bench", help="run a solver-by-instance grid")
    _add_run_flags(p_bench)
    p_bench.add_argument("--instances", nargs="+", required=True,
                         help="instance paths or synth: specs")
    p_bench.add_argument("--solvers", nargs="+", required=True,
                         help="solver names (space or comma separated)")
    p_bench.set_defaults(func=cmd_bench)

    p_profile = sub.add_parser("profile",
                               help="render a profile plot from bench results")
    p_profile.add_argument("--results", required=True, help="results.csv path")
    p_profile.add_argument("--output", required=True, help="SVG output path")
    p_profile.add_argument("--title", default="Performance profile")
    p_profile.set_defaults(func=cmd_profile)

    p_gen = sub.add_parser("gen", help="build and persist an instance")
    p_gen.add_argument("spec", help="weight file path or synth: spec")
    p_gen.add_argument("--output", help=".npz path for the prepared instance")
    p_gen.add_argument("--weights-out",
                       help="also write the raw weight file (synth: only)")
    p_gen.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
