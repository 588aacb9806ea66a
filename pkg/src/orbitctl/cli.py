"""Command-line front end: ``orbitctl <command> ...``.

Exit codes: 0 success, 1 negative analysis verdict, 2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .bilinear import BilinearSystem3, theorem_b_check
from .config import ConfigError, build_system, integrator_options, load_matrices, load_run
from .fields import ControlSystem
from .flow import BlowupError, IntegratorOptions, RankDeficientError, Schedule, chrono_map, general_schedule
from .lie import enumerate_words, eval_word, larc_check
from .manifold import random_point, wrap
from .reach import (
    PreconditionError,
    ReachOptions,
    ample_check,
    coverage,
    find_closed_orbit,
    orbit_tube_check,
    reach_sample,
)


class UsageError(Exception):
    pass


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False)


def _emit(obj: Any, out) -> None:
    out.write(_dump(obj) + "\n")


def _floats(text: str, what: str) -> list[float]:
    text = text.strip()
    try:
        if text.startswith("["):
            vals = json.loads(text)
        else:
            vals = [float(x) for x in text.replace(",", " ").split()]
        return [float(v) for v in vals]
    except (ValueError, TypeError):
        raise UsageError(f"{what}: expected numbers like '0.1,0.2', got {text!r}") from None


def _pick(args_value, run: dict, key: str, default=None, required=False):
    if args_value is not None:
        return args_value
    if key in run:
        return run[key]
    if required and default is None:
        raise UsageError(f"missing --{key.replace('_', '-')} (not given on the command line or in the config)")
    return default


def _point(args, run: dict, sys_: ControlSystem) -> np.ndarray:
    raw = _floats(args.point, "--point") if args.point is not None else run.get("point")
    if raw is None:
        raise UsageError("missing --point (not given on the command line or in the config)")
    p = np.asarray(raw, dtype=float)
    if p.shape != (sys_.manifold.ambient_dim,):
        raise UsageError(f"--point needs {sys_.manifold.ambient_dim} coordinates, got {p.size}")
    return wrap(sys_.manifold, p)


def _load(args) -> tuple[dict, ControlSystem, IntegratorOptions]:
    run = load_run(args.config)
    sys_ = build_system(run)
    opts = integrator_options(run)
    if getattr(args, "step", None) is not None:
        opts = IntegratorOptions(args.step, opts.sphere_renormalize)
    return run, sys_, opts


# ---------------------------------------------------------------- commands


def cmd_larc(args, out) -> int:
    run, sys_, _ = _load(args)
    q = _point(args, run, sys_)
    depth = _pick(args.depth, run, "depth", sys_.manifold.dim)
    tol = _pick(args.tol, run, "tol", 1e-7)
    rep = larc_check(sys_, q, depth, tol)
    _emit(rep.to_dict(), out)
    return 0 if rep.larc_holds else 1


def cmd_bracket_table(args, out) -> int:
    run, sys_, _ = _load(args)
    q = _point(args, run, sys_)
    depth = _pick(args.depth, run, "depth", sys_.manifold.dim)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["word", "depth"] + [f"v{i + 1}" for i in range(sys_.manifold.ambient_dim)])
    for word in enumerate_words(len(sys_), depth):
        v = eval_word(sys_, word, q)
        w.writerow([str(word), word.depth] + [repr(float(x)) for x in v])
    return 0


def cmd_flow(args, out) -> int:
    run, sys_, opts = _load(args)
    q = _point(args, run, sys_)
    text = args.schedule
    if Path(text).is_file():
        text = Path(text).read_text()
    try:
        sched = Schedule.from_json(text)
        sched.validate(sys_)
    except (ValueError, TypeError, IndexError, json.JSONDecodeError) as exc:
        raise UsageError(f"--schedule: {exc}") from None
    end = chrono_map(sys_, sched, q, opts)
    _emit({"point": q.tolist(), "schedule": sched.to_json(), "total_time": sched.total_time, "endpoint": end.tolist()}, out)
    return 0


def cmd_general(args, out) -> int:
    run, sys_, opts = _load(args)
    q = _point(args, run, sys_)
    seed = _pick(args.seed, run, "seed", 0)
    depth = _pick(args.depth, run, "depth", sys_.manifold.dim)
    rep = larc_check(sys_, q, depth)
    if not rep.larc_holds:
        _emit({"error": "LARC fails at the point; no general product exists", "larc": rep.to_dict(), "seed": seed}, out)
        return 1
    try:
        gs = general_schedule(sys_, q, rep.basis_words, args.t_scale, seed, forward_only=args.forward_only, opts=opts)
    except RankDeficientError as exc:
        _emit({"error": str(exc), "best_rank": exc.best_rank, "seed": seed}, out)
        return 1
    d = gs.to_dict()
    d["point"] = q.tolist()
    _emit(d, out)
    return 0


def _reach_options(args, run, opts, forward_only=True) -> ReachOptions:
    return ReachOptions(
        horizon=float(_pick(args.horizon, run, "horizon", required=True)),
        samples=int(_pick(args.samples, run, "samples", required=True)),
        legs_per_sample=int(_pick(args.legs, run, "legs_per_sample", 8)),
        forward_only=forward_only,
        integrator=opts,
    )


def cmd_reach(args, out) -> int:
    run, sys_, opts = _load(args)
    q = _point(args, run, sys_)
    seed = _pick(args.seed, run, "seed", 0)
    ropts = _reach_options(args, run, opts, not args.backward)
    cloud = reach_sample(sys_, q, ropts, seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"q{i + 1}" for i in range(sys_.manifold.ambient_dim)])
    for p in cloud.points:
        w.writerow([repr(float(x)) for x in p])
    Path(args.out).write_text(buf.getvalue())
    report = {
        "seed": seed,
        "point": q.tolist(),
        "options": ropts.to_dict(),
        "recorded_points": len(cloud.points),
        "dropped_samples": cloud.dropped,
        "cloud_csv": str(args.out),
    }
    if args.coverage is not None:
        if not sys_.manifold.compact:
            raise UsageError("--coverage needs a compact manifold (torus or sphere2)")
        report["cells_per_axis"] = args.coverage
        report["coverage"] = coverage(sys_.manifold, cloud.points, args.coverage)
    _emit(report, out)
    return 0


def cmd_orbit(args, out) -> int:
    run, sys_, opts = _load(args)
    q = _point(args, run, sys_)
    if not 0 <= args.generator < len(sys_):
        raise UsageError(f"--generator must be in [0, {len(sys_) - 1}]")
    t_max = float(_pick(args.tmax, run, "t_max", required=True))
    tol = _pick(args.tol, run, "tol", 1e-8)
    orb = find_closed_orbit(sys_, args.generator, q, t_max, tol, opts)
    if orb is None:
        out.write("none\n")
        return 1
    _emit(orb.to_dict(), out)
    return 0


def cmd_ample(args, out) -> int:
    run, sys_, _ = _load(args)
    q = _point(args, run, sys_)
    tol = _pick(args.tol, run, "tol", 1e-9)
    vecs = np.array([g(q) for g in sys_.generators])
    rep = ample_check(vecs, tol, point=q)
    _emit(rep.to_dict(), out)
    return 0 if rep.positively_spanning else 1


CONSISTENT = "consistent-with-controllable"
COUNTEREXAMPLE = "counterexample-found"
INCONCLUSIVE = "inconclusive"
TUBE_PASS = 0.95
TUBE_FAIL = 0.5


def criterium_report(sys_: ControlSystem, seeds: int, seed: int, t_max: float, radius: float, ropts: ReachOptions, opts: IntegratorOptions) -> dict:
    """Closed-orbit criterium evidence at ``seeds`` random base points.

    Verdict: consistent-with-controllable when every base point lies on a detected closed
    orbit, LARC holds there, and either the ample check passes or both tube fractions reach
    0.95. counterexample-found when some base point has a closed orbit and LARC but the ample
    check fails and a tube fraction stays below 0.5 (the neighbourhood reachability that
    involvement would give is visibly missing). Anything else is inconclusive.
    """
    m = sys_.manifold
    rng = np.random.default_rng(seed)
    bases = [random_point(m, rng) for _ in range(seeds)]
    rows = []
    for k, q in enumerate(bases):
        row: dict[str, Any] = {"base": q.tolist(), "closed_orbit": None}
        orb = None
        for i in range(len(sys_)):
            orb = find_closed_orbit(sys_, i, q, t_max, opts=opts)
            if orb is not None:
                break
        lr = larc_check(sys_, q)
        row["larc_holds"] = lr.larc_holds
        amp = ample_check(np.array([g(q) for g in sys_.generators]), point=q)
        row["ample"] = amp.positively_spanning
        if orb is not None:
            row["closed_orbit"] = orb.to_dict()
            if lr.larc_holds:
                tube = orbit_tube_check(sys_, orb, q, radius, ropts, seed + 1000 * (k + 1))
                row["tube"] = tube.to_dict()
        rows.append(row)

    def tube_min(r):
        t = r.get("tube")
        return min(t["covered_fraction_forward"], t["covered_fraction_backward"]) if t else None

    good = all(
        r["closed_orbit"] and r["larc_holds"] and (r["ample"] or (tube_min(r) is not None and tube_min(r) >= TUBE_PASS))
        for r in rows
    )
    bad = any(
        r["closed_orbit"] and r["larc_holds"] and not r["ample"] and tube_min(r) is not None and tube_min(r) < TUBE_FAIL
        for r in rows
    )
    if not m.compact:
        verdict = INCONCLUSIVE
    elif bad:
        verdict = COUNTEREXAMPLE
    elif good:
        verdict = CONSISTENT
    else:
        verdict = INCONCLUSIVE
    return {
        "seed": seed,
        "orbit_seeds": seeds,
        "t_max": t_max,
        "radius": radius,
        "reach_options": ropts.to_dict(),
        "compact": m.compact,
        "points": rows,
        "verdict": verdict,
    }


def cmd_criterium(args, out) -> int:
    run, sys_, opts = _load(args)
    seed = _pick(args.seed, run, "seed", 0)
    t_max = float(_pick(args.tmax, run, "t_max", 20.0))
    radius = float(_pick(args.radius, run, "radius", 0.5))
    ropts = ReachOptions(
        horizon=float(_pick(args.horizon, run, "horizon", 40.0)),
        samples=int(_pick(args.samples, run, "samples", 3000)),
        legs_per_sample=int(_pick(args.legs, run, "legs_per_sample", 80)),
        integrator=IntegratorOptions(args.tube_step, opts.sphere_renormalize),
    )
    rep = criterium_report(sys_, args.orbit_seeds, seed, t_max, radius, ropts, opts)
    _emit(rep, out)
    return 1 if rep["verdict"] == COUNTEREXAMPLE else 0


def cmd_theorem_b(args, out) -> int:
    data = load_matrices(args.matrices)
    try:
        sys3 = BilinearSystem3(data["A"], tuple(data.get("B", ())))
    except ValueError as exc:
        raise ConfigError(f"{args.matrices}: {exc}") from None
    u = _floats(args.u, "--u")
    v = _floats(args.v, "--v")
    for name, c in (("--u", u), ("--v", v)):
        if len(c) != sys3.d:
            raise UsageError(f"{name} needs {sys3.d} control values, got {len(c)}")
    lp = _floats(args.larc_point, "--larc-point") if args.larc_point else None
    if lp is not None and (len(lp) != 3 or not np.any(lp)):
        raise UsageError("--larc-point needs three coordinates, not all zero")
    verdict = theorem_b_check(sys3, u, v, args.tol, lp)
    d = verdict.to_dict()
    d.update({"u": u, "v": v, "tol": args.tol})
    _emit(d, out)
    return 0 if verdict.controllable_sufficient else 1


def cmd_examples(args, out) -> int:
    from . import bundles

    if not args.verify:
        raise UsageError("examples needs --verify")
    rep = bundles.example1_bundle(args.seed) if args.which == "1" else bundles.example2_bundle(args.seed)
    _emit(rep, out)
    return 0 if rep["passed"] else 1


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="orbitctl", description="Controllability analyses for control systems on R^n, T^n and S^2.")
    p.add_argument("--version", action="version", version=f"orbitctl {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.set_defaults(fn=fn)
        return sp

    def system_args(sp, point=True):
        sp.add_argument("--config", required=True, help="JSON run config (system plus optional defaults)")
        if point:
            sp.add_argument("--point", help="base point, e.g. '0,0,0' or '[0,0,0]'")
        sp.add_argument("--step", type=float, help="RK4 step (overrides the config)")

    sp = add("larc", cmd_larc, "Lie algebra rank condition at a point (exit 1 if it fails)")
    system_args(sp)
    sp.add_argument("--depth", type=int)
    sp.add_argument("--tol", type=float)

    sp = add("bracket-table", cmd_bracket_table, "CSV of every bracket word up to a depth and its vector at a point")
    system_args(sp)
    sp.add_argument("--depth", type=int)

    sp = add("flow", cmd_flow, "Endpoint of a schedule [[i, t], ...] applied left to right")
    system_args(sp)
    sp.add_argument("--schedule", required=True, help="JSON list of [generator, duration] or a file holding it")

    sp = add("general", cmd_general, "Full-rank general chronological product at a point")
    system_args(sp)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--depth", type=int)
    sp.add_argument("--t-scale", type=float, default=0.1)
    sp.add_argument("--forward-only", action="store_true", help="draw positive durations for every leg")

    sp = add("reach", cmd_reach, "Sample reachable points; cloud as CSV, summary and coverage as JSON")
    system_args(sp)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--horizon", type=float)
    sp.add_argument("--legs", type=int, help="legs per sample (default 8)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--coverage", type=int, metavar="G", help="grid cells per axis for the coverage fraction")
    sp.add_argument("--backward", action="store_true", help="negate all durations (negative orbit)")
    sp.add_argument("--out", default="cloud.csv", help="CSV output path (default cloud.csv)")

    sp = add("orbit", cmd_orbit, "Closed orbit of one generator through a point (prints none, exit 1, if absent)")
    system_args(sp)
    sp.add_argument("--generator", type=int, required=True)
    sp.add_argument("--tmax", type=float)
    sp.add_argument("--tol", type=float)

    sp = add("ample", cmd_ample, "Do the generator vectors at a point positively span their span? (exit 1 if not)")
    system_args(sp)
    sp.add_argument("--tol", type=float)

    sp = add("criterium", cmd_criterium, "Closed-orbit criterium evidence at random base points")
    system_args(sp, point=False)
    sp.add_argument("--orbit-seeds", type=int, default=3, help="number of random base points (default 3)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--tmax", type=float, help="orbit search horizon (default 20)")
    sp.add_argument("--radius", type=float, help="tube radius (default 0.5)")
    sp.add_argument("--samples", type=int, help="reach samples per tube check (default 3000)")
    sp.add_argument("--horizon", type=float, help="reach horizon per tube check (default 40)")
    sp.add_argument("--legs", type=int, help="legs per reach sample (default 80)")
    sp.add_argument("--tube-step", type=float, default=5e-2, help="RK4 step for tube sampling (default 0.05)")

    sp = add("theorem-b", cmd_theorem_b, "Eigenvalue sign test for a 3D bilinear system (exit 1 if not sufficient)")
    sp.add_argument("--matrices", required=True, help='JSON {"A": [9 numbers], "B": [[9 numbers], ...]}')
    sp.add_argument("--u", required=True, help="control values, comma separated")
    sp.add_argument("--v", required=True, help="control values, comma separated")
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--larc-point", help="nonzero point of R^3 at which to check LARC of the lifted pair")

    sp = add("examples", cmd_examples, "Run the Example 1 or Example 2 verification bundle")
    sp.add_argument("which", choices=["1", "2"])
    sp.add_argument("--verify", action="store_true", required=True)
    sp.add_argument("--seed", type=int, default=0)
    return p


def run(argv: Sequence[str] | None = None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args, out)
    except (ConfigError, UsageError) as exc:
        sys.stderr.write(f"orbitctl {args.command}: error: {exc}\n")
        return 2
    except (PreconditionError,) as exc:
        sys.stderr.write(f"orbitctl {args.command}: {_dump(exc.to_dict())}\n")
        return 1
    except BlowupError as exc:
        sys.stderr.write(f"orbitctl {args.command}: {_dump({'error': str(exc), 'time': exc.time, 'leg': exc.leg})}\n")
        return 1
    except ValueError as exc:
        sys.stderr.write(f"orbitctl {args.command}: error: {exc}\n")
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
