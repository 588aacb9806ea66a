"""Acceptance criteria 1-8. Each test prints one PASS/FAIL line; run directly with ``python tests/test_acceptance.py``."""

import hashlib
import math
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from conftest import random_polynomial_field  # noqa: E402
from orbitctl.bilinear import BilinearSystem3, project_sphere, theorem_b_check, theorem_b_fixture  # noqa: E402
from orbitctl.fields import ControlSystem, builtin, eval_field  # noqa: E402
from orbitctl.flow import IntegratorOptions, Schedule, chrono_jacobian, chrono_map, general_schedule  # noqa: E402
from orbitctl.lie import Leaf, bracket, larc_check, parse_word  # noqa: E402
from orbitctl.manifold import euclidean, random_point, tangent_basis  # noqa: E402
from orbitctl.reach import (  # noqa: E402
    ReachOptions,
    ample_check,
    coverage,
    find_closed_orbit,
    reach_sample,
    steer_example1_batch,
    steering_cloud,
)

SEED = 20240601
P1 = np.array([math.pi / 2, 0.0])


def _line(n, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}", flush=True)


def _report(capsys, n, result):
    ok, detail = result
    with capsys.disabled():
        _line(n, ok, detail)
    assert ok, detail


# 1. bracket vs flow commutator ------------------------------------------------


def criterion_1():
    rng = np.random.default_rng(SEED)
    ts = np.array([1e-2, 5e-3, 2.5e-3])
    opts = IntegratorOptions(1e-4)
    slopes = []
    for _ in range(20):
        n = int(rng.integers(2, 4))
        V, W = random_polynomial_field(rng, n), random_polynomial_field(rng, n)
        sys_ = ControlSystem(euclidean(n), [V, W])
        q = rng.uniform(-1, 1, n)
        br = bracket(V, W, q)
        errs = []
        for t in ts:
            end = chrono_map(sys_, Schedule(((0, t), (1, t), (0, -t), (1, -t))), q, opts)
            errs.append(np.linalg.norm(end - (q + t * t * br)))
        slopes.append(np.polyfit(np.log(ts), np.log(errs), 1)[0])
    worst = float(np.max(np.abs(np.array(slopes) - 3)))
    return worst <= 0.2, f"20 fields, slopes in [{min(slopes):.3f}, {max(slopes):.3f}], max |slope - 3| = {worst:.3f}"


# 2. Heisenberg LARC ----------------------------------------------------------


def criterion_2():
    rng = np.random.default_rng(SEED)
    heis = builtin("heisenberg")
    dims = [larc_check(heis, rng.normal(size=3) * 3, max_depth=1, tol=1e-7).achieved_dim for _ in range(10)]
    return all(d == 3 for d in dims), f"achieved_dim at 10 points = {sorted(set(dims))}"


# 3. Example 1 ------------------------------------------------------------------


def criterion_3():
    rng = np.random.default_rng(SEED)
    sys_ = builtin("example1", {"n": 3})
    m = sys_.manifold
    dims = [larc_check(sys_, random_point(m, rng), max_depth=4).achieved_dim for _ in range(100)]
    a = max(dims) <= 2
    targets = rng.uniform(0, 1, (20, 2))
    ends = steer_example1_batch(3, targets)
    d = ends[:, 1:] - targets
    err = float(np.max(np.abs(d - np.round(d))))
    b = err <= 1e-4
    cloud = steering_cloud(3, 4000, SEED % 1000, IntegratorOptions(1e-2))
    cov = coverage(m, cloud, 8)
    c = cov >= 0.99
    detail = f"(a) max dim {max(dims)} over 100 points; (b) max y-error {err:.2e}; (c) 8^3 coverage {cov:.4f}"
    return a and b and c, detail


# 4. Example 2 ------------------------------------------------------------------


def criterion_4():
    rng = np.random.default_rng(SEED)
    plus = builtin("example2")
    m = plus.manifold
    dims = [larc_check(plus, random_point(m, rng)).achieved_dim for _ in range(100)]
    a = min(dims) == 2

    devs, errs = [], []
    for _ in range(20):
        orb = find_closed_orbit(plus, 2, random_point(m, rng), 7.0)
        devs.append(math.inf if orb is None else abs(orb.period - 2 * math.pi))
        errs.append(math.inf if orb is None else orb.return_error)
    b = max(devs) <= 1e-6 and max(errs) < 1e-8

    worst = {}
    for sign in (1, -1):
        sys_ = builtin("example2", {"v2_sign": sign})
        cloud = reach_sample(sys_, P1, ReachOptions(20.0, 10_000, integrator=IntegratorOptions(5e-2)), SEED % 1000)
        worst[sign] = (float(np.max(np.cos(cloud.points[:, 0]))), cloud.dropped)
    c = all(w <= 1e-6 and dropped == 0 for w, dropped in worst.values())

    vecs = np.array([g(P1) for g in plus.generators])
    d = not ample_check(vecs[:, :1]).positively_spanning
    detail = (
        f"(a) min dim {min(dims)} over 100 points; (b) max period deviation {max(devs):.1e}, max return error {max(errs):.1e}; "
        f"(c) max cos(phi) {worst[1][0]:.2e} (V2 +), {worst[-1][0]:.2e} (V2 -); (d) phi-line positively spanning = {not d}"
    )
    return a and b and c and d, detail


# 5. chronological differential -------------------------------------------------


def _random_system(rng):
    kind = int(rng.integers(4))
    if kind == 0:
        n = int(rng.integers(1, 4))
        return ControlSystem(euclidean(n), [random_polynomial_field(rng, n) for _ in range(int(rng.integers(1, 4)))])
    if kind == 1:
        return builtin("heisenberg")
    if kind == 2:
        return builtin("example2", {"v2_sign": int(rng.choice([-1, 1]))})
    sys3, u, v = theorem_b_fixture()
    return project_sphere(sys3, [u, v])


def criterion_5():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(50):
        sys_ = _random_system(rng)
        m = sys_.manifold
        q = random_point(m, rng, scale=0.5)
        legs = int(rng.integers(1, 6))
        s = Schedule(tuple((int(rng.integers(len(sys_))), float(rng.uniform(-0.5, 0.5))) for _ in range(legs)))
        end = chrono_map(sys_, s, q)
        col = chrono_jacobian(sys_, s, q)[:, -1]
        want = eval_field(sys_.generators[s.indices[-1]], end)
        want = tangent_basis(m, end) @ want
        worst = max(worst, float(np.max(np.abs(col - want))))
    a = worst <= 1e-6

    heis = builtin("heisenberg")
    words = [Leaf(0), Leaf(1), parse_word("[0,1]")]
    runs = [general_schedule(heis, np.zeros(3), words, 0.1, seed) for seed in range(10)]
    b = all(g.achieved_rank == 3 and g.retries_used <= 5 for g in runs)
    detail = (
        f"max |last column - field| = {worst:.1e} over 50 draws; Heisenberg ranks {sorted({g.achieved_rank for g in runs})}, "
        f"max retries {max(g.retries_used for g in runs)} over 10 seeds"
    )
    return a and b, detail


# 6. bilinear eigenvalue test ------------------------------------------------------


def criterion_6():
    sys3, u, v = theorem_b_fixture()
    verdict = theorem_b_check(sys3, u, v)
    a = abs(verdict.product + 1) <= 1e-9 and verdict.controllable_sufficient
    sp = project_sphere(sys3, [u, v])
    q0 = random_point(sp.manifold, np.random.default_rng(SEED))
    cloud = reach_sample(sp, q0, ReachOptions(200.0, 400, legs_per_sample=80, integrator=IntegratorOptions(1e-2)), SEED % 1000)
    cov = coverage(sp.manifold, cloud.points, 16)
    b = cov >= 0.95
    # pure rotation block: real eigenvalue 0 equals the real part of the complex pair
    bsys = BilinearSystem3([[0, 0, 0], [0, 0, -1], [0, 1, 0]], [np.eye(3)])
    bverdict = theorem_b_check(bsys, [0.0], [1.0])
    c = not bverdict.controllable_sufficient and bverdict.boundary
    detail = (
        f"product {verdict.product:+.12f}, sufficient = {verdict.controllable_sufficient}; "
        f"sphere coverage {cov:.4f} (16x16 equal-area cells, horizon 200); boundary fixture sufficient = {bverdict.controllable_sufficient}"
    )
    return a and b and c, detail


# 7. ample check vs brute force ------------------------------------------------------

ORACLE_TOL = 1e-9


def _directions(basis):
    r = len(basis)
    if r == 1:
        return np.array([basis[0], -basis[0]])
    th = np.deg2rad(np.arange(360))
    if r == 2:
        return np.cos(th)[:, None] * basis[0] + np.sin(th)[:, None] * basis[1]
    lat, lon = np.meshgrid(np.deg2rad(np.arange(181)), th, indexing="ij")
    W = np.stack([np.sin(lat) * np.cos(lon), np.sin(lat) * np.sin(lon), np.cos(lat)], -1).reshape(-1, 3)
    return W @ basis


def brute_force_spanning(V):
    """Positively spanning iff every 1-degree direction w in the span sees some v with <w,v> > 0."""
    V = np.atleast_2d(V)
    _, s, Wt = np.linalg.svd(V)
    r = int(np.sum(s > ORACLE_TOL * max(s[0], 1.0)))
    if r == 0:
        return True
    n = V.shape[1]
    if r == n:
        basis = np.eye(n)
    else:
        P = Wt[:r].T @ Wt[:r]
        axes = np.flatnonzero(np.abs(np.diag(P) - 1) <= 1e-12)
        basis = np.eye(n)[axes] if len(axes) == r else Wt[:r]
    W = _directions(basis)
    return bool(np.all((W @ V.T).max(axis=1) > ORACLE_TOL))


def lattice_set(rng, n):
    """Vectors at integer-degree directions, where the 1-degree grid is exact."""
    k = int(rng.integers(1, 7 if n == 2 else 8))
    out = []
    for _ in range(k):
        length = rng.uniform(0.2, 2.0)
        if n == 3 and rng.uniform() >= 0.75:
            out.append([0.0, 0.0, length * rng.choice([-1.0, 1.0])])
            continue
        a = np.deg2rad(rng.integers(0, 360))
        v = [length * np.cos(a), length * np.sin(a)]
        out.append(v if n == 2 else v + [0.0])
    return np.array(out)


def criterion_7():
    rng = np.random.default_rng(SEED)
    counts = {}
    for n in (2, 3):
        bad = pos = 0
        for _ in range(500):
            V = lattice_set(rng, n)
            got = ample_check(V, tol=1e-9).positively_spanning
            pos += got
            bad += got != brute_force_spanning(V)
        counts[n] = (bad, pos)
    ok = all(bad == 0 for bad, _ in counts.values())
    detail = ", ".join(f"R^{n}: {bad} disagreements / 500 ({pos} spanning)" for n, (bad, pos) in counts.items())
    return ok, detail


# 8. determinism --------------------------------------------------------------------------


def _run_examples(which, threads):
    env = dict(os.environ, ORBITCTL_THREADS=str(threads))
    proc = subprocess.run(
        [sys.executable, "-m", "orbitctl.cli", "examples", which, "--verify"], capture_output=True, env=env, check=False
    )
    return proc.returncode, hashlib.sha256(proc.stdout).hexdigest()


def criterion_8():
    parts, ok = [], True
    for which in ("1", "2"):
        first, second = _run_examples(which, 1), _run_examples(which, 0)
        same = first == second and first[0] == 0
        ok &= same
        parts.append(f"examples {which}: exit {first[0]}/{second[0]}, sha256 {first[1][:12]} {'==' if first[1] == second[1] else '!='} {second[1][:12]}")
    return ok, "; ".join(parts)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8]


@pytest.mark.parametrize("n", range(1, 9))
def test_criterion(n, capsys):
    _report(capsys, n, CRITERIA[n - 1]())


if __name__ == "__main__":
    failed = 0
    for i, crit in enumerate(CRITERIA, 1):
        ok, detail = crit()
        _line(i, ok, detail)
        failed += not ok
    sys.exit(1 if failed else 0)
