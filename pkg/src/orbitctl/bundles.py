"""End-to-end verification bundles for the two worked examples (used by ``orbitctl examples``)."""

from __future__ import annotations

import math

import numpy as np

from .fields import builtin
from .flow import IntegratorOptions
from .lie import larc_check
from .manifold import random_point
from .reach import ReachOptions, ample_check, coverage, find_closed_orbit, reach_sample, steer_example1_batch, steering_cloud

SAMPLING_STEP = 1e-2  # RK4 step for the large sampling runs
HALF_SPACE_STEP = 5e-2


def example1_bundle(seed: int = 0, n: int = 3) -> dict:
    """LARC stays below full rank, yet staircase steering reaches every point."""
    sys_ = builtin("example1", {"n": n})
    m = sys_.manifold
    rng = np.random.default_rng(seed)
    checks = {}

    pts = [random_point(m, rng) for _ in range(100)]
    dims = [larc_check(sys_, q, max_depth=4).achieved_dim for q in pts]
    checks["larc_dim_at_most_2"] = {"points": len(pts), "depth": 4, "max_dim": max(dims), "passed": max(dims) <= 2}

    targets = rng.uniform(0.0, 1.0, (20, n - 1))
    ends = steer_example1_batch(n, targets)
    err = float(np.max(np.abs(_wrapped(ends[:, 1:] - targets))))
    checks["steering"] = {"targets": len(targets), "max_y_error": err, "passed": err <= 1e-4}

    coarse = IntegratorOptions(SAMPLING_STEP)
    cloud = steering_cloud(n, 4000, seed, coarse)
    cov = coverage(m, cloud, 8)
    checks["steering_coverage"] = {"samples": 4000, "cells_per_axis": 8, "coverage": cov, "step": SAMPLING_STEP, "passed": cov >= 0.99}

    plain = reach_sample(sys_, np.zeros(n), ReachOptions(10.0, 2000, integrator=coarse), seed)
    pcov = coverage(m, plain.points, 8)
    checks["generator_reach_coverage"] = {"samples": 2000, "horizon": 10.0, "coverage": pcov, "step": SAMPLING_STEP, "passed": pcov >= 0.6}

    return {"example": 1, "n": n, "seed": seed, "checks": checks, "passed": all(c["passed"] for c in checks.values())}


def _wrapped(d: np.ndarray) -> np.ndarray:
    # y-coordinates live on circles of length 1
    return d - np.round(d)


def example2_bundle(seed: int = 0) -> dict:
    """LARC everywhere and closed psi-orbits, but forward trajectories from p1 stay in cos(phi) <= 0."""
    rng = np.random.default_rng(seed)
    checks = {}
    p1 = np.array([math.pi / 2, 0.0])
    for sign in (1, -1):
        sys_ = builtin("example2", {"v2_sign": sign})
        m = sys_.manifold
        tag = "plus" if sign > 0 else "minus"
        pts = [random_point(m, rng) for _ in range(100)]
        dims = [larc_check(sys_, q).achieved_dim for q in pts]
        checks[f"larc_everywhere_{tag}"] = {"points": len(pts), "min_dim": min(dims), "passed": min(dims) == 2}

        cloud = reach_sample(sys_, p1, ReachOptions(20.0, 10_000, integrator=IntegratorOptions(HALF_SPACE_STEP)), seed)
        worst = float(np.max(np.cos(cloud.points[:, 0])))
        checks[f"half_space_{tag}"] = {
            "samples": 10_000,
            "recorded_points": len(cloud.points),
            "dropped": cloud.dropped,
            "max_cos_phi": worst,
            "step": HALF_SPACE_STEP,
            "passed": worst <= 1e-6 and cloud.dropped == 0,
        }

    sys_ = builtin("example2")
    m = sys_.manifold
    periods, errors = [], []
    for _ in range(20):
        orb = find_closed_orbit(sys_, 2, random_point(m, rng), 7.0)
        periods.append(float("nan") if orb is None else orb.period)
        errors.append(float("inf") if orb is None else orb.return_error)
    dev = max(abs(p - 2 * math.pi) for p in periods) if all(np.isfinite(periods)) else None
    checks["psi_orbits"] = {
        "points": 20,
        "max_period_deviation": dev,
        "max_return_error": max(errors) if all(np.isfinite(errors)) else None,
        "passed": dev is not None and dev <= 1e-6 and max(errors) < 1e-8,
    }

    vecs = np.array([g(p1) for g in sys_.generators])
    phi_line = ample_check(vecs[:, :1])
    full = ample_check(vecs)
    checks["phi_line_not_ample"] = {
        "phi_components": vecs[:, 0].tolist(),
        "positively_spanning": phi_line.positively_spanning,
        "full_positively_spanning": full.positively_spanning,
        "passed": not phi_line.positively_spanning,
    }
    return {"example": 2, "seed": seed, "p1": p1.tolist(), "checks": checks, "passed": all(c["passed"] for c in checks.values())}
