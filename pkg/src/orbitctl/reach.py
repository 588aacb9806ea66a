"""Reachable-set sampling, grid coverage, closed orbits, the ample check and orbit tubes."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import simplex
from .fields import EXAMPLE1_OMEGA_INTEGRAL, ControlSystem, example1_field
from .flow import DEFAULT_OPTIONS, IntegratorOptions, chrono_map_batch, integrate, integrate_batch, rk4_batch, rk4_step
from .lie import larc_check, numerical_rank
from .manifold import SPHERE2, TORUS, Manifold, difference, distance, tangent_basis, wrap

CHUNK = 256  # samples per work unit; fixed so results do not depend on the thread count


@dataclass(frozen=True)
class ReachOptions:
    horizon: float
    samples: int
    legs_per_sample: int = 8
    forward_only: bool = True
    integrator: IntegratorOptions = DEFAULT_OPTIONS

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.legs_per_sample < 1:
            raise ValueError("legs_per_sample must be >= 1")

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "samples": self.samples,
            "legs_per_sample": self.legs_per_sample,
            "forward_only": self.forward_only,
            "step": self.integrator.step,
        }


@dataclass
class ReachCloud:
    points: np.ndarray  # (recorded points, ambient)
    dropped: int
    seed: int
    indices: np.ndarray  # (kept samples, legs)
    durations: np.ndarray  # (kept samples, legs), signed

    def __len__(self):
        return len(self.points)


def thread_count() -> int:
    raw = os.environ.get("ORBITCTL_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"ORBITCTL_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("ORBITCTL_THREADS must be >= 0")
    return n if n > 0 else min(8, os.cpu_count() or 1)


def draw_schedules(sys: ControlSystem, opts: ReachOptions, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """All random schedule data for a run, drawn up front: indices and signed durations."""
    rng = np.random.default_rng(seed)
    shape = (opts.samples, opts.legs_per_sample)
    idx = rng.integers(0, len(sys), shape)
    dur = rng.uniform(0.0, opts.horizon / opts.legs_per_sample, shape)
    if not opts.forward_only:
        dur = -dur
    return idx, dur


def reach_sample(sys: ControlSystem, q0, opts: ReachOptions, seed: int = 0) -> ReachCloud:
    """Every leg endpoint of ``opts.samples`` random schedules started at q0.

    Backward sampling (``forward_only=False``) flips every duration, giving points of the
    negative orbit. Samples that blow up are dropped and counted.
    """
    m = sys.manifold
    q0 = wrap(m, np.asarray(q0, dtype=float))
    idx, dur = draw_schedules(sys, opts, seed)
    chunks = [slice(a, min(a + CHUNK, opts.samples)) for a in range(0, opts.samples, CHUNK)]

    def work(sl):
        return chrono_map_batch(sys, idx[sl], dur[sl], q0, opts.integrator, raise_on_blowup=False)

    workers = min(thread_count(), len(chunks))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(sl) for sl in chunks]
    ends = np.concatenate(parts, axis=0)
    ok = ~np.isnan(ends).any(axis=(1, 2))
    pts = ends[ok].reshape(-1, m.ambient_dim)
    return ReachCloud(pts, int((~ok).sum()), seed, idx[ok], dur[ok])


# ---------------------------------------------------------------- coverage


def _cells(m: Manifold, cloud: np.ndarray, g: int) -> np.ndarray:
    if m.kind == TORUS:
        per = np.asarray(m.periods)
        ids = np.floor(cloud / per * g).astype(int)
        return np.clip(ids, 0, g - 1)
    z = np.clip(cloud[:, 2], -1.0, 1.0)
    band = np.clip(np.floor((z + 1.0) / 2.0 * g).astype(int), 0, g - 1)
    lon = np.mod(np.arctan2(cloud[:, 1], cloud[:, 0]), 2 * np.pi)
    sector = np.clip(np.floor(lon / (2 * np.pi) * g).astype(int), 0, g - 1)
    return np.stack([band, sector], axis=1)


def total_cells(m: Manifold, cells_per_axis: int) -> int:
    return cells_per_axis ** (m.dim if m.kind == TORUS else 2)


def coverage(m: Manifold, cloud, cells_per_axis: int) -> float:
    """Fraction of grid cells holding at least one cloud point.

    Torus: a uniform grid along each axis. Sphere: equal-area cells from equal-height bands
    and equal longitude sectors, cells_per_axis squared in total.
    """
    if not m.compact:
        raise ValueError("coverage needs a compact manifold (torus or sphere2)")
    if cells_per_axis < 1:
        raise ValueError("cells_per_axis must be >= 1")
    cloud = np.asarray(cloud, dtype=float).reshape(-1, m.ambient_dim)
    if len(cloud) == 0:
        return 0.0
    occupied = np.unique(_cells(m, cloud, cells_per_axis), axis=0)
    return len(occupied) / total_cells(m, cells_per_axis)


def cell_centers(m: Manifold, cells_per_axis: int) -> np.ndarray:
    g = cells_per_axis
    mids = (np.arange(g) + 0.5) / g
    if m.kind == TORUS:
        grids = np.meshgrid(*[mids * p for p in m.periods], indexing="ij")
        return np.stack([a.ravel() for a in grids], axis=1)
    if m.kind != SPHERE2:
        raise ValueError("cell centers need a compact manifold")
    z, lon = np.meshgrid(2 * mids - 1, 2 * np.pi * mids, indexing="ij")
    r = np.sqrt(1 - z**2)
    return np.stack([(r * np.cos(lon)).ravel(), (r * np.sin(lon)).ravel(), z.ravel()], axis=1)


# ---------------------------------------------------------------- example 1 steering


def steer_example1_batch(n: int, targets, opts: IntegratorOptions = DEFAULT_OPTIONS, q0=None) -> np.ndarray:
    """Staircase control u = y_k / (integral of omega) on [k-1, k] for many target rows at once."""
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if targets.shape[1] != n - 1:
        raise ValueError(f"example1 with n={n} needs {n - 1} targets per row")
    unit = example1_field(n, 1.0)
    m = unit.manifold
    X = np.zeros((len(targets), n)) if q0 is None else np.broadcast_to(np.asarray(q0, float), (len(targets), n)).copy()
    gains = targets / EXAMPLE1_OMEGA_INTEGRAL
    ex = np.zeros(n)
    ex[0] = 1.0
    for k in range(n - 1):
        u = gains[:, k]

        # V(u) = d/dx + u (V(1) - d/dx), since the field is affine in u
        def rhs(Y, active, u=u):
            return ex + u[:, None] * (unit.values(Y) - ex)

        X = rk4_batch(rhs, X, np.ones(len(X)), opts)
        X = wrap(m, X)
    return X


def steer_example1(n: int, targets: Sequence[float], opts: IntegratorOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """Final point of the staircase control from the origin; its y-coordinates equal targets mod 1."""
    return steer_example1_batch(n, [list(targets)], opts)[0]


def steering_cloud(n: int, samples: int, seed: int = 0, opts: IntegratorOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """Example 1 endpoints of steering schedules followed by a zero-control x-leg.

    Each sample draws targets uniformly in [0,1)^(n-1), steers from the origin, then drifts
    along d/dx (the u = 0 generator) for a uniform time in [0, n-1).
    """
    rng = np.random.default_rng(seed)
    targets = rng.uniform(0.0, 1.0, (samples, n - 1))
    drift = rng.uniform(0.0, n - 1.0, samples)
    X = steer_example1_batch(n, targets, opts)
    zero = example1_field(n, 0.0)
    X = integrate_batch(zero.manifold, [zero], np.zeros(samples, int), X, drift, opts)
    return wrap(zero.manifold, X)


# ---------------------------------------------------------------- closed orbits


@dataclass
class ClosedOrbit:
    base: np.ndarray
    generator_index: int
    period: float
    return_error: float
    tol: float

    def to_dict(self) -> dict:
        return {
            "base": [float(x) for x in self.base],
            "generator_index": self.generator_index,
            "period": self.period,
            "return_error": self.return_error,
            "tol": self.tol,
        }


MIN_PERIOD = 1e-3


def find_closed_orbit(
    sys: ControlSystem,
    generator_index: int,
    q0,
    t_max: float,
    tol: float = 1e-8,
    opts: IntegratorOptions = DEFAULT_OPTIONS,
    min_period: float = MIN_PERIOD,
) -> ClosedOrbit | None:
    """First return of the single-generator trajectory through q0, or None.

    The coarse pass walks the trajectory one integrator step at a time and flags steps where
    g(t) = <q(t) - q0, V(q(t))> (half the derivative of the squared distance) turns from
    negative to positive while the trajectory is within ten tolerances plus one step length of
    q0. Bisection on g then refines the return time.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    f = sys.generators[generator_index]
    m = sys.manifold
    q0 = wrap(m, np.asarray(q0, dtype=float))
    h = opts.step

    def g(p):
        return float(difference(m, p, q0) @ f(p))

    p = q0.copy()
    t = 0.0
    g_prev = g(p)
    while t < t_max:
        dt = min(h, t_max - t)
        p_next = rk4_step(f, p, dt, opts)
        g_next = g(p_next)
        speed = float(np.linalg.norm(f(p_next)))
        if t + dt > min_period and g_prev < 0 <= g_next:
            thresh = 10 * tol + 2 * speed * h
            if min(distance(m, p, q0), distance(m, p_next, q0)) < thresh:
                lo, hi = 0.0, dt
                for _ in range(80):
                    mid = 0.5 * (lo + hi)
                    if g(rk4_step(f, p, mid, opts)) < 0:
                        lo = mid
                    else:
                        hi = mid
                    if hi - lo < 1e-15 * max(1.0, t):
                        break
                s = 0.5 * (lo + hi)
                err = float(distance(m, rk4_step(f, p, s, opts), q0))
                period = t + s
                if err < tol and period > min_period:
                    return ClosedOrbit(q0, generator_index, period, err, tol)
        p, g_prev = p_next, g_next
        t += dt
    return None


def orbit_points(sys: ControlSystem, orbit: ClosedOrbit, count: int, opts: IntegratorOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """``count`` points along the orbit at equally spaced times in [0, period)."""
    f = sys.generators[orbit.generator_index]
    dt = orbit.period / count
    out = [orbit.base]
    for _ in range(count - 1):
        out.append(integrate(f, out[-1], dt, opts))
    return np.array(out)


# ---------------------------------------------------------------- ample check


@dataclass
class AmpleReport:
    point: np.ndarray | None
    span_dim: int
    positively_spanning: bool
    span_basis: np.ndarray  # rows, ambient coordinates
    coefficients: np.ndarray | None = None  # (2 * span_dim, vectors): rows for +b_1, -b_1, +b_2, ...
    separating_direction: np.ndarray | None = None
    margin: float | None = None
    tol: float = 1e-9
    open_assumed: bool = True

    def targets(self) -> np.ndarray:
        return np.array([s * b for b in self.span_basis for s in (1.0, -1.0)])

    def to_dict(self) -> dict:
        return {
            "point": None if self.point is None else [float(x) for x in self.point],
            "span_dim": self.span_dim,
            "positively_spanning": self.positively_spanning,
            "span_basis": self.span_basis.tolist(),
            "coefficients": None if self.coefficients is None else self.coefficients.tolist(),
            "separating_direction": None if self.separating_direction is None else self.separating_direction.tolist(),
            "margin": self.margin,
            "tol": self.tol,
            "open_assumed": self.open_assumed,
        }


def _box_lp(C: np.ndarray, b: np.ndarray | None, farkas: bool = False) -> np.ndarray:
    """Direction LPs over the box |w_j| <= 1.

    farkas: maximise <w, b> subject to <w, c_i> <= 0.
    b given otherwise: minimise max_i <w, c_i> subject to <w, b> = 1.
    b None: minimise max_i <w, c_i> (the deepest direction of the polar cone).
    Variables: w+, w-, m+, m-, slacks s_i (rows <w, c_i> - m + s_i = 0), box slacks.
    """
    k, r = C.shape
    nv = 2 * r + 2 + k + 2 * r
    extra = 1 if (b is not None and not farkas) else 0
    rows = k + 2 * r + extra
    A = np.zeros((rows, nv))
    rhs = np.zeros(rows)
    for i in range(k):
        A[i, :r] = C[i]
        A[i, r : 2 * r] = -C[i]
        A[i, 2 * r] = -1.0
        A[i, 2 * r + 1] = 1.0
        A[i, 2 * r + 2 + i] = 1.0
    base = 2 * r + 2 + k
    for j in range(r):
        A[k + j, j] = A[k + j, base + j] = 1.0
        A[k + r + j, r + j] = A[k + r + j, base + r + j] = 1.0
        rhs[k + j] = rhs[k + r + j] = 1.0
    c = np.zeros(nv)
    if farkas:
        # drop m so the rows read <w, c_i> + s_i = 0
        A = np.delete(A, [2 * r, 2 * r + 1], axis=1)
        c = np.delete(c, [2 * r, 2 * r + 1])
        c[:r] = b
        c[r : 2 * r] = -b
    else:
        if extra:
            A[-1, :r] = b
            A[-1, r : 2 * r] = -b
            rhs[-1] = 1.0
        c[2 * r] = -1.0
        c[2 * r + 1] = 1.0
    res = simplex.solve(c, A, rhs)
    if res.status != simplex.OPTIMAL:
        raise RuntimeError(f"separating-direction LP ended {res.status}")
    return res.x[:r] - res.x[r : 2 * r]


def _separating(C: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    """A direction w with max_i <w, c_i> as small as possible.

    First the deepest direction of the polar cone (normalised inputs, box |w_j| <= 1); for
    {e1, e2} that is -(e1 + e2). If the polar cone has no interior the Farkas LP for the
    unreachable target b gives a w with max_i <w, c_i> <= 0. Targets rejected only by the
    coefficient bound have no such w; the min-max LP then gives the least violating one.
    """
    norms = np.linalg.norm(C, axis=1)
    Cn = C[norms > 0] / norms[norms > 0, None]
    w = _box_lp(Cn, None)
    if float(np.max(Cn @ w)) < -1e-9:
        return w, float(np.max(C @ w))
    w = _box_lp(C, b, farkas=True)
    if float(w @ b) <= 1e-12:
        w = _box_lp(C, b)
    return w, float(np.max(C @ w))


def ample_check(vectors, tol: float = 1e-9, point=None) -> AmpleReport:
    """Do the vectors positively span their linear span?

    Each of +-b_j (b_j an orthonormal basis of the span) must be a nonnegative combination of
    the inputs whose coefficient sum is at most 1/(tol * scale); that bound makes the verdict
    agree with the margin test "every unit direction w of the span has max_i <w, v_i> > tol".
    """
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    if V.size == 0:
        raise ValueError("ample_check needs at least one vector")
    scale = max(float(np.max(np.linalg.norm(V, axis=1))), 1e-300)
    rank, _ = numerical_rank(V, tol)
    if rank == 0:
        return AmpleReport(point, 0, True, np.zeros((0, V.shape[1])), np.zeros((0, len(V))), tol=tol)
    _, _, Wt = np.linalg.svd(V)
    basis = Wt[:rank]
    C = V @ basis.T  # span coordinates, (k, r)
    bound = 1.0 / (tol * scale)
    coeffs = []
    for j in range(rank):
        for sgn in (1.0, -1.0):
            b = np.zeros(rank)
            b[j] = sgn
            lam = simplex.nonnegative_solution(C.T, b, bound)
            if lam is None:
                w, margin = _separating(C, b)
                w_amb = w @ basis
                w_amb /= np.linalg.norm(w_amb)
                return AmpleReport(point, rank, False, basis, separating_direction=w_amb, margin=margin / np.linalg.norm(w), tol=tol)
            coeffs.append(lam)
    # strictly positive certificate: add a small multiple of a positive kernel combination
    lam0 = simplex.nonnegative_solution(C.T, -C.sum(axis=0))
    coeffs = np.array(coeffs)
    if lam0 is not None:
        lam0 = lam0 + 1.0
        eps = min(1.0, 1e-3 / float(np.max(lam0)))
        coeffs = coeffs + eps * lam0
    return AmpleReport(point, rank, True, basis, coefficients=coeffs, tol=tol)


# ---------------------------------------------------------------- orbit tubes


class PreconditionError(ValueError):
    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self) -> dict:
        return {"error": str(self), **{k: v for k, v in self.details.items()}}


def _tree(m: Manifold, cloud: np.ndarray) -> cKDTree:
    if m.kind == TORUS:
        return cKDTree(np.mod(cloud, m.periods), boxsize=np.asarray(m.periods))
    return cKDTree(cloud)


def _chord(m: Manifold, r: float) -> float:
    # ball of geodesic radius r on the sphere is the ball of chord radius 2 sin(r/2)
    return 2 * math.sin(min(r, math.pi) / 2) if m.kind == SPHERE2 else r


def near_fraction(m: Manifold, cloud: np.ndarray, targets: np.ndarray, radius: float) -> float:
    if len(targets) == 0:
        return 0.0
    if len(cloud) == 0:
        return 0.0
    d, _ = _tree(m, cloud).query(np.mod(targets, m.periods) if m.kind == TORUS else targets)
    return float(np.mean(d <= _chord(m, radius)))


def tube_targets(m: Manifold, centers: np.ndarray, radius: float, rng: np.random.Generator) -> np.ndarray:
    """One random point within ``radius`` of each center (uniform in the tangent disc)."""
    out = []
    for c in centers:
        if m.kind == SPHERE2:
            B = tangent_basis(m, c)
            d = rng.normal(size=2)
            d /= np.linalg.norm(d)
            r = radius * math.sqrt(rng.uniform())
            v = d @ B
            out.append(math.cos(r) * c + math.sin(r) * v)
        else:
            d = rng.normal(size=m.dim)
            d /= np.linalg.norm(d)
            r = radius * rng.uniform() ** (1.0 / m.dim)
            out.append(wrap(m, c + r * d))
    return np.array(out)


@dataclass
class TubeReport:
    covered_fraction_forward: float
    covered_fraction_backward: float
    targets: int
    radius: float
    seed: int
    forward_points: int
    backward_points: int
    dropped: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def orbit_tube_check(
    sys: ControlSystem,
    orbit: ClosedOrbit,
    larc_point,
    radius: float,
    opts: ReachOptions,
    seed: int = 0,
    n_targets: int = 200,
) -> TubeReport:
    """Empirical neighbourhood reachability around a closed orbit.

    Targets are drawn in the tube of the given radius around the orbit. Forward: fraction of
    targets within radius/10 of the forward cloud from larc_point. Backward: the same against
    the backward cloud, i.e. targets from which larc_point is (approximately) reached.
    """
    m = sys.manifold
    larc_point = wrap(m, np.asarray(larc_point, dtype=float))
    rep = larc_check(sys, larc_point)
    if not rep.larc_holds:
        raise PreconditionError("LARC fails at larc_point", achieved_dim=rep.achieved_dim, ambient_dim=rep.ambient_dim)
    path = orbit_points(sys, orbit, 400, opts.integrator)
    gap = float(np.min(distance(m, path, larc_point)))
    if gap > radius:
        raise PreconditionError("orbit does not pass within radius of larc_point", gap=gap, radius=radius)
    rng = np.random.default_rng(seed)
    centers = path[rng.integers(0, len(path), n_targets)]
    targets = tube_targets(m, centers, radius, rng)
    fwd = reach_sample(sys, larc_point, replace(opts, forward_only=True), seed)
    bwd = reach_sample(sys, larc_point, replace(opts, forward_only=False), seed + 1)
    return TubeReport(
        covered_fraction_forward=near_fraction(m, fwd.points, targets, radius / 10),
        covered_fraction_backward=near_fraction(m, bwd.points, targets, radius / 10),
        targets=n_targets,
        radius=radius,
        seed=seed,
        forward_points=len(fwd.points),
        backward_points=len(bwd.points),
        dropped=fwd.dropped + bwd.dropped,
    )
