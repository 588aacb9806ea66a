"""Flows of generator fields, chronological products and their differentials."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fields import ControlSystem, VectorField
from .lie import BracketWord, Leaf, numerical_rank
from .manifold import SPHERE2, Manifold, difference, tangent_basis, wrap


class BlowupError(RuntimeError):
    def __init__(self, message: str, time: float, leg: int | None = None):
        super().__init__(message)
        self.time = time
        self.leg = leg


class RankDeficientError(RuntimeError):
    def __init__(self, message: str, best_rank: int):
        super().__init__(message)
        self.best_rank = best_rank


@dataclass(frozen=True)
class IntegratorOptions:
    step: float = 1e-3
    sphere_renormalize: bool = True

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("integrator step must be positive")


DEFAULT_OPTIONS = IntegratorOptions()


@dataclass(frozen=True)
class Schedule:
    """Ordered legs (generator index, signed duration); leg 0 is applied first."""

    legs: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        legs = tuple((int(i), float(t)) for i, t in self.legs)
        for _, t in legs:
            if not math.isfinite(t):
                raise ValueError("schedule durations must be finite")
        object.__setattr__(self, "legs", legs)

    @property
    def total_time(self) -> float:
        return float(sum(abs(t) for _, t in self.legs))

    @property
    def durations(self) -> np.ndarray:
        return np.array([t for _, t in self.legs], dtype=float)

    @property
    def indices(self) -> list[int]:
        return [i for i, _ in self.legs]

    def __len__(self):
        return len(self.legs)

    def with_durations(self, durations: Sequence[float]) -> "Schedule":
        return Schedule(tuple((i, t) for (i, _), t in zip(self.legs, durations)))

    def inverse(self) -> "Schedule":
        return Schedule(tuple((i, -t) for i, t in reversed(self.legs)))

    def __add__(self, other: "Schedule") -> "Schedule":
        return Schedule(self.legs + other.legs)

    def to_json(self) -> list:
        return [[i, t] for i, t in self.legs]

    @classmethod
    def from_json(cls, data) -> "Schedule":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(tuple((int(i), float(t)) for i, t in data))

    def validate(self, sys: ControlSystem) -> None:
        for i, _ in self.legs:
            if not 0 <= i < len(sys):
                raise IndexError(f"schedule uses generator {i}, system has {len(sys)}")


# ---------------------------------------------------------------- integration


def rk4_batch(
    rhs: Callable[[np.ndarray, np.ndarray], np.ndarray],
    X: np.ndarray,
    t: np.ndarray,
    opts: IntegratorOptions = DEFAULT_OPTIONS,
    sphere: bool = False,
    raise_on_blowup: bool = True,
) -> np.ndarray:
    """Fixed-step RK4 for many points at once.

    Row r is integrated for signed time ``t[r]`` with ceil(|t|/step) steps, the last one
    shortened. ``rhs(Y, active)`` returns the field at the rows of Y (rows outside ``active``
    may be left zero). Rows never mix, so a row's result does not depend on its neighbours'
    durations. With ``raise_on_blowup=False`` rows that turn non-finite are set to NaN and
    frozen instead of raising.
    """
    X = np.array(X, dtype=float)
    t = np.asarray(t, dtype=float)
    remaining = np.abs(t)
    sign = np.sign(t)
    nsteps = np.ceil(remaining / opts.step - 1e-9).astype(int)
    nsteps = np.where(remaining > 0, np.maximum(nsteps, 1), 0)
    last = remaining - (nsteps - 1) * opts.step
    renorm = sphere and opts.sphere_renormalize
    for k in range(int(nsteps.max(initial=0))):
        active = k < nsteps
        h = np.where(k == nsteps - 1, last, opts.step)
        h = np.where(active, h, 0.0)
        hs = (sign * h)[:, None]
        with np.errstate(all="ignore"):
            k1 = rhs(X, active)
            k2 = rhs(X + 0.5 * hs * k1, active)
            k3 = rhs(X + 0.5 * hs * k2, active)
            k4 = rhs(X + hs * k3, active)
            Xn = X + hs / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            if renorm:
                Xn = Xn / np.linalg.norm(Xn, axis=1, keepdims=True)
        X = np.where(active[:, None], Xn, X)
        bad = active & ~np.all(np.isfinite(X), axis=1)
        if bad.any():
            if raise_on_blowup:
                r = int(np.argmax(bad))
                reached = float(sign[r] * (k * opts.step + h[r]))
                raise BlowupError(f"non-finite state after time {reached:.6g}", reached)
            X[bad] = np.nan
            nsteps[bad] = k
    return X


def integrate_batch(
    m: Manifold,
    fields: Sequence[VectorField],
    which: np.ndarray,
    X: np.ndarray,
    t: np.ndarray,
    opts: IntegratorOptions = DEFAULT_OPTIONS,
    raise_on_blowup: bool = True,
) -> np.ndarray:
    """Row r follows ``fields[which[r]]`` for signed time ``t[r]`` (see rk4_batch)."""
    which = np.asarray(which, dtype=int)
    groups = [(g, which == g) for g in np.unique(which)]

    def rhs(Y, active):
        out = np.zeros_like(Y)
        for g, mask in groups:
            sel = mask & active
            if sel.any():
                out[sel] = fields[g].values(Y[sel])
        return out

    return rk4_batch(rhs, X, t, opts, m.kind == SPHERE2, raise_on_blowup)


def rk4_step(f: VectorField, p: np.ndarray, h: float, opts: IntegratorOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """One RK4 step of signed size h from a single point, wrapped to canonical form."""
    X = p[None, :]
    k1 = f.values(X)
    k2 = f.values(X + 0.5 * h * k1)
    k3 = f.values(X + 0.5 * h * k2)
    k4 = f.values(X + h * k3)
    Xn = X + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if f.manifold.kind == SPHERE2 and opts.sphere_renormalize:
        Xn = Xn / np.linalg.norm(Xn)
    if not np.all(np.isfinite(Xn)):
        raise BlowupError("non-finite state", h)
    return wrap(f.manifold, Xn[0])


def integrate(f: VectorField, q, t: float, opts: IntegratorOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """The time-t flow of f applied to q (t may be negative; t = 0 returns q)."""
    q = np.asarray(q, dtype=float)
    m = f.manifold
    if t == 0:
        return q.copy()
    X = integrate_batch(m, [f], np.zeros(1, dtype=int), q[None, :], np.array([float(t)]), opts)
    return wrap(m, X[0])


def chrono_map(sys: ControlSystem, s: Schedule, q, opts: IntegratorOptions = DEFAULT_OPTIONS) -> np.ndarray:
    s.validate(sys)
    p = np.asarray(q, dtype=float).copy()
    for k, (i, t) in enumerate(s.legs):
        try:
            p = integrate(sys.generators[i], p, t, opts)
        except BlowupError as exc:
            raise BlowupError(f"leg {k}: {exc}", exc.time, leg=k) from None
    return p


def chrono_map_batch(
    sys: ControlSystem,
    indices: np.ndarray,
    durations: np.ndarray,
    q0: np.ndarray,
    opts: IntegratorOptions = DEFAULT_OPTIONS,
    raise_on_blowup: bool = True,
) -> np.ndarray:
    """Endpoints of every leg for many schedules, shape (samples, legs, ambient).

    ``indices`` and ``durations`` have shape (samples, legs); ``q0`` is (ambient,) or
    (samples, ambient). Without ``raise_on_blowup`` a sample that blows up is NaN from then on.
    """
    indices = np.asarray(indices, dtype=int)
    durations = np.asarray(durations, dtype=float)
    S, L = durations.shape
    m = sys.manifold
    X = np.broadcast_to(np.asarray(q0, dtype=float), (S, m.ambient_dim)).copy()
    out = np.empty((S, L, X.shape[1]))
    for k in range(L):
        t = np.where(np.isnan(X).any(axis=1), 0.0, durations[:, k])
        X = integrate_batch(m, sys.generators, indices[:, k], X, t, opts, raise_on_blowup)
        ok = ~np.isnan(X).any(axis=1)
        X[ok] = wrap(m, X[ok])
        out[:, k] = X
    return out


def _tangent_coords(m: Manifold, p_plus, p_minus, at) -> np.ndarray:
    d = difference(m, p_plus, p_minus)
    if m.kind == SPHERE2:
        return tangent_basis(m, at) @ d
    return d


def chrono_jacobian(sys: ControlSystem, s: Schedule, q, opts: IntegratorOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """d(endpoint)/d(t_i) by central differences; shape (dim, N) in tangent coordinates."""
    q = np.asarray(q, dtype=float)
    s.validate(sys)
    N = len(s)
    t = s.durations
    h = 1e-5 * (1.0 + np.abs(t))
    # rows: the schedule itself, then +h and -h on each leg in turn
    T = np.tile(t, (2 * N + 1, 1))
    T[1 : N + 1][np.arange(N), np.arange(N)] += h
    T[N + 1 :][np.arange(N), np.arange(N)] -= h
    try:
        ends = chrono_map_batch(sys, np.tile(s.indices, (2 * N + 1, 1)), T, q, opts)[:, -1] if N else q[None, :]
    except BlowupError:
        # rerun one schedule at a time so the error names the leg
        for row in T:
            chrono_map(sys, s.with_durations(row), q, opts)
        raise
    end, pp, pm = ends[0], ends[1 : N + 1], ends[N + 1 :]
    cols = [_tangent_coords(sys.manifold, pp[i], pm[i], end) / (2 * h[i]) for i in range(N)]
    return np.array(cols).T.reshape(sys.manifold.dim, N)


def chrono_rank(sys: ControlSystem, s: Schedule, q, opts: IntegratorOptions = DEFAULT_OPTIONS, tol: float = 1e-7) -> int:
    if len(s) == 0:
        return 0
    return numerical_rank(chrono_jacobian(sys, s, q, opts), tol)[0]


# ---------------------------------------------------------------- general products


def word_legs(w: BracketWord, tau: float) -> list[tuple[int, float]]:
    """Group-commutator realisation: legs(L), legs(R), inverse legs(L), inverse legs(R)."""
    if isinstance(w, Leaf):
        return [(w.index, tau)]
    left = word_legs(w.left, tau)
    right = word_legs(w.right, tau)
    inv = lambda legs: [(i, -t) for i, t in reversed(legs)]  # noqa: E731
    return left + right + inv(left) + inv(right)


@dataclass
class GeneralSchedule:
    schedule: Schedule
    achieved_rank: int
    retries_used: int
    seed: int
    forward_only: bool = False
    words: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schedule": self.schedule.to_json(),
            "achieved_rank": self.achieved_rank,
            "retries_used": self.retries_used,
            "seed": self.seed,
            "forward_only": self.forward_only,
            "words": [str(w) for w in self.words],
            "total_time": self.schedule.total_time,
        }


MAX_RETRIES = 20


def general_schedule(
    sys: ControlSystem,
    q,
    basis_words: Sequence[BracketWord],
    t_scale: float = 0.1,
    seed: int = 0,
    *,
    forward_only: bool = False,
    opts: IntegratorOptions = DEFAULT_OPTIONS,
    tol: float = 1e-7,
) -> GeneralSchedule:
    """Concatenate commutator realisations of the words and resample until full rank.

    Each word gets one duration drawn from [0.5, 1] * t_scale. In ``forward_only`` mode every
    leg gets its own positive duration instead, so the product stays in the positive semigroup.
    Rank-deficient draws are redrawn from the same generator, up to 20 times.
    """
    if not basis_words:
        raise ValueError("need at least one basis word")
    q = np.asarray(q, dtype=float)
    rng = np.random.default_rng(seed)
    target = sys.manifold.dim
    shape = [word_legs(w, 1.0) for w in basis_words]
    n_legs = sum(len(x) for x in shape)
    best = -1
    for attempt in range(MAX_RETRIES + 1):
        if forward_only:
            taus = rng.uniform(0.5, 1.0, n_legs) * t_scale
            legs = [(i, float(tau)) for (i, _), tau in zip([l for x in shape for l in x], taus)]
        else:
            taus = rng.uniform(0.5, 1.0, len(basis_words)) * t_scale
            legs = [leg for w, tau in zip(basis_words, taus) for leg in word_legs(w, float(tau))]
        sched = Schedule(tuple(legs))
        rank = chrono_rank(sys, sched, q, opts, tol)
        best = max(best, rank)
        if rank >= target:
            return GeneralSchedule(sched, rank, attempt, seed, forward_only, list(basis_words))
    raise RankDeficientError(f"rank deficient after {MAX_RETRIES} retries (best rank {best} of {target})", best)
