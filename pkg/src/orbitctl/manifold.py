"""State spaces: Euclidean space, flat tori with per-axis periods, and the unit sphere S^2.

Points are plain 1-D float64 arrays in ambient coordinates (n for R^n and T^n, 3 for S^2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

RN = "rn"
TORUS = "torus"
SPHERE2 = "sphere2"


class DegeneratePointError(ValueError):
    pass


@dataclass(frozen=True)
class Manifold:
    kind: str
    dim: int
    periods: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in (RN, TORUS, SPHERE2):
            raise ValueError(f"unknown manifold kind {self.kind!r}")
        if self.kind == SPHERE2 and self.dim != 2:
            raise ValueError("sphere2 has dim 2")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.kind == TORUS:
            if len(self.periods) != self.dim:
                raise ValueError(f"torus needs {self.dim} periods, got {len(self.periods)}")
            if any(not (p > 0 and np.isfinite(p)) for p in self.periods):
                raise ValueError("torus periods must be strictly positive")
            object.__setattr__(self, "periods", tuple(float(p) for p in self.periods))

    @property
    def ambient_dim(self) -> int:
        return 3 if self.kind == SPHERE2 else self.dim

    @property
    def compact(self) -> bool:
        return self.kind != RN

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "dim": self.dim}
        if self.kind == TORUS:
            d["periods"] = list(self.periods)
        return d


def euclidean(n: int) -> Manifold:
    return Manifold(RN, n)


def torus(periods: Sequence[float]) -> Manifold:
    return Manifold(TORUS, len(periods), tuple(periods))


def sphere2() -> Manifold:
    return Manifold(SPHERE2, 2)


def from_config(cfg: dict) -> Manifold:
    kind = cfg["kind"]
    if kind == SPHERE2:
        return sphere2()
    if kind == TORUS:
        periods = cfg.get("periods")
        if periods is None:
            periods = [2 * np.pi] * int(cfg["dim"])
        if "dim" in cfg and int(cfg["dim"]) != len(periods):
            raise ValueError("torus 'dim' does not match the number of 'periods'")
        return torus(periods)
    return euclidean(int(cfg["dim"]))


def _check(m: Manifold, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != m.ambient_dim:
        raise ValueError(f"expected {m.ambient_dim} coordinates, got {p.shape[-1]}")
    return p


def wrap(m: Manifold, p) -> np.ndarray:
    """Canonical coordinates of ``p`` (also accepts a stack of points, shape (..., ambient))."""
    p = _check(m, p)
    if m.kind == TORUS:
        per = np.asarray(m.periods)
        out = np.mod(p, per)
        # np.mod can round up to exactly the period for tiny negative inputs
        return np.where(out >= per, out - per, out)
    if m.kind == SPHERE2:
        nrm = np.linalg.norm(p, axis=-1, keepdims=True)
        if np.any(nrm == 0) or not np.all(np.isfinite(nrm)):
            raise DegeneratePointError("degenerate sphere point")
        # rows already unit up to rounding are kept as is, so wrap is exactly idempotent
        return np.where(np.abs(nrm - 1.0) <= 4e-16, p, p / nrm)
    return p.copy()


def difference(m: Manifold, p, q) -> np.ndarray:
    """Chart displacement from q to p; on the torus the shortest wrapped representative."""
    p = _check(m, p)
    q = _check(m, q)
    d = p - q
    if m.kind == TORUS:
        per = np.asarray(m.periods)
        d = d - per * np.round(d / per)
    return d


def distance(m: Manifold, p, q) -> np.ndarray | float:
    p = _check(m, p)
    q = _check(m, q)
    if m.kind == SPHERE2:
        # atan2 form stays accurate for nearly equal and nearly antipodal points
        cr = np.linalg.norm(np.cross(p, q), axis=-1)
        dt = np.sum(p * q, axis=-1)
        out = np.arctan2(cr, dt)
    else:
        out = np.linalg.norm(difference(m, p, q), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def tangent_project(m: Manifold, p, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if m.kind != SPHERE2:
        return v.copy()
    p = _check(m, p)
    return v - np.sum(v * p, axis=-1, keepdims=True) * p


def tangent_basis(m: Manifold, p) -> np.ndarray:
    """Orthonormal basis of the tangent space at p as rows, shape (dim, ambient)."""
    if m.kind != SPHERE2:
        return np.eye(m.ambient_dim)
    p = _check(m, p)
    e = np.zeros(3)
    e[int(np.argmin(np.abs(p)))] = 1.0
    b1 = e - np.dot(e, p) * p
    b1 /= np.linalg.norm(b1)
    b2 = np.cross(p, b1)
    return np.vstack([b1, b2])


def random_point(m: Manifold, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Uniform point on compact manifolds; standard normal times ``scale`` on R^n."""
    if m.kind == TORUS:
        return wrap(m, rng.uniform(0, 1, m.dim) * np.asarray(m.periods))
    if m.kind == SPHERE2:
        return wrap(m, rng.standard_normal(3))
    return scale * rng.standard_normal(m.dim)
