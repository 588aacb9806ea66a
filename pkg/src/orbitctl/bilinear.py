"""Bilinear systems x' = (A + u^1 B_1 + ... + u^d B_d) x in R^3 and their projection to S^2."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .fields import ControlSystem, VectorField, linear_exprs
from .manifold import euclidean, sphere2

THREE_REAL = "three_real"
ONE_REAL_COMPLEX_PAIR = "one_real_one_complex_pair"


def _matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.shape == (9,):
        a = a.reshape(3, 3)
    if a.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix or 9 row-major entries, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


@dataclass(frozen=True, eq=False)
class BilinearSystem3:
    A: np.ndarray
    B: tuple[np.ndarray, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "A", _matrix(self.A))
        object.__setattr__(self, "B", tuple(_matrix(b) for b in self.B))

    @property
    def d(self) -> int:
        return len(self.B)

    @classmethod
    def from_config(cls, cfg: Mapping) -> "BilinearSystem3":
        return cls(cfg["A"], tuple(cfg.get("B", ())))

    def to_dict(self) -> dict:
        return {"A": self.A.ravel().tolist(), "B": [b.ravel().tolist() for b in self.B]}


def a_of_u(sys: BilinearSystem3, u: Sequence[float]) -> np.ndarray:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (sys.d,):
        raise ValueError(f"expected {sys.d} control values, got {u.shape[0]}")
    out = sys.A.copy()
    for ui, Bi in zip(u, sys.B):
        out += ui * Bi
    return out


@dataclass(frozen=True)
class Eigen3:
    kind: str
    real_eigenvalues: tuple[float, ...]
    complex_pair: tuple[float, float] | None = None

    @property
    def eigenvalues(self) -> list[complex]:
        out: list[complex] = [complex(r) for r in self.real_eigenvalues]
        if self.complex_pair is not None:
            re, im = self.complex_pair
            out += [complex(re, im), complex(re, -im)]
        return out


def _polish(coeffs, root: complex) -> complex:
    # two Newton steps on the monic cubic
    b, c, d = coeffs
    for _ in range(2):
        f = ((root + b) * root + c) * root + d
        df = (3 * root + 2 * b) * root + c
        if df == 0:
            break
        root = root - f / df
    return root


def eigen3(M, tol: float = 1e-9) -> Eigen3:
    """Eigenvalues of a 3x3 real matrix from its characteristic cubic (Cardano / trigonometric)."""
    M = _matrix(M)
    tr = float(np.trace(M))
    minors = (
        M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        + M[0, 0] * M[2, 2] - M[0, 2] * M[2, 0]
        + M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1]
    )
    det = float(
        M[0, 0] * (M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1])
        - M[0, 1] * (M[1, 0] * M[2, 2] - M[1, 2] * M[2, 0])
        + M[0, 2] * (M[1, 0] * M[2, 1] - M[1, 1] * M[2, 0])
    )
    # lambda^3 + b lambda^2 + c lambda + d
    b, c, d = -tr, float(minors), -det
    shift = -b / 3.0
    p = c - b * b / 3.0
    q = 2 * b**3 / 27.0 - b * c / 3.0 + d
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    scale = max(1.0, float(np.max(np.abs(M))))

    # multiple roots: the cube roots below would turn rounding noise into an imaginary part
    eps = 1e-14
    if abs(p) <= eps * scale**2 and abs(q) <= eps * scale**3:
        return Eigen3(THREE_REAL, (shift, shift, shift))
    if abs(disc) <= eps * max(abs(p / 3.0) ** 3, (q / 2.0) ** 2):
        single, double = 3.0 * q / p + shift, -1.5 * q / p + shift
        return Eigen3(THREE_REAL, tuple(sorted([single, double, double])))

    if disc > 0:
        sq = math.sqrt(disc)
        s1 = np.cbrt(-q / 2.0 + sq)
        s2 = np.cbrt(-q / 2.0 - sq)
        t_real = s1 + s2
        re = -t_real / 2.0 + shift
        im = abs(math.sqrt(3.0) / 2.0 * (s1 - s2))
        lam_r = _polish((b, c, d), complex(t_real + shift)).real
        z = _polish((b, c, d), complex(re, im))
        re, im = z.real, abs(z.imag)
        if im > tol * scale:
            return Eigen3(ONE_REAL_COMPLEX_PAIR, (lam_r,), (re, im))
        roots = sorted([lam_r, re, re])
        return Eigen3(THREE_REAL, tuple(roots))

    if p == 0:
        roots = [shift] * 3
    else:
        r = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (p * r)
        arg = min(1.0, max(-1.0, arg))
        theta = math.acos(arg) / 3.0
        roots = [r * math.cos(theta - 2.0 * math.pi * k / 3.0) + shift for k in range(3)]
    roots = sorted(_polish((b, c, d), complex(x)).real for x in roots)
    return Eigen3(THREE_REAL, tuple(roots))


@dataclass(frozen=True)
class TheoremBVerdict:
    applies: bool
    product: float | None
    controllable_sufficient: bool
    boundary: bool
    larc_checked: bool = False
    larc_holds: bool | None = None
    larc_point: tuple[float, ...] | None = None

    def to_dict(self) -> dict:
        return {
            "applies": self.applies,
            "product": self.product,
            "controllable_sufficient": self.controllable_sufficient,
            "boundary": self.boundary,
            "larc_checked": self.larc_checked,
            "larc_holds": self.larc_holds,
            "larc_point": list(self.larc_point) if self.larc_point is not None else None,
            "note": "LARC is evaluated at a user-chosen nonzero point of R^3; the sufficient "
            "condition is reported independently of it",
        }


def _gap(e: Eigen3) -> float:
    return e.real_eigenvalues[0] - e.complex_pair[0]


def theorem_b_check(
    sys: BilinearSystem3,
    u: Sequence[float],
    v: Sequence[float],
    tol: float = 1e-9,
    larc_point: Sequence[float] | None = None,
) -> TheoremBVerdict:
    """Sign test on (lambda_R(u) - Re lambda_C(u)) (lambda_R(v) - Re lambda_C(v)).

    ``controllable_sufficient`` needs the product below ``-tol``; a product within ``tol`` of
    zero is flagged as ``boundary`` (inconclusive). If ``larc_point`` is given, LARC of the
    lifted two-level system is checked there and must hold as well.
    """
    eu = eigen3(a_of_u(sys, u), tol)
    ev = eigen3(a_of_u(sys, v), tol)
    applies = eu.kind == ONE_REAL_COMPLEX_PAIR and ev.kind == ONE_REAL_COMPLEX_PAIR
    product = _gap(eu) * _gap(ev) if applies else None
    larc_holds = None
    if larc_point is not None:
        from .lie import larc_check

        rep = larc_check(lift(sys, [u, v]), np.asarray(larc_point, dtype=float), max_depth=3)
        larc_holds = rep.larc_holds
    sufficient = applies and product < -tol and larc_holds is not False
    return TheoremBVerdict(
        applies=applies,
        product=product,
        controllable_sufficient=bool(sufficient),
        boundary=bool(applies and abs(product) <= tol),
        larc_checked=larc_point is not None,
        larc_holds=larc_holds,
        larc_point=tuple(float(x) for x in larc_point) if larc_point is not None else None,
    )


def _levels(sys: BilinearSystem3, u_levels) -> list[np.ndarray]:
    out = [np.atleast_1d(np.asarray(u, dtype=float)) for u in u_levels]
    if not out:
        raise ValueError("need at least one control level")
    return out


def lift(sys: BilinearSystem3, u_levels) -> ControlSystem:
    """Linear generators x -> A(u) x on R^3, one per control level."""
    m = euclidean(3)
    gens = [
        VectorField(m, linear_exprs(a_of_u(sys, u)), name=f"A({','.join(f'{x:g}' for x in u)})")
        for u in _levels(sys, u_levels)
    ]
    return ControlSystem(m, gens, label="bilinear_lift")


def projected_field(M, name: str = "") -> VectorField:
    """v -> M v - <v, M v> v on S^2, with closed-form Jacobian."""
    M = _matrix(M)
    S = M + M.T

    def fn(X):
        MX = X @ M.T
        return MX - np.sum(X * MX, axis=1, keepdims=True) * X

    def jac(X):
        MX = X @ M.T
        quad = np.sum(X * MX, axis=1)
        SX = X @ S.T
        return M[None, :, :] - quad[:, None, None] * np.eye(3)[None] - X[:, :, None] * SX[:, None, :]

    return VectorField(sphere2(), native=fn, native_jacobian=jac, name=name)


def project_sphere(sys: BilinearSystem3, u_levels) -> ControlSystem:
    gens = [
        projected_field(a_of_u(sys, u), name=f"A({','.join(f'{x:g}' for x in u)})^pr")
        for u in _levels(sys, u_levels)
    ]
    return ControlSystem(sphere2(), gens, label="bilinear_sphere")


def rotation_about(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * K @ K


def theorem_b_fixture() -> tuple[BilinearSystem3, np.ndarray, np.ndarray]:
    """A(0) with spectrum {1, +-i}, A(1) with spectrum {-1, +-i} in a tilted eigenbasis.

    The second matrix is conjugated by a rotation so that the pair is not simultaneously
    block-diagonal (otherwise the projected fields commute and LARC fails on a circle).
    """
    Mu = np.array([[1.0, 0, 0], [0, 0, -1.0], [0, 1.0, 0]])
    Mv = np.array([[-1.0, 0, 0], [0, 0, -1.0], [0, 1.0, 0]])
    R = rotation_about([0.0, 1.0, 1.0], 1.0)
    Mv = R @ Mv @ R.T
    return BilinearSystem3(Mu, (Mv - Mu,)), np.array([0.0]), np.array([1.0])
