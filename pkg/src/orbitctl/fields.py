"""Vector fields, control systems and the built-in systems."""

from __future__ import annotations

from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import integrate as _integrate

from . import expr as ex
from .manifold import SPHERE2, Manifold, euclidean, sphere2, tangent_project, torus
from .manifold import from_config as manifold_from_config

FD_STEP = 1e-5

NativeFn = Callable[[np.ndarray], np.ndarray]


class VectorField:
    """A vector field in ambient coordinates, either symbolic or native.

    Symbolic fields carry one :class:`~orbitctl.expr.Expr` per ambient coordinate and get
    exact Jacobians by symbolic differentiation. Native fields wrap a vectorised callable
    ``fn(X) -> V`` on arrays of shape (m, ambient); their Jacobian is ``native_jacobian`` when
    given, otherwise central finite differences with step ``fd_step * (1 + |q_j|)``.

    On the sphere, symbolic components are replaced by their tangential part
    F - <F, x> x / <x, x>, so every field is tangent to S^2.
    """

    def __init__(
        self,
        manifold: Manifold,
        components: Sequence[ex.Expr | str] | None = None,
        *,
        native: NativeFn | None = None,
        native_jacobian: Callable[[np.ndarray], np.ndarray] | None = None,
        controls: Mapping[str, float] | None = None,
        name: str = "",
        fd_step: float = FD_STEP,
        project: bool = True,
    ):
        if (components is None) == (native is None):
            raise ValueError("give exactly one of components or native")
        self.manifold = manifold
        self.name = name
        self.controls = dict(controls or {})
        self.fd_step = fd_step
        n = manifold.ambient_dim
        self.varnames = tuple(f"x{i + 1}" for i in range(n))
        if components is not None:
            comps = [ex.parse(c) if isinstance(c, str) else c for c in components]
            if len(comps) != n:
                raise ValueError(f"field needs {n} components, got {len(comps)}")
            if self.controls:
                comps = [ex.substitute(c, self.controls) for c in comps]
            unbound = set().union(*(ex.variables(c) for c in comps)) - set(self.varnames)
            if unbound:
                raise ValueError(f"unbound variables in field: {sorted(unbound)}")
            if manifold.kind == SPHERE2 and project:
                comps = _tangential_exprs(comps, self.varnames)
            self.components: tuple[ex.Expr, ...] | None = tuple(comps)
            self._fn = ex.compile_exprs(self.components, self.varnames)
            self._native = None
        else:
            self.components = None
            self._native = native
            self._fn = native
        self._native_jac = native_jacobian
        self._jac_fn = None
        self._jac_exprs = None

    @property
    def symbolic(self) -> bool:
        return self.components is not None

    def __repr__(self):
        kind = "symbolic" if self.symbolic else "native"
        return f"VectorField({self.name or kind!r}, {self.manifold.kind})"

    def values(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.asarray(self._fn(X), dtype=float)

    def __call__(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.manifold.ambient_dim,):
            raise ValueError(f"expected {self.manifold.ambient_dim} coordinates, got shape {q.shape}")
        return self.values(q[None, :])[0]

    @property
    def jacobian_exprs(self) -> tuple[tuple[ex.Expr, ...], ...]:
        if not self.symbolic:
            raise TypeError("native fields have no symbolic Jacobian")
        if self._jac_exprs is None:
            self._jac_exprs = tuple(tuple(ex.diff(c, v) for v in self.varnames) for c in self.components)
        return self._jac_exprs

    def jacobians(self, X) -> np.ndarray:
        """Stack of Jacobians, shape (m, ambient, ambient); entry (i, j) = d V_i / d x_j."""
        X = np.asarray(X, dtype=float)
        n = self.manifold.ambient_dim
        if self.symbolic:
            if self._jac_fn is None:
                flat = [e for row in self.jacobian_exprs for e in row]
                self._jac_fn = ex.compile_exprs(flat, self.varnames)
            return self._jac_fn(X).reshape(X.shape[0], n, n)
        if self._native_jac is not None:
            return np.asarray(self._native_jac(X), dtype=float)
        return fd_jacobian(self.values, X, self.fd_step)


def fd_jacobian(fn: NativeFn, X: np.ndarray, step: float) -> np.ndarray:
    m, n = X.shape
    out = np.empty((m, n, n))
    for j in range(n):
        h = step * (1.0 + np.abs(X[:, j]))
        Xp = X.copy()
        Xm = X.copy()
        Xp[:, j] += h
        Xm[:, j] -= h
        out[:, :, j] = (fn(Xp) - fn(Xm)) / (2 * h)[:, None]
    return out


def _tangential_exprs(comps: Sequence[ex.Expr], varnames: Sequence[str]) -> list[ex.Expr]:
    xs = [ex.Var(v) for v in varnames]
    radial = ex.total([ex.mul(c, x) for c, x in zip(comps, xs)])
    if isinstance(radial, ex.Const) and radial.value == 0:
        return list(comps)
    norm2 = ex.total([ex.mul(x, x) for x in xs])
    coef = ex.div(radial, norm2)
    return [ex.sub(c, ex.mul(coef, x)) for c, x in zip(comps, xs)]


def eval_field(f: VectorField, q) -> np.ndarray:
    return f(q)


def jacobian(f: VectorField, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return f.jacobians(q[None, :])[0]


def bracket_field(V: VectorField, W: VectorField) -> VectorField:
    """The field q -> DW(q) V(q) - DV(q) W(q)."""
    if V.manifold != W.manifold:
        raise ValueError("fields live on different manifolds")
    m = V.manifold
    name = f"[{V.name},{W.name}]"
    if V.symbolic and W.symbolic:
        JV, JW = V.jacobian_exprs, W.jacobian_exprs
        n = m.ambient_dim
        comps = [
            ex.sub(
                ex.total([ex.mul(JW[i][j], V.components[j]) for j in range(n)]),
                ex.total([ex.mul(JV[i][j], W.components[j]) for j in range(n)]),
            )
            for i in range(n)
        ]
        return VectorField(m, comps, name=name, project=False)

    def fn(X, V=V, W=W):
        return np.einsum("mij,mj->mi", W.jacobians(X), V.values(X)) - np.einsum(
            "mij,mj->mi", V.jacobians(X), W.values(X)
        )

    # nested finite differences: widen the step one level up to keep noise bounded
    step = float(np.sqrt(max(V.fd_step, W.fd_step)))
    return VectorField(m, native=fn, name=name, fd_step=step)


class ControlSystem:
    """A manifold plus an ordered, finite family of generator fields."""

    def __init__(self, manifold: Manifold, generators: Sequence[VectorField], label: str = ""):
        generators = tuple(generators)
        if not generators:
            raise ValueError("a control system needs at least one generator")
        for g in generators:
            if g.manifold != manifold:
                raise ValueError("all generators must share the system's manifold")
        self.manifold = manifold
        self.generators = generators
        self.label = label
        self._derived: dict = {}

    def __len__(self):
        return len(self.generators)

    def __repr__(self):
        return f"ControlSystem({self.label!r}, {self.manifold.kind}, {len(self)} generators)"

    def values(self, X, index: int) -> np.ndarray:
        return self.generators[index].values(X)


# ---------------------------------------------------------------- builders


def constant_field(m: Manifold, v: Sequence[float], name: str = "") -> VectorField:
    return VectorField(m, [ex.const(c) for c in v], name=name)


def linear_exprs(M) -> list[ex.Expr]:
    M = np.asarray(M, dtype=float)
    n = M.shape[1]
    return [
        ex.total([ex.mul(ex.const(M[i, j]), ex.Var(f"x{j + 1}")) for j in range(n) if M[i, j] != 0])
        for i in range(M.shape[0])
    ]


def linear_field(M, manifold: Manifold | None = None, name: str = "") -> VectorField:
    M = np.asarray(M, dtype=float)
    return VectorField(manifold or euclidean(M.shape[0]), linear_exprs(M), name=name)


EXAMPLE1_OMEGA_INTEGRAL = 1.5
_BUMP_LO, _BUMP_HI = 1.0 / 3.0, 2.0 / 3.0


@lru_cache(maxsize=None)
def example1_omega_scale() -> float:
    """c such that omega(r) = c * bump(r, 1/3, 2/3) integrates to 1.5."""
    # bump peaks at exp(-36); integrate the rescaled profile so quad sees O(1) values
    peak = 36.0

    def g(r):
        return np.exp(peak - 1.0 / ((r - _BUMP_LO) * (_BUMP_HI - r)))

    val, _ = _integrate.quad(g, _BUMP_LO, _BUMP_HI, epsabs=1e-14, epsrel=1e-12, limit=200)
    return EXAMPLE1_OMEGA_INTEGRAL * np.exp(peak) / val


def omega(r):
    return example1_omega_scale() * ex.bump_value(r, _BUMP_LO, _BUMP_HI)


def example1_field(n: int, u: float) -> VectorField:
    """d/dx + u * omega(x - k) d/dy^(k+2) on the slab k <= x < k+1 of T^n."""
    m = torus([n - 1.0] + [1.0] * (n - 1))
    c = example1_omega_scale()
    x = ex.Var("x1")
    comps: list[ex.Expr] = [ex.const(1.0)]
    for k in range(n - 1):
        bump = ex.Bump(ex.sub(x, ex.const(k)), ex.const(_BUMP_LO), ex.const(_BUMP_HI))
        comps.append(ex.mul(ex.const(u * c), bump))
    return VectorField(m, comps, name=f"V(u={u:g})")


def _example1(n: int = 3, u_levels: Sequence[float] = (-0.9, 0.0, 0.9)) -> ControlSystem:
    n = int(n)
    if n < 3:
        raise ValueError("example1 needs n > 2")
    levels = [float(u) for u in u_levels]
    if not levels or any(not (-1.0 < u < 1.0) for u in levels):
        raise ValueError("example1 control levels must lie in the open interval (-1, 1)")
    gens = [example1_field(n, u) for u in levels]
    return ControlSystem(gens[0].manifold, gens, label=f"example1(n={n})")


def _example2(v2_sign: float = 1.0) -> ControlSystem:
    if v2_sign not in (1, -1):
        raise ValueError("v2_sign must be +1 or -1")
    m = torus([2 * np.pi, 2 * np.pi])
    phi = ex.Var("x1")
    # eta(phi): even bumps of radius 1/2 around phi = 0 (both chart ends) and phi = pi
    eta = ex.total(
        [ex.Bump(ex.sub(phi, ex.const(c)), ex.const(-0.5), ex.const(0.5)) for c in (0.0, np.pi, 2 * np.pi)]
    )
    v1 = VectorField(m, [ex.func("sin", phi), ex.const(0.0)], name="V1")
    v2 = VectorField(m, [ex.mul(ex.const(float(v2_sign)), eta), ex.const(0.0)], name="V2")
    v3 = VectorField(m, [ex.const(0.0), ex.const(1.0)], name="V3")
    return ControlSystem(m, [v1, v2, v3], label="example2")


def _heisenberg() -> ControlSystem:
    m = euclidean(3)
    v1 = VectorField(m, ["1", "0", "0"], name="X")
    v2 = VectorField(m, ["0", "1", "x1"], name="Y")
    return ControlSystem(m, [v1, v2], label="heisenberg")


def _bilinear_params(params: Mapping):
    from .bilinear import BilinearSystem3

    sys3 = BilinearSystem3.from_config(params)
    levels = params.get("u_levels")
    if levels is None:
        raise ValueError("bilinear systems need 'u_levels'")
    return sys3, [np.atleast_1d(np.asarray(u, dtype=float)) for u in levels]


def _bilinear_lift(**params) -> ControlSystem:
    from .bilinear import lift

    sys3, levels = _bilinear_params(params)
    return lift(sys3, levels)


def _bilinear_sphere(**params) -> ControlSystem:
    from .bilinear import project_sphere

    sys3, levels = _bilinear_params(params)
    return project_sphere(sys3, levels)


BUILTINS = {
    "example1": _example1,
    "example2": _example2,
    "heisenberg": _heisenberg,
    "bilinear_lift": _bilinear_lift,
    "bilinear_sphere": _bilinear_sphere,
}


def builtin(name: str, params: Mapping | None = None) -> ControlSystem:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown builtin system {name!r}; choose from {sorted(BUILTINS)}") from None
    try:
        return factory(**dict(params or {}))
    except TypeError as exc:
        raise ValueError(f"invalid params for {name}: {exc}") from None


def system_from_config(cfg: Mapping) -> ControlSystem:
    """Build a system from ``{"builtin": ..., "params": ...}`` or an inline definition."""
    if "builtin" in cfg:
        return builtin(cfg["builtin"], cfg.get("params"))
    m = manifold_from_config(cfg["manifold"])
    gens = []
    for i, g in enumerate(cfg["generators"]):
        try:
            gens.append(VectorField(m, g["components"], controls=g.get("controls"), name=g.get("name", f"V{i}")))
        except ex.ExprSyntaxError as exc:
            raise ValueError(f"generators[{i}]: {exc}") from None
    return ControlSystem(m, gens, label=cfg.get("label", "inline"))


__all__ = [
    "VectorField",
    "ControlSystem",
    "eval_field",
    "jacobian",
    "bracket_field",
    "builtin",
    "system_from_config",
    "constant_field",
    "linear_field",
    "example1_field",
    "example1_omega_scale",
    "omega",
    "sphere2",
    "tangent_project",
]
