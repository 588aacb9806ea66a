import math

import numpy as np
import pytest

from orbitctl.bilinear import (
    ONE_REAL_COMPLEX_PAIR,
    THREE_REAL,
    BilinearSystem3,
    a_of_u,
    eigen3,
    lift,
    project_sphere,
    projected_field,
    theorem_b_check,
    theorem_b_fixture,
)
from orbitctl.fields import eval_field
from orbitctl.manifold import random_point, sphere2
from orbitctl.reach import find_closed_orbit

MU = np.array([[1.0, 0, 0], [0, 0, -1], [0, 1, 0]])
S3 = np.array([[0.0, -1, 0], [1, 0, 0], [0, 0, 0]])


def companion_roots(M):
    # eigenvalues of the companion matrix of det(lambda I - M)
    coeffs = np.poly(M)
    C = np.diag(np.ones(2), -1)
    C[:, -1] = -coeffs[1:][::-1]
    return np.linalg.eigvals(C)


def test_a_of_u_examples(rng):
    A = rng.normal(size=(3, 3))
    B1, B2 = rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
    np.testing.assert_array_equal(a_of_u(BilinearSystem3(A, (B1,)), [0.0]), A)
    np.testing.assert_allclose(a_of_u(BilinearSystem3(A, (np.eye(3),)), [2.0]), A + 2 * np.eye(3))
    np.testing.assert_allclose(a_of_u(BilinearSystem3(np.zeros((3, 3)), (B1, B2)), [1.0, 1.0]), B1 + B2)
    with pytest.raises(ValueError):
        a_of_u(BilinearSystem3(A, (B1,)), [1.0, 2.0])


def test_matrix_validation():
    assert BilinearSystem3(list(range(9))).A[1, 0] == 3
    with pytest.raises(ValueError):
        BilinearSystem3(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        BilinearSystem3([1, 2, 3, 4, 5, 6, 7, 8, float("nan")])


def test_eigen3_examples():
    e = eigen3(np.diag([1.0, 2.0, 3.0]))
    assert e.kind == THREE_REAL
    np.testing.assert_allclose(e.real_eigenvalues, [1, 2, 3], atol=1e-12)
    e = eigen3(MU)
    assert e.kind == ONE_REAL_COMPLEX_PAIR
    assert e.real_eigenvalues[0] == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(e.complex_pair, (0.0, 1.0), atol=1e-12)
    M = np.array([[-1.0, 0, 0], [0, 2, -3], [0, 3, 2]])
    e = eigen3(M)
    assert e.kind == ONE_REAL_COMPLEX_PAIR
    assert e.real_eigenvalues[0] == pytest.approx(-1.0, abs=1e-12)
    np.testing.assert_allclose(e.complex_pair, (2.0, 3.0), atol=1e-12)
    oracle = sorted(companion_roots(M), key=lambda z: (z.imag, z.real))
    ours = sorted(e.eigenvalues, key=lambda z: (z.imag, z.real))
    np.testing.assert_allclose(ours, oracle, atol=1e-9)


def test_eigen3_repeated_and_collapsing_roots():
    e = eigen3(np.eye(3) * 2)
    assert e.kind == THREE_REAL and e.real_eigenvalues == (2.0, 2.0, 2.0)
    e = eigen3(np.diag([1.0, 2.0, 2.0]))
    assert e.kind == THREE_REAL
    np.testing.assert_allclose(e.real_eigenvalues, [1, 2, 2], atol=1e-12)
    R = np.linalg.qr(np.random.default_rng(0).normal(size=(3, 3)))[0]
    e = eigen3(R @ np.diag([-1.0, 3.0, 3.0]) @ R.T)
    assert e.kind == THREE_REAL
    np.testing.assert_allclose(e.real_eigenvalues, [-1, 3, 3], atol=1e-6)
    # a complex pair with negligible imaginary part collapses to real
    e = eigen3(np.array([[1.0, 0, 0], [0, 0, -1e-13], [0, 1e-13, 0]]))
    assert e.kind == THREE_REAL


def test_eigen3_matches_companion_oracle(rng):
    for _ in range(200):
        M = rng.normal(size=(3, 3)) * rng.uniform(0.1, 10)
        e = eigen3(M)
        ours = np.sort_complex(np.array(e.eigenvalues))
        ref = np.sort_complex(companion_roots(M))
        np.testing.assert_allclose(ours, ref, atol=1e-7 * max(1.0, np.abs(M).max()))


def test_eigen3_trace_and_determinant(rng):
    for _ in range(1000):
        M = rng.normal(size=(3, 3)) * rng.uniform(0.1, 10)
        lam = np.array(eigen3(M).eigenvalues)
        scale = max(1.0, float(np.abs(M).max()))
        assert abs(lam.sum() - np.trace(M)) <= 1e-8 * scale
        assert abs(np.prod(lam) - np.linalg.det(M)) <= 1e-8 * scale**3


def test_theorem_b_examples():
    sys3, u, v = theorem_b_fixture()
    eu, ev = eigen3(a_of_u(sys3, u)), eigen3(a_of_u(sys3, v))
    np.testing.assert_allclose(sorted(eu.eigenvalues, key=lambda z: z.imag), [-1j, 1, 1j], atol=1e-12)
    np.testing.assert_allclose(sorted(ev.eigenvalues, key=lambda z: z.imag), [-1j, -1, 1j], atol=1e-12)
    verdict = theorem_b_check(sys3, u, v)
    assert verdict.applies and verdict.controllable_sufficient
    assert verdict.product == pytest.approx(-1.0, abs=1e-9)
    rot = np.array([[0.0, 0, 0], [0, 0, -1], [0, 1, 0]])
    boundary = theorem_b_check(BilinearSystem3(rot, (np.zeros((3, 3)),)), [0.0], [1.0])
    assert boundary.applies and boundary.product == 0 and boundary.boundary
    assert not boundary.controllable_sufficient
    diag = theorem_b_check(BilinearSystem3(np.diag([1.0, 2, 3])), [], [])
    assert not diag.applies and not diag.controllable_sufficient and diag.product is None


def test_theorem_b_larc_point():
    sys3, u, v = theorem_b_fixture()
    verdict = theorem_b_check(sys3, u, v, larc_point=[0.3, 0.5, 0.2])
    assert verdict.larc_checked and verdict.larc_holds and verdict.controllable_sufficient
    d = verdict.to_dict()
    assert d["larc_point"] == [0.3, 0.5, 0.2]
    # two commuting diagonal generators cannot reach rank 3 anywhere
    flat = BilinearSystem3(np.diag([1.0, 2, 3]), (np.diag([1.0, 0, 0]),))
    assert not theorem_b_check(flat, [0.0], [1.0], larc_point=[1, 1, 1]).larc_holds


def test_shift_equivariance(rng):
    sys3, u, v = theorem_b_fixture()
    base = theorem_b_check(sys3, u, v).product
    for _ in range(10):
        c = float(rng.uniform(-5, 5))
        shifted = BilinearSystem3(sys3.A + c * np.eye(3), sys3.B)
        assert theorem_b_check(shifted, u, v).product == pytest.approx(base, abs=1e-8)
        f, g = projected_field(a_of_u(sys3, u)), projected_field(a_of_u(shifted, u))
        for _ in range(5):
            p = random_point(sphere2(), rng)
            np.testing.assert_allclose(eval_field(g, p), eval_field(f, p), atol=1e-9)


def test_projected_field_examples():
    m = sphere2()
    rng = np.random.default_rng(1)
    ident = projected_field(np.eye(3))
    rot = projected_field(S3)
    for _ in range(20):
        p = random_point(m, rng)
        np.testing.assert_allclose(eval_field(ident, p), 0, atol=1e-15)
        np.testing.assert_allclose(eval_field(rot, p), S3 @ p, atol=1e-15)
        assert abs(p @ S3 @ p) < 1e-15
    sys_ = project_sphere(BilinearSystem3(S3), [[]])
    p = np.array([0.6, 0.0, 0.8])
    orb = find_closed_orbit(sys_, 0, p, 7.0)
    assert orb.period == pytest.approx(2 * math.pi, abs=1e-6)
    stretch = projected_field(np.diag([2.0, 1, 1]))
    for p in ([1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, 0.6, -0.8], [0, -math.sqrt(0.5), math.sqrt(0.5)]):
        assert np.linalg.norm(eval_field(stretch, np.array(p, float))) < 1e-9


def test_projected_fields_tangent_and_jacobian(rng):
    from orbitctl.fields import fd_jacobian

    for _ in range(20):
        f = projected_field(rng.normal(size=(3, 3)))
        P = rng.normal(size=(10, 3))
        P /= np.linalg.norm(P, axis=1, keepdims=True)
        assert np.max(np.abs(np.sum(f.values(P) * P, axis=1))) <= 1e-12
        np.testing.assert_allclose(f.jacobians(P), fd_jacobian(f.values, P, 1e-6), atol=1e-7)


def test_lift_and_builtins():
    from orbitctl.fields import builtin

    sys3, u, v = theorem_b_fixture()
    L = lift(sys3, [u, v])
    np.testing.assert_allclose(eval_field(L.generators[0], [1.0, 2.0, 3.0]), MU @ [1, 2, 3])
    params = {**sys3.to_dict(), "u_levels": [[0.0], [1.0]]}
    assert len(builtin("bilinear_lift", params)) == 2
    assert builtin("bilinear_sphere", params).manifold == sphere2()
