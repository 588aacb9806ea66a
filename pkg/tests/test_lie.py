import numpy as np
import pytest

from conftest import random_polynomial_field
from orbitctl.fields import ControlSystem, linear_field
from orbitctl.flow import IntegratorOptions, Schedule, chrono_map
from orbitctl.fields import builtin
from orbitctl.lie import Bracket, Leaf, bracket, enumerate_words, eval_word, larc_check, parse_word
from orbitctl.manifold import euclidean, random_point

S1 = np.array([[0.0, 0, 0], [0, 0, -1], [0, 1, 0]])
S3 = np.array([[0.0, -1, 0], [1, 0, 0], [0, 0, 0]])


def commutator_error(V, W, q, t, opts=IntegratorOptions(1e-4)):
    sys_ = ControlSystem(V.manifold, [V, W])
    end = chrono_map(sys_, Schedule(((0, t), (1, t), (0, -t), (1, -t))), q, opts)
    return float(np.linalg.norm(end - (q + t * t * bracket(V, W, q))))


def test_bracket_examples(rng):
    heis = builtin("heisenberg")
    X, Y = heis.generators
    for q in ([0, 0, 0], rng.normal(size=3)):
        np.testing.assert_allclose(bracket(X, Y, q), [0, 0, 1], atol=1e-15)
        np.testing.assert_array_equal(bracket(X, X, q), [0, 0, 0])
    V, W = linear_field(S3), linear_field(S1)
    for _ in range(10):
        q = rng.normal(size=3)
        np.testing.assert_allclose(bracket(V, W, q), (S1 @ S3 - S3 @ S1) @ q, atol=1e-14)


def test_bracket_sign_matches_flow_commutator(rng):
    # the opposite sign convention would leave an O(t^2) residual
    V, W = linear_field(S3), linear_field(S1)
    q = rng.normal(size=3)
    errs = [commutator_error(V, W, q, t) for t in (1e-2, 5e-3, 2.5e-3)]
    slope = np.polyfit(np.log([1e-2, 5e-3, 2.5e-3]), np.log(errs), 1)[0]
    assert abs(slope - 3) <= 0.2


def test_heisenberg_flow_commutator_is_t_squared_e3():
    heis = builtin("heisenberg")
    t = 1e-2
    end = chrono_map(heis, Schedule(((0, t), (1, t), (0, -t), (1, -t))), np.zeros(3))
    assert np.linalg.norm(end - [0, 0, t * t]) <= 5e-6


def test_enumerate_words_examples():
    assert enumerate_words(2, 0) == [Leaf(0), Leaf(1)]
    assert enumerate_words(2, 1) == [Leaf(0), Leaf(1), Bracket(Leaf(0), Leaf(1))]
    w31 = enumerate_words(3, 1)
    assert len(w31) == 6 and sum(w.depth == 1 for w in w31) == 3
    w22 = enumerate_words(2, 2)
    assert Bracket(Leaf(0), Bracket(Leaf(0), Leaf(1))) in w22
    assert Bracket(Leaf(1), Bracket(Leaf(0), Leaf(1))) in w22
    assert len(set(w22)) == len(w22)
    with pytest.raises(ValueError):
        enumerate_words(2, -1)


def test_word_printing_round_trip():
    for w in enumerate_words(3, 3):
        assert parse_word(str(w)) == w
    assert str(parse_word("[0,[1,2]]")) == "[0,[1,2]]"
    for bad in ("[0,1", "[0 1]", "0]", ""):
        with pytest.raises(ValueError):
            parse_word(bad)


def test_eval_word_examples(rng):
    heis = builtin("heisenberg")
    q = rng.normal(size=3)
    np.testing.assert_array_equal(eval_word(heis, Leaf(1), q), heis.generators[1](q))
    np.testing.assert_allclose(eval_word(heis, parse_word("[0,1]"), np.zeros(3)), [0, 0, 1])
    ex2 = builtin("example2")
    for _ in range(20):
        p = random_point(ex2.manifold, rng)
        np.testing.assert_array_equal(eval_word(ex2, parse_word("[0,2]"), p), [0, 0])


def test_eval_word_depth_limit():
    heis = builtin("heisenberg")
    w = Leaf(0)
    for _ in range(6):
        w = Bracket(Leaf(1), w)
    with pytest.raises(ValueError, match="exceeds"):
        eval_word(heis, w, np.zeros(3))
    with pytest.raises(IndexError):
        eval_word(heis, Leaf(5), np.zeros(3))


def test_larc_examples(rng):
    rep = larc_check(builtin("heisenberg"), np.zeros(3), max_depth=1)
    assert rep.achieved_dim == 3 and rep.larc_holds and rep.ambient_dim == 3
    assert len(rep.basis_words) == 3
    assert [str(w) for w in rep.basis_words] == ["0", "1", "[0,1]"]
    assert not larc_check(builtin("heisenberg"), np.zeros(3), max_depth=0).larc_holds
    ex2 = builtin("example2")
    for _ in range(10):
        r = larc_check(ex2, random_point(ex2.manifold, rng), max_depth=4)
        assert r.achieved_dim == 2 and r.larc_holds
    ex1 = builtin("example1", {"n": 3})
    for _ in range(10):
        r = larc_check(ex1, random_point(ex1.manifold, rng), max_depth=4)
        assert r.achieved_dim <= 2 and len(r.basis_words) == r.achieved_dim


def test_larc_report_json():
    d = larc_check(builtin("heisenberg"), np.zeros(3), max_depth=1).to_dict()
    assert d["basis_words"] == ["0", "1", "[0,1]"] and d["larc_holds"] is True


def test_larc_on_sphere_uses_tangent_dimension():
    from orbitctl.bilinear import theorem_b_fixture, project_sphere

    sys3, u, v = theorem_b_fixture()
    rep = larc_check(project_sphere(sys3, [u, v]), np.array([0.0, 1.0, 0.0]))
    assert rep.ambient_dim == 2 and rep.larc_holds


def test_antisymmetry_and_jacobi(rng):
    for _ in range(20):
        U, V, W = (random_polynomial_field(rng, 3, 2) for _ in range(3))
        sys_ = ControlSystem(euclidean(3), [U, V, W])
        q = rng.uniform(-1, 1, 3)
        np.testing.assert_allclose(bracket(U, V, q), -bracket(V, U, q), atol=1e-9)
        jac = (
            eval_word(sys_, parse_word("[0,[1,2]]"), q)
            + eval_word(sys_, parse_word("[1,[2,0]]"), q)
            + eval_word(sys_, parse_word("[2,[0,1]]"), q)
        )
        scale = max(1.0, float(np.linalg.norm(eval_word(sys_, parse_word("[0,[1,2]]"), q))))
        assert np.linalg.norm(jac) <= 1e-6 * scale


def test_larc_invariant_under_generator_permutation(rng):
    systems = [builtin("heisenberg"), builtin("example2"), builtin("example1", {"n": 3})]
    for _ in range(3):
        systems.append(ControlSystem(euclidean(3), [random_polynomial_field(rng, 3, 1) for _ in range(2)]))
    for sys_ in systems:
        q = random_point(sys_.manifold, rng)
        base = larc_check(sys_, q, max_depth=3).achieved_dim
        for _ in range(3):
            perm = rng.permutation(len(sys_))
            other = ControlSystem(sys_.manifold, [sys_.generators[i] for i in perm])
            assert larc_check(other, q, max_depth=3).achieved_dim == base


def test_native_bracket_agrees_with_symbolic(rng):
    from orbitctl.fields import VectorField

    V = random_polynomial_field(rng, 3, 2)
    W = random_polynomial_field(rng, 3, 2)
    nV = VectorField(V.manifold, native=V.values)
    nW = VectorField(W.manifold, native=W.values)
    sym = ControlSystem(euclidean(3), [V, W])
    nat = ControlSystem(euclidean(3), [nV, nW])
    for text in ("[0,1]", "[1,[0,1]]"):
        q = rng.uniform(-1, 1, 3)
        a = eval_word(sym, parse_word(text), q)
        b = eval_word(nat, parse_word(text), q)
        np.testing.assert_allclose(b, a, atol=1e-4 * (1 + np.abs(a).max()))
