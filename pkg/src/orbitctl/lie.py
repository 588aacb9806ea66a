"""Lie brackets, right-nested bracket words and the rank condition at a point."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fields import ControlSystem, VectorField, bracket_field
from .manifold import SPHERE2, tangent_basis, tangent_project


@dataclass(frozen=True)
class Leaf:
    index: int

    @property
    def depth(self) -> int:
        return 0

    def __str__(self):
        return str(self.index)


@dataclass(frozen=True)
class Bracket:
    left: "Leaf | Bracket"
    right: "Leaf | Bracket"

    @property
    def depth(self) -> int:
        return 1 + max(self.left.depth, self.right.depth)

    def __str__(self):
        return f"[{self.left},{self.right}]"


BracketWord = Leaf | Bracket


def max_index(w: BracketWord) -> int:
    if isinstance(w, Leaf):
        return w.index
    return max(max_index(w.left), max_index(w.right))


def parse_word(text: str) -> BracketWord:
    """Inverse of ``str``: "2" or "[0,[1,2]]"."""
    tokens = re.findall(r"\d+|[\[\],]", text)
    pos = 0

    def one() -> BracketWord:
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        if tok.isdigit():
            return Leaf(int(tok))
        if tok != "[":
            raise ValueError(f"bad bracket word {text!r}")
        left = one()
        if tokens[pos] != ",":
            raise ValueError(f"bad bracket word {text!r}")
        pos += 1
        right = one()
        if tokens[pos] != "]":
            raise ValueError(f"bad bracket word {text!r}")
        pos += 1
        return Bracket(left, right)

    try:
        w = one()
    except IndexError:
        raise ValueError(f"bad bracket word {text!r}") from None
    if pos != len(tokens):
        raise ValueError(f"bad bracket word {text!r}")
    return w


def bracket(V: VectorField, W: VectorField, q) -> np.ndarray:
    """[V, W](q) = DW(q) V(q) - DV(q) W(q)."""
    if V.manifold != W.manifold:
        raise ValueError("fields live on different manifolds")
    q = np.asarray(q, dtype=float)
    X = q[None, :]
    out = W.jacobians(X)[0] @ V.values(X)[0] - V.jacobians(X)[0] @ W.values(X)[0]
    return tangent_project(V.manifold, q, out)


def enumerate_words(generator_count: int, max_depth: int) -> list[BracketWord]:
    """Leaves, then right-nested words [a, [b, [...]]] by depth.

    Depth one keeps only [a, b] with a < b; deeper words prepend any leaf.
    """
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    leaves = [Leaf(i) for i in range(generator_count)]
    out: list[BracketWord] = list(leaves)
    if max_depth == 0:
        return out
    level: list[BracketWord] = [Bracket(leaves[a], leaves[b]) for a in range(generator_count) for b in range(a + 1, generator_count)]
    seen = set(out)
    for depth in range(1, max_depth + 1):
        if depth > 1:
            level = [Bracket(leaf, w) for leaf in leaves for w in level]
        fresh = [w for w in level if w not in seen]
        seen.update(fresh)
        out.extend(fresh)
    return out


def word_field(sys: ControlSystem, w: BracketWord) -> VectorField:
    """The vector field of a word, materialised once per system."""
    if isinstance(w, Leaf):
        if not 0 <= w.index < len(sys):
            raise IndexError(f"generator index {w.index} out of range for {len(sys)} generators")
        return sys.generators[w.index]
    cached = sys._derived.get(w)
    if cached is None:
        cached = bracket_field(word_field(sys, w.left), word_field(sys, w.right))
        sys._derived[w] = cached
    return cached


def max_word_depth(sys: ControlSystem) -> int:
    return sys.manifold.ambient_dim + 2


def eval_word(sys: ControlSystem, w: BracketWord, q) -> np.ndarray:
    if w.depth > max_word_depth(sys):
        raise ValueError(f"word depth {w.depth} exceeds the limit {max_word_depth(sys)} for this system")
    q = np.asarray(q, dtype=float)
    v = word_field(sys, w)(q)
    return tangent_project(sys.manifold, q, v)


def eval_words(sys: ControlSystem, words: Sequence[BracketWord], q) -> np.ndarray:
    """Rows are word values in tangent coordinates at q (orthonormal basis on S^2)."""
    q = np.asarray(q, dtype=float)
    vecs = np.array([eval_word(sys, w, q) for w in words]).reshape(len(words), -1)
    if sys.manifold.kind == SPHERE2:
        vecs = vecs @ tangent_basis(sys.manifold, q).T
    return vecs


def numerical_rank(M: np.ndarray, tol: float) -> tuple[int, np.ndarray]:
    """Count of singular values above tol * max(largest singular value, 1)."""
    if M.size == 0:
        return 0, np.zeros(0)
    s = np.linalg.svd(M, compute_uv=False)
    thresh = tol * max(float(s[0]) if s.size else 0.0, 1.0)
    return int(np.sum(s > thresh)), s


@dataclass
class LarcReport:
    point: np.ndarray
    achieved_dim: int
    ambient_dim: int
    basis_words: list
    singular_values: np.ndarray
    larc_holds: bool
    max_depth: int = 0
    tol: float = 1e-7

    def to_dict(self) -> dict:
        return {
            "point": [float(x) for x in self.point],
            "achieved_dim": self.achieved_dim,
            "ambient_dim": self.ambient_dim,
            "basis_words": [str(w) for w in self.basis_words],
            "singular_values": [float(s) for s in self.singular_values],
            "larc_holds": self.larc_holds,
            "max_depth": self.max_depth,
            "tol": self.tol,
        }


def larc_check(sys: ControlSystem, q, max_depth: int | None = None, tol: float = 1e-7) -> LarcReport:
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_depth is None:
        max_depth = sys.manifold.dim
    q = np.asarray(q, dtype=float)
    words = enumerate_words(len(sys), max_depth)
    vecs = eval_words(sys, words, q)
    rank, s = numerical_rank(vecs, tol)
    thresh = tol * max(float(s[0]) if s.size else 0.0, 1.0)

    basis: list[BracketWord] = []
    rows: list[np.ndarray] = []
    for w, v in zip(words, vecs):
        if len(basis) == rank:
            break
        trial = np.array(rows + [v])
        if np.sum(np.linalg.svd(trial, compute_uv=False) > thresh) > len(rows):
            basis.append(w)
            rows.append(v)
    if len(basis) != rank:
        # greedy order disagreed with the global rank; fall back to column pivoting
        from scipy.linalg import qr

        _, _, piv = qr(vecs.T, pivoting=True)
        basis = [words[i] for i in sorted(piv[:rank])]

    ambient = sys.manifold.dim
    return LarcReport(
        point=q,
        achieved_dim=rank,
        ambient_dim=ambient,
        basis_words=basis,
        singular_values=s,
        larc_holds=rank == ambient,
        max_depth=max_depth,
        tol=tol,
    )
