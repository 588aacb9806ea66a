import numpy as np
import pytest

from orbitctl.fields import VectorField
from orbitctl.manifold import euclidean


def random_polynomial(rng: np.random.Generator, n: int, degree: int = 2, terms: int = 4) -> str:
    """A random polynomial in x1..xn with coefficients in [-1, 1], as an expression string."""
    parts = []
    for _ in range(terms):
        c = rng.uniform(-1, 1)
        powers = rng.integers(0, degree + 1, n)
        while powers.sum() > degree:
            powers[rng.integers(n)] -= 1
        mono = "*".join(f"x{i + 1}^{p}" if p > 1 else f"x{i + 1}" for i, p in enumerate(powers) if p > 0)
        parts.append(f"({c!r})" + (f"*{mono}" if mono else ""))
    return " + ".join(parts)


def random_polynomial_field(rng: np.random.Generator, n: int, degree: int = 2) -> VectorField:
    return VectorField(euclidean(n), [random_polynomial(rng, n, degree) for _ in range(n)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
