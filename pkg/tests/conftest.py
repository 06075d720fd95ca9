from fractions import Fraction

import pytest

from posharm.groups import make_group, uniform_steps

FAMILIES = ["z:1", "z:2", "free:2", "heis", "lamplighter", "bs:1:2", "grigorchuk"]


@pytest.fixture
def z1():
    g = make_group("z:1")
    return g, uniform_steps(g)


@pytest.fixture
def z2():
    g = make_group("z:2")
    return g, uniform_steps(g)


@pytest.fixture
def f2():
    g = make_group("free:2")
    return g, uniform_steps(g)


def gambler(k: int, r: int) -> Fraction:
    """P(simple walk from k leaves [-r, r] at r + 1): the ruin probability on a line."""
    return Fraction(k + r + 1, 2 * r + 2)


def dense_exit_oracle(ball) -> list[list[Fraction]]:
    """Exit matrix by dense Gauss-Jordan on Fractions, independent of the sparse LU."""
    n, m = ball.n_interior, ball.n_boundary
    aug = [[Fraction(0)] * (n + m) for _ in range(n)]
    for v in range(n):
        aug[v][v] += 1
        for w, p in ball.interior_edges[v]:
            aug[v][w] -= p
        for j, p in ball.boundary_edges[v]:
            aug[v][n + j] += p
    for col in range(n):
        piv = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        aug[col] = [x / pv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]
