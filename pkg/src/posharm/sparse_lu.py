"""Sparse Gaussian elimination over an exact field.

Works with any number type supporting ``+ - * /`` exactly (``gmpy2.mpq``,
``fractions.Fraction``).  Pivots are taken on the diagonal in a caller-given
order, which is safe for the nonsingular M-matrices ``I - Q`` solved here:
every Schur complement of such a matrix is again a nonsingular M-matrix, so
no pivot vanishes.
"""
from __future__ import annotations

from typing import Sequence


class SingularMatrixError(ArithmeticError):
    pass


class SparseLU:
    """LU factors of a square sparse matrix given as row dicts ``{col: value}``.

    ``order`` is the elimination order (a permutation of ``range(n)``).
    """

    def __init__(self, rows: Sequence[dict], order: Sequence[int]):
        n = len(rows)
        if sorted(order) != list(range(n)):
            raise ValueError("order must be a permutation of range(n)")
        self.n = n
        self.order = list(order)
        work = [dict(r) for r in rows]
        cols: list[set[int]] = [set() for _ in range(n)]
        for i, row in enumerate(work):
            for j in row:
                if j != i:
                    cols[j].add(i)
        done = [False] * n
        # upper[k] = pivot row k at elimination time (pivot included)
        self.upper: list[dict] = [None] * n  # type: ignore[list-item]
        # lower[k] = [(i, multiplier)] rows updated when eliminating k
        self.lower: list[list] = [None] * n  # type: ignore[list-item]
        for k in self.order:
            row_k = work[k]
            pivot = row_k.get(k, 0)
            if pivot == 0:
                raise SingularMatrixError(f"zero pivot at {k}")
            done[k] = True
            targets = [i for i in cols[k] if not done[i]]
            mults = []
            for i in targets:
                row_i = work[i]
                m = row_i.pop(k) / pivot
                if m == 0:
                    continue
                mults.append((i, m))
                for j, v in row_k.items():
                    if j == k:
                        continue
                    new = row_i.get(j, 0) - m * v
                    if new == 0:
                        row_i.pop(j, None)
                        if j != i:
                            cols[j].discard(i)
                    else:
                        if j not in row_i and j != i:
                            cols[j].add(i)
                        row_i[j] = new
            self.upper[k] = row_k
            self.lower[k] = mults
            work[k] = None  # type: ignore[call-overload]
            for j in row_k:
                if j != k:
                    cols[j].discard(k)
            cols[k] = set()

    def solve(self, b: Sequence) -> list:
        """Solve ``A x = b``."""
        y = list(b)
        for k in self.order:
            yk = y[k]
            if yk:
                for i, m in self.lower[k]:
                    y[i] -= m * yk
        x = y
        for k in reversed(self.order):
            row = self.upper[k]
            acc = x[k]
            for j, v in row.items():
                if j != k:
                    acc -= v * x[j]
            x[k] = acc / row[k]
        return x

    def solve_transpose(self, c: Sequence) -> list:
        """Solve ``A^T z = c``."""
        w = list(c)
        for k in self.order:
            row = self.upper[k]
            wk = w[k] / row[k]
            w[k] = wk
            if wk:
                for j, v in row.items():
                    if j != k:
                        w[j] -= v * wk
        z = w
        for k in reversed(self.order):
            acc = z[k]
            for i, m in self.lower[k]:
                acc -= m * z[i]
            z[k] = acc
        return z
