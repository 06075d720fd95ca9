"""Exit measures of directed balls and the discrepancy epsilon(S; a, b).

For a finite set S with interior-to-interior step matrix Q and
interior-to-boundary step matrix R, the exit law is ``M = (I - Q)^-1 R``:
``M[v][x]`` is the probability that the walk started at v first leaves S at x.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import gmpy2
import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from posharm.ballcache import cached_build_ball
from posharm.balls import DEFAULT_SIZE_CAP, DirectedBall
from posharm.groups import GroupElement, StepDistribution
from posharm.sparse_lu import SparseLU

EXACT_LIMIT = 20_000

Number = Any  # Fraction in exact mode, float in float mode


class ExactSizeError(ValueError):
    """Exact mode was requested for a ball above the interior-size threshold."""


def _to_fraction(q) -> Fraction:
    return Fraction(int(q.numerator), int(q.denominator))


class ExitMeasure:
    """Lazily solved exit law of a :class:`DirectedBall`.

    Rows ``mu(v, .)`` and columns ``mu(., x)`` are solved on demand against a
    single factorization of ``I - Q`` and cached.  In exact mode all values are
    ``Fraction``; in float mode they are Python floats (rows/columns) or numpy
    arrays (:meth:`matrix`).
    """

    def __init__(self, ball: DirectedBall, mode: str = "exact", exact_limit: int = EXACT_LIMIT):
        if mode not in ("exact", "float"):
            raise ValueError(f"mode must be 'exact' or 'float', got {mode!r}")
        if ball.n_interior == 0:
            raise ValueError("empty ball")
        if mode == "exact" and ball.n_interior > exact_limit:
            raise ExactSizeError(
                f"{ball.n_interior} interior vertices exceeds exact limit {exact_limit}; use float mode"
            )
        self.ball = ball
        self.mode = mode
        self._rows: dict[int, list] = {}
        self._cols: dict[int, list] = {}
        self._supports: dict[int, set[int]] = {}
        n = ball.n_interior
        # boundary column -> [(interior, prob)]
        self._rcols: list[list[tuple[int, Fraction]]] = [[] for _ in range(ball.n_boundary)]
        for v, edges in enumerate(ball.boundary_edges):
            for j, p in edges:
                self._rcols[j].append((v, p))
        if mode == "exact":
            one = gmpy2.mpq(1)
            rows = []
            for v in range(n):
                row = {v: one}
                for w, p in ball.interior_edges[v]:
                    row[w] = row.get(w, 0) - gmpy2.mpq(p.numerator, p.denominator)
                rows.append(row)
            # outermost vertices first
            self._lu = SparseLU(rows, list(range(n - 1, -1, -1)))
        else:
            ri, ci, vals = [], [], []
            for v in range(n):
                for w, p in ball.interior_edges[v]:
                    ri.append(v)
                    ci.append(w)
                    vals.append(float(p))
            q = sp.csc_matrix((vals, (ri, ci)), shape=(n, n))
            self._a = (sp.identity(n, format="csc") - q).tocsc()
            self._splu = splu(self._a)
            bi, bj, bv = [], [], []
            for v, edges in enumerate(ball.boundary_edges):
                for j, p in edges:
                    bi.append(v)
                    bj.append(j)
                    bv.append(float(p))
            self._r = sp.csr_matrix((bv, (bi, bj)), shape=(n, ball.n_boundary))

    @property
    def exact(self) -> bool:
        return self.mode == "exact"

    # -- solves --------------------------------------------------------------

    def _refined(self, rhs: np.ndarray, trans: str) -> np.ndarray:
        x = self._splu.solve(rhs, trans=trans)
        a = self._a.T if trans == "T" else self._a
        x += self._splu.solve(rhs - a @ x, trans=trans)
        return x

    def support(self, v) -> set[int]:
        """Boundary indices x with mu(v, x) > 0 (structural, exact in both modes)."""
        i = self.ball.interior_index(v)
        if i not in self._supports:
            self._supports[i] = self.ball.reachable_boundary(i)
        return self._supports[i]

    def row(self, v) -> list:
        """``[mu(v, x) for x in boundary]``."""
        i = self.ball.interior_index(v)
        if i in self._rows:
            return self._rows[i]
        n, m = self.ball.n_interior, self.ball.n_boundary
        if self.exact:
            e = [gmpy2.mpq(0)] * n
            e[i] = gmpy2.mpq(1)
            z = self._lu.solve_transpose(e)
            acc = [gmpy2.mpq(0)] * m
            for w in range(n):
                zw = z[w]
                if zw:
                    for j, p in self.ball.boundary_edges[w]:
                        acc[j] += zw * gmpy2.mpq(p.numerator, p.denominator)
            out = [_to_fraction(q) for q in acc]
        else:
            e = np.zeros(n)
            e[i] = 1.0
            z = self._refined(e, "T")
            vals = self._r.T @ z
            keep = self.support(i)
            out = [float(vals[j]) if j in keep else 0.0 for j in range(m)]
        self._rows[i] = out
        return out

    def column(self, x) -> list:
        """``[mu(v, x) for v in interior]``."""
        j = self.ball.boundary_idx(x)
        if j in self._cols:
            return self._cols[j]
        n = self.ball.n_interior
        if self.exact:
            b = [gmpy2.mpq(0)] * n
            for v, p in self._rcols[j]:
                b[v] = gmpy2.mpq(p.numerator, p.denominator)
            out = [_to_fraction(q) for q in self._lu.solve(b)]
        else:
            b = np.zeros(n)
            for v, p in self._rcols[j]:
                b[v] = float(p)
            out = [max(float(t), 0.0) for t in self._refined(b, "N")]
        self._cols[j] = out
        return out

    def value(self, v, x) -> Number:
        i = self.ball.interior_index(v)
        j = self.ball.boundary_idx(x)
        if i in self._rows:
            return self._rows[i][j]
        return self.column(j)[i]

    def matrix(self):
        """Full ``n_interior x n_boundary`` exit matrix.

        Exact mode returns a list of Fraction rows; float mode a numpy array.
        """
        n, m = self.ball.n_interior, self.ball.n_boundary
        if self.exact:
            if m <= n:
                cols = [self.column(j) for j in range(m)]
                return [[cols[j][i] for j in range(m)] for i in range(n)]
            return [self.row(i) for i in range(n)]
        x = self._refined(self._r.toarray(), "N")
        return np.clip(x, 0.0, None)


def exit_measure(ball: DirectedBall, mode: str = "exact", exact_limit: int = EXACT_LIMIT) -> ExitMeasure:
    return ExitMeasure(ball, mode, exact_limit)


def write_exit_csv(em: ExitMeasure, path: str | Path) -> None:
    """Dump the exit matrix as (interior_index, boundary_index, numerator, denominator | value)."""
    mat = em.matrix()
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        if em.exact:
            w.writerow(["interior_index", "boundary_index", "numerator", "denominator"])
            for i, row in enumerate(mat):
                for j, q in enumerate(row):
                    if q:
                        w.writerow([i, j, q.numerator, q.denominator])
        else:
            w.writerow(["interior_index", "boundary_index", "value"])
            for i, row in enumerate(mat):
                for j, q in enumerate(row):
                    if q:
                        w.writerow([i, j, repr(float(q))])


# ---------------------------------------------------------------------------
# discrepancy
# ---------------------------------------------------------------------------

@dataclass
class EpsilonReport:
    value: Number
    argmax: int | None  # boundary index, None when no x has mu(a, x) > 0
    discrepancies: dict[int, Number] = field(repr=False)
    excluded_count: int
    a: int
    b: int

    def argmax_element(self, ball: DirectedBall) -> GroupElement | None:
        return None if self.argmax is None else ball.boundary_element(self.argmax)


def epsilon(em: ExitMeasure, a, b) -> EpsilonReport:
    """max over x with mu(a,x) > 0 of |mu(a,x) - mu(b,x)| / mu(a,x).

    Boundary points with mu(a,x) = 0 < mu(b,x) are not part of the maximum;
    they are counted in ``excluded_count``.
    """
    ia = em.ball.interior_index(a)
    ib = em.ball.interior_index(b)
    row_a = em.row(ia)
    row_b = em.row(ib)
    supp_a = em.support(ia)
    supp_b = em.support(ib)
    zero = Fraction(0) if em.exact else 0.0
    disc: dict[int, Number] = {}
    best = zero
    arg = None
    for j in sorted(supp_a):
        d = abs(row_a[j] - row_b[j]) / row_a[j]
        disc[j] = d
        if arg is None or d > best:
            best, arg = d, j
    excluded = len(supp_b - supp_a)
    return EpsilonReport(value=best, argmax=arg, discrepancies=disc, excluded_count=excluded, a=ia, b=ib)


@dataclass
class ScanRow:
    r: int
    value: Number
    argmax: int | None
    argmax_word: str
    excluded_count: int
    mode: str
    n_interior: int
    n_boundary: int
    # epsilon(B(a, r); b, a): the discrepancy is not symmetric
    reverse_value: Number = None
    reverse_argmax_word: str = ""
    reverse_excluded_count: int = 0


def epsilon_scan(
    dist: StepDistribution,
    a: GroupElement | None,
    b: GroupElement,
    radii: Sequence[int],
    mode: str = "auto",
    auto_exact_max: int = 3000,
    exact_limit: int = EXACT_LIMIT,
    cache_dir=None,
    size_cap: int = DEFAULT_SIZE_CAP,
) -> list[ScanRow]:
    """epsilon(B(a, r); a, b) for each radius.

    ``mode="auto"`` solves exactly while the ball has at most ``auto_exact_max``
    interior vertices and switches to floating point beyond.
    """
    radii = list(radii)
    if not radii:
        raise ValueError("empty radius range")
    out = []
    for r in radii:
        ball = cached_build_ball(a, dist, r, cache_dir, size_cap)
        if not ball.contains(b):
            raise ValueError(f"{b} is not in B(a, {r})")
        m = mode
        if mode == "auto":
            m = "exact" if ball.n_interior <= auto_exact_max else "float"
        em = ExitMeasure(ball, m, exact_limit)
        rep = epsilon(em, 0, b)
        rev = epsilon(em, b, 0)
        word = ball.boundary_word(rep.argmax) if rep.argmax is not None else ""
        rev_word = ball.boundary_word(rev.argmax) if rev.argmax is not None else ""
        out.append(
            ScanRow(
                r, rep.value, rep.argmax, word, rep.excluded_count, m,
                ball.n_interior, ball.n_boundary, rev.value, rev_word, rev.excluded_count,
            )
        )
    return out


def check_exit_invariants(em: ExitMeasure, float_tol: float = 1e-12) -> list[str]:
    """Nonnegativity, unit row sums, interior harmonicity and center positivity.

    Returns a list of human-readable problems (empty when all hold).  Exact
    mode compares with zero tolerance.
    """
    ball = em.ball
    mat = em.matrix()
    tol = 0 if em.exact else float_tol
    problems = []
    for v in range(ball.n_interior):
        row = mat[v]
        if any(m < 0 for m in row):
            problems.append(f"negative entry in row {v}")
        total = sum(row)
        if abs(total - 1) > tol:
            problems.append(f"row {v} sums to {total}")
        for j in range(ball.n_boundary):
            rhs = sum(p * mat[w][j] for w, p in ball.interior_edges[v])
            rhs += sum(p for jj, p in ball.boundary_edges[v] if jj == j)
            if abs(mat[v][j] - rhs) > tol:
                problems.append(f"harmonicity fails at ({v}, {j})")
                break
    if any(m <= 0 for m in mat[0]):
        problems.append("some boundary point has zero exit probability from the center")
    return problems
