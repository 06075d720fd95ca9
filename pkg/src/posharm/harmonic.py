"""Approximate harmonic functions from exit measures, and the growth-bound chain.

``f(v) = mu_S(v, x) / mu_S(a, x)`` is harmonic inside S, equals 1 at a and is
positive wherever x is reachable.  Tracing ``mu(a, x)`` along a geodesic as a
telescoping product of ratios, and bounding each ratio by a discrepancy on a
smaller translated ball, gives a lower bound on every exit probability and
hence an upper bound on the boundary size.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from posharm.balls import DirectedBall, build_ball
from posharm.exit import EXACT_LIMIT, ExitMeasure, epsilon
from posharm.groups import GroupElement, StepDistribution, translate_path

Number = Any


@dataclass
class HarmonicApprox:
    """Values of f on the interior and boundary of ``ball`` (nothing outside)."""

    ball: DirectedBall
    base: int  # interior index of a
    target: int | None  # boundary index of x_n (None for hand-built functions)
    interior: list
    boundary: list
    exact: bool = True

    @classmethod
    def constant(cls, ball: DirectedBall, c: Number = Fraction(1)) -> "HarmonicApprox":
        return cls(ball, 0, None, [c] * ball.n_interior, [c] * ball.n_boundary, isinstance(c, Fraction))

    def __call__(self, v) -> Number:
        if isinstance(v, GroupElement) and not self.ball.contains(v):
            return self.boundary[self.ball.boundary_idx(v)]
        return self.interior[self.ball.interior_index(v)]


def select_extremal_boundary(em: ExitMeasure, a, b) -> int | None:
    """Boundary index attaining epsilon(S; a, b), lowest index on ties.

    Returns None when the two exit laws coincide on the support of mu(a, .)
    (the discrepancy is zero).
    """
    rep = epsilon(em, a, b)
    if rep.argmax is None or rep.value == 0:
        return None
    return rep.argmax


def build_fn(em: ExitMeasure, a, x) -> HarmonicApprox:
    ia = em.ball.interior_index(a)
    jx = em.ball.boundary_idx(x)
    col = em.column(jx)
    base = col[ia]
    if base == 0:
        raise ValueError(f"mu(a, x) = 0 for a={ia}, x={jx}; cannot normalise")
    interior = [m / base for m in col]
    zero = Fraction(0) if em.exact else 0.0
    boundary = [zero] * em.ball.n_boundary
    boundary[jx] = 1 / base
    return HarmonicApprox(em.ball, ia, jx, interior, boundary, em.exact)


def harmonicity_residual(f: HarmonicApprox) -> Number:
    """max over interior v of |f(v) - sum_s p(s) f(v s)|."""
    ball = f.ball
    worst = Fraction(0) if f.exact else 0.0
    for v in range(ball.n_interior):
        avg = sum(p * f.interior[w] for w, p in ball.interior_edges[v])
        avg += sum(p * f.boundary[j] for j, p in ball.boundary_edges[v])
        if not f.exact:
            avg = float(avg)
        worst = max(worst, abs(f.interior[v] - avg))
    return worst


def optional_stopping_check(f: HarmonicApprox, em: ExitMeasure, v) -> Number:
    """|f(v) - sum_x mu(v, x) f(x)| using the full exit row of v."""
    i = em.ball.interior_index(v)
    row = em.row(i)
    total = sum(m * fx for m, fx in zip(row, f.boundary) if fx)
    if not em.exact:
        total = float(total)
    return abs(f.interior[i] - total)


# ---------------------------------------------------------------------------
# monotonicity under inclusion
# ---------------------------------------------------------------------------

@dataclass
class MonotonicityReport:
    eps_small: Number
    eps_large: Number
    holds: bool
    excluded_small: int
    excluded_large: int


def verify_monotonicity(
    dist: StepDistribution,
    small: tuple[GroupElement | None, int],
    large: tuple[GroupElement | None, int],
    a: GroupElement,
    b: GroupElement,
    mode: str = "exact",
) -> MonotonicityReport:
    """Compare epsilon on nested balls ``small = (center, r)`` inside ``large``."""
    ball_a = build_ball(small[0], dist, small[1])
    ball_b = build_ball(large[0], dist, large[1])
    if any(v not in ball_b.index for v in ball_a.vertices):
        raise ValueError("the smaller set is not contained in the larger one")
    if not (ball_a.contains(a) and ball_a.contains(b)):
        raise ValueError("a and b must lie in the smaller set")
    rep_a = epsilon(ExitMeasure(ball_a, mode), a, b)
    rep_b = epsilon(ExitMeasure(ball_b, mode), a, b)
    return MonotonicityReport(
        eps_small=rep_a.value,
        eps_large=rep_b.value,
        holds=rep_b.value <= rep_a.value,
        excluded_small=rep_a.excluded_count,
        excluded_large=rep_b.excluded_count,
    )


# ---------------------------------------------------------------------------
# telescoping along a geodesic
# ---------------------------------------------------------------------------

class StepEpsilonCache:
    """epsilon(B(e, s); e, t) for one-step pairs (e, t), keyed by (s, t)."""

    def __init__(self, dist: StepDistribution, mode: str = "exact", exact_limit: int = EXACT_LIMIT):
        self.dist = dist
        self.mode = mode
        self.exact_limit = exact_limit
        self._ems: dict[int, ExitMeasure] = {}
        self._vals: dict[tuple, Number] = {}

    def exit_measure(self, s: int) -> ExitMeasure:
        if s not in self._ems:
            self._ems[s] = ExitMeasure(build_ball(None, self.dist, s), self.mode, self.exact_limit)
        return self._ems[s]

    def __call__(self, s: int, step) -> Number:
        payload = step.payload if isinstance(step, GroupElement) else step
        key = (s, payload)
        if key not in self._vals:
            em = self.exit_measure(s)
            self._vals[key] = epsilon(em, 0, GroupElement(self.dist.group, payload)).value
        return self._vals[key]

    def max_one_step(self, s: int) -> tuple[Number, str]:
        """Largest epsilon(B(e, s); e, t) over the step support, and the step name."""
        best, name = None, ""
        for n, t in zip(self.dist.names, self.dist.steps):
            v = self(s, t)
            if best is None or v > best:
                best, name = v, n
        return best, name


@dataclass
class TraceStep:
    i: int
    ratio: Number  # mu(g_i, x) / mu(g_{i+1}, x)
    deviation: Number  # |ratio - 1|
    inverse_deviation: Number  # |1/ratio - 1| = |mu(g_i,x) - mu(g_{i+1},x)| / mu(g_i,x)
    eps_in_ball: Number | None  # epsilon(B(a,r); g_i, g_{i+1})
    eps_bound: Number | None  # epsilon(B(e, r-i); e, s_i) after translating g_i to e
    step: str  # generator name of s_i
    ratio_ge_p: bool


@dataclass
class TraceReport:
    boundary_index: int
    word: str
    steps: list[TraceStep]
    product: Number
    mu_ax: Number
    product_matches: bool
    chain_holds: bool  # inverse_deviation <= eps_in_ball <= eps_bound at every bounded step
    deviation_holds: bool  # deviation <= eps_bound at every bounded step


def geodesic_ratio_trace(
    em: ExitMeasure,
    x,
    bounds: StepEpsilonCache | None = None,
    with_bounds: bool = True,
) -> TraceReport:
    """Ratios mu(g_i, x) / mu(g_{i+1}, x) along the BFS geodesic from the center to x.

    ``mu(x, x) = 1`` closes the product.  For every i whose next vertex is still
    interior to B(g_i, r - i), the ratio is compared with the discrepancy of
    the translated ball B(e, r - i) and pair (e, s_i).
    """
    ball = em.ball
    path, jx = ball.geodesic_indices(x)
    col = em.column(jx)
    one = Fraction(1) if em.exact else 1.0
    mus = [col[i] for i in path] + [one]
    r = ball.radius
    for i, m in enumerate(mus):
        if m == 0:
            raise ValueError(f"mu(g_{i}, x) = 0 on the geodesic")
    if with_bounds and bounds is None:
        bounds = StepEpsilonCache(ball.dist, em.mode)
    elements = [ball.element(i) for i in path] + [ball.boundary_element(jx)]
    p_min = ball.dist.min_prob
    steps = []
    product = one
    tol = 0 if em.exact else 1e-9
    chain_ok = True
    dev_ok = True
    for i in range(len(mus) - 1):
        ratio = mus[i] / mus[i + 1]
        product *= ratio
        dev = abs(ratio - 1)
        inv_dev = abs(1 / ratio - 1)
        _, step_el = translate_path(elements[i], elements[i : i + 2])
        step_name = ball.dist.names[ball.dist.steps.index(step_el.payload)] if step_el.payload in ball.dist.steps else "?"
        eps_ball = eps_bound = None
        if with_bounds and i < r:
            eps_ball = epsilon(em, path[i], path[i + 1]).value
            eps_bound = bounds(r - i, step_el)
            if not (inv_dev <= eps_ball + tol and eps_ball <= eps_bound + tol):
                chain_ok = False
            if dev > eps_bound + tol:
                dev_ok = False
        steps.append(TraceStep(i, ratio, dev, inv_dev, eps_ball, eps_bound, step_name, ratio >= p_min))
    mu_ax = mus[0]
    matches = product == mu_ax if em.exact else abs(product - mu_ax) <= 1e-9 * mu_ax
    return TraceReport(jx, ball.boundary_word(jx), steps, product, mu_ax, matches, chain_ok, dev_ok)


# ---------------------------------------------------------------------------
# growth certificate
# ---------------------------------------------------------------------------

@dataclass
class CertificateRow:
    r: int
    premise_holds: bool  # one-step epsilon <= delta for every s in (r0, r]
    bound: Number  # certified lower bound on min_x mu(a, x)
    alt_bound: Number  # (1 - delta)^(r - r0) p^r0
    min_mu: Number
    boundary_size: int
    conclusion_holds: bool  # min_mu >= bound and |boundary| <= 1 / bound
    alt_conclusion_holds: bool


@dataclass
class GrowthCertificate:
    family: str
    delta: Fraction
    r0: int
    p: Fraction
    one_step_eps: dict[int, Number]  # s -> max over steps t of epsilon(B(e,s); e, t)
    failing_s: list[int]
    rows: list[CertificateRow] = field(default_factory=list)

    @property
    def premise_holds(self) -> bool:
        return not self.failing_s

    @property
    def violations(self) -> list[int]:
        """Radii where the premise holds but the conclusion does not (a solver bug)."""
        return [row.r for row in self.rows if row.premise_holds and not row.conclusion_holds]


def certified_bound(delta: Fraction, r0: int, p: Fraction, r: int) -> Fraction:
    """Lower bound on mu_{B(a,r)}(a, x) implied by the premise.

    The geodesic to a boundary point of B(a, r) has r + 1 steps; the r - r0
    steps whose translated ball is larger than r0 contribute a factor 1 - delta
    each and the remaining steps a factor p each.
    """
    good = max(r - r0, 0)
    return (1 - delta) ** good * p ** (r + 1 - good)


def growth_certificate(
    dist: StepDistribution,
    delta: Fraction,
    r0: int,
    s_max: int,
    mode: str = "exact",
    r_min: int = 0,
) -> GrowthCertificate:
    delta = Fraction(delta)
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if not 1 <= r0 < s_max:
        raise ValueError("need 1 <= r0 < s_max")
    cache = StepEpsilonCache(dist, mode)
    p = dist.min_prob
    one_step = {}
    failing = []
    for s in range(r0 + 1, s_max + 1):
        val, _ = cache.max_one_step(s)
        one_step[s] = val
        if val > delta:
            failing.append(s)
    cert = GrowthCertificate(dist.group.spec, delta, r0, p, one_step, failing)
    for r in range(r_min, s_max + 1):
        em = cache.exit_measure(r)
        row = em.row(0)
        min_mu = min(row)
        nb = em.ball.n_boundary
        premise = all(s not in failing for s in range(r0 + 1, r + 1))
        bound = certified_bound(delta, r0, p, r)
        alt = (1 - delta) ** (r - r0) * p ** r0
        if mode == "float":
            bound, alt = float(bound), float(alt)
        cert.rows.append(
            CertificateRow(
                r=r,
                premise_holds=premise,
                bound=bound,
                alt_bound=alt,
                min_mu=min_mu,
                boundary_size=nb,
                conclusion_holds=min_mu >= bound and nb * bound <= 1,
                alt_conclusion_holds=min_mu >= alt and nb * alt <= 1,
            )
        )
    return cert
