"""Randomised and exhaustive verifier suites with JSON-serialisable reports.

Each instance draws from its own ``random.Random`` seeded by
``"{seed}:{family}:{index}"``, so instances may run in any order or in
parallel without changing results.
"""
from __future__ import annotations

import json
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

from posharm.balls import build_ball
from posharm.exit import ExitMeasure, epsilon
from posharm.groups import make_group, uniform_steps
from posharm.harmonic import (
    StepEpsilonCache,
    build_fn,
    geodesic_ratio_trace,
    harmonicity_residual,
    optional_stopping_check,
    select_extremal_boundary,
)


@dataclass
class SuiteReport:
    lemma: str
    family: str
    params: dict
    instances: int
    failures: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, default=str)


def _rng(seed: int, family: str, i: int) -> random.Random:
    return random.Random(f"{seed}:{family}:{i}")


def _positive_word(rng: random.Random, names, length: int) -> str:
    return "".join(rng.choice(names) for _ in range(length))


def _run(fn: Callable, args: list, workers: int) -> list:
    if workers <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*args)))


# ---------------------------------------------------------------------------
# monotonicity under inclusion
# ---------------------------------------------------------------------------

def _lemma2_instance(family: str, seed: int, i: int, max_radius: int) -> dict:
    rng = _rng(seed, family, i)
    group = make_group(family)
    dist = uniform_steps(group)
    center = group.random_element(rng, rng.randint(0, 6))
    r_large = rng.randint(1, max_radius)
    r_small = rng.randint(1, r_large)
    shift = _positive_word(rng, dist.names, rng.randint(0, r_large - r_small))
    small_center = center * group.word(shift)
    ball_small = build_ball(small_center, dist, r_small)
    ball_large = build_ball(center, dist, r_large)
    a = ball_small.element(rng.randrange(ball_small.n_interior))
    if rng.random() < 0.5:
        # one-step pair, the case used by the growth argument
        b = a * group.generator(rng.choice(dist.names))
        if not ball_small.contains(b):
            b = ball_small.element(rng.randrange(ball_small.n_interior))
    else:
        b = ball_small.element(rng.randrange(ball_small.n_interior))
    if any(v not in ball_large.index for v in ball_small.vertices):
        return {"index": i, "error": "nesting violated"}
    eps_small = epsilon(ExitMeasure(ball_small, "exact"), a, b)
    eps_large = epsilon(ExitMeasure(ball_large, "exact"), a, b)
    return {
        "index": i,
        "center": str(center),
        "small": [str(small_center), r_small],
        "large": [str(center), r_large],
        "a": str(a),
        "b": str(b),
        "eps_small": str(eps_small.value),
        "eps_large": str(eps_large.value),
        "excluded": [eps_small.excluded_count, eps_large.excluded_count],
        "holds": eps_large.value <= eps_small.value,
    }


def lemma2_suite(family: str, instances: int = 100, max_radius: int = 4, seed: int = 0, workers: int = 1) -> SuiteReport:
    """epsilon(B; a, b) <= epsilon(A; a, b) for random nested balls A inside B."""
    results = _run(_lemma2_instance, [(family, seed, i, max_radius) for i in range(instances)], workers)
    failures = [r for r in results if not r.get("holds")]
    return SuiteReport(
        lemma="monotonicity",
        family=family,
        params={"max_radius": max_radius, "seed": seed, "mode": "exact"},
        instances=instances,
        failures=failures,
        notes={"excluded_instances": sum(1 for r in results if any(r.get("excluded", ())))},
    )


# ---------------------------------------------------------------------------
# harmonic approximations
# ---------------------------------------------------------------------------

def _harmonic_instance(family: str, seed: int, i: int, max_radius: int) -> dict:
    rng = _rng(seed, family, i)
    group = make_group(family)
    dist = uniform_steps(group)
    center = group.random_element(rng, rng.randint(0, 6))
    r = rng.randint(1, max_radius)
    ball = build_ball(center, dist, r)
    em = ExitMeasure(ball, "exact")
    a = 0 if rng.random() < 0.5 else rng.randrange(ball.n_interior)
    b = rng.randrange(ball.n_interior)
    x = select_extremal_boundary(em, a, b)
    if x is None:
        x = min(em.support(a))
    f = build_fn(em, a, x)
    problems = []
    if harmonicity_residual(f) != 0:
        problems.append("harmonicity residual nonzero")
    if f.interior[a] != 1:
        problems.append("f(a) != 1")
    if any(v < 0 for v in f.interior) or any(v < 0 for v in f.boundary):
        problems.append("negative value")
    for v in range(ball.n_interior):
        if (x in em.support(v)) != (f.interior[v] > 0):
            problems.append(f"positivity mismatch at {v}")
            break
    for v in range(ball.n_interior):
        if optional_stopping_check(f, em, v) != 0:
            problems.append(f"optional stopping residual nonzero at {v}")
            break
    return {
        "index": i,
        "center": str(center),
        "r": r,
        "a": ball.word(a),
        "b": ball.word(b),
        "x": ball.boundary_word(x),
        "f_b": str(f.interior[b]),
        "problems": problems,
    }


def harmonic_suite(family: str, instances: int = 20, max_radius: int = 3, seed: int = 0, workers: int = 1) -> SuiteReport:
    """Exact checks on f(v) = mu(v, x) / mu(a, x) for random balls and pairs."""
    results = _run(_harmonic_instance, [(family, seed, i, max_radius) for i in range(instances)], workers)
    return SuiteReport(
        lemma="harmonic-construction",
        family=family,
        params={"max_radius": max_radius, "seed": seed, "mode": "exact"},
        instances=instances,
        failures=[r for r in results if r["problems"]],
    )


# ---------------------------------------------------------------------------
# telescoping chain
# ---------------------------------------------------------------------------

def telescoping_suite(family: str, r_max: int) -> SuiteReport:
    """Every boundary point of B(e, r), r <= r_max: product identity and ratio bounds."""
    group = make_group(family)
    dist = uniform_steps(group)
    cache = StepEpsilonCache(dist, "exact")
    failures = []
    count = 0
    for r in range(r_max + 1):
        em = cache.exit_measure(r)
        for x in range(em.ball.n_boundary):
            tr = geodesic_ratio_trace(em, x, cache)
            count += 1
            bad = []
            if not tr.product_matches:
                bad.append("product != mu(a, x)")
            if not tr.chain_holds:
                bad.append("inverse-ratio chain violated")
            if not tr.deviation_holds:
                bad.append("|ratio - 1| exceeds translated epsilon")
            if not all(s.ratio_ge_p for s in tr.steps):
                bad.append("ratio below p")
            if bad:
                failures.append({"r": r, "x": tr.word, "problems": bad})
    return SuiteReport(
        lemma="telescoping",
        family=family,
        params={"r_max": r_max, "mode": "exact"},
        instances=count,
        failures=failures,
    )
