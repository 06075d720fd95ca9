"""Monte Carlo exit measures, used as an independent check on the linear solver.

Randomness is counter based: the uniform used by walk ``w`` at step ``t`` is
``mix(mix(seed ^ mix(w)) + t)`` with the SplitMix64 finaliser, computed in
uint64 numpy arithmetic.  Every walk therefore has its own stream, and results
depend only on (seed, N), never on batching or scheduling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from posharm.balls import DirectedBall
from posharm.exit import ExitMeasure

STEP_CAP = 10**6

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def walk_keys(seed: int, walks: np.ndarray) -> np.ndarray:
    """Per-walk stream keys derived from the run seed and walk indices."""
    s = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    with np.errstate(over="ignore"):
        return _mix(_mix(np.full(walks.shape, s, dtype=np.uint64)) ^ _mix(walks.astype(np.uint64)))


def step_uniforms(keys: np.ndarray, step: int) -> np.ndarray:
    """Uniforms in [0, 1) for one step of each walk (53-bit resolution)."""
    with np.errstate(over="ignore"):
        z = _mix(keys + np.uint64(step))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


@dataclass
class EmpiricalExitMeasure:
    ball: DirectedBall
    start: int
    n_samples: int
    counts: np.ndarray  # per boundary index
    seed: int
    cap_hits: int = 0

    @property
    def valid(self) -> bool:
        return self.cap_hits == 0

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.n_samples


def _transition_table(ball: DirectedBall) -> tuple[np.ndarray, np.ndarray]:
    n = ball.n_interior
    dist = ball.dist
    table = np.empty((n, len(dist.steps)), dtype=np.int64)
    mul = ball.group.mul
    for i, v in enumerate(ball.vertices):
        for k, s in enumerate(dist.steps):
            w = mul(v, s)
            t = ball.index.get(w)
            table[i, k] = t if t is not None else n + ball.boundary_index[w]
    cum = []
    acc = Fraction(0)
    for p in dist.probs[:-1]:
        acc += p
        cum.append(float(acc))
    return table, np.array(cum, dtype=np.float64)


def sample_exit(
    ball: DirectedBall,
    start,
    n_samples: int,
    seed: int,
    step_cap: int = STEP_CAP,
    batch_size: int = 1 << 18,
) -> EmpiricalExitMeasure:
    """Run ``n_samples`` independent walks from ``start`` until they leave the ball."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    i0 = ball.interior_index(start)
    table, cum = _transition_table(ball)
    n = ball.n_interior
    counts = np.zeros(ball.n_boundary, dtype=np.int64)
    cap_hits = 0
    for lo in range(0, n_samples, batch_size):
        ids = np.arange(lo, min(lo + batch_size, n_samples), dtype=np.int64)
        keys = walk_keys(seed, ids)
        state = np.full(ids.shape, i0, dtype=np.int64)
        step = 0
        while keys.size:
            if step >= step_cap:
                cap_hits += keys.size
                break
            k = np.searchsorted(cum, step_uniforms(keys, step), side="right")
            state = table[state, k]
            out = state >= n
            if out.any():
                counts += np.bincount(state[out] - n, minlength=ball.n_boundary)
                keep = ~out
                state = state[keep]
                keys = keys[keep]
            step += 1
    return EmpiricalExitMeasure(ball, i0, n_samples, counts, seed, cap_hits)


@dataclass
class Comparison:
    max_abs_diff: float
    total_variation: float
    z_max: float


def compare_to_exact(emp: EmpiricalExitMeasure, em: ExitMeasure) -> Comparison:
    """Distance between empirical and solved exit laws from the same start.

    ``z_max`` is the largest standardised deviation over boundary points with
    ``mu >= 10 / N``.
    """
    a, b = emp.ball, em.ball
    if a is not b and (
        a.center != b.center or a.radius != b.radius or a.dist.fingerprint() != b.dist.fingerprint()
    ):
        raise ValueError("empirical and exact measures refer to different balls")
    mu = np.array([float(m) for m in em.row(emp.start)])
    freq = emp.frequencies
    diff = np.abs(freq - mu)
    n = emp.n_samples
    mask = mu >= 10.0 / n
    if mask.any():
        sd = np.sqrt(mu[mask] * (1 - mu[mask]) / n)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(sd > 0, diff[mask] / sd, 0.0)
        z_max = float(z.max())
    else:
        z_max = 0.0
    return Comparison(float(diff.max()), float(0.5 * diff.sum()), z_max)


def rounded_empirical(em: ExitMeasure, start, n_samples: int) -> EmpiricalExitMeasure:
    """Empirical measure with counts round(mu * N), for checking the comparison itself."""
    i = em.ball.interior_index(start)
    counts = np.array([math.floor(float(m) * n_samples + 0.5) for m in em.row(i)], dtype=np.int64)
    return EmpiricalExitMeasure(em.ball, i, n_samples, counts, seed=-1)
