"""Directed balls B(a, r), their outer boundaries, geodesics and growth profiles."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from posharm.groups import Group, GroupElement, StepDistribution

DEFAULT_SIZE_CAP = 5_000_000


class BallSizeError(RuntimeError):
    """The ball outgrew the vertex cap; ``radius_reached`` is the last complete radius."""

    def __init__(self, cap: int, radius_reached: int):
        super().__init__(f"ball exceeded {cap} vertices; complete up to radius {radius_reached}")
        self.cap = cap
        self.radius_reached = radius_reached


@dataclass
class DirectedBall:
    """All vertices reachable from ``center`` in at most ``radius`` steps.

    Interior vertices are indexed in BFS discovery order (index 0 is the
    center); boundary vertices have their own index space, ordered by first
    discovery while scanning interior vertices in index order.
    """

    dist: StepDistribution
    center: Any
    radius: int
    vertices: list
    distance: list[int]
    pred: list[int]
    pred_step: list[int]
    boundary: list
    boundary_preds: list[list[int]]
    boundary_pred_step: list[int]
    # per interior vertex: merged (target, prob) lists
    interior_edges: list[list[tuple[int, Fraction]]]
    boundary_edges: list[list[tuple[int, Fraction]]]
    index: dict = field(default_factory=dict, repr=False)
    boundary_index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.index:
            self.index = {v: i for i, v in enumerate(self.vertices)}
        if not self.boundary_index:
            self.boundary_index = {v: j for j, v in enumerate(self.boundary)}

    @property
    def group(self) -> Group:
        return self.dist.group

    @property
    def n_interior(self) -> int:
        return len(self.vertices)

    @property
    def n_boundary(self) -> int:
        return len(self.boundary)

    def element(self, i: int) -> GroupElement:
        return GroupElement(self.group, self.vertices[i])

    def boundary_element(self, j: int) -> GroupElement:
        return GroupElement(self.group, self.boundary[j])

    def _payload(self, v) -> Any:
        if isinstance(v, GroupElement):
            if v.group != self.group:
                raise ValueError(f"element of {v.group.spec} used with a {self.group.spec} ball")
            return v.payload
        return v

    def interior_index(self, v) -> int:
        """Index of an interior vertex given as element or index."""
        if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
            if not 0 <= v < self.n_interior:
                raise ValueError(f"interior index {v} out of range")
            return int(v)
        p = self._payload(v)
        if p not in self.index:
            raise ValueError(f"{self.group.format(p)} is not an interior vertex of this ball")
        return self.index[p]

    def boundary_idx(self, x) -> int:
        """Index of a boundary vertex given as element or boundary index."""
        if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
            if not 0 <= x < self.n_boundary:
                raise ValueError(f"boundary index {x} out of range")
            return int(x)
        p = self._payload(x)
        if p not in self.boundary_index:
            raise ValueError(f"{self.group.format(p)} is not on the boundary of this ball")
        return self.boundary_index[p]

    def contains(self, v) -> bool:
        return self._payload(v) in self.index

    def word(self, i: int) -> str:
        """Generator word of the BFS geodesic from the center to interior vertex ``i``."""
        names = []
        while i > 0:
            names.append(self.dist.names[self.pred_step[i]])
            i = self.pred[i]
        return "".join(reversed(names))

    def boundary_word(self, j: int) -> str:
        return self.word(self.boundary_preds[j][0]) + self.dist.names[self.boundary_pred_step[j]]

    def geodesic_indices(self, x) -> tuple[list[int], int]:
        """Interior indices ``[0, ..., y]`` of the geodesic to boundary vertex ``x``, and x's index."""
        j = self.boundary_idx(x)
        path = []
        i = self.boundary_preds[j][0]
        while i >= 0:
            path.append(i)
            i = self.pred[i]
        path.reverse()
        return path, j

    def geodesic(self, x) -> list[GroupElement]:
        """The first-discoverer BFS geodesic ``center = g_0 -> ... -> g_{r+1} = x``."""
        path, j = self.geodesic_indices(x)
        return [self.element(i) for i in path] + [self.boundary_element(j)]

    def reachable_boundary(self, start: int) -> set[int]:
        """Boundary indices reachable from interior vertex ``start`` without leaving the ball."""
        seen = {start}
        stack = [start]
        hit: set[int] = set()
        while stack:
            v = stack.pop()
            for j, _ in self.boundary_edges[v]:
                hit.add(j)
            for w, _ in self.interior_edges[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return hit


def _start_payload(center, dist: StepDistribution):
    if isinstance(center, GroupElement):
        if center.group != dist.group:
            raise ValueError(f"center in {center.group.spec}, steps in {dist.group.spec}")
        return center.payload
    if center is None:
        return dist.group.identity()
    return center


def build_ball(
    center: GroupElement | None,
    dist: StepDistribution,
    r: int,
    size_cap: int = DEFAULT_SIZE_CAP,
) -> DirectedBall:
    """Breadth-first construction of B(center, r) by right multiplication.

    Steps are tried in the declared order, which fixes vertex indices and the
    first-discoverer geodesic predecessors.
    """
    if r < 0:
        raise ValueError(f"radius must be >= 0, got {r}")
    group = dist.group
    mul = group.mul
    steps = dist.steps
    a = _start_payload(center, dist)

    vertices = [a]
    index = {a: 0}
    distance = [0]
    pred = [-1]
    pred_step = [-1]
    lo = 0
    for level in range(r):
        hi = len(vertices)
        for i in range(lo, hi):
            v = vertices[i]
            for k, s in enumerate(steps):
                w = mul(v, s)
                if w not in index:
                    index[w] = len(vertices)
                    vertices.append(w)
                    distance.append(level + 1)
                    pred.append(i)
                    pred_step.append(k)
            if len(vertices) > size_cap:
                raise BallSizeError(size_cap, level)
        lo = hi

    boundary: list = []
    boundary_index: dict = {}
    boundary_preds: list[list[int]] = []
    boundary_pred_step: list[int] = []
    interior_edges = []
    boundary_edges = []
    for i, v in enumerate(vertices):
        inner: dict[int, Fraction] = {}
        outer: dict[int, Fraction] = {}
        for k, (s, p) in enumerate(zip(steps, dist.probs)):
            w = mul(v, s)
            t = index.get(w)
            if t is not None:
                inner[t] = inner.get(t, 0) + p
                continue
            j = boundary_index.get(w)
            if j is None:
                j = boundary_index[w] = len(boundary)
                boundary.append(w)
                boundary_preds.append([])
                boundary_pred_step.append(k)
            if not boundary_preds[j] or boundary_preds[j][-1] != i:
                boundary_preds[j].append(i)
            outer[j] = outer.get(j, 0) + p
        interior_edges.append(list(inner.items()))
        boundary_edges.append(list(outer.items()))
        if len(vertices) + len(boundary) > size_cap:
            raise BallSizeError(size_cap, r - 1)

    return DirectedBall(
        dist=dist,
        center=a,
        radius=r,
        vertices=vertices,
        distance=distance,
        pred=pred,
        pred_step=pred_step,
        boundary=boundary,
        boundary_preds=boundary_preds,
        boundary_pred_step=boundary_pred_step,
        interior_edges=interior_edges,
        boundary_edges=boundary_edges,
        index=index,
        boundary_index=boundary_index,
    )


def geodesic(ball: DirectedBall, x) -> list[GroupElement]:
    return ball.geodesic(x)


# ---------------------------------------------------------------------------
# growth
# ---------------------------------------------------------------------------

@dataclass
class GrowthProfile:
    family: str
    rows: list[tuple[int, int, int]]  # (r, |B(a,r)|, |boundary of B(a,r)|)
    new_vertices: list[int]  # new_vertices[r] = number of vertices at distance exactly r
    exp_rate: float
    exp_residual: float
    poly_degree: float
    poly_residual: float
    classification: str
    truncated: bool = False

    @property
    def sizes(self) -> list[int]:
        return [b for _, b, _ in self.rows]


def sphere_sizes(dist: StepDistribution, r_max: int, size_cap: int = DEFAULT_SIZE_CAP) -> tuple[list[int], bool]:
    """Counts of vertices at distance 0..r_max from the identity; flag set if truncated by the cap."""
    group = dist.group
    mul = group.mul
    steps = dist.steps
    e = group.identity()
    seen = {e}
    frontier = [e]
    counts = [1]
    for _ in range(r_max):
        nxt = []
        for v in frontier:
            for s in steps:
                w = mul(v, s)
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        if len(seen) > size_cap:
            return counts, True
        counts.append(len(nxt))
        frontier = nxt
    return counts, False


def _fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    coeffs, res, *_ = np.polyfit(x, y, 1, full=True)
    resid = float(res[0]) if len(res) else 0.0
    return float(coeffs[0]), math.sqrt(resid / len(x))


def fit_growth(radii: Sequence[int], sizes: Sequence[int]) -> tuple[float, float, float, float, str]:
    """Fit log|B| against r and against log r over the upper half of the radii.

    Returns (exp_rate, exp_residual, poly_degree, poly_residual, classification).
    """
    pairs = [(r, b) for r, b in zip(radii, sizes) if r > 0]
    if len(pairs) < 2:
        return math.nan, math.nan, math.nan, math.nan, "undetermined"
    r_top = pairs[-1][0]
    top = [(r, b) for r, b in pairs if r >= r_top / 2] or pairs
    if len(top) < 2:
        top = pairs[-2:]
    rs = np.array([r for r, _ in top], dtype=float)
    logb = np.log(np.array([b for _, b in top], dtype=float))
    exp_rate, exp_res = _fit(rs, logb)
    poly_deg, poly_res = _fit(np.log(rs), logb)
    if exp_res < poly_res and exp_rate > 0.05:
        label = "exponential"
    elif poly_res < exp_res:
        label = "polynomial"
    else:
        label = "undetermined"
    return exp_rate, exp_res, poly_deg, poly_res, label


def growth_profile(dist: StepDistribution, r_max: int, size_cap: int = DEFAULT_SIZE_CAP) -> GrowthProfile:
    """Ball and boundary sizes for r = 0..r_max plus the growth classification.

    The boundary of B(a, r) is exactly the set of vertices at distance r + 1,
    so only one BFS to depth r_max + 1 is needed.
    """
    if r_max < 2:
        raise ValueError("growth_profile needs r_max >= 2")
    counts, truncated = sphere_sizes(dist, r_max + 1, size_cap)
    rows = []
    total = 0
    for r in range(len(counts) - 1):
        total += counts[r]
        rows.append((r, total, counts[r + 1]))
    exp_rate, exp_res, poly_deg, poly_res, label = fit_growth(
        [r for r, _, _ in rows], [b for _, b, _ in rows]
    )
    return GrowthProfile(
        family=dist.group.spec,
        rows=rows,
        new_vertices=counts[: len(rows)],
        exp_rate=exp_rate,
        exp_residual=exp_res,
        poly_degree=poly_deg,
        poly_residual=poly_res,
        classification=label,
        truncated=truncated,
    )
