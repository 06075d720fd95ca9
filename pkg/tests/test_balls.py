import random
from collections import deque

import pytest

from posharm.ballcache import cached_build_ball, dumps, loads
from posharm.balls import BallSizeError, build_ball, growth_profile, sphere_sizes
from posharm.groups import make_group, uniform_steps

from conftest import FAMILIES


def test_f2_radius_one():
    f2 = make_group("free:2")
    ball = build_ball(None, uniform_steps(f2), 1)
    assert [str(ball.element(i)) for i in range(ball.n_interior)] == ["e", "a", "A", "b", "B"]
    assert ball.n_boundary == 12
    assert all(len(ball.boundary_word(j)) == 2 for j in range(ball.n_boundary))


def test_z1_ball_is_an_interval():
    z1 = make_group("z:1")
    ball = build_ball(None, uniform_steps(z1), 3)
    assert sorted(v[0] for v in ball.vertices) == list(range(-3, 4))
    assert sorted(v[0] for v in ball.boundary) == [-4, 4]


def _brute_force_f2(r):
    # reduced words of length <= r over a, A, b, B
    out = {""}
    frontier = [""]
    inv = {"a": "A", "A": "a", "b": "B", "B": "b"}
    for _ in range(r):
        nxt = []
        for w in frontier:
            for c in "aAbB":
                if not w or inv[c] != w[-1]:
                    nxt.append(w + c)
        out.update(nxt)
        frontier = nxt
    return out


@pytest.mark.parametrize("r", range(5))
def test_f2_matches_brute_force(r):
    f2 = make_group("free:2")
    ball = build_ball(None, uniform_steps(f2), r)
    assert {str(v) if str(v) != "e" else "" for v in map(ball.element, range(ball.n_interior))} == _brute_force_f2(r)


@pytest.mark.parametrize("r", range(11))
def test_closed_form_sizes(r):
    assert build_ball(None, uniform_steps(make_group("z:2")), r).n_interior == 2 * r * r + 2 * r + 1
    if r <= 8:
        assert build_ball(None, uniform_steps(make_group("free:2")), r).n_interior == 2 * 3**r - 1


def test_growth_profile_closed_forms():
    prof = growth_profile(uniform_steps(make_group("free:2")), 10)
    assert prof.sizes == [2 * 3**r - 1 for r in range(11)]
    assert [b for _, _, b in prof.rows] == [4 * 3**r for r in range(11)]
    assert prof.classification == "exponential"
    prof = growth_profile(uniform_steps(make_group("z:2")), 10)
    assert prof.sizes == [2 * r * r + 2 * r + 1 for r in range(11)]
    assert prof.classification == "polynomial"


def _bfs_distances(group, dist, center, depth):
    seen = {center: 0}
    q = deque([center])
    while q:
        v = q.popleft()
        if seen[v] == depth:
            continue
        for s in dist.steps:
            w = group.mul(v, s)
            if w not in seen:
                seen[w] = seen[v] + 1
                q.append(w)
    return seen


@pytest.mark.parametrize("spec", FAMILIES)
def test_boundary_is_next_sphere(spec):
    group = make_group(spec)
    dist = uniform_steps(group)
    rng = random.Random(spec)
    center = group.random_element(rng, 4)
    r = 3
    ball = build_ball(center, dist, r)
    d = _bfs_distances(group, dist, center.payload, r + 1)
    assert set(ball.vertices) == {v for v, k in d.items() if k <= r}
    assert set(ball.boundary) == {v for v, k in d.items() if k == r + 1}
    assert all(ball.distance[i] == d[v] for i, v in enumerate(ball.vertices))


@pytest.mark.parametrize("spec", FAMILIES)
def test_nesting_and_boundary_inclusion(spec):
    dist = uniform_steps(make_group(spec))
    balls = [build_ball(None, dist, r) for r in range(5)]
    for small, large in zip(balls, balls[1:]):
        assert set(small.vertices) <= set(large.vertices)
        assert set(small.boundary) <= set(large.vertices)
        # indices are stable under growth since BFS order is a prefix
        assert large.vertices[: small.n_interior] == small.vertices


@pytest.mark.parametrize("spec", FAMILIES)
def test_translation_transitivity(spec):
    group = make_group(spec)
    dist = uniform_steps(group)
    g = group.random_element(random.Random(spec), 5)
    base = build_ball(None, dist, 3)
    moved = build_ball(g, dist, 3)
    assert moved.n_interior == base.n_interior and moved.n_boundary == base.n_boundary
    assert [group.mul(g.payload, v) for v in base.vertices] == moved.vertices
    assert [group.mul(g.payload, v) for v in base.boundary] == moved.boundary


@pytest.mark.parametrize("spec", FAMILIES)
def test_build_is_deterministic(spec):
    dist = uniform_steps(make_group(spec))
    a, b = build_ball(None, dist, 3), build_ball(None, dist, 3)
    assert a.vertices == b.vertices and a.boundary == b.boundary
    assert a.interior_edges == b.interior_edges and a.boundary_edges == b.boundary_edges


@pytest.mark.parametrize("spec", FAMILIES)
def test_geodesics(spec):
    group = make_group(spec)
    dist = uniform_steps(group)
    ball = build_ball(None, dist, 3)
    for j in range(ball.n_boundary):
        path = ball.geodesic(j)
        assert len(path) == ball.radius + 2
        assert path[0].payload == group.identity() and path[-1].payload == ball.boundary[j]
        assert all((u.inverse() * v).payload in dist.steps for u, v in zip(path, path[1:]))
        assert group.word(ball.boundary_word(j)).payload == ball.boundary[j]


def test_edges_are_stochastic():
    for spec in FAMILIES:
        ball = build_ball(None, uniform_steps(make_group(spec)), 3)
        for v in range(ball.n_interior):
            assert sum(p for _, p in ball.interior_edges[v]) + sum(p for _, p in ball.boundary_edges[v]) == 1


def test_size_cap():
    dist = uniform_steps(make_group("free:2"))
    with pytest.raises(BallSizeError) as info:
        build_ball(None, dist, 10, size_cap=1000)
    assert info.value.radius_reached < 10
    counts, truncated = sphere_sizes(dist, 12, size_cap=1000)
    assert truncated and len(counts) < 13


def test_lookup_errors():
    ball = build_ball(None, uniform_steps(make_group("z:1")), 2)
    with pytest.raises(ValueError):
        ball.interior_index((7,))
    with pytest.raises(ValueError):
        ball.boundary_idx((0,))
    with pytest.raises(ValueError):
        build_ball(None, ball.dist, -1)


@pytest.mark.parametrize("spec", FAMILIES)
def test_cache_roundtrip(spec):
    dist = uniform_steps(make_group(spec))
    ball = build_ball(None, dist, 3)
    back = loads(dumps(ball), dist)
    assert back.vertices == ball.vertices and back.boundary == ball.boundary
    assert back.interior_edges == ball.interior_edges and back.boundary_edges == ball.boundary_edges
    assert back.pred == ball.pred and back.boundary_preds == ball.boundary_preds


def test_cache_rebuilds_corrupt_file(tmp_path):
    dist = uniform_steps(make_group("z:2"))
    first = cached_build_ball(None, dist, 4, tmp_path)
    files = list(tmp_path.glob("*.ball"))
    assert len(files) == 1
    blob = bytearray(files[0].read_bytes())
    blob[len(blob) // 2] ^= 0xFF
    files[0].write_bytes(bytes(blob))
    again = cached_build_ball(None, dist, 4, tmp_path)
    assert again.vertices == first.vertices
    assert loads(files[0].read_bytes(), dist).vertices == first.vertices
