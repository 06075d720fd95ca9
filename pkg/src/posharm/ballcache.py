"""Content-addressed on-disk cache of directed balls.

File layout (all integers LEB128 varints, signed ones zigzag-encoded)::

    magic  b"PHBALL1\\n"
    body   header:   family spec (str), step fingerprint (str), center (payload),
                     r, vertex count n, boundary count m
           vertices: n x (payload, distance, pred, pred_step)
           boundary: m x (payload, pred_step, #preds, preds...)
           edges:    n x (#inner, (target, num, den)..., #outer, (target, num, den)...)
    digest sha256(body), 32 bytes

Payloads are nested tuples of ints, Fractions and strings, tagged by one byte.
Files whose digest or structure does not check out are deleted and rebuilt.
"""
from __future__ import annotations

import hashlib
import io
import os
import tempfile
from fractions import Fraction
from pathlib import Path

from posharm.balls import DEFAULT_SIZE_CAP, DirectedBall, build_ball
from posharm.groups import GroupElement, StepDistribution

MAGIC = b"PHBALL1\n"
CACHE_ENV = "POSHARM_CACHE_DIR"


class CorruptCacheError(ValueError):
    pass


def _uvarint(out: io.BytesIO, n: int) -> None:
    if n < 0:
        raise ValueError("negative value for unsigned varint")
    while True:
        byte = n & 0x7F
        n >>= 7
        if n:
            out.write(bytes((byte | 0x80,)))
        else:
            out.write(bytes((byte,)))
            return


def _svarint(out: io.BytesIO, n: int) -> None:
    _uvarint(out, (n << 1) if n >= 0 else ((-n << 1) - 1))


def _read_uvarint(buf: io.BytesIO) -> int:
    shift = 0
    n = 0
    while True:
        b = buf.read(1)
        if not b:
            raise CorruptCacheError("truncated varint")
        n |= (b[0] & 0x7F) << shift
        if not b[0] & 0x80:
            return n
        shift += 7


def _read_svarint(buf: io.BytesIO) -> int:
    z = _read_uvarint(buf)
    return (z >> 1) if not z & 1 else -((z + 1) >> 1)


def _str(out: io.BytesIO, s: str) -> None:
    data = s.encode()
    _uvarint(out, len(data))
    out.write(data)


def _read_str(buf: io.BytesIO) -> str:
    n = _read_uvarint(buf)
    data = buf.read(n)
    if len(data) != n:
        raise CorruptCacheError("truncated string")
    return data.decode()


def encode_payload(out: io.BytesIO, p) -> None:
    if isinstance(p, bool):
        raise TypeError("bool payloads are not supported")
    if isinstance(p, int):
        out.write(b"i")
        _svarint(out, p)
    elif isinstance(p, Fraction):
        out.write(b"q")
        _svarint(out, p.numerator)
        _uvarint(out, p.denominator)
    elif isinstance(p, str):
        out.write(b"s")
        _str(out, p)
    elif isinstance(p, tuple):
        out.write(b"t")
        _uvarint(out, len(p))
        for item in p:
            encode_payload(out, item)
    else:
        raise TypeError(f"cannot encode payload of type {type(p).__name__}")


def decode_payload(buf: io.BytesIO):
    tag = buf.read(1)
    if tag == b"i":
        return _read_svarint(buf)
    if tag == b"q":
        num = _read_svarint(buf)
        den = _read_uvarint(buf)
        if den == 0:
            raise CorruptCacheError("zero denominator")
        return Fraction(num, den)
    if tag == b"s":
        return _read_str(buf)
    if tag == b"t":
        return tuple(decode_payload(buf) for _ in range(_read_uvarint(buf)))
    raise CorruptCacheError(f"bad payload tag {tag!r}")


def cache_key(dist: StepDistribution, center, r: int) -> str:
    out = io.BytesIO()
    _str(out, dist.fingerprint())
    encode_payload(out, center)
    _uvarint(out, r)
    return hashlib.sha256(out.getvalue()).hexdigest()


def dumps(ball: DirectedBall) -> bytes:
    body = io.BytesIO()
    _str(body, ball.group.spec)
    _str(body, ball.dist.fingerprint())
    encode_payload(body, ball.center)
    _uvarint(body, ball.radius)
    _uvarint(body, ball.n_interior)
    _uvarint(body, ball.n_boundary)
    for v, d, pr, ps in zip(ball.vertices, ball.distance, ball.pred, ball.pred_step):
        encode_payload(body, v)
        _uvarint(body, d)
        _svarint(body, pr)
        _svarint(body, ps)
    for x, ps, preds in zip(ball.boundary, ball.boundary_pred_step, ball.boundary_preds):
        encode_payload(body, x)
        _uvarint(body, ps)
        _uvarint(body, len(preds))
        for i in preds:
            _uvarint(body, i)
    for inner, outer in zip(ball.interior_edges, ball.boundary_edges):
        for edges in (inner, outer):
            _uvarint(body, len(edges))
            for t, p in edges:
                _uvarint(body, t)
                _svarint(body, p.numerator)
                _uvarint(body, p.denominator)
    data = body.getvalue()
    return MAGIC + data + hashlib.sha256(data).digest()


def loads(blob: bytes, dist: StepDistribution) -> DirectedBall:
    if not blob.startswith(MAGIC) or len(blob) < len(MAGIC) + 32:
        raise CorruptCacheError("bad magic")
    data, digest = blob[len(MAGIC) : -32], blob[-32:]
    if hashlib.sha256(data).digest() != digest:
        raise CorruptCacheError("digest mismatch")
    buf = io.BytesIO(data)
    spec = _read_str(buf)
    fingerprint = _read_str(buf)
    if spec != dist.group.spec or fingerprint != dist.fingerprint():
        raise CorruptCacheError("cache entry belongs to a different step distribution")
    center = decode_payload(buf)
    r = _read_uvarint(buf)
    n = _read_uvarint(buf)
    m = _read_uvarint(buf)
    vertices, distance, pred, pred_step = [], [], [], []
    for _ in range(n):
        vertices.append(decode_payload(buf))
        distance.append(_read_uvarint(buf))
        pred.append(_read_svarint(buf))
        pred_step.append(_read_svarint(buf))
    boundary, bsteps, bpreds = [], [], []
    for _ in range(m):
        boundary.append(decode_payload(buf))
        bsteps.append(_read_uvarint(buf))
        bpreds.append([_read_uvarint(buf) for _ in range(_read_uvarint(buf))])
    inner_all, outer_all = [], []
    for _ in range(n):
        pair = []
        for _ in range(2):
            edges = []
            for _ in range(_read_uvarint(buf)):
                t = _read_uvarint(buf)
                num = _read_svarint(buf)
                den = _read_uvarint(buf)
                edges.append((t, Fraction(num, den)))
            pair.append(edges)
        inner_all.append(pair[0])
        outer_all.append(pair[1])
    if buf.read(1):
        raise CorruptCacheError("trailing bytes")
    return DirectedBall(
        dist=dist,
        center=center,
        radius=r,
        vertices=vertices,
        distance=distance,
        pred=pred,
        pred_step=pred_step,
        boundary=boundary,
        boundary_preds=bpreds,
        boundary_pred_step=bsteps,
        interior_edges=inner_all,
        boundary_edges=outer_all,
    )


def atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def default_cache_dir() -> Path | None:
    env = os.environ.get(CACHE_ENV)
    return Path(env) if env else None


def cached_build_ball(
    center: GroupElement | None,
    dist: StepDistribution,
    r: int,
    cache_dir: str | Path | None = None,
    size_cap: int = DEFAULT_SIZE_CAP,
) -> DirectedBall:
    """:func:`build_ball` backed by the on-disk cache (no cache when ``cache_dir`` is None)."""
    if cache_dir is None:
        return build_ball(center, dist, r, size_cap)
    payload = center.payload if isinstance(center, GroupElement) else (
        dist.group.identity() if center is None else center
    )
    path = Path(cache_dir) / f"{cache_key(dist, payload, r)}.ball"
    if path.exists():
        try:
            ball = loads(path.read_bytes(), dist)
            if ball.center == payload and ball.radius == r:
                return ball
        except (CorruptCacheError, UnicodeDecodeError, ValueError, IndexError):
            pass
        path.unlink(missing_ok=True)
    ball = build_ball(center, dist, r, size_cap)
    atomic_write(path, dumps(ball))
    return ball
