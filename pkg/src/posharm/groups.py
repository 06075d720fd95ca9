"""Canonical-form arithmetic for the supported group families.

Every family works on hashable *payloads* (plain tuples, ints, strings and
``Fraction``) so that ball construction can run on raw payloads; the
:class:`GroupElement` wrapper is the public face used everywhere else.

Family spec strings::

    z:<d>          Z^d, generators +-e_i named a/A, b/B, ...
    free:<k>       free group F_k, generators a/A, b/B, ...
    heis           integer Heisenberg group, generators x/X, y/Y
    lamplighter    Z_2 wr Z, generators t/T (move) and s (toggle lamp)
    bs:1:<m>       Baumslag-Solitar BS(1,m) as affine maps x -> m^a x + b
    grigorchuk     first Grigorchuk group, generators a, b, c, d
"""
from __future__ import annotations

import random
import re
import string
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Hashable, Iterable, Sequence

from posharm import grigorchuk as _grig

Payload = Hashable


class GroupSpecError(ValueError):
    """Raised for malformed or invalid group spec strings."""


class FamilyMismatchError(ValueError):
    pass


class Group:
    """Base class: payload-level operations of one group family."""

    spec: str
    # (name, payload) in declared order
    generators: tuple

    def identity(self) -> Payload:
        raise NotImplementedError

    def mul(self, p: Payload, q: Payload) -> Payload:
        raise NotImplementedError

    def inv(self, p: Payload) -> Payload:
        raise NotImplementedError

    def format(self, p: Payload) -> str:
        return str(p)

    def parse_literal(self, text: str) -> Payload:
        raise GroupSpecError(f"{self.spec}: cannot parse literal {text!r}")

    # -- shared helpers --------------------------------------------------

    def __repr__(self) -> str:
        return f"make_group({self.spec!r})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Group) and other.spec == self.spec

    def __hash__(self) -> int:
        return hash(self.spec)

    @property
    def generator_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.generators)

    def generator(self, name: str) -> "GroupElement":
        for gname, payload in self.generators:
            if gname == name:
                return GroupElement(self, payload)
        raise KeyError(f"{self.spec} has no generator {name!r}")

    def element(self, payload: Payload) -> "GroupElement":
        return GroupElement(self, payload)

    @property
    def one(self) -> "GroupElement":
        return GroupElement(self, self.identity())

    def word(self, text: str) -> "GroupElement":
        """Multiply out a word in generator names (single letters)."""
        lookup = dict(self.generators)
        out = self.identity()
        for ch in text.replace(" ", ""):
            if ch not in lookup:
                raise GroupSpecError(f"{self.spec}: unknown generator {ch!r} in {text!r}")
            out = self.mul(out, lookup[ch])
        return GroupElement(self, out)

    def parse(self, text: str) -> "GroupElement":
        """Parse either a payload literal or a generator word ("" or "e" is the identity)."""
        text = text.strip()
        if text in ("", "e", "1"):
            return self.one
        if text[0] in "([{" or text[0].isdigit() or text[0] == "-":
            return GroupElement(self, self.parse_literal(text))
        return self.word(text)

    def random_element(self, rng: random.Random, length: int) -> "GroupElement":
        """Product of ``length`` generators or generator inverses drawn uniformly."""
        gens = [p for _, p in self.generators]
        out = self.identity()
        for _ in range(length):
            g = rng.choice(gens)
            if rng.random() < 0.5:
                g = self.inv(g)
            out = self.mul(out, g)
        return GroupElement(self, out)

    def is_identity(self, p: Payload) -> bool:
        return p == self.identity()


@dataclass(frozen=True)
class GroupElement:
    """An element of one of the supported families, in canonical form."""

    group: Group = field(compare=True)
    payload: Any = field(compare=True)

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return multiply(self, other)

    def inverse(self) -> "GroupElement":
        return invert(self)

    def __str__(self) -> str:
        return self.group.format(self.payload)

    def __repr__(self) -> str:
        return f"<{self.group.spec} {self}>"


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------

def _letter_names(n: int) -> list[tuple[str, str]]:
    if n > 26:
        raise GroupSpecError("at most 26 generators are supported")
    return [(string.ascii_lowercase[i], string.ascii_uppercase[i]) for i in range(n)]


class ZdGroup(Group):
    def __init__(self, d: int):
        if d < 1:
            raise GroupSpecError(f"Z^d needs d >= 1, got d={d}")
        self.d = d
        self.spec = f"z:{d}"
        gens = []
        for i, (lo, up) in enumerate(_letter_names(d)):
            e = [0] * d
            e[i] = 1
            gens.append((lo, tuple(e)))
            e[i] = -1
            gens.append((up, tuple(e)))
        self.generators = tuple(gens)

    def identity(self):
        return (0,) * self.d

    def mul(self, p, q):
        return tuple(x + y for x, y in zip(p, q))

    def inv(self, p):
        return tuple(-x for x in p)

    def format(self, p):
        return "(" + ",".join(map(str, p)) + ")"

    def parse_literal(self, text):
        nums = [int(t) for t in re.findall(r"-?\d+", text)]
        if len(nums) != self.d:
            raise GroupSpecError(f"{self.spec}: expected {self.d} coordinates in {text!r}")
        return tuple(nums)


class FreeGroup(Group):
    """Payload: tuple of nonzero ints, +i for the i-th generator, -i for its inverse."""

    def __init__(self, k: int):
        if k < 1:
            raise GroupSpecError(f"free group needs k >= 1, got k={k}")
        self.k = k
        self.spec = f"free:{k}"
        gens = []
        for i, (lo, up) in enumerate(_letter_names(k)):
            gens.append((lo, (i + 1,)))
            gens.append((up, (-(i + 1),)))
        self.generators = tuple(gens)

    def identity(self):
        return ()

    def mul(self, p, q):
        # cancel the longest suffix of p against the prefix of q
        i = 0
        n = min(len(p), len(q))
        while i < n and p[len(p) - 1 - i] == -q[i]:
            i += 1
        return p[: len(p) - i] + q[i:]

    def inv(self, p):
        return tuple(-x for x in reversed(p))

    def format(self, p):
        if not p:
            return "e"
        return "".join(
            string.ascii_lowercase[x - 1] if x > 0 else string.ascii_uppercase[-x - 1] for x in p
        )


class HeisenbergGroup(Group):
    """Upper unitriangular integer matrices [[1,x,z],[0,1,y],[0,0,1]] as (x, y, z)."""

    spec = "heis"
    generators = (("x", (1, 0, 0)), ("X", (-1, 0, 0)), ("y", (0, 1, 0)), ("Y", (0, -1, 0)))

    def identity(self):
        return (0, 0, 0)

    def mul(self, p, q):
        return (p[0] + q[0], p[1] + q[1], p[2] + q[2] + p[0] * q[1])

    def inv(self, p):
        x, y, z = p
        return (-x, -y, x * y - z)

    def format(self, p):
        return "(" + ",".join(map(str, p)) + ")"

    def parse_literal(self, text):
        nums = [int(t) for t in re.findall(r"-?\d+", text)]
        if len(nums) != 3:
            raise GroupSpecError(f"heis: expected 3 coordinates in {text!r}")
        return tuple(nums)


class LamplighterGroup(Group):
    """Z_2 wr Z.  Payload: (sorted tuple of lit lamp positions, walker position)."""

    spec = "lamplighter"
    generators = (("t", ((), 1)), ("T", ((), -1)), ("s", ((0,), 0)))

    def identity(self):
        return ((), 0)

    def mul(self, p, q):
        lamps_p, pos_p = p
        lamps_q, pos_q = q
        if lamps_q:
            lit = set(lamps_p)
            lit.symmetric_difference_update(x + pos_p for x in lamps_q)
            lamps = tuple(sorted(lit))
        else:
            lamps = lamps_p
        return (lamps, pos_p + pos_q)

    def inv(self, p):
        lamps, pos = p
        return (tuple(x - pos for x in lamps), -pos)

    def format(self, p):
        lamps, pos = p
        return "{" + ",".join(map(str, lamps)) + "}@" + str(pos)

    def parse_literal(self, text):
        m = re.fullmatch(r"\{([-\d,\s]*)\}@(-?\d+)", text.replace(" ", ""))
        if not m:
            raise GroupSpecError(f"lamplighter: expected '{{i,j,...}}@pos', got {text!r}")
        lamps = tuple(sorted({int(t) for t in re.findall(r"-?\d+", m.group(1))}))
        return (lamps, int(m.group(2)))


class BaumslagSolitarGroup(Group):
    """BS(1,m) as affine maps x -> m^a x + b; payload (a, b) with b a Fraction.

    The product is composition of maps, ``(g*h)(x) = g(h(x))``, i.e. the
    product of the matrices [[m^a, b], [0, 1]].
    """

    def __init__(self, m: int):
        if m < 2:
            raise GroupSpecError(f"BS(1,m) needs m >= 2, got m={m}")
        self.m = m
        self.spec = f"bs:1:{m}"
        self.generators = (
            ("a", (1, Fraction(0))),
            ("A", (-1, Fraction(0))),
            ("b", (0, Fraction(1))),
            ("B", (0, Fraction(-1))),
        )

    def _scale(self, a: int) -> Fraction:
        return Fraction(self.m) ** a

    def identity(self):
        return (0, Fraction(0))

    def mul(self, p, q):
        a1, b1 = p
        a2, b2 = q
        return (a1 + a2, self._scale(a1) * b2 + b1)

    def inv(self, p):
        a, b = p
        return (-a, -b * self._scale(-a))

    def format(self, p):
        return f"({p[0]},{p[1]})"

    def parse_literal(self, text):
        m = re.fullmatch(r"\((-?\d+),(-?\d+(?:/\d+)?)\)", text.replace(" ", ""))
        if not m:
            raise GroupSpecError(f"{self.spec}: expected '(a,b)', got {text!r}")
        b = Fraction(m.group(2))
        den = b.denominator
        while den % self.m == 0:
            den //= self.m
        if den != 1:
            raise GroupSpecError(f"{self.spec}: denominator of {b} is not a power of {self.m}")
        return (int(m.group(1)), b)


class GrigorchukGroup(Group):
    spec = "grigorchuk"
    generators = tuple((ch, ch) for ch in _grig.LETTERS)

    def identity(self):
        return "e"

    def mul(self, p, q):
        return _grig.mul(p, q)

    def inv(self, p):
        return _grig.inv(p)

    def format(self, p):
        return _grig.format_portrait(p)

    def parse_literal(self, text):
        raise GroupSpecError("grigorchuk: use a word over a,b,c,d or a portrait via parse_portrait")

    def parse(self, text):
        text = text.strip()
        if text[:2] in ("s[", "i["):
            return GroupElement(self, _grig.parse_portrait(text))
        return super().parse(text)


@lru_cache(maxsize=None)
def make_group(spec: str) -> Group:
    """Build the group for a family spec string such as ``"z:2"`` or ``"bs:1:2"``."""
    s = spec.strip().lower()
    parts = s.split(":")
    try:
        if parts[0] == "z" and len(parts) == 2:
            return ZdGroup(int(parts[1]))
        if parts[0] == "free" and len(parts) == 2:
            return FreeGroup(int(parts[1]))
        if s in ("heis", "heisenberg"):
            return HeisenbergGroup()
        if s == "lamplighter":
            return LamplighterGroup()
        if parts[0] == "bs" and len(parts) == 3:
            if int(parts[1]) != 1:
                raise GroupSpecError("only BS(1,m) is supported")
            return BaumslagSolitarGroup(int(parts[2]))
        if s == "grigorchuk":
            return GrigorchukGroup()
    except ValueError as exc:
        if isinstance(exc, GroupSpecError):
            raise
        raise GroupSpecError(f"bad group spec {spec!r}: {exc}") from None
    raise GroupSpecError(f"unknown group spec {spec!r}")


# ---------------------------------------------------------------------------
# element-level operations
# ---------------------------------------------------------------------------

def _check_same(*elements: GroupElement) -> Group:
    group = elements[0].group
    for el in elements[1:]:
        if el.group != group:
            raise FamilyMismatchError(f"cannot combine {group.spec} with {el.group.spec}")
    return group


def multiply(g: GroupElement, h: GroupElement) -> GroupElement:
    group = _check_same(g, h)
    return GroupElement(group, group.mul(g.payload, h.payload))


def invert(g: GroupElement) -> GroupElement:
    return GroupElement(g.group, g.group.inv(g.payload))


def is_identity(g: GroupElement) -> bool:
    return g.group.is_identity(g.payload)


def translate_path(g: GroupElement, path: Sequence[GroupElement]) -> list[GroupElement]:
    """Left-translate every vertex of ``path`` by ``g^-1``.

    Left translations commute with the right-multiplication steps of the walk,
    so the image of a path is again a path with the same step probabilities.
    """
    if not path:
        return []
    group = _check_same(g, *path)
    ginv = group.inv(g.payload)
    return [GroupElement(group, group.mul(ginv, v.payload)) for v in path]


# ---------------------------------------------------------------------------
# step distributions
# ---------------------------------------------------------------------------

class StronglyConnectedError(ValueError):
    """The step support does not generate the group as a semigroup."""


@dataclass(frozen=True)
class StepDistribution:
    """Finitely supported step law: right-multiplication by ``steps[i]`` with ``probs[i]``."""

    group: Group
    names: tuple[str, ...]
    steps: tuple  # payloads
    probs: tuple[Fraction, ...]

    def __post_init__(self):
        if not self.steps:
            raise ValueError("step distribution needs a non-empty support")
        if not (len(self.names) == len(self.steps) == len(self.probs)):
            raise ValueError("names, steps and probs must have equal length")
        if any(p <= 0 for p in self.probs):
            raise ValueError("step probabilities must be strictly positive")
        if sum(self.probs) != 1:
            raise ValueError(f"step probabilities sum to {sum(self.probs)}, not 1")

    @property
    def min_prob(self) -> Fraction:
        """Smallest step probability (the constant p of the growth bound)."""
        return min(self.probs)

    def items(self) -> Iterable[tuple[str, Any, Fraction]]:
        return zip(self.names, self.steps, self.probs)

    def fingerprint(self) -> str:
        parts = [self.group.spec] + [
            f"{n}={self.group.format(s)}:{p}" for n, s, p in self.items()
        ]
        return "|".join(parts)

    def check_strongly_connected(self, max_depth: int = 16, max_states: int = 200_000) -> dict:
        """Find, for every step s, a positive word in the steps equal to s^-1.

        Returns ``{name: word}``; raises :class:`StronglyConnectedError` when some
        inverse is not found within ``max_depth`` steps.
        """
        group = self.group
        targets = {}
        for name, s in zip(self.names, self.steps):
            targets.setdefault(group.inv(s), []).append(name)
        found: dict[str, str] = {}
        seen = {group.identity(): ""}
        frontier = deque([group.identity()])
        for _ in range(max_depth):
            nxt = deque()
            for v in frontier:
                word = seen[v]
                for name, s in zip(self.names, self.steps):
                    w = group.mul(v, s)
                    if w in seen:
                        continue
                    seen[w] = word + name
                    nxt.append(w)
                    for tname in targets.pop(w, ()):
                        found[tname] = word + name
                if not targets:
                    return found
            frontier = nxt
            if not frontier or len(seen) > max_states:
                break
        missing = sorted(n for names in targets.values() for n in names)
        raise StronglyConnectedError(
            f"{group.spec}: no positive word for the inverse of {missing} within depth {max_depth}"
        )


def uniform_steps(group: Group, names: Sequence[str] | None = None) -> StepDistribution:
    """Uniform law on the named generators (all declared generators by default)."""
    table = dict(group.generators)
    names = tuple(names) if names is not None else group.generator_names
    if not names:
        raise ValueError("need at least one generator")
    p = Fraction(1, len(names))
    return StepDistribution(group, names, tuple(table[n] for n in names), (p,) * len(names))


def weighted_steps(group: Group, weights: dict[str, Fraction | str | int]) -> StepDistribution:
    """Step law with explicit probabilities per generator name (must sum to 1)."""
    table = dict(group.generators)
    names = tuple(n for n in group.generator_names if n in weights)
    unknown = set(weights) - set(table)
    if unknown:
        raise ValueError(f"{group.spec}: unknown generators {sorted(unknown)}")
    probs = tuple(Fraction(weights[n]) for n in names)
    return StepDistribution(group, names, tuple(table[n] for n in names), probs)
