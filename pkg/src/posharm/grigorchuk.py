"""Grigorchuk group arithmetic.

Elements are stored as *portraits*: either a nucleus letter (``"e"``, ``"a"``,
``"b"``, ``"c"``, ``"d"``) or a node ``(swap, left, right)`` whose children are
portraits of the sections.  Nodes that coincide with the decomposition of a
nucleus letter are always collapsed back to that letter, which makes the
portrait a canonical form: two portraits are equal iff the elements are.

Conventions: the group acts on the right on binary words,
``(x w)^g = x^sigma(g) w^(g|x)``, so the product ``g*h`` means "first g, then h"
and a word ``"ab"`` is the element ``a*b``.  The generators decompose as
``a = swap``, ``b = (a, c)``, ``c = (a, d)``, ``d = (1, b)``.

The word problem for plain words is solved independently by
:func:`word_is_identity`, which works on strings only and never touches
portraits.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Union

Portrait = Union[str, tuple]

LETTERS = ("a", "b", "c", "d")

# (swap, section at 0, section at 1) for each nucleus letter
_DECOMPOSE = {
    "e": (0, "e", "e"),
    "a": (1, "e", "e"),
    "b": (0, "a", "c"),
    "c": (0, "a", "d"),
    "d": (0, "e", "b"),
}
_COLLAPSE = {v: k for k, v in _DECOMPOSE.items()}

# Klein four-group {e, b, c, d}
_KLEIN = {
    ("b", "c"): "d", ("c", "b"): "d",
    ("b", "d"): "c", ("d", "b"): "c",
    ("c", "d"): "b", ("d", "c"): "b",
}


def _expand(p: Portrait) -> tuple:
    return _DECOMPOSE[p] if isinstance(p, str) else p


def _node(swap: int, left: Portrait, right: Portrait) -> Portrait:
    key = (swap, left, right)
    return _COLLAPSE.get(key, key)


@lru_cache(maxsize=1 << 20)
def mul(p: Portrait, q: Portrait) -> Portrait:
    if p == "e":
        return q
    if q == "e":
        return p
    if isinstance(p, str) and isinstance(q, str):
        if p == q:
            return "e"
        if (p, q) in _KLEIN:
            return _KLEIN[p, q]
    s1, l1, r1 = _expand(p)
    s2, l2, r2 = _expand(q)
    if s1:
        return _node(s1 ^ s2, mul(l1, r2), mul(r1, l2))
    return _node(s2, mul(l1, l2), mul(r1, r2))


@lru_cache(maxsize=1 << 18)
def inv(p: Portrait) -> Portrait:
    if isinstance(p, str):
        return p
    s, left, right = p
    if s:
        return _node(1, inv(right), inv(left))
    return _node(0, inv(left), inv(right))


def from_word(word: str) -> Portrait:
    out: Portrait = "e"
    for ch in word:
        if ch not in LETTERS:
            raise ValueError(f"not a Grigorchuk generator: {ch!r}")
        out = mul(out, ch)
    return out


def depth(p: Portrait) -> int:
    if isinstance(p, str):
        return 0
    return 1 + max(depth(p[1]), depth(p[2]))


def format_portrait(p: Portrait) -> str:
    if isinstance(p, str):
        return p
    s, left, right = p
    return f"{'s' if s else 'i'}[{format_portrait(left)},{format_portrait(right)}]"


def parse_portrait(text: str) -> Portrait:
    """Inverse of :func:`format_portrait`."""
    pos = 0

    def parse() -> Portrait:
        nonlocal pos
        ch = text[pos]
        if ch in "eabcd":
            pos += 1
            return ch
        if ch not in "si" or text[pos + 1] != "[":
            raise ValueError(f"bad portrait at {pos}: {text!r}")
        pos += 2
        left = parse()
        if text[pos] != ",":
            raise ValueError(f"bad portrait at {pos}: {text!r}")
        pos += 1
        right = parse()
        if text[pos] != "]":
            raise ValueError(f"bad portrait at {pos}: {text!r}")
        pos += 1
        return _node(1 if ch == "s" else 0, left, right)

    out = parse()
    if pos != len(text):
        raise ValueError(f"trailing characters in portrait: {text!r}")
    return out


# ---------------------------------------------------------------------------
# word problem on plain words (independent of the portrait arithmetic)
# ---------------------------------------------------------------------------

_SECTIONS = {"b": ("a", "c"), "c": ("a", "d"), "d": ("", "b")}


def reduce_word(word: str) -> str:
    """Free reduction using a^2 = b^2 = c^2 = d^2 = 1 and bc = d, bd = c, cd = b."""
    stack: list[str] = []
    for ch in word:
        if ch not in LETTERS:
            raise ValueError(f"not a Grigorchuk generator: {ch!r}")
        while True:
            if not stack:
                stack.append(ch)
                break
            top = stack[-1]
            if top == ch:
                stack.pop()
                break
            if top != "a" and ch != "a":
                stack.pop()
                ch = _KLEIN[top, ch]
                continue
            stack.append(ch)
            break
    return "".join(stack)


@lru_cache(maxsize=1 << 16)
def _reduced_is_identity(w: str) -> bool:
    if len(w) <= 1:
        return w == ""
    if w.count("a") % 2:
        return False
    sections = ["", ""]
    where = 0  # current image of the first-level vertex 0
    for ch in w:
        if ch == "a":
            where ^= 1
            continue
        s0, s1 = _SECTIONS[ch]
        # vertex 0 currently sits at `where`; vertex 1 at 1 - where
        sections[0] += s0 if where == 0 else s1
        sections[1] += s1 if where == 0 else s0
    return all(_reduced_is_identity(reduce_word(s)) for s in sections)


def word_is_identity(word: str) -> bool:
    """Decide ``word == 1`` by the first-level section recursion.

    A reduced word of length ``n >= 2`` has sections of length at most
    ``ceil(n / 2) < n``, so the recursion terminates.
    """
    return _reduced_is_identity(reduce_word(word))
