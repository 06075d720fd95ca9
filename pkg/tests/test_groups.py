import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from posharm import grigorchuk
from posharm.groups import (
    FamilyMismatchError,
    GroupSpecError,
    StronglyConnectedError,
    invert,
    is_identity,
    make_group,
    multiply,
    translate_path,
    uniform_steps,
    weighted_steps,
)

from conftest import FAMILIES


def test_make_group_examples():
    z2 = make_group("z:2")
    assert z2.identity() == (0, 0)
    assert [p for _, p in z2.generators] == [(1, 0), (-1, 0), (0, 1), (0, -1)]
    f2 = make_group("free:2")
    assert f2.identity() == ()
    assert f2.generator_names == ("a", "A", "b", "B")
    g = make_group("grigorchuk")
    assert g.identity() == "e"
    for name in "abcd":
        s = g.generator(name)
        assert is_identity(s * s)


@pytest.mark.parametrize("spec", ["z:0", "free:0", "bs:1:1", "bs:2:3", "foo", "z:x", "z"])
def test_invalid_specs_rejected(spec):
    with pytest.raises(GroupSpecError):
        make_group(spec)


def test_multiply_examples():
    f2 = make_group("free:2")
    assert is_identity(f2.word("a") * f2.word("A"))
    z2 = make_group("z:2")
    assert (z2.parse("(1,0)") * z2.parse("(0,1)")).payload == (1, 1)
    lamp = make_group("lamplighter")
    assert (lamp.word("t") * lamp.word("t")).payload == ((), 2)


def test_family_mismatch():
    with pytest.raises(FamilyMismatchError):
        multiply(make_group("z:2").one, make_group("free:2").one)
    with pytest.raises(FamilyMismatchError):
        translate_path(make_group("z:2").one, [make_group("z:1").one])


def test_invert_examples():
    z2 = make_group("z:2")
    assert invert(z2.parse("(3,-1)")).payload == (-3, 1)
    f2 = make_group("free:2")
    assert str(invert(f2.word("ab"))) == "BA"
    bs = make_group("bs:1:2")
    assert invert(bs.parse("(1,1)")).payload == (-1, Fraction(-1, 2))


def test_is_identity_examples():
    g = make_group("grigorchuk")
    assert grigorchuk.word_is_identity("adadadad")
    assert not grigorchuk.word_is_identity("ab")
    assert is_identity(g.word("adadadad"))
    assert not is_identity(g.word("ab"))
    assert is_identity(make_group("free:2").word("aA"))


def test_grigorchuk_relations():
    g = make_group("grigorchuk")
    for w in ["aa", "bb", "cc", "dd", "bcd", "cbd", "bdc", "dbc", "cdb", "dcb", "ad" * 4]:
        assert grigorchuk.word_is_identity(w), w
        assert is_identity(g.word(w)), w
    assert g.word("bc") == g.word("d")
    assert g.word("bd") == g.word("c")
    assert g.word("cd") == g.word("b")
    # (ac)^8 = (ab)^16 = 1 and no smaller power vanishes
    assert grigorchuk.word_is_identity("ac" * 8) and not grigorchuk.word_is_identity("ac" * 4)
    assert grigorchuk.word_is_identity("ab" * 16) and not grigorchuk.word_is_identity("ab" * 8)


def test_grigorchuk_portrait_matches_word_oracle():
    rng = random.Random(7)
    for _ in range(3000):
        w = "".join(rng.choice("abcd") for _ in range(rng.randint(0, 24)))
        assert (grigorchuk.from_word(w) == "e") == grigorchuk.word_is_identity(w), w


def test_grigorchuk_equality_via_word_problem():
    # portraits equal iff g h^-1 is trivial by the word recursion
    rng = random.Random(11)
    words = ["".join(rng.choice("abcd") for _ in range(rng.randint(0, 10))) for _ in range(200)]
    for u, v in zip(words, words[1:]):
        same = grigorchuk.from_word(u) == grigorchuk.from_word(v)
        assert same == grigorchuk.word_is_identity(u + v[::-1])  # generators are involutions


def test_grigorchuk_reduction():
    assert grigorchuk.reduce_word("aa") == ""
    assert grigorchuk.reduce_word("abca") == "ada"
    assert grigorchuk.reduce_word("bcd") == ""
    w = grigorchuk.reduce_word("abcbdacadbcab")
    assert "aa" not in w and all(not (x in "bcd" and y in "bcd") for x, y in zip(w, w[1:]))


def test_portrait_roundtrip():
    g = make_group("grigorchuk")
    rng = random.Random(3)
    for _ in range(100):
        el = g.random_element(rng, 12)
        assert grigorchuk.parse_portrait(str(el)) == el.payload


@pytest.mark.parametrize("spec", FAMILIES)
def test_group_axioms(spec):
    group = make_group(spec)
    rng = random.Random(f"axioms:{spec}")
    e = group.one
    for _ in range(10_000):
        g, h, k = (group.random_element(rng, rng.randint(0, 8)) for _ in range(3))
        assert (g * h) * k == g * (h * k)
        assert is_identity(g * g.inverse())
        assert is_identity(g.inverse() * g)
        assert g * e == g == e * g


@pytest.mark.parametrize("spec", FAMILIES)
def test_random_relator_products_reduce(spec):
    # w * w^-1 written out letter by letter must land on the identity payload
    group = make_group(spec)
    rng = random.Random(f"relator:{spec}")
    table = dict(group.generators)
    for _ in range(300):
        letters = [rng.choice(group.generator_names) for _ in range(rng.randint(1, 12))]
        out = group.identity()
        for n in letters:
            out = group.mul(out, table[n])
        for n in reversed(letters):
            out = group.mul(out, group.inv(table[n]))
        assert out == group.identity()


@pytest.mark.parametrize("spec", FAMILIES)
def test_hash_follows_equality(spec):
    group = make_group(spec)
    rng = random.Random(f"hash:{spec}")
    seen = {}
    for _ in range(2000):
        g = group.random_element(rng, rng.randint(0, 6))
        seen.setdefault(g, set()).add(g.payload)
    assert all(len(v) == 1 for v in seen.values())


@given(st.lists(st.integers(-3, 3).filter(bool), max_size=30), st.lists(st.integers(-3, 3).filter(bool), max_size=30))
def test_free_reduction_idempotent(u, v):
    f3 = make_group("free:3")
    g = f3.mul(f3.mul(f3.identity(), tuple(u)), ())
    # payloads built from unreduced tuples are reduced by multiplying letters in
    def build(letters):
        out = ()
        for x in letters:
            out = f3.mul(out, (x,))
        return out
    gu, gv = build(u), build(v)
    prod = f3.mul(gu, gv)
    assert prod == build(list(gu) + list(gv))
    assert all(x != -y for x, y in zip(prod, prod[1:]))
    del g


@settings(max_examples=200)
@given(st.integers(-4, 4), st.integers(-40, 40), st.integers(0, 3), st.integers(-4, 4), st.integers(-40, 40), st.integers(0, 3))
def test_bs_matches_affine_maps(a1, n1, k1, a2, n2, k2):
    bs = make_group("bs:1:2")
    g = (a1, Fraction(n1, 2**k1))
    h = (a2, Fraction(n2, 2**k2))
    x = Fraction(3, 7)
    gx = lambda p, t: Fraction(2) ** p[0] * t + p[1]
    assert gx(bs.mul(g, h), x) == gx(g, gx(h, x))
    assert gx(bs.inv(g), gx(g, x)) == x


def test_translate_path_examples():
    z2 = make_group("z:2")
    out = translate_path(z2.parse("(2,3)"), [z2.parse("(2,3)"), z2.parse("(3,3)")])
    assert [p.payload for p in out] == [(0, 0), (1, 0)]
    f2 = make_group("free:2")
    out = translate_path(f2.word("ab"), [f2.word("ab"), f2.word("aba")])
    assert [str(p) for p in out] == ["e", "a"]
    for spec in FAMILIES:
        group = make_group(spec)
        path = [group.random_element(random.Random(spec), 5) for _ in range(3)]
        assert translate_path(group.one, path) == path


@pytest.mark.parametrize("spec", FAMILIES)
def test_translation_preserves_edges(spec):
    group = make_group(spec)
    rng = random.Random(f"edges:{spec}")
    for _ in range(200):
        g = group.random_element(rng, 6)
        x = group.random_element(rng, 6)
        s = group.generator(rng.choice(group.generator_names))
        tx, ty = translate_path(g, [x, x * s])
        assert tx * s == ty


def test_step_distribution_validation():
    z1 = make_group("z:1")
    d = weighted_steps(z1, {"a": "2/3", "A": "1/3"})
    assert d.min_prob == Fraction(1, 3)
    with pytest.raises(ValueError):
        weighted_steps(z1, {"a": "1/2", "A": "1/3"})
    with pytest.raises(ValueError):
        weighted_steps(z1, {"a": "3/2", "A": "-1/2"})
    with pytest.raises(ValueError):
        weighted_steps(z1, {"q": 1})
    assert uniform_steps(make_group("free:2")).min_prob == Fraction(1, 4)


def test_strong_connectedness_certificate():
    for spec in FAMILIES:
        uniform_steps(make_group(spec)).check_strongly_connected()
    z1 = make_group("z:1")
    with pytest.raises(StronglyConnectedError):
        uniform_steps(z1, ["a"]).check_strongly_connected()
    # non-symmetric but strongly connected: t, T and s generate the lamplighter group;
    # dropping T leaves only a semigroup that never moves left
    lamp = make_group("lamplighter")
    with pytest.raises(StronglyConnectedError):
        uniform_steps(lamp, ["t", "s"]).check_strongly_connected()
    words = uniform_steps(make_group("grigorchuk")).check_strongly_connected()
    assert words == {"a": "a", "b": "b", "c": "c", "d": "d"}


def test_non_symmetric_support_certificate():
    # Z^2 with steps a, b and the single "back" step AB: inverses exist as positive words
    z2 = make_group("z:2")
    from posharm.groups import StepDistribution

    back = z2.parse("(-1,-1)").payload
    d = StepDistribution(z2, ("a", "b", "c"), ((1, 0), (0, 1), back), (Fraction(1, 3),) * 3)
    words = d.check_strongly_connected()
    assert z2.word(words["a"].replace("c", "AB")).payload == (-1, 0)
