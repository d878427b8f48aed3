"""
Tests for src/labeled.py — labeled-set algebra and the literal syntax.
"""
import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.errors import ConfigError, ParseError, UnknownPrincipalError
from src.labeled import (
    LabeledSet,
    LabeledValue,
    equiv,
    from_literal,
    literal_principals,
    parse_literal,
    project,
    to_input,
)
from src.lattice import PrincipalUniverse

HL = PrincipalUniverse(("H",))
ABC = PrincipalUniverse(("Alice", "Bob", "Charlie"))
L_, H_ = HL.bottom, HL.top

atoms_abc = st.builds(LabeledValue, st.integers(0, 2), st.sampled_from(ABC.all_labels()))
sets_abc = st.frozensets(atoms_abc, max_size=6).map(lambda e: LabeledSet(ABC, e))
labels_abc = st.sampled_from(ABC.all_labels())


# ─── projection & selection ───────────────────────────────────────

class TestProjection:
    def test_secret_hidden_at_bottom(self):
        assert from_literal("{1^H}", HL).project(L_) == LabeledSet.empty(HL)

    def test_self_projection(self):
        x = from_literal("{1^{Alice}, 2^{Bob,Charlie}}", ABC)
        assert x.project(x.join_label()) == x

    def test_subset_filter(self):
        x = from_literal("{1^{Alice}, 2^{Bob}}", ABC)
        assert project(x, ABC.label(["Alice"])) == from_literal("{1^{Alice}}", ABC)

    @given(sets_abc, labels_abc)
    def test_idempotent_and_shrinking(self, x, l):
        once = x.project(l)
        assert once.project(l) == once
        assert once.issubset(x)

    @given(sets_abc, labels_abc)
    def test_projection_is_union_of_selections(self, x, l):
        below = [j for j in ABC.all_labels() if j.leq(l)]
        assert x.project(l) == x.select_set(below)

    @given(sets_abc)
    def test_bottom_projection_is_bottom_selection(self, x):
        assert x.project(ABC.bottom) == x.select(ABC.bottom)

    @given(sets_abc, labels_abc, labels_abc)
    def test_monotone(self, x, a, b):
        if a.leq(b):
            assert x.project(a).issubset(x.project(b))


class TestSelection:
    def test_exact_label_only(self):
        x = from_literal("{1^H}", HL)
        assert x.select(L_) == LabeledSet.empty(HL)
        assert x.select(H_) == x

    def test_select_set_empty(self):
        assert from_literal("{1^H, 0^{}}", HL).select_set([]) == LabeledSet.empty(HL)


class TestLabels:
    def test_empty(self):
        assert LabeledSet.empty(ABC).labels() == frozenset()

    def test_dedup(self):
        assert from_literal("{1^{Alice}, 2^{Alice}}", ABC).labels() == {ABC.label(["Alice"])}

    def test_to_input(self):
        u = PrincipalUniverse(("1", "2"))
        assert to_input(["1", "2"], u).labels() == {u.label(["1"]), u.label(["2"])}

    def test_join_label_of_empty_is_bottom(self):
        assert LabeledSet.empty(ABC).join_label() == ABC.bottom


# ─── equivalence ──────────────────────────────────────────────────

class TestEquiv:
    def test_hidden_zero(self):
        assert equiv(LabeledSet.empty(HL), from_literal("{0^H}", HL), L_)
        assert not equiv(LabeledSet.empty(HL), from_literal("{0^H}", HL), H_)

    def test_to_input_subsets(self):
        u = PrincipalUniverse(("1", "2", "3"))
        s_prime = u.label(["1", "3"])
        assert to_input(["1", "2", "3"], u).equiv(to_input(["1", "3"], u), s_prime)

    @given(sets_abc, sets_abc, sets_abc, labels_abc)
    def test_equivalence_relation(self, x, y, z, l):
        assert x.equiv(x, l)
        assert x.equiv(y, l) == y.equiv(x, l)
        if x.equiv(y, l) and y.equiv(z, l):
            assert x.equiv(z, l)


# ─── set views ────────────────────────────────────────────────────

class TestViews:
    def test_canonical_order(self):
        x = from_literal("{1^{Bob}, 0^{Charlie}, 1^{Alice}, 0^{}}", ABC)
        assert str(x) == "{0^{}, 0^{Charlie}, 1^{Alice}, 1^{Bob}}"

    def test_json_values_are_strings(self):
        assert from_literal("{1^H}", HL).to_json() == [{"value": "1", "label": ["H"]}]

    def test_from_json(self):
        x = LabeledSet.from_json([{"value": "1", "label": ["Alice", "Bob"]}], ABC)
        assert x == from_literal("{1^{Alice,Bob}}", ABC)

    @pytest.mark.parametrize("data", [
        {"value": "1"},
        [{"value": "1"}],
        [{"value": "x", "label": []}],
        [{"value": -1, "label": []}],
    ])
    def test_from_json_rejects(self, data):
        with pytest.raises(ConfigError):
            LabeledSet.from_json(data, ABC)

    def test_relabel(self):
        x = from_literal("{1^H, 0^H}", HL)
        assert x.relabel(L_) == from_literal("{0^{}, 1^{}}", HL)

    def test_len_and_contains(self):
        x = from_literal("{1^H, 1^H}", HL)
        assert len(x) == 1
        assert LabeledValue(1, H_) in x


# ─── literal syntax ───────────────────────────────────────────────

class TestLiteral:
    def test_braced_and_bare_labels(self):
        assert parse_literal("{1^{H}, 0^H, 2^{}}") == [(1, ("H",)), (0, ("H",)), (2, ())]

    def test_empty_set(self):
        assert parse_literal(" { } ") == []

    @pytest.mark.parametrize("text", ["{1^H} ", "\t{1^H}\n", "{ 1 ^ { H } }  "])
    def test_surrounding_whitespace(self, text):
        assert parse_literal(text) == [(1, ("H",))]

    def test_numeric_principals(self):
        assert parse_literal("{1^{1,4}}") == [(1, ("1", "4"))]

    def test_principals_in_order_of_appearance(self):
        assert literal_principals(parse_literal("{1^{Bob}, 2^{Alice,Bob}}")) == ["Bob", "Alice"]

    def test_unknown_principal(self):
        with pytest.raises(UnknownPrincipalError):
            from_literal("{1^{Mallory}}", ABC)

    @pytest.mark.parametrize("text,col", [
        ("{1^H", 5),
        ("{^H}", 2),
        ("{1^H}}", 6),
        ("1^H", 1),
    ])
    def test_errors_carry_column(self, text, col):
        with pytest.raises(ParseError) as info:
            parse_literal(text)
        assert info.value.col == col
