"""
Tests for the level-assignment family in src/enforce.py: ME_L runs,
the classification of each assignment and the pointwise comparison.
"""
import pytest

from src.dsl import DIVERGED, Outcome, get_program
from src.enforce import (
    ME,
    MEF,
    assignment_catalog,
    assignment_names,
    check_assignment,
    default_corpus,
    la_compare,
    la_const,
    la_from_enforcer,
    la_full,
    la_h_absent,
    la_label_intersect,
    la_level_program,
    la_output_labels,
    me,
    me_l,
    random_chooser,
    resolve_assignment,
)
from src.errors import ConfigError
from src.labeled import from_literal
from src.oracle import input_space


def out(text, spec):
    return Outcome.terminated(from_literal(text, spec.universe))


@pytest.fixture(scope="module")
def corpus():
    return default_corpus()


@pytest.fixture(scope="module")
def small_corpus():
    return default_corpus(["id", "leakBit", "termLeak", "divergeIfHPresent"])


# ─── single runs ──────────────────────────────────────────────────

class TestMeL:
    def test_output_labels_on_leak_level(self, two_point, lit):
        p = get_program("leakLevel")
        assert me_l(la_output_labels(), p, lit("{}"), two_point) == out("{0^{}}", two_point)
        assert me_l(la_output_labels(), p, lit("{0^H}"), two_point) == out("{}", two_point)

    def test_const_runs_nothing(self, two_point, lit):
        trace = []
        assert me_l(la_const(), get_program("id"), lit("{1^H}"), two_point, trace) == out("{}", two_point)
        assert trace == []

    def test_full_is_me(self, two_point):
        for name in ("leakBit", "divergeIfHPresent", "termLeak"):
            p = get_program(name)
            for x in input_space(two_point).inputs():
                assert me_l(la_full(), p, x, two_point) == me(p, x, two_point)

    def test_level_absent_levels(self, two_point, lit):
        p = get_program("id")
        assert la_h_absent().assign(p, lit("{}"), two_point).value == {two_point.universe.top}
        assert la_h_absent().assign(p, lit("{1^H}"), two_point).value == frozenset()

    def test_level_absent_on_h_absent(self, two_point, lit):
        p = get_program("divergeIfHAbsent")
        assert me_l(la_h_absent(), p, lit("{1^H}"), two_point) == out("{}", two_point)
        assert me_l(la_h_absent(), p, lit("{}"), two_point) == DIVERGED

    def test_from_mef_reads_output_labels(self, abc):
        x = from_literal("{1^{Alice}}", abc.universe)
        levels = la_from_enforcer(MEF).assign(get_program("combine"), x, abc)
        assert levels.value == {abc.universe.top}

    def test_from_enforcer_propagates_divergence(self, two_point, lit):
        assert la_from_enforcer(ME).assign(get_program("divergeIfHAbsent"), lit("{}"), two_point) == DIVERGED

    def test_label_intersect_stays_in_closure(self, abc):
        x = from_literal("{1^{Alice}, 1^{Bob}}", abc.universe)
        levels = la_label_intersect().assign(get_program("id"), x, abc).value
        assert len(levels) == 4 and abc.universe.top not in levels


class TestChooser:
    def test_repeatable_per_program(self, abc):
        p = get_program("combine")
        assert random_chooser(7)(p, abc.universe) == random_chooser(7)(p, abc.universe)

    def test_subset_of_lattice(self, abc):
        chosen = random_chooser(3)(get_program("id"), abc.universe)
        assert chosen <= set(abc.universe.all_labels())


class TestLevelProgram:
    def test_outputs_zero_at_each_level(self, two_point, lit):
        lp = la_level_program(la_h_absent(), get_program("id"))
        assert lp.run(lit("{}"), two_point) == out("{0^H}", two_point)
        assert lp.name == "L:level-absent[id]"

    def test_undefined_levels_propagate(self, two_point, lit):
        lp = la_level_program(la_output_labels(), get_program("termLeak"))
        assert lp.run(lit("{}"), two_point) == DIVERGED


# ─── classification ───────────────────────────────────────────────

class TestCheckAssignment:
    def test_output_labels_insecure(self, corpus):
        report = check_assignment(la_output_labels(), corpus)
        assert report.security == "insecure"
        assert report.row("leakLevel").enforced.security == "insecure"
        assert not report.levels_noninterfering

    def test_label_intersect_mt_secure(self, corpus):
        report = check_assignment(la_label_intersect(), corpus)
        assert all(r.enforced.is_secure("MT") for r in report.rows)
        assert report.witness is None

    @pytest.mark.parametrize("seed", range(20))
    def test_random_intersection_stays_secure(self, seed):
        entries = default_corpus(["leakBit", "leakAll", "combineAll", "divergeIfHPresent"])
        L = la_label_intersect(random_chooser(seed), "label-intersect-random")
        report = check_assignment(L, entries)
        assert all(r.enforced.is_secure("MT") for r in report.rows)

    def test_level_absent_breaks_mt_on_h_absent(self, corpus, two_point):
        report = check_assignment(la_h_absent(), corpus)
        row = report.row("divergeIfHAbsent")
        assert not row.enforced.is_secure("MT")
        w = row.enforced.mt.witness
        assert w.level == two_point.universe.bottom
        assert w.x.equiv(w.y, w.level)
        assert w.out_x.defined != w.out_y.defined
        assert report.levels_noninterfering

    def test_from_mef_secure_and_transparent(self, corpus):
        report = check_assignment(la_from_enforcer(MEF), corpus)
        assert all(r.enforced.ni.holds for r in report.rows)
        assert report.mt_transparent
        assert report.levels_match_outputs

    def test_row_lookup(self, small_corpus):
        report = check_assignment(la_full(), small_corpus)
        with pytest.raises(KeyError):
            report.row("combine")

    def test_report_json(self, small_corpus):
        data = check_assignment(la_const(), small_corpus).to_dict()
        assert data["assignment"] == "const-empty"
        assert data["security"] == "Total-secure"
        assert [r["program"] for r in data["rows"]] == ["id", "leakBit", "termLeak", "divergeIfHPresent"]


class TestCompare:
    def test_constant_empty_is_minimal(self, small_corpus):
        report = la_compare([la_full(), la_const()], small_corpus)
        assert report.minimal == ["const-empty"]
        assert report.sizes["const-empty"] == 0

    def test_singleton_family(self, small_corpus):
        assert la_compare([la_full()], small_corpus).minimal == ["full"]

    def test_divergent_member_is_reported(self, small_corpus):
        report = la_compare([la_from_enforcer(ME), la_const()], small_corpus)
        assert report.divergent == ["from-me"]
        assert report.minimal == ["const-empty"]


class TestResolveAssignment:
    def test_catalog(self):
        assert len(assignment_catalog()) == 9
        assert assignment_catalog(seed=3)[2].name == "label-intersect-random"

    def test_names_include_random(self):
        assert "label-intersect-random" in assignment_names()

    def test_resolve(self):
        assert resolve_assignment("level-absent").name == "level-absent"

    def test_unknown_suggests(self):
        with pytest.raises(ConfigError, match="level-absent"):
            resolve_assignment("level-absnt")
