"""
Tests for src/oracle.py — input enumeration, NI and termination checks,
and the classification table of the example programs.
"""
import pytest

from src.dsl import get_program, parse
from src.errors import ConfigError, GuardError, InconclusiveError
from src.labeled import LabeledSet
from src.oracle import (
    InputSpace,
    OutcomeTable,
    UniverseSpec,
    check_mt,
    check_ni,
    check_total,
    check_ts,
    classify,
    evaluate_space,
    input_space,
    weakest_security,
)

# program -> (ni, termination, security)
TABLE = {
    "id": (True, "Total", "Total-secure"),
    "combine": (True, "Total", "Total-secure"),
    "combineAll": (False, "Total", "insecure"),
    "leakBit": (False, "Total", "insecure"),
    "leakAll": (False, "Total", "insecure"),
    "termLeak": (True, "TI", "TI-secure"),
    "divergeIfLPresent": (True, "TS", "TS-secure"),
    "divergeIfHPresent": (True, "MT", "MT-secure"),
    "divergeIfHAbsent": (True, "TI", "TI-secure"),
}


def spec_for(name, two_point, abc_unit):
    return abc_unit if name in ("combine", "combineAll") else two_point


# ─── input space ──────────────────────────────────────────────────

class TestInputSpace:
    def test_atom_order(self, two_point):
        space = input_space(two_point)
        assert [str(a) for a in space.atoms] == ["0^{}", "0^{H}", "1^{}", "1^{H}"]

    def test_enumeration_by_cardinality(self, two_point):
        sizes = [len(x) for x in input_space(two_point).inputs()]
        assert len(sizes) == 16
        assert sizes == sorted(sizes)

    def test_first_inputs(self, two_point, lit):
        inputs = list(input_space(two_point).inputs())
        assert inputs[:3] == [lit("{}"), lit("{0^{}}"), lit("{0^H}")]

    def test_mask_round_trip(self, two_point, lit):
        space = input_space(two_point)
        x = lit("{1^H, 0^{}}")
        assert space.to_set(space.mask_of(x)) == x

    def test_mask_of_outside_values(self, two_point, lit):
        with pytest.raises(ConfigError, match="outside"):
            input_space(two_point).mask_of(lit("{7^H}"))

    def test_guard(self, abc):
        with pytest.raises(GuardError, match="16 atoms"):
            InputSpace(abc.universe, abc.values, max_atoms=10)

    def test_class_members_share_projection(self, two_point, lit):
        space = input_space(two_point)
        L = two_point.universe.bottom
        base = lit("{1^{}}")
        members = list(space.class_members(base, L))
        assert len(members) == 4
        assert members[0] == base
        assert all(m.project(L) == base for m in members)

    def test_class_members_take_outside_atoms(self, two_point, lit):
        space = input_space(two_point)
        L = two_point.universe.bottom
        members = list(space.class_members(lit("{}"), L, extra=lit("{5^H, 1^H, 7^{}}").elements))
        assert len(members) == 8
        assert members[:4] == [lit("{}"), lit("{0^H}"), lit("{1^H}"), lit("{5^H}")]
        assert lit("{7^{}}") not in members

    def test_cached(self, two_point):
        assert input_space(two_point) is input_space(two_point)


class TestUniverseSpec:
    def test_values_required(self):
        with pytest.raises(ConfigError):
            UniverseSpec.of(["H"], values=())

    def test_fuel_positive(self):
        with pytest.raises(ConfigError):
            UniverseSpec.of(["H"], fuel=0)

    def test_with_fuel(self, two_point):
        assert two_point.with_fuel(5).fuel == 5
        assert two_point.with_fuel(5).universe == two_point.universe


# ─── individual checks ────────────────────────────────────────────

class TestCheckNI:
    def test_combine_all_witness(self, two_point, lit):
        verdict = check_ni(get_program("combineAll"), two_point)
        assert not verdict
        w = verdict.witness
        assert w.level == two_point.universe.bottom
        assert (w.x, w.y) == (lit("{}"), lit("{0^H}"))

    def test_witness_reevaluates(self, two_point):
        p = get_program("leakBit")
        w = check_ni(p, two_point).witness
        assert w.x.equiv(w.y, w.level)
        assert not p.run(w.x, two_point).value.equiv(p.run(w.y, two_point).value, w.level)

    @pytest.mark.parametrize("name", ["id", "termLeak", "divergeIfHAbsent"])
    def test_noninterfering(self, name, two_point):
        assert check_ni(get_program(name), two_point).holds


class TestTerminationChecks:
    def test_h_present_is_mt_not_ts(self, two_point, lit):
        p = get_program("divergeIfHPresent")
        assert check_mt(p, two_point)
        ts = check_ts(p, two_point)
        assert not ts
        assert (ts.witness.x, ts.witness.y) == (lit("{}"), lit("{1^H}"))
        assert ts.witness.out_x.defined and ts.witness.out_y.diverged

    def test_h_absent_mt_witness(self, two_point, lit):
        mt = check_mt(get_program("divergeIfHAbsent"), two_point)
        assert not mt
        assert (mt.witness.x, mt.witness.y) == (lit("{1^H}"), lit("{}"))
        assert mt.witness.level == two_point.universe.bottom

    def test_l_present_is_ts(self, two_point):
        p = get_program("divergeIfLPresent")
        assert check_ts(p, two_point)
        assert not check_total(p, two_point)

    def test_total_witness_is_first_diverging_input(self, two_point, lit):
        total = check_total(get_program("termLeak"), two_point)
        assert total.witness.x == lit("{}")

    def test_fuel_exhaustion_is_inconclusive(self, two_point):
        with pytest.raises(InconclusiveError) as info:
            check_total(get_program("leakBit"), two_point.with_fuel(2))
        assert info.value.input_set == LabeledSet.empty(two_point.universe)


# ─── classification ───────────────────────────────────────────────

class TestClassify:
    @pytest.mark.parametrize("name", list(TABLE))
    def test_table_row(self, name, two_point, abc_unit):
        report = classify(get_program(name), spec_for(name, two_point, abc_unit))
        assert (report.ni.holds, report.termination, report.security) == TABLE[name]
        assert report.chain_consistent

    def test_combine_on_full_three_principal_universe(self, abc):
        report = classify(get_program("combine"), abc)
        assert report.security == "Total-secure"
        assert report.inputs == 2 ** 16

    def test_empty_is_total_secure(self, two_point):
        assert classify(get_program("empty"), two_point).security == "Total-secure"

    def test_leak_level_interferes_at_bottom(self, two_point, lit):
        report = classify(get_program("leakLevel"), two_point)
        assert report.security == "insecure"
        assert (report.ni.witness.x, report.ni.witness.y) == (lit("{}"), lit("{0^H}"))

    def test_report_json(self, two_point):
        data = classify(get_program("divergeIfHPresent"), two_point).to_dict()
        assert data["security"] == "MT-secure"
        assert data["ni"] is True and data["witness"] is None
        assert set(data["termination_witnesses"]) == {"Total", "TS"}

    @pytest.mark.parametrize("criterion,expected", [("TI", True), ("MT", True), ("TS", False), ("Total", False)])
    def test_is_secure(self, criterion, expected, two_point):
        report = classify(get_program("divergeIfHPresent"), two_point)
        assert report.is_secure(criterion) is expected

    def test_parallel_matches_sequential(self, two_point):
        p = parse("fun(x) -> if member(0, {H}, x) then diverge else project(x, {})")
        sequential = classify(p, two_point).to_dict()
        parallel = classify(p, UniverseSpec(two_point.universe, two_point.values, workers=4)).to_dict()
        assert parallel == sequential


class TestOutcomeTable:
    def test_memoizes(self, two_point):
        table = evaluate_space(get_program("id"), two_point)
        assert len(table) == 16

    def test_lazy_until_asked(self, two_point):
        table = OutcomeTable(get_program("id"), two_point)
        table.outcome(0)
        assert len(table) == 1

    def test_flags_and_live_are_computed_once(self, two_point):
        table = OutcomeTable(get_program("divergeIfHPresent"), two_point)
        flags = table.flags()
        assert table.flags() is flags and table.live() is table.live()
        assert sum(flags) == len(table.live()) == 8
        assert all(flags[mask] and out.defined for mask, out in table.live())


class TestWeakestSecurity:
    def test_weakest(self):
        assert weakest_security(["Total-secure", "MT-secure", "TS-secure"]) == "MT-secure"

    def test_insecure_dominates(self):
        assert weakest_security(["TI-secure", "insecure"]) == "insecure"

    def test_empty(self):
        assert weakest_security([]) == "Total-secure"
