"""
Enforcement Mechanisms
Multi-execution (ME), its closure-set variant (MEF), the termination-search
variant (MEST), level-assignment multi-execution (ME_L) with the assignment
catalog, and corpus-level checks of security and transparency.
"""
import concurrent.futures
import logging
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from src.config import load_universe
from src.dsl import Outcome, Program, catalog_entry, catalog_names, get_program, is_empty_program
from src.errors import ConfigError, DovetailExhaustedError, InconclusiveError, UniverseMismatchError
from src.labeled import LabeledSet, LabeledValue
from src.lattice import Label, PrincipalUniverse, closure_set, neighborhood_owner
from src.oracle import (
    ClassificationReport,
    OutcomeTable,
    UniverseSpec,
    classify,
    input_space,
    weakest_security,
)
from src.utils import suggest

logger = logging.getLogger(__name__)

# A sub-run's output is filtered down to what this level may contribute.
Picker = Callable[[LabeledSet, Label], LabeledSet]
Trace = Optional[List["SubRun"]]


@dataclass(frozen=True)
class SubRun:
    level: Label
    input: LabeledSet
    outcome: Outcome

    def to_json(self) -> Dict[str, Any]:
        return {"label": self.level.to_json(), "input": self.input.to_json(), **self.outcome.to_json()}


def _spec_for(x: LabeledSet, spec: Optional[UniverseSpec]) -> UniverseSpec:
    if spec is None:
        return UniverseSpec(x.universe)
    if spec.universe != x.universe:
        raise UniverseMismatchError(
            f"input universe {list(x.universe.principals)} differs from {list(spec.universe.principals)}"
        )
    return spec


def _select_at(out: LabeledSet, level: Label) -> LabeledSet:
    return out.select(level)


def _neighborhood_picker(generators: FrozenSet[Label]) -> Picker:
    """Keeps the output elements whose label lies in level's upward neighborhood of C(generators)."""
    def pick(out: LabeledSet, level: Label) -> LabeledSet:
        return LabeledSet(out.universe, frozenset(
            e for e in out.elements if neighborhood_owner(e.label, generators) == level
        ))
    return pick


def _multi_execute(p: Program, x: LabeledSet, levels: Sequence[Label], pick: Picker,
                   spec: UniverseSpec, trace: Trace) -> Outcome:
    """
    Runs p on x|l for each level in order and unions the picked outputs.
    The first sub-run that does not terminate decides the outcome.
    """
    inputs = [x.project(l) for l in levels]
    if spec.workers > 1 and len(levels) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=spec.workers) as pool:
            outcomes: Iterable[Outcome] = list(pool.map(lambda y: p.run(y, spec), inputs))
    else:
        outcomes = (p.run(y, spec) for y in inputs)

    result = LabeledSet.empty(x.universe)
    for level, y, out in zip(levels, inputs, outcomes):
        if trace is not None:
            trace.append(SubRun(level, y, out))
        if not out.defined:
            logger.debug(f"{p.name} sub-run at {level} ended {out.kind.value}")
            return out
        result = result.union(pick(out.value, level))
    return Outcome.terminated(result)

# -------------------------
# Mechanisms
# -------------------------

def me(p: Program, x: LabeledSet, spec: Optional[UniverseSpec] = None, trace: Trace = None) -> Outcome:
    """Multi-execution: one run per lattice label, keeping each run's output at exactly that label."""
    spec = _spec_for(x, spec)
    return _multi_execute(p, x, x.universe.all_labels(), _select_at, spec, trace)


def mef(p: Program, x: LabeledSet, spec: Optional[UniverseSpec] = None, trace: Trace = None,
        neighborhood: bool = True) -> Outcome:
    """
    Multi-execution over C(L(x)) only. Each run keeps the outputs in its
    upward neighborhood; neighborhood=False keeps exact-label outputs instead,
    which is not equivalent to ME and exists for regression checks.
    """
    spec = _spec_for(x, spec)
    generators = x.labels()
    levels = sorted(closure_set(generators, x.universe))
    pick = _neighborhood_picker(generators) if neighborhood else _select_at
    return _multi_execute(p, x, levels, pick, spec, trace)


def _dovetail(p: Program, x: LabeledSet, l: Label, spec: UniverseSpec) -> Tuple[LabeledSet, Outcome]:
    """
    Scans the l-equivalence class of x|l in canonical order for the first
    terminating candidate. A candidate that exhausts fuel stops the scan.
    """
    space = input_space(spec)
    for y in space.class_members(x.project(l), l, extra=x.elements):
        out = p.run(y, spec)
        if out.defined or out.exhausted:
            return y, out
    raise DovetailExhaustedError(f"no input equivalent to {x.project(l)} at {l} makes {p.name} terminate")


def dovetail_first(p: Program, x: LabeledSet, l: Label, spec: UniverseSpec) -> LabeledSet:
    spec = _spec_for(x, spec)
    y, out = _dovetail(p, x, l, spec)
    if out.exhausted:
        raise InconclusiveError(f"{p.name} exhausted its fuel on dovetail candidate {y}", y)
    return y


def mest(p: Program, x: LabeledSet, spec: Optional[UniverseSpec] = None, trace: Trace = None) -> Outcome:
    """
    Multi-execution search for termination: diverges exactly when p(x) does;
    otherwise each level of C(L(x)) runs p on the first terminating input
    equivalent to x at that level.
    """
    spec = _spec_for(x, spec)
    direct = p.run(x, spec)
    if not direct.defined:
        return direct

    generators = x.labels()
    pick = _neighborhood_picker(generators)
    result = LabeledSet.empty(x.universe)
    for level in sorted(closure_set(generators, x.universe)):
        y, out = _dovetail(p, x, level, spec)
        if trace is not None:
            trace.append(SubRun(level, y, out))
        if not out.defined:
            return out
        result = result.union(pick(out.value, level))
    return Outcome.terminated(result)


def mech_identity(p: Program, x: LabeledSet, spec: Optional[UniverseSpec] = None, trace: Trace = None) -> Outcome:
    return p.run(x, _spec_for(x, spec))


def mech_empty(p: Program, x: LabeledSet, spec: Optional[UniverseSpec] = None, trace: Trace = None) -> Outcome:
    return Outcome.terminated(LabeledSet.empty(x.universe))


@dataclass(frozen=True)
class Mechanism:
    tag: str
    fn: Callable[..., Outcome] = field(compare=False)

    def __call__(self, p: Program, x: LabeledSet, spec: Optional[UniverseSpec] = None,
                 trace: Trace = None) -> Outcome:
        return self.fn(p, x, spec, trace)


@dataclass(frozen=True)
class EnforcedProgram:
    """E[p]: runnable by the oracle like any program."""
    mechanism: Mechanism
    program: Program

    @property
    def name(self) -> str:
        return f"{self.mechanism.tag}[{self.program.name}]"

    def run(self, x: LabeledSet, spec: Optional[UniverseSpec] = None, trace: Trace = None) -> Outcome:
        return self.mechanism(self.program, x, spec, trace)


ME = Mechanism("me", me)
MEF = Mechanism("mef", mef)
MEST = Mechanism("mest", mest)
IDENTITY = Mechanism("id", mech_identity)
EMPTY = Mechanism("empty", mech_empty)
MECHANISMS: Dict[str, Mechanism] = {m.tag: m for m in (ME, MEF, MEST, IDENTITY, EMPTY)}

# -------------------------
# Level Assignments
# -------------------------

@dataclass(frozen=True)
class LevelAssignment:
    """L(p, x): the set of levels to multi-execute at. Partial."""
    name: str
    fn: Callable[[Program, LabeledSet, Optional[UniverseSpec]], Outcome] = field(compare=False)

    def assign(self, p: Program, x: LabeledSet, spec: Optional[UniverseSpec] = None) -> Outcome:
        return self.fn(p, x, spec)


def me_l(L: LevelAssignment, p: Program, x: LabeledSet, spec: Optional[UniverseSpec] = None,
         trace: Trace = None) -> Outcome:
    spec = _spec_for(x, spec)
    levels = L.assign(p, x, spec)
    if not levels.defined:
        return levels
    return _multi_execute(p, x, sorted(levels.value), _select_at, spec, trace)


def me_l_mechanism(L: LevelAssignment) -> Mechanism:
    return Mechanism(f"mel:{L.name}", lambda p, x, spec=None, trace=None: me_l(L, p, x, spec, trace))


def _levels(labels: Iterable[Label]) -> Outcome:
    return Outcome.terminated(frozenset(labels))


def la_output_labels() -> LevelAssignment:
    """L(p, x) = L(p(x))."""
    def assign(p, x, spec):
        out = p.run(x, spec)
        return _levels(out.value.labels()) if out.defined else out
    return LevelAssignment("output-labels", assign)


Chooser = Callable[[Program, PrincipalUniverse], FrozenSet[Label]]


def full_chooser(p: Program, universe: PrincipalUniverse) -> FrozenSet[Label]:
    return frozenset(universe.all_labels())


def random_chooser(seed: int) -> Chooser:
    """A total L'(p) that keeps each label with probability 1/2, fixed per (seed, program)."""
    def choose(p: Program, universe: PrincipalUniverse) -> FrozenSet[Label]:
        rng = random.Random(f"{seed}:{p.source}")
        return frozenset(l for l in universe.all_labels() if rng.random() < 0.5)
    return choose


def la_label_intersect(chooser: Chooser = full_chooser, name: str = "label-intersect") -> LevelAssignment:
    """L(p, x) = C(L(x)) intersected with L'(p) for a total L'."""
    def assign(p, x, spec):
        return _levels(closure_set(x.labels(), x.universe) & chooser(p, x.universe))
    return LevelAssignment(name, assign)


def _distinguished(universe: PrincipalUniverse, names: Optional[Sequence[str]]) -> Label:
    return universe.top if names is None else universe.label(names)


def la_empty_nonpointwise(level_names: Optional[Sequence[str]] = None) -> LevelAssignment:
    """
    For the empty program only: no levels if the distinguished level occurs
    in L(x), else {bottom}. Every other program gets no levels.
    """
    def assign(p, x, spec):
        if not is_empty_program(p):
            return _levels(())
        level = _distinguished(x.universe, level_names)
        return _levels(() if level in x.labels() else (x.universe.bottom,))
    return LevelAssignment("empty-nonpointwise", assign)


def la_level_absent(level_names: Optional[Sequence[str]] = None) -> LevelAssignment:
    """L(p, x) = {H | H not in L(x)} for the distinguished level H."""
    def assign(p, x, spec):
        level = _distinguished(x.universe, level_names)
        return _levels(() if level in x.labels() else (level,))
    return LevelAssignment("level-absent", assign)


# The distinguished-level example is usually stated with H, the top of the two-point lattice.
la_h_absent = la_level_absent


def la_from_enforcer(mechanism: Mechanism) -> LevelAssignment:
    """L_E(p, x) = L(E[p](x))."""
    def assign(p, x, spec):
        out = mechanism(p, x, spec)
        return _levels(out.value.labels()) if out.defined else out
    return LevelAssignment(f"from-{mechanism.tag}", assign)


def la_full() -> LevelAssignment:
    return LevelAssignment("full", lambda p, x, spec: _levels(x.universe.all_labels()))


def la_const(levels: Iterable[Label] = (), name: str = "const-empty") -> LevelAssignment:
    fixed = frozenset(levels)
    return LevelAssignment(name, lambda p, x, spec: _levels(fixed))


def assignment_catalog(seed: Optional[int] = None) -> List[LevelAssignment]:
    family = [
        la_output_labels(),
        la_label_intersect(),
        la_empty_nonpointwise(),
        la_level_absent(),
        la_from_enforcer(ME),
        la_from_enforcer(MEF),
        la_from_enforcer(MEST),
        la_full(),
        la_const(),
    ]
    if seed is not None:
        family.insert(2, la_label_intersect(random_chooser(seed), "label-intersect-random"))
    return family


def assignment_names() -> List[str]:
    return [a.name for a in assignment_catalog(seed=0)]


def resolve_assignment(name: str, seed: int = 0) -> LevelAssignment:
    for a in assignment_catalog(seed):
        if a.name == name:
            return a
    raise ConfigError(f"unknown level assignment '{name}'", suggest(name, assignment_names()))


def resolve_mechanism(selector: str, seed: int = 0) -> Mechanism:
    """'me', 'mef', 'mest', 'id', 'empty' or 'mel:<assignment>'."""
    if selector.startswith("mel:"):
        return me_l_mechanism(resolve_assignment(selector[4:], seed))
    if selector in MECHANISMS:
        return MECHANISMS[selector]
    known = list(MECHANISMS) + [f"mel:{n}" for n in assignment_names()]
    raise ConfigError(f"unknown mechanism '{selector}'", suggest(selector, known))


@dataclass(frozen=True)
class LevelProgram:
    """lambda x. L(p, x) as a labeled-set program: {0^l | l in L(p, x)}."""
    assignment: LevelAssignment
    program: Program

    @property
    def name(self) -> str:
        return f"L:{self.assignment.name}[{self.program.name}]"

    def run(self, x: LabeledSet, spec: Optional[UniverseSpec] = None) -> Outcome:
        levels = self.assignment.assign(self.program, x, spec)
        if not levels.defined:
            return levels
        return Outcome.terminated(LabeledSet(x.universe, frozenset(LabeledValue(0, l) for l in levels.value)))


def la_level_program(L: LevelAssignment, p: Program) -> LevelProgram:
    return LevelProgram(L, p)

# -------------------------
# Corpus Checks
# -------------------------

@dataclass(frozen=True)
class CorpusEntry:
    program: Program
    spec: UniverseSpec


def default_corpus(names: Optional[Sequence[str]] = None, fuel: Optional[int] = None) -> List[CorpusEntry]:
    """Catalog programs on their check universes (small enough for exhaustive sweeps)."""
    entries = []
    for name in names or catalog_names():
        entry = catalog_entry(name)
        spec = load_universe(entry.get("check_universe", entry["universe"]))
        if fuel is not None:
            spec = spec.with_fuel(fuel)
        entries.append(CorpusEntry(get_program(name), spec))
    return entries


def _outcome_pair(a: OutcomeTable, b: OutcomeTable, mask: int) -> Tuple[Outcome, Outcome]:
    a.defined(mask)
    b.defined(mask)
    return a.outcome(mask), b.outcome(mask)


def _first_difference(a: OutcomeTable, b: OutcomeTable) -> Optional[Dict[str, Any]]:
    for mask in a.space.masks():
        out_a, out_b = _outcome_pair(a, b, mask)
        if out_a != out_b:
            return {"input": a.space.to_set(mask).to_json(), "expected": out_a.to_json(), "actual": out_b.to_json()}
    return None


@dataclass
class MechanismRow:
    program: str
    base: ClassificationReport
    enforced: ClassificationReport
    difference: Optional[Dict[str, Any]]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "program": self.program,
            "program_security": self.base.security,
            "enforced": self.enforced.to_dict(),
            "preserved": self.difference is None,
            "difference": self.difference,
        }


@dataclass
class MechanismReport:
    mechanism: str
    rows: List[MechanismRow]

    @property
    def security(self) -> str:
        return weakest_security([r.enforced.security for r in self.rows])

    def preserves(self, criterion: str) -> bool:
        """E[p] = p, definedness included, for every criterion-secure corpus program."""
        return all(r.difference is None for r in self.rows if r.base.is_secure(criterion))

    @property
    def transparency(self) -> str:
        for criterion in ("TI", "MT", "TS", "Total"):
            if self.preserves(criterion):
                return criterion
        return "none"

    @property
    def transparency_witness(self) -> Optional[Dict[str, Any]]:
        for r in self.rows:
            if r.difference is not None and r.base.ni:
                return {"program": r.program, **r.difference}
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mechanism": self.mechanism,
            "security": self.security,
            "transparency": self.transparency,
            "transparency_witness": self.transparency_witness,
            "rows": [r.to_dict() for r in self.rows],
        }


def check_mechanism(E: Mechanism, corpus: Optional[List[CorpusEntry]] = None) -> MechanismReport:
    rows = []
    for entry in corpus if corpus is not None else default_corpus():
        enforced = EnforcedProgram(E, entry.program)
        base_table = OutcomeTable(entry.program, entry.spec)
        enforced_table = OutcomeTable(enforced, entry.spec)
        rows.append(MechanismRow(
            program=entry.program.name,
            base=classify(entry.program, entry.spec),
            enforced=classify(enforced, entry.spec),
            difference=_first_difference(base_table, enforced_table),
        ))
    report = MechanismReport(E.tag, rows)
    logger.info(f"Mechanism {E.tag}: {report.security} / {report.transparency}-transparent")
    return report


@dataclass
class AssignmentRow:
    program: str
    base: ClassificationReport
    enforced: ClassificationReport
    level_program: ClassificationReport
    levels_match_output: Optional[bool]
    difference: Optional[Dict[str, Any]]

    @property
    def mt_preserved(self) -> Optional[bool]:
        if not self.base.is_secure("MT"):
            return None
        return self.difference is None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "program": self.program,
            "program_security": self.base.security,
            "enforced": self.enforced.to_dict(),
            "level_program_security": self.level_program.security,
            "levels_noninterfering": self.level_program.ni.holds,
            "levels_match_output": self.levels_match_output,
            "mt_preserved": self.mt_preserved,
            "difference": self.difference,
        }


@dataclass
class AssignmentReport:
    assignment: str
    rows: List[AssignmentRow]

    def row(self, program: str) -> AssignmentRow:
        for r in self.rows:
            if r.program == program:
                return r
        raise KeyError(program)

    @property
    def security(self) -> str:
        return weakest_security([r.enforced.security for r in self.rows])

    @property
    def witness(self) -> Optional[Dict[str, Any]]:
        """The first row whose ME_L run is not MT-secure, with its failing witness."""
        for r in self.rows:
            if not r.enforced.is_secure("MT"):
                failed = r.enforced.ni if not r.enforced.ni else r.enforced.mt
                return {"program": r.program, **(failed.witness.to_json() if failed.witness else {})}
        return None

    @property
    def levels_noninterfering(self) -> bool:
        """lambda x. L(p, x) is noninterfering for every corpus program."""
        return all(r.level_program.ni.holds for r in self.rows)

    @property
    def levels_match_outputs(self) -> bool:
        return all(r.levels_match_output for r in self.rows if r.levels_match_output is not None)

    @property
    def mt_transparent(self) -> bool:
        return all(r.mt_preserved for r in self.rows if r.mt_preserved is not None)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "assignment": self.assignment,
            "security": self.security,
            "witness": self.witness,
            "levels_noninterfering": self.levels_noninterfering,
            "levels_match_output": self.levels_match_outputs,
            "mt_transparent": self.mt_transparent,
            "rows": [r.to_dict() for r in self.rows],
        }


def _levels_match_output(L: LevelAssignment, p: Program, spec: UniverseSpec, base: OutcomeTable) -> bool:
    """p(x) is defined iff L(p, x) is, and then L(p, x) = L(p(x))."""
    for mask in base.space.masks():
        out = base.outcome(mask)
        levels = L.assign(p, base.space.to_set(mask), spec)
        if out.exhausted or levels.exhausted:
            raise InconclusiveError(f"fuel ran out checking {L.name} on {p.name}", base.space.to_set(mask))
        if out.defined != levels.defined:
            return False
        if out.defined and levels.value != out.value.labels():
            return False
    return True


def check_assignment(L: LevelAssignment, corpus: Optional[List[CorpusEntry]] = None) -> AssignmentReport:
    mechanism = me_l_mechanism(L)
    rows = []
    for entry in corpus if corpus is not None else default_corpus():
        p, spec = entry.program, entry.spec
        base_table = OutcomeTable(p, spec)
        enforced = EnforcedProgram(mechanism, p)
        base = classify(p, spec)
        rows.append(AssignmentRow(
            program=p.name,
            base=base,
            enforced=classify(enforced, spec),
            level_program=classify(la_level_program(L, p), spec),
            levels_match_output=_levels_match_output(L, p, spec, base_table) if base.is_secure("MT") else None,
            difference=_first_difference(base_table, OutcomeTable(enforced, spec)),
        ))
    report = AssignmentReport(L.name, rows)
    logger.info(f"Assignment {L.name}: {report.security}, MT-transparent={report.mt_transparent}")
    return report


@dataclass
class CompareReport:
    sizes: Dict[str, int]
    minimal: List[str]
    divergent: List[str]

    def to_dict(self) -> Dict[str, Any]:
        return {"sizes": self.sizes, "minimal": self.minimal, "divergent": self.divergent}


def la_compare(family: List[LevelAssignment], corpus: Optional[List[CorpusEntry]] = None) -> CompareReport:
    """
    Pointwise |L(p, x)| over the corpus. A member is minimal when it is
    pointwise no larger than every other terminating member.
    """
    corpus = corpus if corpus is not None else default_corpus()
    vectors: Dict[str, List[int]] = {}
    divergent: List[str] = []
    for L in family:
        sizes: List[int] = []
        for entry in corpus:
            for x in input_space(entry.spec).inputs():
                levels = L.assign(entry.program, x, entry.spec)
                if not levels.defined:
                    logger.warning(f"{L.name} is {levels.kind.value} on {entry.program.name}({x})")
                    divergent.append(L.name)
                    break
                sizes.append(len(levels.value))
            if L.name in divergent:
                break
        else:
            vectors[L.name] = sizes

    minimal = [
        a for a, va in vectors.items()
        if all(x <= y for b, vb in vectors.items() if b != a for x, y in zip(va, vb))
    ]
    return CompareReport({name: sum(v) for name, v in vectors.items()}, minimal, divergent)

# -------------------------
# ME / MEF Equivalence Sweep
# -------------------------

@dataclass
class EquivReport:
    checked: int = 0
    mismatches: List[Dict[str, Any]] = field(default_factory=list)
    faulty: bool = False

    @property
    def passed(self) -> bool:
        return not self.mismatches

    def to_dict(self) -> Dict[str, Any]:
        return {"checked": self.checked, "faulty": self.faulty,
                "passed": self.passed, "mismatches": self.mismatches}


def equivalence_sweep(corpus: Optional[List[CorpusEntry]] = None, faulty: bool = False) -> EquivReport:
    """Compares ME and MEF on every input of every corpus entry, Outcome kind included."""
    report = EquivReport(faulty=faulty)
    for entry in corpus if corpus is not None else default_corpus():
        for x in input_space(entry.spec).inputs():
            a = me(entry.program, x, entry.spec)
            b = mef(entry.program, x, entry.spec, neighborhood=not faulty)
            report.checked += 1
            if a != b:
                report.mismatches.append({
                    "program": entry.program.name, "input": x.to_json(),
                    "me": a.to_json(), "mef": b.to_json(),
                })
    logger.info(f"Equivalence sweep: {report.checked} runs, {len(report.mismatches)} mismatches")
    return report
