"""
Black-Box Mechanisms
Test sequences (Exec / Trace / Consistent), budgeted multi-execution
mechanisms expressed as test sequences, and the constructive attack that
shows a budgeted black-box mechanism cannot be both secure and transparent.
"""
import logging
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Union

from src.config import BLOWUP_MAX_N, DEFAULT_FUEL
from src.dsl import Outcome, Program, equal, get_program, greater
from src.errors import AttackError, BudgetExceededError, ConfigError, GuardError
from src.labeled import LabeledSet, to_input
from src.lattice import Label, PrincipalUniverse, closure_set, in_closure, neighborhood_owner
from src.oracle import UniverseSpec
from src.utils import suggest

logger = logging.getLogger(__name__)

# -------------------------
# Test Sequences
# -------------------------

@dataclass(frozen=True)
class Finished:
    output: LabeledSet


@dataclass(frozen=True)
class Test:
    """Run the program on `input`, then continue with whatever it returned."""
    input: LabeledSet
    continuation: Callable[[LabeledSet], "TestSequence"] = field(compare=False)


TestSequence = Union[Finished, Test]


@dataclass(frozen=True)
class TraceEntry:
    input: LabeledSet
    output: LabeledSet

    def to_json(self) -> Dict[str, Any]:
        return {"input": self.input.to_json(), "output": self.output.to_json()}


def _spec(x: LabeledSet, spec: Optional[UniverseSpec]) -> UniverseSpec:
    return spec if spec is not None else UniverseSpec(x.universe)


def _fold(p: Program, t: TestSequence, spec: Optional[UniverseSpec], budget: Optional[int],
          entries: Optional[List[TraceEntry]]) -> Outcome:
    tests = 0
    while isinstance(t, Test):
        tests += 1
        if budget is not None and tests > budget:
            raise BudgetExceededError(f"test sequence ran more than {budget} tests on {p.name}")
        out = p.run(t.input, _spec(t.input, spec))
        if not out.defined:
            return out
        if entries is not None:
            entries.append(TraceEntry(t.input, out.value))
        t = t.continuation(out.value)
    return Outcome.terminated(t.output)


def exec_sequence(p: Program, t: TestSequence, spec: Optional[UniverseSpec] = None,
                  budget: Optional[int] = None) -> Outcome:
    """Exec(p, t): Finished(z) gives z; Test(y, c) gives Exec(p, c(p(y)))."""
    return _fold(p, t, spec, budget, None)


def trace(p: Program, t: TestSequence, spec: Optional[UniverseSpec] = None,
          budget: Optional[int] = None) -> List[TraceEntry]:
    """The (tested input, output) pairs in execution order, up to the first non-terminating test."""
    entries: List[TraceEntry] = []
    _fold(p, t, spec, budget, entries)
    return entries


def consistent(S0: Iterable[Label], entries: Sequence[TraceEntry]) -> bool:
    """Each tested input only uses labels in the closure of what is known; outputs add to what is known."""
    known = set(S0)
    for entry in entries:
        if not all(in_closure(l, known) for l in entry.input.labels()):
            return False
        known |= entry.output.labels()
    return True

# -------------------------
# Budgeted Mechanisms
# -------------------------

Generator = Callable[[LabeledSet], TestSequence]


@dataclass(frozen=True)
class BlackBoxMechanism:
    """
    A mechanism that only ever sees the program through the tests of the
    sequence `generator(x)` builds. Usable wherever an enforce.Mechanism is.
    """
    name: str
    generator: Generator = field(compare=False)
    budget: Optional[int] = None
    base: str = "mef"

    @property
    def tag(self) -> str:
        return self.name

    def run(self, p: Program, x: LabeledSet, spec: Optional[UniverseSpec] = None) -> Outcome:
        return exec_sequence(p, self.generator(x), spec, self.budget)

    def trace(self, p: Program, x: LabeledSet, spec: Optional[UniverseSpec] = None) -> List[TraceEntry]:
        return trace(p, self.generator(x), spec, self.budget)

    def __call__(self, p: Program, x: LabeledSet, spec: Optional[UniverseSpec] = None, trace=None) -> Outcome:
        return self.run(p, x, spec)


def _levels_me(x: LabeledSet) -> List[Label]:
    """C(L(x)) first, then the rest of the lattice, each part in canonical order."""
    closed = closure_set(x.labels(), x.universe)
    return sorted(closed) + [l for l in x.universe.all_labels() if l not in closed]


def _levels_mef(x: LabeledSet) -> List[Label]:
    return sorted(closure_set(x.labels(), x.universe))


def _multi_execution_sequence(x: LabeledSet, levels: List[Label],
                              pick: Callable[[LabeledSet, Label], LabeledSet]) -> TestSequence:
    def step(i: int, acc: LabeledSet) -> TestSequence:
        if i == len(levels):
            return Finished(acc)
        level = levels[i]
        return Test(x.project(level), lambda out: step(i + 1, acc.union(pick(out, level))))
    return step(0, LabeledSet.empty(x.universe))


def budgeted_mechanism(base: str = "mef", k: Optional[int] = None, strategy: str = "prefix",
                       seed: int = 0) -> BlackBoxMechanism:
    """
    ME or MEF as a test sequence that runs at most k levels. "prefix" keeps
    the first k levels in canonical order; "random" keeps a seeded sample of
    C(L(x)), reproducible per (seed, x). k=None means no budget.
    """
    if base not in ("me", "mef"):
        raise ConfigError(f"unknown budgeted base '{base}'; use 'me' or 'mef'")
    if strategy not in ("prefix", "random"):
        raise ConfigError(f"unknown budget strategy '{strategy}'; use 'prefix' or 'random'")
    if k is not None and k < 1:
        raise ConfigError(f"budget must be at least 1, got {k}")

    order = _levels_me if base == "me" else _levels_mef

    def generator(x: LabeledSet) -> TestSequence:
        levels = order(x)
        if k is not None and len(levels) > k:
            if strategy == "prefix":
                levels = levels[:k]
            else:
                rng = random.Random(f"{seed}:{x.key}")
                levels = sorted(rng.sample(levels, k))
        if base == "me":
            pick = lambda out, level: out.select(level)
        else:
            generators = x.labels()
            pick = lambda out, level: LabeledSet(out.universe, frozenset(
                e for e in out.elements if neighborhood_owner(e.label, generators) == level))
        return _multi_execution_sequence(x, levels, pick)

    budget_tag = "inf" if k is None else str(k)
    return BlackBoxMechanism(f"{base}-{strategy}@{budget_tag}", generator, k, base)


def mechanism_catalog(budget: Optional[int] = 8, seed: int = 0) -> List[BlackBoxMechanism]:
    return [
        budgeted_mechanism("me", budget, "prefix"),
        budgeted_mechanism("mef", budget, "prefix"),
        budgeted_mechanism("mef", budget, "random", seed),
    ]


def resolve_budgeted(selector: str, budget: Optional[int], seed: int = 0) -> BlackBoxMechanism:
    """'me', 'mef' or 'mef-random'."""
    choices = {"me": ("me", "prefix"), "mef": ("mef", "prefix"), "mef-random": ("mef", "random")}
    if selector not in choices:
        raise ConfigError(f"unknown black-box mechanism '{selector}'", suggest(selector, list(choices)))
    base, strategy = choices[selector]
    return budgeted_mechanism(base, budget, strategy, seed)

# -------------------------
# Attack
# -------------------------

@dataclass
class AttackReport:
    mechanism: str
    n: int
    budget: Optional[int]
    verdict: str
    s_prime: Optional[List[str]] = None
    reason: Optional[str] = None
    evidence: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "mechanism": self.mechanism,
            "n": self.n,
            "budget": self.budget,
            "s_prime": self.s_prime,
            "verdict": self.verdict,
            "evidence": self.evidence,
        }
        if self.reason:
            data["reason"] = self.reason
        return data


def attack_universe(n: int) -> PrincipalUniverse:
    if n < 1:
        raise ConfigError(f"the attack needs at least one principal, got n={n}")
    return PrincipalUniverse(tuple(str(i) for i in range(1, n + 1)))


def _covers(x: LabeledSet, s_prime: Label) -> bool:
    """toInput(S') is inside x and the join of L(x) is exactly S'."""
    return to_input(s_prime.members, x.universe).issubset(x) and x.join_label() == s_prime


def find_uncovered(universe: PrincipalUniverse, tested: Sequence[LabeledSet]) -> Optional[Label]:
    """The first proper nonempty S' (canonical order) that no tested input covers."""
    for s_prime in universe.all_labels():
        if s_prime.is_bottom or s_prime == universe.top:
            continue
        if not any(_covers(x, s_prime) for x in tested):
            return s_prime
    return None


def attack(E: BlackBoxMechanism, n: int, fuel: int = DEFAULT_FUEL) -> AttackReport:
    """
    Runs E on the empty program with toInput(S) for S = {1..n}, picks an S'
    that none of its tests covered, and checks the two programs that E cannot
    tell apart from empty and greater(S'): equal(S') must then either leak
    or E must break transparency on a Total-secure program.
    """
    universe = attack_universe(n)
    spec = UniverseSpec(universe, (1,), fuel=fuel)
    report = AttackReport(E.name, n, E.budget, "inapplicable")

    if E.budget is None:
        report.reason = "mechanism has no test budget"
        return report
    if 2 ** n - 2 <= E.budget:
        report.reason = f"2^{n} - 2 = {2 ** n - 2} proper subsets fit within the budget of {E.budget} tests"
        return report
    if n > BLOWUP_MAX_N:
        raise GuardError(f"n={n} is above the guard of {BLOWUP_MAX_N} principals")

    empty = get_program("empty")
    x_s = to_input(universe.principals, universe)
    entries = E.trace(empty, x_s, spec)
    tested = [e.input for e in entries]
    s_prime = find_uncovered(universe, tested)
    evidence: Dict[str, Any] = {
        "tests": len(entries),
        "x_of_s": [x.to_json() for x in tested],
        "consistent_empty": consistent((), entries),
        "consistent_input_labels": consistent(x_s.labels(), entries),
    }
    report.evidence = evidence
    if s_prime is None:
        report.reason = "every proper subset was covered by a test"
        logger.warning(f"{E.name}: no uncovered subset at n={n} within budget {E.budget}")
        return report

    report.s_prime = s_prime.to_json()
    x_s_prime = to_input(s_prime.members, universe)
    equal_p = equal(s_prime.members, universe)
    greater_p = greater(s_prime.members, universe)
    runs = {
        "equal_on_s": E.run(equal_p, x_s, spec),
        "empty_on_s": E.run(empty, x_s, spec),
        "equal_on_s_prime": E.run(equal_p, x_s_prime, spec),
        "greater_on_s_prime": E.run(greater_p, x_s_prime, spec),
    }
    evidence.update({name: out.to_json() for name, out in runs.items()})
    evidence["inputs_equivalent"] = x_s.equiv(x_s_prime, s_prime)
    evidence["equal_matches_empty"] = runs["equal_on_s"] == runs["empty_on_s"]
    evidence["equal_matches_greater"] = runs["equal_on_s_prime"] == runs["greater_on_s_prime"]

    left, right = runs["equal_on_s"], runs["equal_on_s_prime"]
    if left.defined and right.defined and not left.value.equiv(right.value, s_prime):
        report.verdict = "security-violation"
    else:
        defects = []
        if runs["empty_on_s"] != empty.run(x_s, spec):
            defects.append("empty")
        if runs["greater_on_s_prime"] != greater_p.run(x_s_prime, spec):
            defects.append("greater")
        if not defects:
            raise AttackError(f"{E.name} at n={n}: neither a leak nor a transparency defect for S'={s_prime}")
        evidence["transparency_defects"] = defects
        report.verdict = "transparency-defect"

    logger.info(f"Attack on {E.name} (n={n}, budget={E.budget}): {report.verdict} with S'={s_prime}")
    return report
