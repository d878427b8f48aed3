"""
Brute-Force Oracle
Decides noninterference and the termination criteria (Total, TS, MT) of a
program over every subset of A x Labels, returning the first witness in
canonical enumeration order on failure.
"""
import concurrent.futures
import itertools
import logging
import threading
from dataclasses import dataclass, replace
from typing import Any, Dict, Iterable, Iterator, List, Optional, Protocol, Tuple

from src.config import DEFAULT_FUEL, MAX_ATOMS, WORKERS
from src.dsl import Outcome
from src.errors import ConfigError, GuardError, InconclusiveError
from src.labeled import LabeledSet, LabeledValue
from src.lattice import Label, PrincipalUniverse

logger = logging.getLogger(__name__)

# Strongest first; the security class is "<criterion>-secure".
TERMINATION_ORDER = ["Total", "TS", "MT", "TI"]
SECURITY_RANK = {"Total-secure": 4, "TS-secure": 3, "MT-secure": 2, "TI-secure": 1, "insecure": 0}


class Runnable(Protocol):
    """Anything the oracle can classify: plain programs and enforced programs."""
    name: str

    def run(self, x: LabeledSet, spec: "UniverseSpec") -> Outcome: ...

# -------------------------
# Universe Spec & Input Space
# -------------------------

@dataclass(frozen=True)
class UniverseSpec:
    universe: PrincipalUniverse
    values: Tuple[int, ...] = (0, 1)
    fuel: int = DEFAULT_FUEL
    workers: int = WORKERS
    max_atoms: int = MAX_ATOMS

    def __post_init__(self):
        if not self.values:
            raise ConfigError("the value universe A needs at least one value")
        if self.fuel < 1:
            raise ConfigError(f"fuel must be positive, got {self.fuel}")
        if self.workers < 1:
            raise ConfigError(f"workers must be positive, got {self.workers}")

    @classmethod
    def of(cls, principals, values=(0, 1), **kwargs) -> "UniverseSpec":
        return cls(PrincipalUniverse(tuple(principals)), tuple(values), **kwargs)

    def with_fuel(self, fuel: int) -> "UniverseSpec":
        return replace(self, fuel=fuel)

    def space(self) -> "InputSpace":
        return input_space(self)

    def to_json(self) -> Dict[str, Any]:
        return {"principals": list(self.universe.principals), "values": list(self.values), "fuel": self.fuel}


class InputSpace:
    """
    Every input over A x Labels as a bitmask over the canonical atom list.
    Enumeration order: by cardinality, then lexicographic on atom indices.
    """

    def __init__(self, universe: PrincipalUniverse, values: Tuple[int, ...], max_atoms: int = MAX_ATOMS):
        self.universe = universe
        self.atoms: List[LabeledValue] = sorted(
            (LabeledValue(v, l) for v in values for l in universe.all_labels()), key=lambda a: a.key
        )
        if len(self.atoms) > max_atoms:
            raise GuardError(
                f"input space has {len(self.atoms)} atoms (|A|={len(values)} x {2 ** universe.size} labels); "
                f"the guard allows {max_atoms}"
            )
        self.index: Dict[LabeledValue, int] = {a: i for i, a in enumerate(self.atoms)}
        self.level_masks: Dict[Label, int] = {
            l: sum(1 << i for i, a in enumerate(self.atoms) if a.label.leq(l)) for l in universe.all_labels()
        }
        self._masks: Optional[List[int]] = None

    @property
    def size(self) -> int:
        return len(self.atoms)

    def masks(self) -> List[int]:
        if self._masks is None:
            self._masks = [
                _bits(combo)
                for k in range(self.size + 1)
                for combo in itertools.combinations(range(self.size), k)
            ]
        return self._masks

    def to_set(self, mask: int) -> LabeledSet:
        return LabeledSet(self.universe, frozenset(a for i, a in enumerate(self.atoms) if mask >> i & 1))

    def mask_of(self, x: LabeledSet) -> int:
        try:
            return _bits(self.index[e] for e in x.elements)
        except KeyError as e:
            raise ConfigError(f"input atom {e.args[0]} is outside the value universe")

    def inputs(self) -> Iterator[LabeledSet]:
        for mask in self.masks():
            yield self.to_set(mask)

    def hidden_atoms(self, l: Label) -> List[int]:
        """Atom indices invisible at level l, in canonical order."""
        visible = self.level_masks[l]
        return [i for i in range(self.size) if not visible >> i & 1]

    def class_members(self, base: LabeledSet, l: Label,
                      extra: Iterable[LabeledValue] = ()) -> Iterator[LabeledSet]:
        """
        The l-equivalence class of `base` (already projected to l), in the same
        relative order as the global enumeration. `extra` joins hidden atoms
        with values outside A to the pool.
        """
        pool = [self.atoms[i] for i in self.hidden_atoms(l)]
        outside = {a for a in extra if not a.label.leq(l) and a not in self.index}
        if outside:
            pool = sorted(pool + list(outside), key=lambda a: a.key)
        for k in range(len(pool) + 1):
            for combo in itertools.combinations(pool, k):
                yield base.union(LabeledSet(self.universe, frozenset(combo)))


def _bits(indices) -> int:
    mask = 0
    for i in indices:
        mask |= 1 << i
    return mask


_SPACE_CACHE: Dict[Tuple, InputSpace] = {}
_SPACE_CACHE_LOCK = threading.Lock()


def input_space(spec: UniverseSpec) -> InputSpace:
    key = (spec.universe, spec.values, spec.max_atoms)
    space = _SPACE_CACHE.get(key)
    if space is not None:
        return space
    with _SPACE_CACHE_LOCK:
        # Re-check: another worker may have built it while we waited.
        space = _SPACE_CACHE.get(key)
        if space is None:
            space = InputSpace(spec.universe, spec.values, spec.max_atoms)
            _SPACE_CACHE[key] = space
    return space

# -------------------------
# Outcome Table
# -------------------------

class OutcomeTable:
    """Memoized outcomes of one runnable over the input space, keyed by mask."""

    def __init__(self, program: Runnable, spec: UniverseSpec):
        self.program = program
        self.spec = spec
        self.space = input_space(spec)
        self._memo: Dict[int, Outcome] = {}
        self._lock = threading.Lock()
        self._flags: Optional[bytearray] = None
        self._live: Optional[List[Tuple[int, Outcome]]] = None

    def outcome(self, mask: int) -> Outcome:
        out = self._memo.get(mask)
        if out is not None:
            return out
        out = self.program.run(self.space.to_set(mask), self.spec)
        with self._lock:
            # First writer wins; evaluation is deterministic so racers agree.
            return self._memo.setdefault(mask, out)

    def defined(self, mask: int) -> bool:
        out = self.outcome(mask)
        if out.exhausted:
            x = self.space.to_set(mask)
            logger.error(f"Inconclusive: {self.program.name} exhausted fuel ({self.spec.fuel}) on {x}")
            raise InconclusiveError(f"{self.program.name} exhausted its fuel on input {x}", x)
        return out.defined

    def fill(self) -> "OutcomeTable":
        masks = self.space.masks()
        if self.spec.workers > 1:
            with concurrent.futures.ThreadPoolExecutor(max_workers=self.spec.workers) as pool:
                list(pool.map(self.outcome, masks))
        else:
            for mask in masks:
                self.outcome(mask)
        return self

    def flags(self) -> bytearray:
        """Definedness of every mask, indexed by mask. Raises on the first exhausted input."""
        if self._flags is None:
            flags = bytearray(1 << self.space.size)
            for mask in self.space.masks():
                flags[mask] = self.defined(mask)
            self._flags = flags
        return self._flags

    def live(self) -> List[Tuple[int, Outcome]]:
        """(mask, outcome) for every defined input, in enumeration order."""
        if self._live is None:
            flags = self.flags()
            self._live = [(mask, self._memo[mask]) for mask in self.space.masks() if flags[mask]]
        return self._live

    def __len__(self) -> int:
        return len(self._memo)


def evaluate_space(p: Runnable, spec: UniverseSpec) -> OutcomeTable:
    return OutcomeTable(p, spec).fill()

# -------------------------
# Verdicts
# -------------------------

@dataclass
class Witness:
    criterion: str
    x: LabeledSet
    level: Optional[Label] = None
    y: Optional[LabeledSet] = None
    out_x: Optional[Outcome] = None
    out_y: Optional[Outcome] = None

    def to_json(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"criterion": self.criterion, "x": self.x.to_json()}
        if self.level is not None:
            data["level"] = self.level.to_json()
        if self.y is not None:
            data["y"] = self.y.to_json()
        if self.out_x is not None:
            data["out_x"] = self.out_x.to_json()
        if self.out_y is not None:
            data["out_y"] = self.out_y.to_json()
        return data


@dataclass
class Verdict:
    holds: bool
    witness: Optional[Witness] = None

    def __bool__(self) -> bool:
        return self.holds


def _table(p: Runnable, spec: UniverseSpec, table: Optional[OutcomeTable]) -> OutcomeTable:
    if table is not None:
        return table
    table = OutcomeTable(p, spec)
    if spec.workers > 1:
        table.fill()
    return table


def check_ni(p: Runnable, spec: UniverseSpec, table: Optional[OutcomeTable] = None) -> Verdict:
    """
    For every level, compares each defined input's projected output against
    the first defined member of its equivalence class.
    """
    table = _table(p, spec, table)
    space = table.space
    live = table.live()
    for level in spec.universe.all_labels():
        level_mask = space.level_masks[level]
        # outputs repeat across inputs; project each distinct one once
        views: Dict[LabeledSet, LabeledSet] = {}
        refs: Dict[int, Tuple[int, Outcome, LabeledSet]] = {}
        for mask, out in live:
            seen = views.get(out.value)
            if seen is None:
                seen = views[out.value] = out.value.project(level)
            ref = refs.get(mask & level_mask)
            if ref is None:
                refs[mask & level_mask] = (mask, out, seen)
            elif seen != ref[2]:
                witness = Witness("ni", space.to_set(ref[0]), level, space.to_set(mask), ref[1], out)
                logger.info(f"{p.name} interferes at level {level}: {witness.x} vs {witness.y}")
                return Verdict(False, witness)
    return Verdict(True)


def check_total(p: Runnable, spec: UniverseSpec, table: Optional[OutcomeTable] = None) -> Verdict:
    table = _table(p, spec, table)
    flags = table.flags()
    for mask in table.space.masks():
        if not flags[mask]:
            return Verdict(False, Witness("total", table.space.to_set(mask), out_x=table.outcome(mask)))
    return Verdict(True)


def check_ts(p: Runnable, spec: UniverseSpec, table: Optional[OutcomeTable] = None) -> Verdict:
    """Definedness is constant on every l-equivalence class, for every l."""
    table = _table(p, spec, table)
    space = table.space
    flags = table.flags()
    for level in spec.universe.all_labels():
        level_mask = space.level_masks[level]
        refs: Dict[int, int] = {}
        for mask in space.masks():
            ref = refs.setdefault(mask & level_mask, mask)
            if flags[ref] != flags[mask]:
                return Verdict(False, Witness(
                    "ts", space.to_set(ref), level, space.to_set(mask),
                    table.outcome(ref), table.outcome(mask),
                ))
    return Verdict(True)


def check_mt(p: Runnable, spec: UniverseSpec, table: Optional[OutcomeTable] = None) -> Verdict:
    """Whenever p(x) is defined, so is p(x|l) for every l."""
    table = _table(p, spec, table)
    space = table.space
    flags = table.flags()
    levels = list(spec.universe.all_labels())
    level_masks = [space.level_masks[l] for l in levels]
    for mask, out in table.live():
        for level, level_mask in zip(levels, level_masks):
            projected = mask & level_mask
            if not flags[projected]:
                return Verdict(False, Witness(
                    "mt", space.to_set(mask), level, space.to_set(projected),
                    out, table.outcome(projected),
                ))
    return Verdict(True)

# -------------------------
# Classification
# -------------------------

@dataclass
class ClassificationReport:
    program: str
    ni: Verdict
    total: Verdict
    ts: Verdict
    mt: Verdict
    inputs: int = 0

    @property
    def termination(self) -> str:
        if self.total:
            return "Total"
        if self.ts:
            return "TS"
        if self.mt:
            return "MT"
        return "TI"

    @property
    def security(self) -> str:
        return f"{self.termination}-secure" if self.ni else "insecure"

    @property
    def chain_consistent(self) -> bool:
        """Total implies TS implies MT."""
        return (not self.total or self.ts.holds) and (not self.ts or self.mt.holds)

    def is_secure(self, criterion: str) -> bool:
        """Whether the program is <criterion>-secure (TI, MT, TS or Total)."""
        if not self.ni:
            return False
        return TERMINATION_ORDER.index(self.termination) <= TERMINATION_ORDER.index(criterion)

    def to_dict(self) -> Dict[str, Any]:
        failed = {name: v.witness.to_json() for name, v in (("Total", self.total), ("TS", self.ts), ("MT", self.mt))
                  if not v and v.witness is not None}
        return {
            "program": self.program,
            "ni": self.ni.holds,
            "witness": self.ni.witness.to_json() if self.ni.witness else None,
            "termination": self.termination,
            "termination_witnesses": failed,
            "security": self.security,
        }


def classify(p: Runnable, spec: UniverseSpec) -> ClassificationReport:
    table = _table(p, spec, None)
    report = ClassificationReport(
        program=p.name,
        ni=check_ni(p, spec, table),
        total=check_total(p, spec, table),
        ts=check_ts(p, spec, table),
        mt=check_mt(p, spec, table),
        inputs=len(table.space.masks()),
    )
    if not report.chain_consistent:
        logger.error(f"Termination chain broken for {p.name}: total={report.total.holds} "
                     f"ts={report.ts.holds} mt={report.mt.holds}")
    logger.info(f"Classified {p.name}: {report.security}")
    return report


def weakest_security(classes: List[str]) -> str:
    if not classes:
        return "Total-secure"
    return min(classes, key=lambda s: SECURITY_RANK[s])
