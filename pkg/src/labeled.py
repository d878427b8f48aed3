"""
Labeled Sets
Finite sets of labeled values a^l, the input and output type of every
program, with projection, selection and l-equivalence.
"""
import re
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple

from src.errors import ConfigError, ParseError
from src.lattice import Label, PrincipalUniverse, join_all

# (value, principal names) before a universe is attached
RawAtom = Tuple[int, Tuple[str, ...]]


@dataclass(frozen=True)
class LabeledValue:
    value: int
    label: Label

    @property
    def key(self) -> Tuple[int, Tuple[int, ...]]:
        return (self.value, self.label.key)

    def to_json(self) -> Dict[str, Any]:
        return {"value": str(self.value), "label": self.label.to_json()}

    def __str__(self) -> str:
        return f"{self.value}^{self.label}"


@dataclass(frozen=True)
class LabeledSet:
    """Immutable; equality and hashing look at the elements only."""
    universe: PrincipalUniverse = field(compare=False, repr=False)
    elements: FrozenSet[LabeledValue] = frozenset()

    # -------------------------
    # Construction
    # -------------------------

    @classmethod
    def empty(cls, universe: PrincipalUniverse) -> "LabeledSet":
        return cls(universe, frozenset())

    @classmethod
    def of(cls, universe: PrincipalUniverse, atoms: Iterable[RawAtom]) -> "LabeledSet":
        return cls(universe, frozenset(LabeledValue(int(v), universe.label(names)) for v, names in atoms))

    @classmethod
    def from_json(cls, data: Any, universe: PrincipalUniverse) -> "LabeledSet":
        if not isinstance(data, list):
            raise ConfigError("a labeled set must be a JSON array of {value, label} objects")
        atoms = []
        for item in data:
            if not isinstance(item, dict) or "value" not in item or "label" not in item:
                raise ConfigError(f"malformed labeled value: {item!r}")
            try:
                value = int(item["value"])
            except (TypeError, ValueError):
                raise ConfigError(f"labeled value must be a natural: {item['value']!r}")
            if value < 0:
                raise ConfigError(f"labeled value must be a natural: {value}")
            atoms.append((value, tuple(item["label"])))
        return cls.of(universe, atoms)

    # -------------------------
    # Algebra
    # -------------------------

    def project(self, l: Label) -> "LabeledSet":
        """x|l: the elements whose label flows to l."""
        return LabeledSet(self.universe, frozenset(e for e in self.elements if e.label.leq(l)))

    def labels(self) -> FrozenSet[Label]:
        return frozenset(e.label for e in self.elements)

    def select(self, l: Label) -> "LabeledSet":
        """x@l: the elements labeled exactly l."""
        return LabeledSet(self.universe, frozenset(e for e in self.elements if e.label == l))

    def select_set(self, levels: Iterable[Label]) -> "LabeledSet":
        wanted = frozenset(levels)
        return LabeledSet(self.universe, frozenset(e for e in self.elements if e.label in wanted))

    def equiv(self, other: "LabeledSet", l: Label) -> bool:
        return self.project(l) == other.project(l)

    def union(self, other: "LabeledSet") -> "LabeledSet":
        return LabeledSet(self.universe, self.elements | other.elements)

    def relabel(self, l: Label) -> "LabeledSet":
        return LabeledSet(self.universe, frozenset(LabeledValue(e.value, l) for e in self.elements))

    def issubset(self, other: "LabeledSet") -> bool:
        return self.elements <= other.elements

    def join_label(self) -> Label:
        """The join of L(x); bottom for the empty set."""
        return join_all(self.labels(), self.universe)

    # -------------------------
    # Views
    # -------------------------

    def sorted(self) -> List[LabeledValue]:
        return sorted(self.elements, key=lambda e: e.key)

    @property
    def key(self) -> Tuple:
        return tuple(e.key for e in self.sorted())

    def __iter__(self) -> Iterator[LabeledValue]:
        return iter(self.sorted())

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, item: LabeledValue) -> bool:
        return item in self.elements

    def to_json(self) -> List[Dict[str, Any]]:
        return [e.to_json() for e in self.sorted()]

    def __str__(self) -> str:
        return "{" + ", ".join(str(e) for e in self.sorted()) + "}"


# Function-style aliases for the set algebra
project = LabeledSet.project
labels = LabeledSet.labels
select = LabeledSet.select
select_set = LabeledSet.select_set
equiv = LabeledSet.equiv


def to_input(S: Iterable[str], universe: PrincipalUniverse) -> LabeledSet:
    """toInput(S) = {1^{n} | n in S}: one unit value per principal of S."""
    return LabeledSet.of(universe, [(1, (name,)) for name in S])


# -------------------------
# Literal Syntax
# -------------------------

_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z0-9_]*)|(\S))")


def _tokens(text: str) -> List[Tuple[str, str, int]]:
    out = []
    pos = 0
    while True:
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        col = m.start(m.lastindex) + 1
        if m.group(1):
            out.append(("num", m.group(1), col))
        elif m.group(2):
            out.append(("name", m.group(2), col))
        else:
            out.append(("sym", m.group(3), col))
        pos = m.end()
    out.append(("eof", "", len(text) + 1))
    return out


def parse_literal(text: str) -> List[RawAtom]:
    """
    Parses `{v^{P,...}, ...}` into raw atoms. A single principal may drop its
    braces (`1^H`) and `{}` on a label means bottom.
    """
    toks = _tokens(text)
    i = 0

    def principal() -> str:
        nonlocal i
        tok = toks[i]
        if tok[0] not in ("name", "num"):
            raise ParseError(f"expected a principal name, found '{tok[1] or 'end of input'}'", 1, tok[2])
        i += 1
        return tok[1]

    def expect(kind: str, value: Optional[str] = None) -> Tuple[str, str, int]:
        nonlocal i
        tok = toks[i]
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value or kind
            raise ParseError(f"expected '{want}', found '{tok[1] or 'end of input'}'", 1, tok[2])
        i += 1
        return tok

    def peek(value: str) -> bool:
        return toks[i][1] == value and toks[i][0] == "sym"

    atoms: List[RawAtom] = []
    expect("sym", "{")
    if not peek("}"):
        while True:
            value = int(expect("num")[1])
            expect("sym", "^")
            if peek("{"):
                expect("sym", "{")
                names: List[str] = []
                if not peek("}"):
                    names.append(principal())
                    while peek(","):
                        expect("sym", ",")
                        names.append(principal())
                expect("sym", "}")
            else:
                names = [principal()]
            atoms.append((value, tuple(names)))
            if not peek(","):
                break
            expect("sym", ",")
    expect("sym", "}")
    expect("eof")
    return atoms


def literal_principals(atoms: Sequence[RawAtom]) -> List[str]:
    seen: List[str] = []
    for _, names in atoms:
        for n in names:
            if n not in seen:
                seen.append(n)
    return seen


def from_literal(text: str, universe: PrincipalUniverse) -> LabeledSet:
    return LabeledSet.of(universe, parse_literal(text))
