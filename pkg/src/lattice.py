"""
Powerset Security Lattice
Labels are subsets of a declared principal universe: order is inclusion,
join is union and bottom is the empty set. The two-point lattice L <= H is
the universe over the single principal "H".
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

from src.errors import ConfigError, LabelError, UniverseMismatchError, UnknownPrincipalError
from src.utils import suggest

logger = logging.getLogger(__name__)

# -------------------------
# Universe
# -------------------------

@dataclass(frozen=True)
class PrincipalUniverse:
    """Ordered, duplicate-free principal names; order fixes every canonical output."""
    principals: Tuple[str, ...]

    def __post_init__(self):
        if not isinstance(self.principals, tuple):
            object.__setattr__(self, "principals", tuple(self.principals))
        if len(self.principals) < 1:
            raise ConfigError("a principal universe needs at least one principal")
        if any(not isinstance(p, str) or not p.strip() for p in self.principals):
            raise ConfigError(f"principal names must be non-empty strings: {list(self.principals)}")
        if len(set(self.principals)) != len(self.principals):
            raise ConfigError(f"principal names must be distinct: {list(self.principals)}")

    @cached_property
    def index(self) -> Dict[str, int]:
        return {name: i for i, name in enumerate(self.principals)}

    @property
    def size(self) -> int:
        return len(self.principals)

    def label(self, names: Iterable[str] = ()) -> "Label":
        mask = 0
        for name in names:
            if name not in self.index:
                raise UnknownPrincipalError(
                    f"unknown principal '{name}' (universe: {', '.join(self.principals)})",
                    suggest(name, self.principals),
                )
            mask |= 1 << self.index[name]
        return Label(self, mask)

    def from_mask(self, mask: int) -> "Label":
        if mask < 0 or mask >> self.size:
            raise LabelError(f"mask {mask} outside a {self.size}-principal universe")
        return Label(self, mask)

    @property
    def bottom(self) -> "Label":
        return Label(self, 0)

    @property
    def top(self) -> "Label":
        return Label(self, (1 << self.size) - 1)

    @cached_property
    def _all_labels(self) -> Tuple["Label", ...]:
        return tuple(sorted(Label(self, m) for m in range(1 << self.size)))

    def all_labels(self) -> Tuple["Label", ...]:
        """Every label of the lattice in canonical order (2^|P| of them)."""
        return self._all_labels

    def to_json(self) -> Dict[str, List[str]]:
        return {"principals": list(self.principals)}


# -------------------------
# Labels
# -------------------------

@dataclass(frozen=True)
class Label:
    """A set of principals, stored as a bitmask over the universe order."""
    universe: PrincipalUniverse = field(compare=False, repr=False)
    mask: int

    @property
    def members(self) -> Tuple[str, ...]:
        return tuple(p for i, p in enumerate(self.universe.principals) if self.mask >> i & 1)

    @property
    def key(self) -> Tuple[int, ...]:
        """Canonical sort key: member indices in universe order (lexicographic)."""
        return tuple(i for i in range(self.universe.size) if self.mask >> i & 1)

    @property
    def is_bottom(self) -> bool:
        return self.mask == 0

    def __lt__(self, other: "Label") -> bool:
        _same_universe(self, other)
        return self.key < other.key

    def leq(self, other: "Label") -> bool:
        _same_universe(self, other)
        return self.mask & ~other.mask == 0

    def join(self, other: "Label") -> "Label":
        _same_universe(self, other)
        return Label(self.universe, self.mask | other.mask)

    def to_json(self) -> List[str]:
        """Member names as a sorted array."""
        return sorted(self.members)

    def __str__(self) -> str:
        return "{" + ",".join(self.members) + "}"


def _same_universe(a: Label, b: Label) -> None:
    if a.universe is not b.universe and a.universe != b.universe:
        raise UniverseMismatchError(
            f"labels {a} and {b} come from different universes "
            f"({list(a.universe.principals)} vs {list(b.universe.principals)})"
        )


def leq(l1: Label, l2: Label) -> bool:
    return l1.leq(l2)


def join(l1: Label, l2: Label) -> Label:
    return l1.join(l2)


def join_all(labels: Iterable[Label], universe: PrincipalUniverse) -> Label:
    out = universe.bottom
    for l in labels:
        out = out.join(l)
    return out


def _universe_of(labels: Iterable[Label], universe: Optional[PrincipalUniverse]) -> PrincipalUniverse:
    if universe is not None:
        return universe
    for l in labels:
        return l.universe
    raise LabelError("cannot infer the universe of an empty label set; pass universe=")


# -------------------------
# Closure Sets & Neighborhoods
# -------------------------

def closure_set(S: Iterable[Label], universe: Optional[PrincipalUniverse] = None) -> FrozenSet[Label]:
    """
    C(S): joins of all subsets of S, bottom included.
    Grows from {bottom} one generator at a time, so only labels built from
    S are ever touched, never the whole lattice.
    """
    gens = list(S)
    universe = _universe_of(gens, universe)
    closed = {universe.bottom}
    for g in gens:
        closed |= {c.join(g) for c in closed}
    return frozenset(closed)


def neighborhood_owner(j: Label, generators: Iterable[Label]) -> Label:
    """
    The greatest element of C(generators) below j, i.e. the join of every
    generator below j. j lies in the upward neighborhood of exactly this label.
    """
    owner = j.universe.bottom
    for g in generators:
        if g.leq(j):
            owner = owner.join(g)
    return owner


def in_closure(l: Label, generators: Iterable[Label]) -> bool:
    return neighborhood_owner(l, generators) == l


def in_up_neighborhood(j: Label, l: Label, S: Iterable[Label]) -> bool:
    """True iff l is below j and every element of S below j is below l."""
    levels = frozenset(S)
    if l not in levels:
        raise LabelError(f"level {l} is not a member of the given set")
    if not l.leq(j):
        return False
    return all(s.leq(l) for s in levels if s.leq(j))


def partition_check(S: Iterable[Label], targets: Iterable[Label],
                    universe: Optional[PrincipalUniverse] = None) -> Tuple[bool, Optional[Dict]]:
    """
    Checks that each target lies in exactly one upward neighborhood of C(S).
    Returns (True, None) or (False, {"label": ..., "owners": [...]}).
    """
    targets = list(targets)
    gens = list(S)
    if not targets:
        return True, None
    closed = sorted(closure_set(gens, _universe_of(gens + targets, universe)))
    for j in targets:
        owners = [l for l in closed if in_up_neighborhood(j, l, closed)]
        if len(owners) != 1:
            logger.warning(f"Partition failure: {j} lies in {len(owners)} neighborhoods")
            return False, {"label": j.to_json(), "owners": [o.to_json() for o in owners]}
    return True, None
