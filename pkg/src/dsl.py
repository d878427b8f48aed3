"""
Program DSL (Parser, Printer, Evaluator)
A small deterministic language over labeled sets. Divergence is an explicit
primitive and evaluation is fuel-bounded, so every run ends in an Outcome.
"""
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union as TUnion

from src.config import DEFAULT_FUEL
from src.errors import ConfigError, ParseError, SortError
from src.labeled import LabeledSet, LabeledValue
from src.lattice import PrincipalUniverse
from src.utils import load_static_data, suggest

logger = logging.getLogger(__name__)

# -------------------------
# AST
# -------------------------
# One bound input variable per program, so Var carries no name: two
# programs that differ only in the parameter's spelling compare equal.

@dataclass(frozen=True)
class Var:
    pass

@dataclass(frozen=True)
class EmptySet:
    pass

@dataclass(frozen=True)
class Singleton:
    nat: "NatExpr"
    label: "LabelExpr"

@dataclass(frozen=True)
class Union:
    left: "SetExpr"
    right: "SetExpr"

@dataclass(frozen=True)
class Project:
    set: "SetExpr"
    label: "LabelExpr"

@dataclass(frozen=True)
class SelectAt:
    set: "SetExpr"
    label: "LabelExpr"

@dataclass(frozen=True)
class Relabel:
    set: "SetExpr"
    label: "LabelExpr"

@dataclass(frozen=True)
class If:
    cond: "BoolExpr"
    then: "SetExpr"
    orelse: "SetExpr"

@dataclass(frozen=True)
class Diverge:
    pass

@dataclass(frozen=True)
class NatLit:
    value: int

@dataclass(frozen=True)
class Size:
    set: "SetExpr"

@dataclass(frozen=True)
class Add:
    left: "NatExpr"
    right: "NatExpr"

@dataclass(frozen=True)
class LabelLit:
    names: Tuple[str, ...]   # sorted, deduplicated; () is bottom

@dataclass(frozen=True)
class JoinLabels:
    set: "SetExpr"

@dataclass(frozen=True)
class JoinL:
    left: "LabelExpr"
    right: "LabelExpr"

@dataclass(frozen=True)
class Member:
    nat: "NatExpr"
    label: "LabelExpr"
    set: "SetExpr"

@dataclass(frozen=True)
class Subseteq:
    left: "SetExpr"
    right: "SetExpr"

@dataclass(frozen=True)
class IsEmpty:
    set: "SetExpr"

@dataclass(frozen=True)
class EqLabel:
    left: "LabelExpr"
    right: "LabelExpr"

@dataclass(frozen=True)
class And:
    left: "BoolExpr"
    right: "BoolExpr"

@dataclass(frozen=True)
class Or:
    left: "BoolExpr"
    right: "BoolExpr"

@dataclass(frozen=True)
class Not:
    operand: "BoolExpr"


SetExpr = TUnion[Var, EmptySet, Singleton, Union, Project, SelectAt, Relabel, If, Diverge]
NatExpr = TUnion[NatLit, Size, Add]
LabelExpr = TUnion[LabelLit, JoinLabels, JoinL]
BoolExpr = TUnion[Member, Subseteq, IsEmpty, EqLabel, And, Or, Not]
Expr = TUnion[SetExpr, NatExpr, LabelExpr, BoolExpr]


def label_lit(names: Iterable[str]) -> LabelLit:
    return LabelLit(tuple(sorted(set(names))))


def _children(node: Expr) -> List[Expr]:
    return [getattr(node, f) for f in node.__dataclass_fields__ if f not in ("value", "names")]


def walk(node: Expr) -> Iterable[Expr]:
    yield node
    for child in _children(node):
        yield from walk(child)

# -------------------------
# Outcomes
# -------------------------

class OutcomeKind(Enum):
    TERMINATED = "terminated"
    DIVERGED = "diverged"
    FUEL_EXHAUSTED = "fuel-exhausted"


@dataclass(frozen=True)
class Outcome:
    """Terminated(value) | Diverged | FuelExhausted."""
    kind: OutcomeKind
    value: Any = None

    @classmethod
    def terminated(cls, value: Any) -> "Outcome":
        return cls(OutcomeKind.TERMINATED, value)

    @property
    def defined(self) -> bool:
        return self.kind is OutcomeKind.TERMINATED

    @property
    def diverged(self) -> bool:
        return self.kind is OutcomeKind.DIVERGED

    @property
    def exhausted(self) -> bool:
        return self.kind is OutcomeKind.FUEL_EXHAUSTED

    def to_json(self) -> Dict[str, Any]:
        if not self.defined:
            return {"outcome": self.kind.value, "output": None}
        if isinstance(self.value, LabeledSet):
            output = self.value.to_json()
        else:
            output = [l.to_json() for l in sorted(self.value)]
        return {"outcome": self.kind.value, "output": output}

    def __str__(self) -> str:
        if self.defined:
            if isinstance(self.value, LabeledSet):
                return str(self.value)
            return "{" + ", ".join(str(l) for l in sorted(self.value)) + "}"
        return self.kind.value


DIVERGED = Outcome(OutcomeKind.DIVERGED)
FUEL_EXHAUSTED = Outcome(OutcomeKind.FUEL_EXHAUSTED)

# -------------------------
# Programs
# -------------------------

@dataclass(frozen=True)
class Program:
    """A named `fun(param) -> body`. Equality is structural on the body."""
    name: str = field(compare=False)
    param: str = field(compare=False)
    body: SetExpr = field(default_factory=EmptySet)

    @property
    def source(self) -> str:
        return f"fun({self.param}) -> {to_source(self.body, self.param)}"

    def principals(self) -> List[str]:
        seen: List[str] = []
        for node in walk(self.body):
            if isinstance(node, LabelLit):
                seen.extend(n for n in node.names if n not in seen)
        return seen

    def check(self, universe: PrincipalUniverse) -> None:
        """Raises UnknownPrincipalError if a label literal leaves the universe."""
        _check_literals(self.body, universe)

    def run(self, x: LabeledSet, spec=None) -> Outcome:
        return evaluate(self, x, spec.fuel if spec is not None else DEFAULT_FUEL)

# -------------------------
# Scanner
# -------------------------

KEYWORD_SORTS: Dict[str, str] = {
    "union": "set", "project": "set", "at": "set", "relabel": "set", "if": "set", "diverge": "set",
    "size": "nat", "add": "nat",
    "joinlabels": "label", "join": "label",
    "member": "bool", "subseteq": "bool", "isempty": "bool", "eqlabel": "bool",
    "then": "keyword", "else": "keyword", "fun": "keyword",
}

_TOKEN_RE = re.compile(r"(?P<ws>\s+)|(?P<comment>#[^\n]*)|(?P<word>[A-Za-z0-9_]+)|(?P<op>->|&&|\|\||[{}()^,!])")


@dataclass(frozen=True)
class Token:
    text: str
    line: int
    col: int

    @property
    def is_number(self) -> bool:
        return self.text.isdigit()

    @property
    def is_word(self) -> bool:
        return bool(self.text) and (self.text[0].isalnum() or self.text[0] == "_")


EOF = "$EOF"


class Scanner:
    def __init__(self, src: str):
        self._src = src

    def tokens(self) -> List[Token]:
        out: List[Token] = []
        pos, line, line_start = 0, 1, 0
        while pos < len(self._src):
            m = _TOKEN_RE.match(self._src, pos)
            if m is None:
                raise ParseError(f"unexpected character '{self._src[pos]}'", line, pos - line_start + 1)
            kind = m.lastgroup
            if kind in ("word", "op"):
                out.append(Token(m.group(kind), line, pos - line_start + 1))
            elif kind == "ws":
                newlines = m.group().count("\n")
                if newlines:
                    line += newlines
                    line_start = pos + m.group().rfind("\n") + 1
            pos = m.end()
        out.append(Token(EOF, line, pos - line_start + 1))
        return out

# -------------------------
# Parser
# -------------------------

class Parser:
    """Sort-directed recursive descent; each sort has its own entry point."""

    def __init__(self, src: str, name: str = "program"):
        self._tokens = Scanner(src).tokens()
        self._pos = 0
        self._name = name
        self._param = "x"

    def parse(self) -> Program:
        self._consume("fun")
        self._consume("(")
        tok = self._advance()
        if not tok.is_word or tok.is_number or tok.text in KEYWORD_SORTS:
            self._fail(f"expected a parameter name, found '{tok.text}'", tok)
        self._param = tok.text
        self._consume(")")
        self._consume("->")
        body = self._set()
        if self._current.text != EOF:
            self._fail(f"unexpected '{self._current.text}' after program body", self._current)
        return Program(self._name, self._param, body)

    # Helpers

    @property
    def _current(self) -> Token:
        return self._tokens[self._pos]

    def _advance(self) -> Token:
        tok = self._tokens[self._pos]
        if tok.text != EOF:
            self._pos += 1
        return tok

    def _consume(self, expected: str) -> Token:
        tok = self._current
        if tok.text != expected:
            found = "end of input" if tok.text == EOF else f"'{tok.text}'"
            self._fail(f"expected '{expected}', found {found}", tok)
        return self._advance()

    def _fail(self, message: str, tok: Token, error=ParseError):
        raise error(message, tok.line, tok.col)

    def _wrong_sort(self, want: str, tok: Token):
        if tok.text == EOF:
            self._fail(f"expected a {want} expression, found end of input", tok)
        if tok.is_number:
            self._fail(f"expected a {want} expression, found number '{tok.text}'", tok, SortError)
        sort = KEYWORD_SORTS.get(tok.text)
        if sort in ("set", "nat", "label", "bool"):
            self._fail(f"expected a {want} expression, found {sort} expression '{tok.text}'", tok, SortError)
        if tok.text == self._param:
            self._fail(f"expected a {want} expression, found the input variable '{tok.text}'", tok, SortError)
        if tok.is_word and sort is None:
            self._fail(f"unbound variable '{tok.text}'", tok)
        self._fail(f"expected a {want} expression, found '{tok.text}'", tok)

    def _call(self, *parts: Callable[[], Expr]) -> List[Expr]:
        self._consume("(")
        args = []
        for i, part in enumerate(parts):
            if i:
                self._consume(",")
            args.append(part())
        self._consume(")")
        return args

    def _binary_left(self, op: str, node: Callable, sub: Callable[[], Expr]) -> Expr:
        left = sub()
        while self._current.text == op:
            self._advance()
            left = node(left, sub())
        return left

    # Sorts

    def _set(self) -> SetExpr:
        tok = self._current
        match tok.text:
            case "{":
                self._advance()
                if self._current.text == "}":
                    self._advance()
                    return EmptySet()
                nat = self._nat()
                self._consume("^")
                label = self._label()
                self._consume("}")
                return Singleton(nat, label)
            case "union":
                self._advance()
                return Union(*self._call(self._set, self._set))
            case "project":
                self._advance()
                return Project(*self._call(self._set, self._label))
            case "at":
                self._advance()
                return SelectAt(*self._call(self._set, self._label))
            case "relabel":
                self._advance()
                return Relabel(*self._call(self._set, self._label))
            case "if":
                self._advance()
                cond = self._bool()
                self._consume("then")
                then = self._set()
                self._consume("else")
                return If(cond, then, self._set())
            case "diverge":
                self._advance()
                return Diverge()
            case text if text == self._param:
                self._advance()
                return Var()
        self._wrong_sort("set", tok)

    def _nat(self) -> NatExpr:
        tok = self._current
        if tok.is_number:
            self._advance()
            return NatLit(int(tok.text))
        match tok.text:
            case "size":
                self._advance()
                return Size(*self._call(self._set))
            case "add":
                self._advance()
                return Add(*self._call(self._nat, self._nat))
        self._wrong_sort("nat", tok)

    def _label(self) -> LabelExpr:
        tok = self._current
        match tok.text:
            case "{":
                self._advance()
                names: List[str] = []
                if self._current.text != "}":
                    names.append(self._principal())
                    while self._current.text == ",":
                        self._advance()
                        names.append(self._principal())
                self._consume("}")
                return label_lit(names)
            case "joinlabels":
                self._advance()
                return JoinLabels(*self._call(self._set))
            case "join":
                self._advance()
                return JoinL(*self._call(self._label, self._label))
        self._wrong_sort("label", tok)

    def _principal(self) -> str:
        tok = self._advance()
        if not tok.is_word:
            self._fail(f"expected a principal name, found '{tok.text}'", tok)
        return tok.text

    def _bool(self) -> BoolExpr:
        return self._binary_left("||", Or, self._conj)

    def _conj(self) -> BoolExpr:
        return self._binary_left("&&", And, self._unary)

    def _unary(self) -> BoolExpr:
        tok = self._current
        match tok.text:
            case "!":
                self._advance()
                return Not(self._unary())
            case "(":
                self._advance()
                inner = self._bool()
                self._consume(")")
                return inner
            case "member":
                self._advance()
                return Member(*self._call(self._nat, self._label, self._set))
            case "subseteq":
                self._advance()
                return Subseteq(*self._call(self._set, self._set))
            case "isempty":
                self._advance()
                return IsEmpty(*self._call(self._set))
            case "eqlabel":
                self._advance()
                return EqLabel(*self._call(self._label, self._label))
        self._wrong_sort("bool", tok)


def parse(text: str, name: str = "program", universe: Optional[PrincipalUniverse] = None) -> Program:
    """Parses `fun(x) -> expr`; with a universe, label literals are checked too."""
    program = Parser(text, name).parse()
    if universe is not None:
        program.check(universe)
    return program

# -------------------------
# Printer
# -------------------------

def to_source(node: Expr, param: str = "x") -> str:
    """Inverse of the parser: binary boolean operators are always parenthesized."""
    p = lambda n: to_source(n, param)
    match node:
        case Var():
            return param
        case EmptySet():
            return "{}"
        case Singleton(nat, label):
            return f"{{{p(nat)}^{p(label)}}}"
        case Union(left, right):
            return f"union({p(left)}, {p(right)})"
        case Project(s, label):
            return f"project({p(s)}, {p(label)})"
        case SelectAt(s, label):
            return f"at({p(s)}, {p(label)})"
        case Relabel(s, label):
            return f"relabel({p(s)}, {p(label)})"
        case If(cond, then, orelse):
            return f"if {p(cond)} then {p(then)} else {p(orelse)}"
        case Diverge():
            return "diverge"
        case NatLit(value):
            return str(value)
        case Size(s):
            return f"size({p(s)})"
        case Add(left, right):
            return f"add({p(left)}, {p(right)})"
        case LabelLit(names):
            return "{" + ",".join(names) + "}"
        case JoinLabels(s):
            return f"joinlabels({p(s)})"
        case JoinL(left, right):
            return f"join({p(left)}, {p(right)})"
        case Member(nat, label, s):
            return f"member({p(nat)}, {p(label)}, {p(s)})"
        case Subseteq(left, right):
            return f"subseteq({p(left)}, {p(right)})"
        case IsEmpty(s):
            return f"isempty({p(s)})"
        case EqLabel(left, right):
            return f"eqlabel({p(left)}, {p(right)})"
        case And(left, right):
            return f"({p(left)} && {p(right)})"
        case Or(left, right):
            return f"({p(left)} || {p(right)})"
        case Not(operand):
            return f"!{p(operand)}"
    raise TypeError(f"not a DSL node: {node!r}")

# -------------------------
# Evaluator
# -------------------------

class _Diverged(Exception):
    pass


class _OutOfFuel(Exception):
    pass


@lru_cache(maxsize=256)
def _check_literals(body: SetExpr, universe: PrincipalUniverse) -> None:
    for node in walk(body):
        if isinstance(node, LabelLit):
            universe.label(node.names)


class _Evaluator:
    """One instance per run; charges one unit of fuel per AST node visited."""

    def __init__(self, x: LabeledSet, fuel: int):
        self.x = x
        self.universe = x.universe
        self.fuel = fuel

    def _tick(self):
        if self.fuel <= 0:
            raise _OutOfFuel()
        self.fuel -= 1

    def eval_set(self, node: SetExpr) -> LabeledSet:
        self._tick()
        match node:
            case Var():
                return self.x
            case EmptySet():
                return LabeledSet.empty(self.universe)
            case Singleton(nat, label):
                value = self.eval_nat(nat)
                return LabeledSet(self.universe, frozenset([LabeledValue(value, self.eval_label(label))]))
            case Union(left, right):
                return self.eval_set(left).union(self.eval_set(right))
            case Project(s, label):
                return self.eval_set(s).project(self.eval_label(label))
            case SelectAt(s, label):
                return self.eval_set(s).select(self.eval_label(label))
            case Relabel(s, label):
                return self.eval_set(s).relabel(self.eval_label(label))
            case If(cond, then, orelse):
                return self.eval_set(then) if self.eval_bool(cond) else self.eval_set(orelse)
            case Diverge():
                raise _Diverged()
        raise TypeError(f"not a set expression: {node!r}")

    def eval_nat(self, node: NatExpr) -> int:
        self._tick()
        match node:
            case NatLit(value):
                return value
            case Size(s):
                return len(self.eval_set(s))
            case Add(left, right):
                return self.eval_nat(left) + self.eval_nat(right)
        raise TypeError(f"not a nat expression: {node!r}")

    def eval_label(self, node: LabelExpr):
        self._tick()
        match node:
            case LabelLit(names):
                return self.universe.label(names)
            case JoinLabels(s):
                return self.eval_set(s).join_label()
            case JoinL(left, right):
                return self.eval_label(left).join(self.eval_label(right))
        raise TypeError(f"not a label expression: {node!r}")

    def eval_bool(self, node: BoolExpr) -> bool:
        self._tick()
        match node:
            case Member(nat, label, s):
                value = self.eval_nat(nat)
                return LabeledValue(value, self.eval_label(label)) in self.eval_set(s)
            case Subseteq(left, right):
                return self.eval_set(left).issubset(self.eval_set(right))
            case IsEmpty(s):
                return len(self.eval_set(s)) == 0
            case EqLabel(left, right):
                return self.eval_label(left) == self.eval_label(right)
            case And(left, right):
                return self.eval_bool(left) and self.eval_bool(right)
            case Or(left, right):
                return self.eval_bool(left) or self.eval_bool(right)
            case Not(operand):
                return not self.eval_bool(operand)
        raise TypeError(f"not a bool expression: {node!r}")


def evaluate(p: Program, x: LabeledSet, fuel: int = DEFAULT_FUEL) -> Outcome:
    """Runs p on x. Never raises for partiality: see Outcome."""
    if fuel < 1:
        raise ConfigError(f"fuel must be positive, got {fuel}")
    p.check(x.universe)
    try:
        return Outcome.terminated(_Evaluator(x, fuel).eval_set(p.body))
    except _Diverged:
        return DIVERGED
    except _OutOfFuel:
        logger.debug(f"{p.name} ran out of fuel ({fuel}) on {x}")
        return FUEL_EXHAUSTED

# -------------------------
# Catalog
# -------------------------

_CATALOG_ENTRIES: List[Dict[str, Any]] = load_static_data("catalog.json", default=[])
_CATALOG: Dict[str, Program] = {}


def catalog_names() -> List[str]:
    return [e["name"] for e in _CATALOG_ENTRIES]


def table_names() -> List[str]:
    """The nine example programs of the classification table, in table order."""
    return [e["name"] for e in _CATALOG_ENTRIES if e.get("table")]


def catalog_entry(name: str) -> Dict[str, Any]:
    for e in _CATALOG_ENTRIES:
        if e["name"] == name:
            return e
    raise ConfigError(f"unknown catalog program '{name}'", suggest(name, catalog_names()))


def get_program(name: str) -> Program:
    if name not in _CATALOG:
        _CATALOG[name] = parse(catalog_entry(name)["source"], name)
    return _CATALOG[name]


def catalog() -> List[Program]:
    return [get_program(n) for n in catalog_names()]


def to_input_expr(S: Sequence[str]) -> SetExpr:
    """toInput(S) as a set expression: a union chain of {1^{n}} singletons."""
    parts = [Singleton(NatLit(1), label_lit([n])) for n in S]
    if not parts:
        return EmptySet()
    expr = parts[0]
    for part in parts[1:]:
        expr = Union(expr, part)
    return expr


def _generator_name(kind: str, S: Sequence[str]) -> str:
    return f"{kind}{{{','.join(S)}}}"


def _ordered(S: Iterable[str], universe: PrincipalUniverse) -> List[str]:
    names = set(S)
    universe.label(names)
    return [n for n in universe.principals if n in names]


def greater(S: Iterable[str], universe: PrincipalUniverse) -> Program:
    """greater(x) = if toInput(S) is a subset of x then {1^S} else {}."""
    names = _ordered(S, universe)
    body = If(Subseteq(to_input_expr(names), Var()), Singleton(NatLit(1), label_lit(names)), EmptySet())
    return Program(_generator_name("greater", names), "x", body)


def equal(S: Iterable[str], universe: PrincipalUniverse) -> Program:
    """equal(x) = if toInput(S) is a subset of x and the join of L(x) is S then {1^S} else {}."""
    names = _ordered(S, universe)
    cond = And(Subseteq(to_input_expr(names), Var()), EqLabel(JoinLabels(Var()), label_lit(names)))
    body = If(cond, Singleton(NatLit(1), label_lit(names)), EmptySet())
    return Program(_generator_name("equal", names), "x", body)


EMPTY_BODY = EmptySet()


def is_empty_program(p: Program) -> bool:
    return p.body == EMPTY_BODY
