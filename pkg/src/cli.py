"""
Workbench CLI
Subcommands for running mechanisms, classifying programs, sweeping ME
against MEF, checking level assignments and mechanisms, attacking budgeted
black-box mechanisms and measuring MEF's output blowup. Every command prints
one canonical JSON report on stdout; logs go to stderr.
"""
import argparse
import concurrent.futures
import dataclasses
import logging
import math
import os
import sys
import time
from typing import Any, Dict, List, Optional, Sequence, Tuple

from src.blackbox import attack, mechanism_catalog, resolve_budgeted
from src.config import (
    BLOWUP_MAX_N,
    DEFAULT_FUEL,
    DEFAULT_SEED,
    DEFAULT_VALUES,
    LOG_LEVEL,
    WORKERS,
    load_universe,
)
from src.dsl import Program, catalog_entry, catalog_names, get_program, parse, table_names
from src.enforce import (
    CorpusEntry,
    SubRun,
    assignment_catalog,
    check_assignment,
    check_mechanism,
    equivalence_sweep,
    la_compare,
    mef,
    resolve_assignment,
    resolve_mechanism,
)
from src.errors import (
    ConfigError,
    GuardError,
    InconclusiveError,
    LabelError,
    ParseError,
    UniverseMismatchError,
    WorkbenchError,
)
from src.labeled import LabeledSet, literal_principals, parse_literal, to_input
from src.lattice import PrincipalUniverse
from src.oracle import UniverseSpec, classify
from src.utils import canonical_json, config_hash, load_json, suggest

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1       # unexpected failure or a benchmark assertion
EXIT_CONFIG = 2        # bad config, guard or parse error
EXIT_INCONCLUSIVE = 3  # fuel ran out somewhere a verdict needed it

DEFAULT_MECHANISMS = ["me", "mef", "mest", "id", "empty"]

# -------------------------
# Loading Programs, Inputs & Universes
# -------------------------

def load_program(ref: str) -> Tuple[Program, Optional[Dict[str, Any]]]:
    """
    A DSL file path or a catalog name. A missing file whose stem names a
    catalog program (e.g. combine.dsl) falls back to the catalog entry.
    Returns the program and its catalog entry, if any.
    """
    if os.path.isfile(ref):
        with open(ref, "r", encoding="utf-8") as f:
            text = f.read()
        return parse(text, os.path.splitext(os.path.basename(ref))[0]), None

    name = os.path.splitext(os.path.basename(ref))[0]
    if name in catalog_names():
        return get_program(name), catalog_entry(name)
    raise ConfigError(f"no program file or catalog entry named '{ref}'", suggest(name, catalog_names()))


def _input_source(text: str) -> Tuple[str, Any]:
    """('literal', raw atoms) for inline syntax, ('json', data) for a JSON file."""
    if os.path.isfile(text):
        return "json", load_json(text)
    if text.strip().startswith("{"):
        return "literal", parse_literal(text)
    raise ConfigError(f"input '{text}' is neither a file nor a literal like '{{1^{{H}}}}'")


def _input_principals_values(source: Tuple[str, Any]) -> Tuple[List[str], List[int]]:
    kind, data = source
    if kind == "literal":
        return literal_principals(data), [v for v, _ in data]
    names: List[str] = []
    values: List[int] = []
    for item in data if isinstance(data, list) else []:
        if isinstance(item, dict):
            names.extend(n for n in item.get("label", []) if isinstance(n, str) and n not in names)
            if isinstance(item.get("value"), (int, str)) and str(item["value"]).isdigit():
                values.append(int(item["value"]))
    return names, values


def build_input(source: Tuple[str, Any], universe: PrincipalUniverse) -> LabeledSet:
    kind, data = source
    if kind == "literal":
        return LabeledSet.of(universe, data)
    return LabeledSet.from_json(data, universe)


def _apply_overrides(spec: UniverseSpec, args: argparse.Namespace) -> UniverseSpec:
    changes = {}
    if args.fuel is not None:
        changes["fuel"] = args.fuel
    if args.workers is not None:
        changes["workers"] = args.workers
    return dataclasses.replace(spec, **changes) if changes else spec


def resolve_spec(args: argparse.Namespace, entry: Optional[Dict[str, Any]] = None, *,
                 check: bool = False, principals: Sequence[str] = (),
                 values: Sequence[int] = ()) -> UniverseSpec:
    """
    --universe wins; then the catalog entry's universe (its smaller check
    universe when `check`); else a universe inferred from the given principals,
    falling back to the two-point lattice.
    """
    if args.universe:
        spec = load_universe(args.universe)
    elif entry is not None:
        spec = load_universe(entry.get("check_universe", entry["universe"]) if check else entry["universe"])
    else:
        names = list(dict.fromkeys(principals)) or ["H"]
        spec = UniverseSpec.of(names, sorted(set(DEFAULT_VALUES) | set(values)))
        logger.info(f"Inferred universe {names} with values {list(spec.values)}")
    return _apply_overrides(spec, args)


def _fits(program: Program, spec: UniverseSpec) -> bool:
    return set(program.principals()) <= set(spec.universe.principals)


def build_corpus(args: argparse.Namespace) -> List[CorpusEntry]:
    """Catalog programs (or --program refs) on their check universes, or all on --universe."""
    refs = args.program or catalog_names()
    corpus = []
    for ref in refs:
        program, entry = load_program(ref)
        spec = resolve_spec(args, entry, check=True, principals=program.principals())
        if not _fits(program, spec):
            logger.warning(f"Skipping {program.name}: its labels leave universe {list(spec.universe.principals)}")
            continue
        corpus.append(CorpusEntry(program, spec))
    return corpus

# -------------------------
# Commands
# -------------------------

def cmd_enforce(args: argparse.Namespace) -> Tuple[int, Dict[str, Any]]:
    program, entry = load_program(args.program)
    source = _input_source(args.input)
    names, values = _input_principals_values(source)
    spec = resolve_spec(args, entry, principals=program.principals() + names, values=values)
    x = build_input(source, spec.universe)
    mechanism = resolve_mechanism(args.mech, args.seed)

    sub_runs: Optional[List[SubRun]] = [] if args.trace else None
    out = mechanism(program, x, spec, sub_runs)
    logger.info(f"{mechanism.tag}[{program.name}]({x}) = {out}")

    report = {
        "mechanism": mechanism.tag,
        "program": program.name,
        "universe": spec.to_json(),
        "input": x.to_json(),
        **out.to_json(),
    }
    if sub_runs is not None:
        report["trace"] = [s.to_json() for s in sub_runs]
    return (EXIT_INCONCLUSIVE if out.exhausted else EXIT_OK), report


def cmd_classify(args: argparse.Namespace) -> Tuple[int, Dict[str, Any]]:
    refs = table_names() if args.all_catalog else args.program
    if not refs:
        raise ConfigError("classify needs --program or --all-catalog")
    rows = []
    for ref in refs:
        program, entry = load_program(ref)
        spec = resolve_spec(args, entry, principals=program.principals())
        row = classify(program, spec).to_dict()
        row["universe"] = spec.to_json()
        rows.append(row)
    return EXIT_OK, {"rows": rows}


def cmd_equiv(args: argparse.Namespace) -> Tuple[int, Dict[str, Any]]:
    report = equivalence_sweep(build_corpus(args), faulty=args.faulty)
    return EXIT_OK, report.to_dict()


def cmd_attack(args: argparse.Namespace) -> Tuple[int, Dict[str, Any]]:
    if args.mech == "all":
        mechanisms = mechanism_catalog(args.budget, args.seed)
    else:
        mechanisms = [resolve_budgeted(args.mech, args.budget, args.seed)]
    fuel = args.fuel or DEFAULT_FUEL
    workers = args.workers or WORKERS

    if workers > 1 and len(mechanisms) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(lambda E: attack(E, args.n, fuel), mechanisms))
    else:
        reports = [attack(E, args.n, fuel) for E in mechanisms]

    if len(reports) == 1:
        return EXIT_OK, reports[0].to_dict()
    return EXIT_OK, {"attacks": [r.to_dict() for r in reports]}


def blowup_row(n: int, fuel: int = DEFAULT_FUEL) -> Dict[str, Any]:
    """MEF[combineAll] on toInput({1..n}): output size and sub-run count, both expected 2^n."""
    universe = PrincipalUniverse(tuple(str(i) for i in range(1, max(n, 1) + 1)))
    spec = UniverseSpec(universe, (1,), fuel=fuel)
    x = to_input(universe.principals[:n], universe)
    sub_runs: List[SubRun] = []

    start = time.perf_counter()
    out = mef(get_program("combineAll"), x, spec, sub_runs)
    seconds = time.perf_counter() - start

    size = len(out.value) if out.defined else 0
    return {
        "n": n,
        "size": size,
        "sub_runs": len(sub_runs),
        "seconds": round(seconds, 6),
        "log2": math.log2(size) if size else None,
        "ok": out.defined and size == 2 ** n and len(sub_runs) == 2 ** n,
    }


def cmd_bench_blowup(args: argparse.Namespace) -> Tuple[int, Dict[str, Any]]:
    if args.n_min < 0 or args.n_max < args.n_min:
        raise ConfigError(f"need 0 <= n-min <= n-max, got {args.n_min}..{args.n_max}")
    if args.n_max > BLOWUP_MAX_N:
        raise GuardError(f"n-max={args.n_max} is above the guard of {BLOWUP_MAX_N}")

    rows = []
    for n in range(args.n_min, args.n_max + 1):
        row = blowup_row(n, args.fuel or DEFAULT_FUEL)
        logger.info(f"blowup n={n}: {row['size']} outputs in {row['seconds']:.4f}s")
        if not row["ok"]:
            logger.error(f"blowup n={n}: expected {2 ** n} outputs and sub-runs, got {row['size']}/{row['sub_runs']}")
        rows.append(row)
    ok = all(r["ok"] for r in rows)
    return (EXIT_OK if ok else EXIT_FAILURE), {"rows": rows, "ok": ok}


def cmd_assign(args: argparse.Namespace) -> Tuple[int, Dict[str, Any]]:
    if args.assignment:
        family = [resolve_assignment(name, args.seed) for name in args.assignment]
    else:
        family = assignment_catalog(args.seed)
    corpus = build_corpus(args)
    report: Dict[str, Any] = {"assignments": [check_assignment(L, corpus).to_dict() for L in family]}
    if args.compare:
        report["compare"] = la_compare(family, corpus).to_dict()
    return EXIT_OK, report


def cmd_taxonomy(args: argparse.Namespace) -> Tuple[int, Dict[str, Any]]:
    corpus = build_corpus(args)
    selectors = args.mech or DEFAULT_MECHANISMS
    rows = []
    for selector in selectors:
        row = check_mechanism(resolve_mechanism(selector, args.seed), corpus).to_dict()
        row["selector"] = selector
        rows.append(row)
    return EXIT_OK, {"mechanisms": rows}

# -------------------------
# Argument Parsing
# -------------------------

def _budget(raw: str) -> Optional[int]:
    if raw.lower() in ("none", "inf", "unbounded"):
        return None
    try:
        value = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"budget must be a positive integer or 'none', got '{raw}'")
    if value < 1:
        raise argparse.ArgumentTypeError(f"budget must be at least 1, got {value}")
    return value


def _positive(raw: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got '{raw}'")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--universe", help="universe JSON file or bundled name (two_point, abc, pair, abc_unit)")
    common.add_argument("--fuel", type=_positive, default=None, help="evaluation step budget per run")
    common.add_argument("--workers", type=_positive, default=None, help="thread-pool width")
    common.add_argument("--trace", action="store_true", help="include sub-run traces where available")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for every sampled choice")
    common.add_argument("--json", metavar="OUT", help="also write the report to this file")

    parser = argparse.ArgumentParser(prog="ifc-workbench", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enforce", parents=[common], help="run one mechanism on one input")
    p.add_argument("--mech", required=True, help="me, mef, mest, id, empty or mel:<assignment>")
    p.add_argument("--program", required=True, help="DSL file or catalog name")
    p.add_argument("--input", required=True, help="literal like '{1^{Alice}}' or a JSON file")
    p.set_defaults(func=cmd_enforce)

    p = sub.add_parser("classify", parents=[common], help="decide NI and termination class")
    p.add_argument("--program", action="append", default=[], help="DSL file or catalog name (repeatable)")
    p.add_argument("--all-catalog", action="store_true", help="the nine example programs of the classification table")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("equiv", parents=[common], help="exhaustive ME versus MEF comparison")
    p.add_argument("--program", action="append", default=[], help="restrict the corpus (repeatable)")
    p.add_argument("--faulty", action="store_true", help="use exact-label filtering in MEF")
    p.set_defaults(func=cmd_equiv)

    p = sub.add_parser("attack", parents=[common], help="black-box attack on a budgeted mechanism")
    p.add_argument("--mech", default="mef", choices=["me", "mef", "mef-random", "all"])
    p.add_argument("--budget", type=_budget, default=8, help="max tests per run, or 'none'")
    p.add_argument("--n", type=_positive, default=4, help="number of principals")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("bench-blowup", parents=[common], help="MEF[combineAll] output size for n = n-min..n-max")
    p.add_argument("--n-min", type=int, default=0)
    p.add_argument("--n-max", type=int, default=10)
    p.set_defaults(func=cmd_bench_blowup)

    p = sub.add_parser("assign", parents=[common], help="check level assignments over the catalog")
    p.add_argument("--assignment", action="append", default=[], help="assignment name (repeatable)")
    p.add_argument("--program", action="append", default=[], help="restrict the corpus (repeatable)")
    p.add_argument("--compare", action="store_true", help="also compare assignment sizes")
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("taxonomy", parents=[common], help="security and transparency of mechanisms")
    p.add_argument("--mech", action="append", default=[], help="mechanism selector (repeatable)")
    p.add_argument("--program", action="append", default=[], help="restrict the corpus (repeatable)")
    p.set_defaults(func=cmd_taxonomy)

    return parser

# -------------------------
# Entry Point
# -------------------------

def _config_of(args: argparse.Namespace) -> Dict[str, Any]:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "json")}


def emit(args: argparse.Namespace, payload: Dict[str, Any]) -> str:
    config = _config_of(args)
    report = {"command": args.command, "config": config, "config_hash": config_hash(config), **payload}
    text = canonical_json(report)
    print(text)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as f:
            f.write(text + "\n")
        logger.info(f"Report written to {args.json}")
    return text


def configure_logging(level: str = LOG_LEVEL) -> None:
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format='%(asctime)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse already printed its usage message
        return e.code if isinstance(e.code, int) else EXIT_CONFIG

    try:
        code, payload = args.func(args)
    except (ConfigError, ParseError, GuardError, UniverseMismatchError, LabelError) as e:
        logger.error(f"{args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except InconclusiveError as e:
        logger.error(f"{args.command}: {e}")
        print(f"inconclusive: {e}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except WorkbenchError as e:
        logger.error(f"{args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    except Exception as e:
        logger.exception(f"Unexpected failure in {args.command}: {e}")
        return EXIT_FAILURE

    emit(args, payload)
    return code
