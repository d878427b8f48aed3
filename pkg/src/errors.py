"""
Workbench Errors
Exception hierarchy shared by every module. Program partiality is never an
exception (see dsl.Outcome); these are for misuse, bad config and guards.
"""
from typing import Any, Optional


class WorkbenchError(Exception):
    """Root of all workbench failures."""


class ConfigError(WorkbenchError, ValueError):
    """Bad universe file, selector, CLI argument or environment value."""

    def __init__(self, message: str, suggestion: Optional[str] = None):
        if suggestion:
            message = f"{message} (did you mean '{suggestion}'?)"
        super().__init__(message)
        self.suggestion = suggestion


class UniverseMismatchError(WorkbenchError, ValueError):
    """Two labels (or label sets) drawn from different principal universes."""


class UnknownPrincipalError(ConfigError):
    """A label literal names a principal the universe does not declare."""


class ParseError(WorkbenchError):
    """Syntax error in program text or a labeled-set literal."""

    def __init__(self, message: str, line: int = 1, col: int = 1):
        super().__init__(f"{message} at line {line}, column {col}")
        self.line = line
        self.col = col


class SortError(ParseError):
    """Well-formed syntax used at the wrong sort (e.g. a label where a set goes)."""


class GuardError(WorkbenchError):
    """Requested input space or benchmark size exceeds the configured guard."""


class InconclusiveError(WorkbenchError):
    """The oracle met FuelExhausted; no verdict can be given soundly."""

    def __init__(self, message: str, input_set: Any = None):
        super().__init__(message)
        self.input_set = input_set


class DovetailExhaustedError(WorkbenchError):
    """No member of an equivalence class terminates."""


class BudgetExceededError(WorkbenchError):
    """A test sequence ran more tests than its mechanism's budget allows."""


class AttackError(WorkbenchError):
    """The black-box construction could not produce either witness."""


class LabelError(WorkbenchError, ValueError):
    """Misuse of a lattice operation (e.g. a level outside the given set)."""
