"""
Utility Helpers
Fuzzy name suggestions, JSON data loading and canonical report encoding.
"""
import hashlib
import json
import logging
import os
from typing import Any, Iterable, Optional

from rapidfuzz import fuzz, process

from src.errors import ConfigError

logger = logging.getLogger(__name__)

DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), "data")
SUGGEST_THRESHOLD = 60   # below this a "did you mean" hint is more noise than help

# -------------------------------------------------------------------
# Fuzzy Suggestions
# -------------------------------------------------------------------

def suggest(name: str, candidates: Iterable[str], threshold: int = SUGGEST_THRESHOLD) -> Optional[str]:
    """
    Returns the closest known name to a mistyped one, or None.
    Case is ignored ('leakbit' finds 'leakBit'); WRatio copes with
    both typos and partial names like 'divergeIfH'.
    """
    choices = list(candidates)
    if not name or not choices:
        return None

    lowered = {c.lower(): c for c in choices}
    if name.lower() in lowered:
        return lowered[name.lower()]

    match = process.extractOne(name.lower(), list(lowered), scorer=fuzz.WRatio)
    if match is None or match[1] < threshold:
        return None
    return lowered[match[0]]

# -------------------------------------------------------------------
# JSON Loading
# -------------------------------------------------------------------

def load_static_data(filename: str, default: Any = None) -> Any:
    """Loads a bundled JSON file from data/; logs and returns default on failure."""
    path = os.path.join(DATA_DIR, filename)
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        logger.error(f"Static data file not found: {path}")
        return default
    except json.JSONDecodeError as e:
        logger.error(f"Failed to parse {filename}: {e}")
        return default


def load_json(path: str) -> Any:
    """Loads a user-supplied JSON file; failures are config errors."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {path}: {e}")

# -------------------------------------------------------------------
# Canonical Reports
# -------------------------------------------------------------------

def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


def config_hash(config: Any) -> str:
    """Short stable digest of a config dict, embedded in every report."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]
