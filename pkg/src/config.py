"""
Workbench Configuration
Environment-driven defaults (via .env) and universe config files.
"""
import logging
import os
from typing import Any, Dict

from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)

# -------------------------
# Environment Defaults
# -------------------------

def _env_int(name: str, default: int, minimum: int = 0) -> int:
    """Reads an integer env var; malformed or out-of-range values fall back."""
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        logger.warning(f"{name}={raw!r} is not an integer; using {default}")
        return default
    if value < minimum:
        logger.warning(f"{name}={value} is below {minimum}; using {default}")
        return default
    return value


DEFAULT_FUEL = _env_int("IFC_FUEL", 10000, minimum=1)            # steps per evaluation
MAX_ATOMS = _env_int("IFC_MAX_ATOMS", 20, minimum=1)             # oracle guard on |A x Labels|
WORKERS = _env_int("IFC_WORKERS", 1, minimum=1)                  # thread-pool width
DEFAULT_SEED = _env_int("IFC_SEED", 0)
BLOWUP_MAX_N = _env_int("IFC_BLOWUP_MAX_N", 16, minimum=0)
LOG_LEVEL = os.getenv("IFC_LOG_LEVEL", "WARNING").upper()

DEFAULT_VALUES = (0, 1)

# -------------------------
# Universe Config Files
# -------------------------

UNIVERSE_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), "data", "universes")


def parse_universe_config(raw: Dict[str, Any]):
    """Builds a UniverseSpec from the decoded JSON of a universe file."""
    # Local imports: config is imported by lattice/oracle users.
    from src.errors import ConfigError
    from src.lattice import PrincipalUniverse
    from src.oracle import UniverseSpec

    if not isinstance(raw, dict) or "principals" not in raw:
        raise ConfigError("universe config needs a 'principals' list")
    principals = raw["principals"]
    if not isinstance(principals, list) or not all(isinstance(p, str) for p in principals):
        raise ConfigError("'principals' must be a list of strings")

    values = raw.get("values", list(DEFAULT_VALUES))
    if not isinstance(values, list) or not values:
        raise ConfigError("'values' must be a non-empty list of naturals")
    try:
        values = tuple(sorted({int(v) for v in values}))
    except (TypeError, ValueError):
        raise ConfigError(f"'values' must be naturals, got {values!r}")
    if values[0] < 0:
        raise ConfigError("'values' must be naturals")

    fuel = raw.get("fuel", DEFAULT_FUEL)
    if not isinstance(fuel, int) or fuel < 1:
        raise ConfigError(f"'fuel' must be a positive integer, got {fuel!r}")

    return UniverseSpec(PrincipalUniverse(tuple(principals)), values, fuel)


def load_universe(name_or_path: str):
    """Loads a universe by bundled name (e.g. 'two_point') or JSON file path."""
    from src.errors import ConfigError
    from src.utils import load_json, suggest

    if os.path.isfile(name_or_path):
        return parse_universe_config(load_json(name_or_path))

    bundled = bundled_universes()
    if name_or_path not in bundled:
        raise ConfigError(f"unknown universe '{name_or_path}'", suggest(name_or_path, bundled))
    return parse_universe_config(load_json(os.path.join(UNIVERSE_DIR, f"{name_or_path}.json")))


def bundled_universes():
    try:
        return sorted(f[:-5] for f in os.listdir(UNIVERSE_DIR) if f.endswith(".json"))
    except FileNotFoundError:
        logger.error(f"Universe directory not found: {UNIVERSE_DIR}")
        return []
