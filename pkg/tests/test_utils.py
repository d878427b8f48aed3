"""
Tests for src/utils.py and src/config.py helpers.
"""
import json

import pytest

from src import config
from src.errors import ConfigError
from src.utils import canonical_json, config_hash, load_json, load_static_data, suggest


# ─── suggest ──────────────────────────────────────────────────────

class TestSuggest:
    def test_case_insensitive_exact(self):
        assert suggest("leakbit", ["leakBit", "leakAll"]) == "leakBit"

    def test_typo(self):
        assert suggest("combien", ["combine", "combineAll", "id"]) == "combine"

    def test_partial_name(self):
        assert suggest("divergeIfHAbs", ["divergeIfHAbsent", "leakAll"]) == "divergeIfHAbsent"

    def test_no_candidates(self):
        assert suggest("me", []) is None

    def test_empty_name(self):
        assert suggest("", ["me", "mef"]) is None

    def test_nothing_close(self):
        assert suggest("zzzzzzzz", ["me", "mef", "mest"]) is None


# ─── JSON loading ─────────────────────────────────────────────────

class TestLoadJson:
    def test_loads_file(self, tmp_path):
        path = tmp_path / "u.json"
        path.write_text(json.dumps({"principals": ["H"]}))
        assert load_json(str(path)) == {"principals": ["H"]}

    def test_missing_file_is_config_error(self, tmp_path):
        with pytest.raises(ConfigError, match="file not found"):
            load_json(str(tmp_path / "nope.json"))

    def test_bad_json_is_config_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_json(str(path))

    def test_static_data_missing_returns_default(self):
        assert load_static_data("no_such_file.json", default=[]) == []

    def test_static_catalog_loads(self):
        names = [e["name"] for e in load_static_data("catalog.json", default=[])]
        assert "leakBit" in names and "combineAll" in names


# ─── canonical reports ────────────────────────────────────────────

class TestCanonicalJson:
    def test_sorted_keys(self):
        text = canonical_json({"b": 1, "a": 2})
        assert text.index('"a"') < text.index('"b"')

    def test_hash_is_order_independent(self):
        assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})

    def test_hash_changes_with_content(self):
        assert config_hash({"fuel": 1}) != config_hash({"fuel": 2})

    def test_hash_length(self):
        assert len(config_hash({})) == 16


# ─── environment & universe config ────────────────────────────────

class TestEnvInt:
    def test_default_when_unset(self, monkeypatch):
        monkeypatch.delenv("IFC_TEST_VALUE", raising=False)
        assert config._env_int("IFC_TEST_VALUE", 7) == 7

    def test_reads_value(self, monkeypatch):
        monkeypatch.setenv("IFC_TEST_VALUE", "42")
        assert config._env_int("IFC_TEST_VALUE", 7) == 42

    def test_malformed_falls_back(self, monkeypatch):
        monkeypatch.setenv("IFC_TEST_VALUE", "lots")
        assert config._env_int("IFC_TEST_VALUE", 7) == 7

    def test_below_minimum_falls_back(self, monkeypatch):
        monkeypatch.setenv("IFC_TEST_VALUE", "0")
        assert config._env_int("IFC_TEST_VALUE", 7, minimum=1) == 7


class TestUniverseConfig:
    def test_bundled_names(self):
        assert {"two_point", "abc", "pair"} <= set(config.bundled_universes())

    def test_two_point(self, two_point):
        assert two_point.universe.principals == ("H",)
        assert two_point.values == (0, 1)

    def test_values_default(self):
        spec = config.parse_universe_config({"principals": ["A"]})
        assert spec.values == (0, 1)
        assert spec.fuel == config.DEFAULT_FUEL

    def test_values_sorted_and_deduplicated(self):
        spec = config.parse_universe_config({"principals": ["A"], "values": [3, 1, 3]})
        assert spec.values == (1, 3)

    def test_missing_principals(self):
        with pytest.raises(ConfigError, match="principals"):
            config.parse_universe_config({"values": [0]})

    def test_duplicate_principals(self):
        with pytest.raises(ConfigError, match="distinct"):
            config.parse_universe_config({"principals": ["A", "A"]})

    def test_bad_fuel(self):
        with pytest.raises(ConfigError, match="fuel"):
            config.parse_universe_config({"principals": ["A"], "fuel": 0})

    def test_negative_value(self):
        with pytest.raises(ConfigError):
            config.parse_universe_config({"principals": ["A"], "values": [-1]})

    def test_unknown_bundled_name_suggests(self):
        with pytest.raises(ConfigError, match="two_point"):
            config.load_universe("two_pont")

    def test_file_path(self, tmp_path):
        path = tmp_path / "mine.json"
        path.write_text(json.dumps({"principals": ["X", "Y"], "values": [1], "fuel": 50}))
        spec = config.load_universe(str(path))
        assert spec.universe.principals == ("X", "Y")
        assert spec.fuel == 50
