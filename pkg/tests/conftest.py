"""
conftest.py — shared pytest configuration.

Puts the project root on sys.path and provides the bundled universes as
fixtures. Hypothesis runs a smaller profile unless HYPOTHESIS_PROFILE=ci.
"""
import os
import sys

import pytest
from hypothesis import settings

# Ensure the project root is on the path for all test files
sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from src.config import load_universe  # noqa: E402
from src.labeled import from_literal  # noqa: E402

settings.register_profile("dev", max_examples=50, deadline=None)
settings.register_profile("ci", max_examples=300, deadline=None)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "dev"))


@pytest.fixture(scope="session")
def two_point():
    """["H"] with values {0, 1}: L = {} below H = {H}."""
    return load_universe("two_point")


@pytest.fixture(scope="session")
def pair():
    return load_universe("pair")


@pytest.fixture(scope="session")
def abc():
    return load_universe("abc")


@pytest.fixture(scope="session")
def abc_unit():
    return load_universe("abc_unit")


@pytest.fixture
def lit(two_point):
    """Literal helper bound to the two-point universe: lit('{1^H}')."""
    def make(text, spec=None):
        return from_literal(text, (spec or two_point).universe)
    return make
