"""Secure multi-execution workbench: lattices, labeled sets, a small program DSL, oracles and mechanisms."""
