"""Finite-horizon constructions of hypercyclic algebras.

The package builds explicit witnesses (weighted shifts on sequence spaces and
convolution operators on entire functions) and verifies them numerically with
conservative tail bounds.
"""

SCHEMA_VERSION = "1.0"

__version__ = "0.1.0"
