"""Qudit QAOA simulator and benchmark harness."""

from quditqaoa.register import (
    DimensionLimitError,
    DomainError,
    QuditRegister,
    StateError,
    StateVector,
    assignment_of,
    basis_state,
    index_of,
    inner_product,
    probability,
    sample,
    uniform_state,
)

__version__ = "0.1.0"

__all__ = [
    "DimensionLimitError",
    "DomainError",
    "QuditRegister",
    "StateError",
    "StateVector",
    "assignment_of",
    "basis_state",
    "index_of",
    "inner_product",
    "probability",
    "sample",
    "uniform_state",
]
