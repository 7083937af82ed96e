"""Cutting planes and certificates for the bipartite boolean quadric
polytope with multiple-choice constraints."""
from __future__ import annotations

from .core import (BqpError, CapExceeded, Instance, InstanceError, LinearConstraint, NotSubsetUniform,
                   Point, build_instance, complete_instance, dependency_graph, inst_a, inst_b, inst_c,
                   is_subset_uniform, neighbourhood, x_var, y_var, z_var)

__version__ = "0.1.0"

__all__ = [
    "BqpError", "CapExceeded", "Instance", "InstanceError", "LinearConstraint", "NotSubsetUniform",
    "Point", "build_instance", "complete_instance", "dependency_graph", "inst_a", "inst_b", "inst_c",
    "is_subset_uniform", "neighbourhood", "x_var", "y_var", "z_var",
]
