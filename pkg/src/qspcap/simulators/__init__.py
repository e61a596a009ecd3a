"""Interchangeable circuit-execution backends: dense array, vector-tree,
and stabilizer/destabilizer hybrid."""

from .dense import DenseState

__all__ = ["DenseState"]
