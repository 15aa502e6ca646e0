"""Geometric constraint problems on integer grids with a recurrent message-passing solver.

Problems are plain dicts in the JSONL record format used by the command-line tool.
"""

from ._core import GeoCspError, Model, analysis, generate, solve, solver_log, train, validate

__all__ = ["GeoCspError", "Model", "analysis", "generate", "solve", "solver_log", "train", "validate"]
