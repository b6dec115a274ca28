"""Safe arithmetic expression strings for scalar data on grids.

Configs may specify loads, vector fields and boundary traces as small
arithmetic expressions over the coordinates (``x1``, ``x2``, ..., ``r``,
``theta``) plus ``absy`` as an alias for ``r = |y|``.  The evaluator
walks a restricted AST: numbers, the coordinate names, arithmetic
operators, and a whitelist of NumPy-vectorized functions.  Nothing else
is accepted, so config files cannot execute arbitrary code.
"""

from __future__ import annotations

import ast
import math
from typing import Callable

import numpy as np

_FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "arctan": np.arctan,
    "atan": np.arctan,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "min": np.minimum,
    "max": np.maximum,
}

_CONSTANTS = {
    "pi": math.pi,
    "e": math.e,
}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
    ast.Mod: np.mod,
}

_UNARYOPS = {
    ast.USub: np.negative,
    ast.UAdd: lambda v: v,
}


class ExpressionError(ValueError):
    """Raised when an expression string is not in the accepted fragment."""


def _check(node: ast.AST, names: set) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body, names)
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ExpressionError(f"non-numeric constant {node.value!r}")
    elif isinstance(node, ast.Name):
        if node.id not in names and node.id not in _CONSTANTS:
            raise ExpressionError(f"unknown name {node.id!r}")
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ExpressionError(
                f"operator {type(node.op).__name__} not allowed")
        _check(node.left, names)
        _check(node.right, names)
    elif isinstance(node, ast.UnaryOp):
        if type(node.op) not in _UNARYOPS:
            raise ExpressionError(
                f"operator {type(node.op).__name__} not allowed")
        _check(node.operand, names)
    elif isinstance(node, ast.Call):
        if (not isinstance(node.func, ast.Name)
                or node.func.id not in _FUNCTIONS):
            raise ExpressionError("only whitelisted function calls allowed")
        if node.keywords:
            raise ExpressionError("keyword arguments not allowed")
        for arg in node.args:
            _check(arg, names)
    else:
        raise ExpressionError(
            f"syntax element {type(node).__name__} not allowed")


def _eval(node: ast.AST, env: dict):
    if isinstance(node, ast.Expression):
        return _eval(node.body, env)
    if isinstance(node, ast.Constant):
        return node.value
    if isinstance(node, ast.Name):
        if node.id in env:
            return env[node.id]
        return _CONSTANTS[node.id]
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env),
                                      _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        return _UNARYOPS[type(node.op)](_eval(node.operand, env))
    if isinstance(node, ast.Call):
        return _FUNCTIONS[node.func.id](*[_eval(a, env) for a in node.args])
    raise ExpressionError(f"unexpected node {type(node).__name__}")


def compile_expression(text: str, variables: list) -> Callable:
    """Compile an expression string into a vectorized callable taking the
    listed coordinate variables positionally.  ``absy`` is always
    accepted as an alias for ``r``."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc}") from exc
    names = set(variables) | {"absy"} if "r" in variables else set(variables)
    _check(tree, names)

    def fn(*coords):
        if len(coords) != len(variables):
            raise ValueError(
                f"expected {len(variables)} coordinates, got {len(coords)}")
        env = dict(zip(variables, coords))
        if "r" in env:
            env.setdefault("absy", env["r"])
        out = _eval(tree, env)
        return np.asarray(out, dtype=float)

    fn.expression = text
    fn.variables = list(variables)
    return fn
