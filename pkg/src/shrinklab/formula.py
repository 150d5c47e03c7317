"""A tiny arithmetic expression language over the index ``m``.

Grammar: integer/decimal literals, the identifier ``m``, ``+ - * / // % **``,
parentheses and the functions ``log, log2, loglog, floor, ceil, pow, sqrt,
exp, min, max``. Expressions are parsed with :mod:`ast` and walked against a
whitelist; nothing is ever passed to ``eval``.
"""

from __future__ import annotations

import ast
import math
import operator
from typing import Callable

from .errors import ConfigError

__all__ = ["compile_formula"]

_FUNCS: dict[str, Callable] = {
    "log": math.log,
    "log2": math.log2,
    "loglog": lambda x: math.log(math.log(x)),
    "floor": math.floor,
    "ceil": math.ceil,
    "pow": pow,
    "sqrt": math.sqrt,
    "exp": math.exp,
    "min": min,
    "max": max,
}

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.FloorDiv: operator.floordiv,
    ast.Mod: operator.mod,
    ast.Pow: operator.pow,
}

_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def _check(node: ast.AST) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body)
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ConfigError(f"unsupported literal {node.value!r}")
    elif isinstance(node, ast.Name):
        if node.id != "m":
            raise ConfigError(f"unknown identifier {node.id!r}")
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ConfigError(f"unsupported operator {type(node.op).__name__}")
        _check(node.left)
        _check(node.right)
    elif isinstance(node, ast.UnaryOp):
        if type(node.op) not in _UNARY:
            raise ConfigError(f"unsupported operator {type(node.op).__name__}")
        _check(node.operand)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            raise ConfigError(f"unknown function in {ast.unparse(node)!r}")
        if node.keywords:
            raise ConfigError("keyword arguments are not allowed")
        for arg in node.args:
            _check(arg)
    else:
        raise ConfigError(f"unsupported syntax: {type(node).__name__}")


def _eval(node: ast.AST, m: int):
    if isinstance(node, ast.Constant):
        return node.value
    if isinstance(node, ast.Name):
        return m
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, m), _eval(node.right, m))
    if isinstance(node, ast.UnaryOp):
        return _UNARY[type(node.op)](_eval(node.operand, m))
    # ast.Call, validated by _check
    return _FUNCS[node.func.id](*(_eval(a, m) for a in node.args))


def compile_formula(text: str) -> Callable[[int], float]:
    """Compile ``text`` into a function of ``m``. Raises ConfigError on bad input."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse formula {text!r}: {exc.msg}") from None
    _check(tree)
    body = tree.body

    def f(m: int):
        try:
            return _eval(body, m)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise ConfigError(f"formula {text!r} undefined at m={m}: {exc}") from None

    f.__doc__ = text
    return f
