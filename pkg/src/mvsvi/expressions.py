"""Arithmetic expressions for user-defined coefficients.

Expressions use Python syntax restricted to numbers, the variables ``x``
and ``t``, the operators ``+ - * / **`` (``^`` is accepted as a power), and
the functions ``abs``, ``min``, ``max``, ``sqrt``, ``mean(mu)`` and
``w1_to_dirac0(mu)``. Parsing goes through :mod:`ast`; anything outside
that whitelist is rejected before evaluation.
"""

from __future__ import annotations

import ast
import math
import operator
from typing import Callable

import numpy as np

from .errors import InvalidParams
from .measures import w1_to_dirac0

__all__ = ["Expression", "parse_expression"]

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: np.power,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {
    "abs": (np.abs, 1),
    "sqrt": (np.sqrt, 1),
    "min": (lambda *a: _fold(np.minimum, a), 2),
    "max": (lambda *a: _fold(np.maximum, a), 2),
}
_MEASURE_FUNCS = {"mean": lambda mu: mu.mean(), "w1_to_dirac0": w1_to_dirac0}
_CONSTANTS = {"pi": math.pi, "e": math.e}


def _fold(f, args):
    out = args[0]
    for a in args[1:]:
        out = f(out, a)
    return out


class Expression:
    """A compiled expression callable as ``expr(t, x, mu)``."""

    def __init__(self, source: str):
        self.source = source
        self.uses_measure = False
        try:
            tree = ast.parse(source.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise InvalidParams(f"cannot parse expression {source!r}: {exc.msg}") from None
        self._fn = self._compile(tree.body)

    def __call__(self, t, x, mu):
        x = np.asarray(x, dtype=float)
        val = self._fn({"t": t, "x": x, "mu": mu})
        return np.broadcast_to(np.asarray(val, dtype=float), x.shape).copy()

    def __repr__(self):
        return f"Expression({self.source!r})"

    def _compile(self, node) -> Callable:
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            v = float(node.value)
            return lambda env: v
        if isinstance(node, ast.Name):
            if node.id in ("x", "t"):
                name = node.id
                return lambda env: env[name]
            if node.id in _CONSTANTS:
                v = _CONSTANTS[node.id]
                return lambda env: v
            raise InvalidParams(f"unknown name {node.id!r} in {self.source!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op = _BINOPS[type(node.op)]
            left, right = self._compile(node.left), self._compile(node.right)
            return lambda env: op(left(env), right(env))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            op = _UNARY[type(node.op)]
            inner = self._compile(node.operand)
            return lambda env: op(inner(env))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
            name = node.func.id
            if name in _MEASURE_FUNCS:
                if len(node.args) != 1 or not (
                    isinstance(node.args[0], ast.Name) and node.args[0].id == "mu"
                ):
                    raise InvalidParams(f"{name}() takes exactly the argument 'mu'")
                self.uses_measure = True
                f = _MEASURE_FUNCS[name]
                return lambda env: f(env["mu"])
            if name in _FUNCS:
                f, arity = _FUNCS[name]
                args = [self._compile(a) for a in node.args]
                variadic = name in ("min", "max")
                if len(args) < arity if variadic else len(args) != arity:
                    raise InvalidParams(f"{name}() takes {'at least ' if variadic else ''}"
                                        f"{arity} argument(s)")
                return lambda env: f(*(a(env) for a in args))
            raise InvalidParams(f"unknown function {name!r} in {self.source!r}")
        raise InvalidParams(f"unsupported syntax in {self.source!r}: {ast.dump(node)[:60]}")


def parse_expression(source) -> Expression:
    if isinstance(source, (int, float)):
        source = repr(float(source))
    return Expression(str(source))
