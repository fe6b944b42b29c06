"""A small arithmetic expression grammar for user-configured coefficients.

Supported: + - * / unary minus, ** and pow(a, b), the functions sin, cos,
exp, log, sqrt, numeric literals, the constants pi and e, and coordinate
symbols x1..xm.  Anything else is rejected with ExpressionError.  Compiled
expressions evaluate on floats, numpy arrays, and Dual numbers alike.
"""

from __future__ import annotations

import ast
import math

from .autodiff import MATH_FUNCTIONS
from .errors import ExpressionError

_CONSTANTS = {"pi": math.pi, "e": math.e}

_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a ** b,
}


def compile_expression(source: str, nvars: int, var_prefix: str = "x"):
    """Compile `source` into fn(coords) with coords a length-nvars sequence."""
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as err:
        raise ExpressionError(f"syntax error in {source!r}: {err.msg}") from None

    names = {f"{var_prefix}{i + 1}": i for i in range(nvars)}

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, (int, float)):
                value = float(node.value)
                return lambda coords: value
            raise ExpressionError(f"literal {node.value!r} not allowed")
        if isinstance(node, ast.Name):
            if node.id in names:
                slot = names[node.id]
                return lambda coords: coords[slot]
            if node.id in _CONSTANTS:
                value = _CONSTANTS[node.id]
                return lambda coords: value
            raise ExpressionError(
                f"unknown symbol {node.id!r}; coordinates are "
                f"{var_prefix}1..{var_prefix}{nvars}")
        if isinstance(node, ast.UnaryOp):
            arg = build(node.operand)
            if isinstance(node.op, ast.USub):
                return lambda coords: -arg(coords)
            if isinstance(node.op, ast.UAdd):
                return arg
            raise ExpressionError("unsupported unary operator")
        if isinstance(node, ast.BinOp):
            op = _BINOPS.get(type(node.op))
            if op is None:
                raise ExpressionError(
                    f"operator {type(node.op).__name__} not in grammar")
            left, right = build(node.left), build(node.right)
            return lambda coords: op(left(coords), right(coords))
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.keywords:
                raise ExpressionError("only plain function calls are allowed")
            fname = node.func.id
            if fname == "pow":
                if len(node.args) != 2:
                    raise ExpressionError("pow takes exactly two arguments")
                base, expo = build(node.args[0]), build(node.args[1])
                return lambda coords: base(coords) ** expo(coords)
            if fname in MATH_FUNCTIONS:
                if len(node.args) != 1:
                    raise ExpressionError(f"{fname} takes exactly one argument")
                fn = MATH_FUNCTIONS[fname]
                arg = build(node.args[0])
                return lambda coords: fn(arg(coords))
            raise ExpressionError(
                f"function {fname!r} not in grammar "
                f"(have: pow, {', '.join(sorted(MATH_FUNCTIONS))})")
        raise ExpressionError(f"construct {type(node).__name__} not in grammar")

    return build(tree)
