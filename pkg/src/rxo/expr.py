"""Type-checked compilation of scalar expressions into Python closures.

Names are resolved by a caller-supplied function, so the same compiler
serves query predicates (rows), group updates and procedure bodies.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Callable

from . import ast
from .errors import EvaluationError, TypeMismatch
from .types import (
    BOOL,
    DATETIME,
    FLOAT,
    INTEGER,
    STRING,
    Oid,
    OidRef,
    Reference,
    Scalar,
    is_numeric,
    parse_datetime,
)

ANY_REF = Reference("")  # type of an @n literal
COMPOUND = Scalar("COMPOUND")  # tuple and relation literals; only assignable


@dataclass(frozen=True)
class Compiled:
    type: object
    fn: Callable
    constant: bool = False
    raw: object = None  # the literal value, for constants


Resolver = Callable[[str], tuple]  # path -> (type, accessor(env))


def literal_value(e):
    """Raw Python value of a literal expression (``@n`` becomes OidRef)."""
    if isinstance(e, ast.Literal):
        return e.value
    if isinstance(e, ast.OidLiteral):
        return OidRef(e.value)
    if isinstance(e, ast.TupleLiteral):
        return tuple(literal_value(i) for i in e.items)
    if isinstance(e, ast.RelationLiteral):
        return [literal_value(r) for r in e.rows]
    if isinstance(e, ast.Unary) and e.op == "-":
        inner = literal_value(e.operand)
        if isinstance(inner, (int, float)) and not isinstance(inner, bool):
            return -inner
    raise TypeMismatch("initial values must be literals")


def _literal_type(value):
    if isinstance(value, bool):
        return BOOL
    if isinstance(value, int):
        return INTEGER
    if isinstance(value, float):
        return FLOAT
    if isinstance(value, str):
        return STRING
    if isinstance(value, dt.datetime):
        return DATETIME
    raise TypeMismatch(f"unsupported literal {value!r}")


def _const(value, vtype) -> Compiled:
    return Compiled(vtype, lambda env: value, True, value)


def compile_expr(e, resolve: Resolver) -> Compiled:
    if isinstance(e, ast.Literal):
        return _const(e.value, _literal_type(e.value))
    if isinstance(e, ast.OidLiteral):
        return _const(Oid(e.value), ANY_REF)
    if isinstance(e, (ast.TupleLiteral, ast.RelationLiteral)):
        return _const(literal_value(e), COMPOUND)
    if isinstance(e, ast.Name):
        vtype, accessor = resolve(e.path)
        return Compiled(vtype, accessor)
    if isinstance(e, ast.Unary):
        inner = compile_expr(e.operand, resolve)
        f = inner.fn
        if e.op == "NOT":
            _require(inner.type == BOOL, f"NOT needs a BOOL operand, got {inner.type}")
            return Compiled(BOOL, lambda env: None if (v := f(env)) is None else not v)
        _require(is_numeric(inner.type), f"unary minus needs a number, got {inner.type}")
        return Compiled(inner.type, lambda env: None if (v := f(env)) is None else -v)
    if isinstance(e, ast.Binary):
        left = compile_expr(e.left, resolve)
        right = compile_expr(e.right, resolve)
        if e.op in ("AND", "OR"):
            return _logical(e.op, left, right)
        if e.op in ast.COMPARISONS:
            return _comparison(e.op, left, right)
        return _arithmetic(e.op, left, right)
    raise TypeMismatch(f"not an expression: {e!r}")


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise TypeMismatch(message)


def _logical(op, left, right) -> Compiled:
    _require(left.type == BOOL and right.type == BOOL, f"{op} needs BOOL operands")
    lf, rf = left.fn, right.fn
    if op == "AND":
        def fn(env):
            a, b = lf(env), rf(env)
            if a is False or b is False:
                return False
            return None if a is None or b is None else True
    else:
        def fn(env):
            a, b = lf(env), rf(env)
            if a is True or b is True:
                return True
            return None if a is None or b is None else False
    return Compiled(BOOL, fn)


def coerce(c: Compiled, target) -> Compiled:
    """Adapt a constant string to DATETIME where one is expected."""
    if target == DATETIME and c.type == STRING and c.constant:
        return _const(parse_datetime(c.raw), DATETIME)
    return c


def _comparison(op, left, right) -> Compiled:
    left, right = coerce(left, right.type), coerce(right, left.type)
    lt, rt = left.type, right.type
    if isinstance(lt, Reference) and isinstance(rt, Reference):
        _require(op in ("=", "<>"), f"references support only = and <>, not {op}")
    elif is_numeric(lt) and is_numeric(rt):
        pass
    else:
        _require(lt == rt and lt != COMPOUND, f"cannot compare {lt} with {rt}")
        if lt == BOOL:
            _require(op in ("=", "<>"), f"BOOL values support only = and <>, not {op}")
    compare = _COMPARE[op]
    lf, rf = left.fn, right.fn

    def fn(env):
        a, b = lf(env), rf(env)
        if a is None or b is None:
            return False
        return compare(a, b)

    return Compiled(BOOL, fn)


_COMPARE = {
    "=": lambda a, b: a == b,
    "<>": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def _divide(a, b):
    if b == 0:
        raise EvaluationError("division by zero")
    return a / b


_ARITH = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _divide,
}


def _arithmetic(op, left, right) -> Compiled:
    lt, rt = left.type, right.type
    if op == "+" and lt == STRING and rt == STRING:
        rtype = STRING
    else:
        _require(is_numeric(lt) and is_numeric(rt), f"{op} needs numbers, got {lt} and {rt}")
        rtype = INTEGER if (lt == INTEGER and rt == INTEGER and op != "/") else FLOAT
    apply = _ARITH[op]
    lf, rf = left.fn, right.fn

    def fn(env):
        a, b = lf(env), rf(env)
        if a is None or b is None:
            return None
        result = apply(a, b)
        return float(result) if rtype == FLOAT else result

    return Compiled(rtype, fn)


def compile_predicate(e, resolve: Resolver) -> Callable:
    """Compile a WHERE clause; the callable answers True only for a definite TRUE."""
    c = compile_expr(e, resolve)
    _require(c.type == BOOL, f"predicate must be BOOL, got {c.type}")
    f = c.fn
    return lambda env: f(env) is True
