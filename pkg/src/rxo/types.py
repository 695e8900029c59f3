"""Valuable types, object identifiers, and value conformance.

Runtime values are plain Python objects:

    INTEGER -> int, FLOAT -> float, STRING -> str, BOOL -> bool,
    DATETIME -> datetime.datetime, reference -> Oid, Null -> None,
    tuple-structured -> tuple (field order), relation -> frozenset of tuples.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .errors import KeyViolation, TypeMismatch

BASE_TYPES = ("INTEGER", "FLOAT", "STRING", "BOOL", "DATETIME")


@dataclass(frozen=True)
class Scalar:
    base: str

    def __str__(self) -> str:
        return self.base


@dataclass(frozen=True)
class Reference:
    target: str

    def __str__(self) -> str:
        return self.target


@dataclass(frozen=True)
class Field:
    name: str
    type: "ValuableType"


@dataclass(frozen=True)
class TupleT:
    fields: tuple[Field, ...]

    def __str__(self) -> str:
        return "TUPLE {" + ", ".join(f"{f.name} {f.type}" for f in self.fields) + "}"


@dataclass(frozen=True)
class RelationT:
    fields: tuple[Field, ...]
    key: Optional[tuple[str, ...]] = None

    def __str__(self) -> str:
        body = ", ".join(f"{f.name} {f.type}" for f in self.fields)
        if self.key is not None:
            body += f" KEY ({', '.join(self.key)})"
        return "SET OF {" + body + "}"

    def key_positions(self) -> tuple[int, ...]:
        names = [f.name for f in self.fields]
        if self.key is None:
            return tuple(range(len(names)))
        return tuple(names.index(k) for k in self.key)


ValuableType = Union[Scalar, Reference, TupleT, RelationT]

INTEGER = Scalar("INTEGER")
FLOAT = Scalar("FLOAT")
STRING = Scalar("STRING")
BOOL = Scalar("BOOL")
DATETIME = Scalar("DATETIME")


def is_scalar(t) -> bool:
    return isinstance(t, (Scalar, Reference))


def is_numeric(t) -> bool:
    return t in (INTEGER, FLOAT)


@dataclass(frozen=True, order=True)
class Oid:
    """Surrogate identity; equality and ordering use the counter value only."""

    value: int
    class_name: str = field(default="", compare=False)

    def __str__(self) -> str:
        return f"@{self.value}"


@dataclass(frozen=True)
class OidRef:
    """An ``@n`` literal not yet checked against a database."""

    value: int


def parse_datetime(text: str) -> dt.datetime:
    try:
        value = dt.datetime.fromisoformat(text)
    except ValueError:
        raise TypeMismatch(f"not an ISO-8601 datetime: {text!r}") from None
    if value.tzinfo is not None:
        raise TypeMismatch(f"time zones are not supported: {text!r}")
    return value


def conform(value, vtype: ValuableType, resolve: Callable[[int, str], Oid] | None = None):
    """Return ``value`` converted to the canonical representation of ``vtype``.

    ``resolve(n, target)`` turns an ``@n`` literal into a live Oid compatible
    with the reference target; it raises when the object is missing.
    """
    if value is None:
        raise TypeMismatch(f"NULL cannot be stored as {vtype}")
    if isinstance(vtype, Scalar):
        return _conform_scalar(value, vtype)
    if isinstance(vtype, Reference):
        if isinstance(value, OidRef):
            if resolve is None:
                raise TypeMismatch(f"cannot resolve @{value.value} here")
            return resolve(value.value, vtype.target)
        if isinstance(value, Oid):
            if resolve is not None:
                return resolve(value.value, vtype.target)
            return value
        raise TypeMismatch(f"expected a reference to {vtype.target}, got {format_value(value)}")
    if isinstance(vtype, TupleT):
        return _conform_row(value, vtype.fields, resolve)
    if isinstance(vtype, RelationT):
        if isinstance(value, (str, bytes, tuple)) or not hasattr(value, "__iter__"):
            raise TypeMismatch(f"expected a relation value for {vtype}")
        rows = [_conform_row(r, vtype.fields, resolve) for r in value]
        result = frozenset(rows)
        if len(result) != len(rows):
            raise KeyViolation(f"duplicate tuples in relation value for {vtype}")
        check_key(vtype, result)
        return result
    raise TypeError(f"unknown type {vtype!r}")


def _conform_scalar(value, t: Scalar):
    base = t.base
    if base == "INTEGER" and isinstance(value, int) and not isinstance(value, bool):
        return value
    if base == "FLOAT" and isinstance(value, (int, float)) and not isinstance(value, bool):
        value = float(value)
        if not math.isfinite(value):
            raise TypeMismatch("FLOAT values must be finite")
        return value
    if base == "STRING" and isinstance(value, str):
        return value
    if base == "BOOL" and isinstance(value, bool):
        return value
    if base == "DATETIME":
        if isinstance(value, dt.datetime):
            return value
        if isinstance(value, str):
            return parse_datetime(value)
    raise TypeMismatch(f"expected {base}, got {format_value(value)}")


def _conform_row(row, fields, resolve):
    if isinstance(row, dict):
        missing = [f.name for f in fields if f.name not in row]
        extra = set(row) - {f.name for f in fields}
        if missing or extra:
            raise TypeMismatch(f"tuple fields {sorted(row)} do not match {[f.name for f in fields]}")
        row = tuple(row[f.name] for f in fields)
    if not isinstance(row, (tuple, list)) or len(row) != len(fields):
        raise TypeMismatch(f"expected a tuple of {len(fields)} values, got {format_value(row)}")
    return tuple(conform(v, f.type, resolve) for v, f in zip(row, fields))


def check_key(rtype: RelationT, rows) -> None:
    positions = rtype.key_positions()
    seen = set()
    for r in rows:
        k = tuple(r[i] for i in positions)
        if k in seen:
            key = ", ".join(rtype.key) if rtype.key else "whole tuple"
            raise KeyViolation(f"duplicate key ({key}) = {format_value(k)}")
        seen.add(k)


def iter_oids(value):
    """Yield every Oid held anywhere inside a stored value."""
    if isinstance(value, Oid):
        yield value
    elif isinstance(value, (tuple, frozenset)):
        for v in value:
            yield from iter_oids(v)


def sort_key(value):
    if value is None:
        return (0,)
    if isinstance(value, Oid):
        return (1, value.value)
    if isinstance(value, tuple):
        return (1, tuple(sort_key(v) for v in value))
    if isinstance(value, frozenset):
        return (1, tuple(sorted(sort_key(v) for v in value)))
    return (1, value)


def quote_string(s: str) -> str:
    return "'" + s.replace("'", "''") + "'"


def format_value(value) -> str:
    """Render a value as a literal the parser reads back to the same value."""
    if value is None:
        return "NULL"
    if isinstance(value, bool):
        return "TRUE" if value else "FALSE"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return quote_string(value)
    if isinstance(value, dt.datetime):
        return value.isoformat()
    if isinstance(value, (Oid, OidRef)):
        return f"@{value.value}"
    if isinstance(value, tuple):
        return "(" + ", ".join(format_value(v) for v in value) + ")"
    if isinstance(value, (frozenset, set, list)):
        rows = sorted(value, key=sort_key)
        return "{" + ", ".join(format_value(r) for r in rows) + "}"
    return repr(value)


def assignable(source, target) -> bool:
    """Whether a value of type ``source`` may be assigned where ``target`` is declared."""
    if source == target:
        return True
    if source == INTEGER and target == FLOAT:
        return True
    return False
