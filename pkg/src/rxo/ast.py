"""Syntax tree for statements, queries, expressions and realizations.

Every node is a frozen dataclass. Source spans never take part in equality,
so a parsed tree compares equal to a tree parsed from its formatted text.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .types import ValuableType

Span = Optional[tuple]


def _span():
    return field(default=None, compare=False, repr=False)


# expressions

@dataclass(frozen=True)
class Literal:
    """A scalar constant, or a tuple/relation literal (tuples of Literal-like values)."""

    value: object


@dataclass(frozen=True)
class OidLiteral:
    value: int


@dataclass(frozen=True)
class Name:
    """An attribute, component, or parameter reference; may be dotted."""

    path: str


@dataclass(frozen=True)
class TupleLiteral:
    items: tuple


@dataclass(frozen=True)
class RelationLiteral:
    rows: tuple  # TupleLiteral items


@dataclass(frozen=True)
class Unary:
    op: str  # "-" or "NOT"
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Aggregate:
    func: str  # SUM COUNT MIN MAX AVG
    arg: Optional[str]  # attribute path; None for COUNT(*)


Expr = Union[Literal, OidLiteral, Name, TupleLiteral, RelationLiteral, Unary, Binary]

COMPARISONS = ("=", "<>", "<", "<=", ">", ">=")
ARITHMETIC = ("+", "-", "*", "/")
AGGREGATES = ("SUM", "COUNT", "MIN", "MAX", "AVG")


# queries

@dataclass(frozen=True)
class Projection:
    expr: Union[Name, Aggregate]
    name: Optional[str] = None


@dataclass(frozen=True)
class Source:
    relation: str
    alias: Optional[str] = None


@dataclass(frozen=True)
class QueryExpr:
    projections: tuple[Projection, ...]
    sources: tuple[Source, ...]
    predicate: Optional[Expr] = None
    group_by: tuple[str, ...] = ()


# procedure bodies

@dataclass(frozen=True)
class SetStmt:
    component: str
    expr: Expr


@dataclass(frozen=True)
class InsertStmt:
    component: str
    values: tuple


@dataclass(frozen=True)
class DeleteStmt:
    component: str
    predicate: Optional[Expr] = None


@dataclass(frozen=True)
class ReturnStmt:
    expr: Expr


BodyStmt = Union[SetStmt, InsertStmt, DeleteStmt, ReturnStmt]


# realizations

@dataclass(frozen=True)
class Unrealized:
    kind = "UNREALIZED"


@dataclass(frozen=True)
class Stored:
    kind = "STORED"


@dataclass(frozen=True)
class QueryRealization:
    query: QueryExpr
    kind = "QUERY"


@dataclass(frozen=True)
class Param:
    name: str
    type: ValuableType


@dataclass(frozen=True)
class Procedure:
    params: tuple[Param, ...]
    returns: Optional[ValuableType]
    body: tuple
    kind = "PROCEDURE"


Realization = Union[Unrealized, Stored, QueryRealization, Procedure]


# statements

@dataclass(frozen=True)
class ComponentSpec:
    name: str
    type: ValuableType
    params: Optional[tuple[Param, ...]] = None  # not None for methods

    @property
    def is_method(self) -> bool:
        return self.params is not None


@dataclass(frozen=True)
class CreateClass:
    name: str
    parent: Optional[str]
    components: tuple[ComponentSpec, ...]
    span: Span = _span()


@dataclass(frozen=True)
class AlterRealize:
    class_name: str
    component: str
    realization: Realization
    # signature repeated in the REALIZE clause of a method
    params: Optional[tuple[Param, ...]] = None
    returns: Optional[ValuableType] = None
    span: Span = _span()


@dataclass(frozen=True)
class CreateView:
    name: str
    query: QueryExpr
    span: Span = _span()


@dataclass(frozen=True)
class CreateObjects:
    class_name: str
    assignments: tuple[tuple[str, Expr], ...]
    count: int = 1
    span: Span = _span()


@dataclass(frozen=True)
class DeleteObjects:
    class_name: str
    predicate: Optional[Expr] = None
    span: Span = _span()


@dataclass(frozen=True)
class Select:
    query: QueryExpr
    span: Span = _span()


@dataclass(frozen=True)
class GroupCall:
    class_name: str
    method: str
    args: tuple
    predicate: Optional[Expr] = None
    span: Span = _span()


@dataclass(frozen=True)
class GroupUpdate:
    relation: str
    assignments: tuple[tuple[str, Expr], ...]
    predicate: Optional[Expr] = None
    span: Span = _span()


Statement = Union[CreateClass, AlterRealize, CreateView, CreateObjects, DeleteObjects, Select,
                  GroupCall, GroupUpdate]
