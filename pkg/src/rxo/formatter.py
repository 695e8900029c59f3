"""Canonical text for statements; output re-parses to an equal tree."""

from __future__ import annotations

import datetime as dt

from . import ast
from .lexer import KEYWORDS
from .types import Reference, RelationT, Scalar, TupleT, format_value

_INDENT = "  "


def _name(name: str) -> str:
    # keyword-like or otherwise unusual names need quoting to survive a re-parse
    simple = all(part.isidentifier() and part.upper() not in KEYWORDS | {"TRUE", "FALSE"}
                 for part in name.split("."))
    return name if simple and name.isascii() else f'"{name}"'


def format_type(t, indent: str = "") -> str:
    if isinstance(t, Scalar):
        return t.base
    if isinstance(t, Reference):
        return _name(t.target)
    if isinstance(t, (RelationT, TupleT)):
        head = "SET OF" if isinstance(t, RelationT) else "TUPLE"
        inner = indent + _INDENT
        lines = [head, indent + "{"]
        for f in t.fields:
            lines.append(f"{inner}{_name(f.name)} {format_type(f.type, inner)}" + _field_end(f.type))
        if isinstance(t, RelationT) and t.key is not None:
            lines.append(f"{inner}KEY ({', '.join(_name(k) for k in t.key)});")
        lines.append(indent + "}..")
        return "\n".join(lines)
    raise TypeError(f"not a type: {t!r}")


def _field_end(t) -> str:
    # block types already end in "}.."
    return "" if isinstance(t, (RelationT, TupleT)) else ";"


def format_params(params) -> str:
    return "(" + ", ".join(f"{_name(p.name)} {format_type(p.type)}" for p in params) + ")"


def format_expr(e) -> str:
    if isinstance(e, ast.Literal):
        if isinstance(e.value, dt.datetime):
            return format_value(e.value)
        return format_value(e.value)
    if isinstance(e, ast.OidLiteral):
        return f"@{e.value}"
    if isinstance(e, ast.Name):
        return _name(e.path)
    if isinstance(e, ast.TupleLiteral):
        return "(" + ", ".join(format_expr(i) for i in e.items) + ")"
    if isinstance(e, ast.RelationLiteral):
        return "{" + ", ".join(format_expr(r) for r in e.rows) + "}"
    if isinstance(e, ast.Unary):
        if e.op == "NOT":
            return f"NOT ({format_expr(e.operand)})"
        return f"-({format_expr(e.operand)})"
    if isinstance(e, ast.Binary):
        return f"{_operand(e.left)} {e.op} {_operand(e.right)}"
    raise TypeError(f"not an expression: {e!r}")


def _operand(e) -> str:
    text = format_expr(e)
    wrap = isinstance(e, ast.Binary) or (isinstance(e, ast.Unary) and e.op == "NOT")
    return f"({text})" if wrap else text


def format_projection(p: ast.Projection) -> str:
    if isinstance(p.expr, ast.Aggregate):
        arg = "*" if p.expr.arg is None else _name(p.expr.arg)
        text = f"{p.expr.func}({arg})"
    else:
        text = _name(p.expr.path)
    return text if p.name is None else f"{text} AS {_name(p.name)}"


def format_query(q: ast.QueryExpr, indent: str = "") -> str:
    lines = [indent + "SELECT " + ", ".join(format_projection(p) for p in q.projections)]
    sources = ", ".join(_name(s.relation) + (f" {_name(s.alias)}" if s.alias else "") for s in q.sources)
    lines.append(indent + "FROM " + sources)
    if q.predicate is not None:
        lines.append(indent + "WHERE " + format_expr(q.predicate))
    if q.group_by:
        lines.append(indent + "GROUP BY " + ", ".join(_name(g) for g in q.group_by))
    return "\n".join(lines)


def format_body_statement(s) -> str:
    if isinstance(s, ast.SetStmt):
        return f"SET {_name(s.component)} := {format_expr(s.expr)};"
    if isinstance(s, ast.InsertStmt):
        values = ", ".join(format_expr(v) for v in s.values)
        return f"INSERT INTO {_name(s.component)} VALUES ({values});"
    if isinstance(s, ast.DeleteStmt):
        where = "" if s.predicate is None else f" WHERE {format_expr(s.predicate)}"
        return f"DELETE FROM {_name(s.component)}{where};"
    if isinstance(s, ast.ReturnStmt):
        return f"RETURN {format_expr(s.expr)};"
    raise TypeError(f"not a body statement: {s!r}")


def _where(predicate) -> str:
    return "" if predicate is None else "\nWHERE " + format_expr(predicate)


def format_statement(stmt) -> str:
    if isinstance(stmt, ast.CreateClass):
        head = f"CREATE CLASS {_name(stmt.name)}"
        if stmt.parent is not None:
            head += f" EXTEND {_name(stmt.parent)}"
        if not stmt.components:
            return head + " { } .."
        lines = [head, "{"]
        for c in stmt.components:
            sig = "" if c.params is None else format_params(c.params)
            lines.append(f"{_INDENT}{_name(c.name)}{sig} {format_type(c.type, _INDENT)}" + _field_end(c.type))
        lines.append("}..")
        return "\n".join(lines)
    if isinstance(stmt, ast.AlterRealize):
        head = f"ALTER CLASS {_name(stmt.class_name)}\nREALIZE {_name(stmt.component)}"
        if stmt.params is not None:
            head += format_params(stmt.params)
            if stmt.returns is not None:
                head += " " + format_type(stmt.returns)
        r = stmt.realization
        if isinstance(r, ast.Stored):
            return head + "\nAS STORED;"
        if isinstance(r, ast.QueryRealization):
            return head + "\nAS\n" + format_query(r.query) + ";"
        if isinstance(r, ast.Procedure):
            body = [_INDENT + format_body_statement(s) for s in r.body]
            return "\n".join([head, "AS", "BEGIN", *body, "END;"])
        raise TypeError(f"cannot format realization {r!r}")
    if isinstance(stmt, ast.CreateView):
        return f"CREATE {_name(stmt.name)} AS\n{format_query(stmt.query)};"
    if isinstance(stmt, ast.Select):
        return format_query(stmt.query) + ";"
    if isinstance(stmt, ast.CreateObjects):
        inits = ", ".join(f"{_name(k)} := {format_expr(v)}" for k, v in stmt.assignments)
        count = "" if stmt.count == 1 else f" COUNT {stmt.count}"
        return f"CREATE OBJECT {_name(stmt.class_name)} ({inits}){count};"
    if isinstance(stmt, ast.DeleteObjects):
        return f"DELETE {_name(stmt.class_name)}{_where(stmt.predicate)};"
    if isinstance(stmt, ast.GroupCall):
        args = ", ".join(format_expr(a) for a in stmt.args)
        return f"CALL {_name(stmt.class_name + '.' + stmt.method)}({args}){_where(stmt.predicate)};"
    if isinstance(stmt, ast.GroupUpdate):
        sets = ", ".join(f"{_name(a)} = {format_expr(e)}" for a, e in stmt.assignments)
        return f"UPDATE {_name(stmt.relation)}\nSET {sets}{_where(stmt.predicate)};"
    raise TypeError(f"not a statement: {stmt!r}")


def format_script(statements) -> str:
    return "".join(format_statement(s) + "\n" for s in statements)
