from __future__ import annotations

import datetime as dt

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rxo import ast
from rxo.errors import ParseError
from rxo.formatter import format_statement
from rxo.parser import parse_expression, parse_script, parse_statement
from rxo.types import DATETIME, FLOAT, INTEGER, STRING, Field, Reference, RelationT, Scalar, TupleT

from conftest import CORPUS

SHIPMENT = (CORPUS / "shipment_spec.rxo").read_text()


def test_shipment_listing_is_one_class_with_four_components():
    stmts = parse_script(SHIPMENT)
    cls = stmts[-1]
    assert isinstance(cls, ast.CreateClass)
    assert [c.name for c in cls.components] == ["No", "WareFrom", "Items", "DoShip"]
    items = cls.components[2].type
    assert items == RelationT((Field("Article", STRING), Field("Pieces", INTEGER)))
    doship = cls.components[3]
    assert doship.params == (ast.Param("ToShipDate", DATETIME),)
    assert cls.components[1].type == Reference("WAREHOUSE")


def test_alter_stored():
    (stmt,) = parse_script("ALTER CLASS Sale REALIZE SaleItems AS STORED;")
    assert stmt == ast.AlterRealize("Sale", "SaleItems", ast.Stored())


def test_comments_only_script():
    assert parse_script("// nothing here\n   \n// still nothing") == []


def test_extend_and_unterminated_blocks():
    (stmt,) = parse_script("CREATE CLASS Sale EXTEND Shipment\n{\n  Price FLOAT;\n}\n")
    assert stmt.parent == "Shipment"
    assert stmt.components == (ast.ComponentSpec("Price", FLOAT),)


def test_view_listing():
    (stmt,) = parse_script(
        "CREATE TotalsOfShippedGoods AS\nSELECT si.Article, SUM(si.Pieces)\n"
        "FROM Shipment.Items si\nGROUP BY si.Article;")
    assert isinstance(stmt, ast.CreateView)
    q = stmt.query
    assert q.sources == (ast.Source("Shipment.Items", "si"),)
    assert q.projections[1] == ast.Projection(ast.Aggregate("SUM", "si.Pieces"))
    assert q.group_by == ("si.Article",)
    assert "GROUP BY" in format_statement(stmt)


def test_procedure_body():
    (stmt,) = parse_script(
        "ALTER CLASS Shipment REALIZE DoShip(ToShipDate DATETIME) BOOL AS BEGIN\n"
        "  DELETE FROM Items WHERE Pieces <= 0;\n"
        "  INSERT INTO Items VALUES ('A9', 1);\n"
        "  SET No := No + 1;\n"
        "  RETURN TRUE;\nEND;")
    proc = stmt.realization
    assert proc.params == (ast.Param("ToShipDate", DATETIME),)
    assert [type(s).__name__ for s in proc.body] == ["DeleteStmt", "InsertStmt", "SetStmt", "ReturnStmt"]


def test_key_clause():
    (stmt,) = parse_script("CREATE CLASS C { r SET OF { a INTEGER; b STRING; KEY (a); }.. }..")
    assert stmt.components[0].type.key == ("a",)


def test_group_commands():
    stmts = parse_script(
        "CALL Shipment.DoShip('2007-05-01') WHERE No = 1;\n"
        "UPDATE \"Shipment.Items\" SET Pieces = Pieces + 1 WHERE Article = 'A1';\n"
        "CREATE OBJECT Shipment (No := 1, Items := {('A1', 5)}) COUNT 2;\n"
        "DELETE Shipment WHERE No = 1;")
    call, update, create, delete = stmts
    assert call.method == "DoShip" and call.args == (ast.Literal("2007-05-01"),)
    assert update.relation == "Shipment.Items"
    assert create.count == 2
    assert delete.predicate == ast.Binary("=", ast.Name("No"), ast.Literal(1))


def test_negative_numbers_fold():
    assert parse_expression("-3") == ast.Literal(-3)
    assert parse_expression("-x") == ast.Unary("-", ast.Name("x"))


def test_precedence():
    e = parse_expression("a + b * 2 > 3 AND NOT c = 1 OR d")
    assert e.op == "OR"
    assert e.left.op == "AND"
    assert e.left.left.left == ast.Binary("+", ast.Name("a"), ast.Binary("*", ast.Name("b"), ast.Literal(2)))


def test_empty_class_format():
    stmt = ast.CreateClass("C", None, ())
    assert format_statement(stmt) == "CREATE CLASS C { } .."
    assert parse_statement("CREATE CLASS C { } ..") == stmt


@pytest.mark.parametrize("src", [
    "CREATE CLASS",
    "CREATE CLASS C { a INTEGER; a STRING; }",
    "SELECT FROM x;",
    "ALTER CLASS C REALIZE x AS MAYBE;",
    "SELECT a FROM r",
    "CALL C.m(1",
])
def test_parse_errors_have_spans_inside_source(src):
    with pytest.raises(ParseError) as info:
        parse_script(src)
    line, col = info.value.span
    lines = src.split("\n")
    assert 1 <= line <= len(lines)
    assert 1 <= col <= len(lines[line - 1]) + 1


def test_first_error_aborts():
    with pytest.raises(ParseError) as info:
        parse_script("CREATE CLASS A { } ..\nCREATE CLASS 7;\nCREATE CLASS {")
    assert info.value.span[0] == 2


# round trip over generated trees

ident = st.from_regex(r"[A-Za-z][A-Za-z0-9_]{0,6}", fullmatch=True).filter(
    lambda s: s.upper() not in {"TRUE", "FALSE", "NULL"})
# keyword-like names exercise quoting
names = st.one_of(ident, st.sampled_from(["Key", "sum", "Count", "Object"]))
paths = st.lists(names, min_size=1, max_size=3).map(".".join)
scalars = st.sampled_from([Scalar(b) for b in ("INTEGER", "FLOAT", "STRING", "BOOL", "DATETIME")])
leaf_types = st.one_of(scalars, names.map(Reference))


def unique_fields(elem):
    return st.lists(st.tuples(names, elem), min_size=1, max_size=3,
                    unique_by=lambda f: f[0]).map(lambda fs: tuple(Field(n, t) for n, t in fs))


types = st.recursive(
    leaf_types,
    lambda inner: st.one_of(
        unique_fields(leaf_types).map(TupleT),
        unique_fields(inner).flatmap(lambda fs: st.tuples(
            st.just(fs),
            st.one_of(st.none(), st.lists(st.sampled_from([f.name for f in fs]), min_size=1,
                                          unique=True).map(tuple)),
        )).map(lambda p: RelationT(p[0], p[1])),
    ),
    max_leaves=5,
)

literals = st.one_of(
    st.integers(-10**6, 10**6),
    st.floats(-1e6, 1e6, allow_nan=False).filter(lambda f: f != 0 or str(f) == "0.0"),
    st.text(st.characters(min_codepoint=32, max_codepoint=126), max_size=6),
    st.booleans(),
    st.datetimes(dt.datetime(1990, 1, 1), dt.datetime(2030, 1, 1)),
).map(ast.Literal)

atoms = st.one_of(literals, paths.map(ast.Name), st.integers(1, 99).map(ast.OidLiteral))

exprs = st.recursive(
    atoms,
    lambda inner: st.one_of(
        st.tuples(st.sampled_from(ast.COMPARISONS + ast.ARITHMETIC + ("AND", "OR")), inner, inner)
        .map(lambda t: ast.Binary(*t)),
        st.tuples(st.sampled_from(["NOT", "-"]), inner).map(lambda t: ast.Unary(*t)),
    ),
    max_leaves=6,
)

projections = st.one_of(
    st.tuples(paths.map(ast.Name), st.none() | names),
    st.tuples(st.sampled_from(ast.AGGREGATES).flatmap(
        lambda f: st.tuples(st.just(f), paths | st.none() if f == "COUNT" else paths)).map(
        lambda t: ast.Aggregate(*t)), st.none() | names),
).map(lambda t: ast.Projection(*t))

queries = st.builds(
    ast.QueryExpr,
    st.lists(projections, min_size=1, max_size=3).map(tuple),
    st.lists(st.builds(ast.Source, paths, st.none() | ident), min_size=1, max_size=2).map(tuple),
    st.none() | exprs,
    st.lists(paths, max_size=2).map(tuple),
)

params = st.lists(st.builds(ast.Param, names, scalars), max_size=3, unique_by=lambda p: p.name).map(tuple)

value_literals = st.recursive(
    literals | st.integers(1, 50).map(ast.OidLiteral),
    lambda inner: st.one_of(
        st.lists(inner, min_size=2, max_size=3).map(lambda xs: ast.TupleLiteral(tuple(xs))),
        st.lists(st.lists(literals, min_size=1, max_size=3).map(lambda xs: ast.TupleLiteral(tuple(xs))),
                 max_size=3).map(lambda rs: ast.RelationLiteral(tuple(rs))),
    ),
    max_leaves=6,
)

body = st.lists(st.one_of(
    st.builds(ast.SetStmt, names, exprs),
    st.builds(ast.InsertStmt, names, st.lists(exprs, min_size=1, max_size=3).map(tuple)),
    st.builds(ast.DeleteStmt, names, st.none() | exprs),
    st.builds(ast.ReturnStmt, exprs),
), max_size=4).map(tuple)


@st.composite
def alter(draw):
    cls, comp = draw(names), draw(names)
    kind = draw(st.sampled_from(["stored", "query", "proc"]))
    if kind == "stored":
        return ast.AlterRealize(cls, comp, ast.Stored())
    if kind == "query":
        return ast.AlterRealize(cls, comp, ast.QueryRealization(draw(queries)))
    ps = draw(params)
    returns = draw(st.none() | scalars)
    return ast.AlterRealize(cls, comp, ast.Procedure(ps, returns, draw(body)), ps, returns)


components = st.lists(
    st.builds(ast.ComponentSpec, names, types, st.none()) |
    st.builds(ast.ComponentSpec, names, scalars, params),
    max_size=4, unique_by=lambda c: c.name).map(tuple)

statements = st.one_of(
    st.builds(ast.CreateClass, names, st.none() | names, components),
    alter(),
    st.builds(ast.CreateView, names, queries),
    st.builds(ast.Select, queries),
    st.builds(ast.CreateObjects, names,
              st.lists(st.tuples(names, value_literals), max_size=3).map(tuple), st.integers(1, 5)),
    st.builds(ast.DeleteObjects, names, st.none() | exprs),
    st.builds(ast.GroupCall, names, names, st.lists(exprs, max_size=3).map(tuple), st.none() | exprs),
    st.builds(ast.GroupUpdate, paths, st.lists(st.tuples(names, exprs), min_size=1, max_size=2).map(tuple),
              st.none() | exprs),
)


@settings(max_examples=400, deadline=None)
@given(statements)
def test_format_round_trip(stmt):
    text = format_statement(stmt)
    assert parse_statement(text) == stmt, text


@settings(max_examples=100, deadline=None)
@given(st.lists(statements, max_size=4))
def test_script_round_trip(stmts):
    text = "\n".join(format_statement(s) for s in stmts)
    assert parse_script(text) == stmts
