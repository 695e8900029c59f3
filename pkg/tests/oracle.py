"""Per-object reference implementation of the group commands.

Everything here runs one object at a time in ascending Oid order and shares
no evaluation code with the engine: expressions, flattening and procedure
bodies are interpreted directly from the syntax tree. Only the plain data
classes (Database, ObjectState, Oid) are reused so snapshots can be compared.
"""

from __future__ import annotations

import datetime as dt
import itertools
import random
from collections import defaultdict

from rxo import ast
from rxo.parser import parse_statement
from rxo.store import Database, ObjectState
from rxo.types import Oid, OidRef, Reference, RelationT, TupleT

SCHEMA = """
CREATE CLASS WAREHOUSE { Name STRING; }
CREATE CLASS Shipment {
  No INTEGER;
  WareFrom WAREHOUSE;
  Items SET OF { Article STRING; Pieces INTEGER; KEY (Article); }..
  ShippedOn DATETIME;
  Weight FLOAT;
  DoShip(ToShipDate DATETIME) BOOL;
  Restock(Art STRING, n INTEGER) BOOL;
  Reweigh(k INTEGER) INTEGER;
}..
CREATE CLASS Sale EXTEND Shipment {
  Customer STRING;
  SaleItems SET OF { Article STRING; Pieces INTEGER; Price FLOAT; }..
}..
ALTER CLASS WAREHOUSE REALIZE Name AS STORED;
ALTER CLASS Shipment REALIZE No AS STORED;
ALTER CLASS Shipment REALIZE WareFrom AS STORED;
ALTER CLASS Shipment REALIZE Items AS STORED;
ALTER CLASS Shipment REALIZE ShippedOn AS STORED;
ALTER CLASS Shipment REALIZE Weight AS STORED;
ALTER CLASS Shipment REALIZE DoShip(ToShipDate DATETIME) BOOL AS BEGIN
  DELETE FROM Items WHERE Pieces <= 0;
  SET ShippedOn := ToShipDate;
  RETURN ToShipDate >= '2007-01-01';
END;
ALTER CLASS Shipment REALIZE Restock(Art STRING, n INTEGER) BOOL AS BEGIN
  INSERT INTO Items VALUES (Art, n);
  SET No := No + n;
  RETURN n > 2;
END;
ALTER CLASS Shipment REALIZE Reweigh(k INTEGER) INTEGER AS BEGIN
  SET Weight := Weight + 100 / (No - k);
  RETURN No - k;
END;
ALTER CLASS Sale REALIZE Customer AS STORED;
ALTER CLASS Sale REALIZE SaleItems AS STORED;
ALTER CLASS Sale REALIZE Items AS SELECT Article, SUM(Pieces) FROM SaleItems GROUP BY Article;
ALTER CLASS Sale REALIZE DoShip(ToShipDate DATETIME) BOOL AS BEGIN
  DELETE FROM SaleItems WHERE Pieces <= 0 OR Price > 9.0;
  SET ShippedOn := ToShipDate;
  RETURN Customer <> 'anon';
END;
"""

ARTICLES = ("A1", "A2", "A3", "A4")
WAREHOUSES = ("North", "South")


class OracleFailure(Exception):
    pass


# database generation

def random_objects_script(rng: random.Random, n_objects: int) -> str:
    lines = [f"CREATE OBJECT WAREHOUSE (Name := '{w}');" for w in WAREHOUSES]
    for _ in range(max(0, n_objects - len(WAREHOUSES))):
        no = rng.randint(0, 9)
        ware = rng.randint(1, len(WAREHOUSES))
        weight = rng.choice(["0.0", "1.5", "10.0"])
        if rng.random() < 0.55:
            arts = rng.sample(ARTICLES, rng.randint(0, 3))
            items = ", ".join(f"('{a}', {rng.randint(-1, 6)})" for a in arts)
            lines.append(f"CREATE OBJECT Shipment (No := {no}, WareFrom := @{ware}, Items := {{{items}}}, "
                         f"ShippedOn := 2000-01-01, Weight := {weight});")
        else:
            sale = {(rng.choice(ARTICLES), rng.randint(-1, 6), rng.choice([1.0, 2.5, 9.5]))
                    for _ in range(rng.randint(0, 4))}
            items = ", ".join(f"('{a}', {p}, {c})" for a, p, c in sorted(sale))
            cust = rng.choice(["anon", "Acme", "Bolt"])
            lines.append(f"CREATE OBJECT Sale (No := {no}, WareFrom := @{ware}, ShippedOn := 2000-01-01, "
                         f"Weight := {weight}, Customer := '{cust}', SaleItems := {{{items}}});")
    return "\n".join(lines) + "\n"


PREDICATES = (
    None,
    "No > 4",
    "No = 3",
    "Items.Article = 'A1'",
    "Items.Pieces >= 3 AND No < 7",
    "WareFrom.Name = 'South'",
    "NOT (Items.Article = 'A2') OR No = 0",
    "Shipment = @5",
)


def random_command(rng: random.Random) -> str:
    kind = rng.choice(["ship", "ship", "restock", "reweigh", "sale_ship", "update_items", "update_top",
                       "update_sale", "update_key", "delete", "delete_ware"])
    pred = rng.choice(PREDICATES)
    where = f" WHERE {pred}" if pred else ""
    if kind == "ship":
        day = rng.choice(["2006-12-31", "2007-05-01"])
        return f"CALL Shipment.DoShip('{day}'){where};"
    if kind == "restock":
        return f"CALL Shipment.Restock('{rng.choice(ARTICLES + ('A9',))}', {rng.randint(0, 5)}){where};"
    if kind == "reweigh":
        return f"CALL Shipment.Reweigh({rng.randint(0, 9)}){where};"
    if kind == "sale_ship":
        sale_pred = rng.choice([None, "Customer = 'Acme'", "SaleItems.Price > 2.0"])
        return "CALL Sale.DoShip('2007-05-01')" + (f" WHERE {sale_pred}" if sale_pred else "") + ";"
    if kind == "update_items":
        cond = rng.choice([None, "Article = 'A1'", "Pieces < 2", "Shipment = @4"])
        return f"UPDATE \"Shipment.Items\" SET Pieces = Pieces + {rng.randint(1, 3)}" + (
            f" WHERE {cond}" if cond else "") + ";"
    if kind == "update_top":
        cond = rng.choice([None, "Items.Article = 'A2'", "WareFrom.Name = 'North'", "No > 5"])
        return f"UPDATE Shipment SET No = No * 2 - 1, Weight = Weight + 0.5" + (
            f" WHERE {cond}" if cond else "") + ";"
    if kind == "update_sale":
        cond = rng.choice([None, "Pieces > 3", "Article = 'A3'"])
        return "UPDATE \"Sale.SaleItems\" SET Price = Price * 2.0" + (f" WHERE {cond}" if cond else "") + ";"
    if kind == "update_key":
        return "UPDATE \"Shipment.Items\" SET Article = 'A1' WHERE Pieces > 4;"
    if kind == "delete":
        return f"DELETE Shipment{where};"
    return f"DELETE WAREHOUSE WHERE Name = '{rng.choice(WAREHOUSES)}';"


# expression interpreter

def _coerce_pair(a, b):
    if isinstance(a, dt.datetime) and isinstance(b, str):
        return a, dt.datetime.fromisoformat(b)
    if isinstance(b, dt.datetime) and isinstance(a, str):
        return dt.datetime.fromisoformat(a), b
    return a, b


def _key(v):
    return v.value if isinstance(v, (Oid, OidRef)) else v


def evaluate(e, lookup):
    if isinstance(e, ast.Literal):
        return e.value
    if isinstance(e, ast.OidLiteral):
        return OidRef(e.value)
    if isinstance(e, ast.Name):
        return lookup(e.path)
    if isinstance(e, ast.Unary):
        v = evaluate(e.operand, lookup)
        if v is None:
            return None
        return (not v) if e.op == "NOT" else -v
    left, right = evaluate(e.left, lookup), evaluate(e.right, lookup)
    op = e.op
    if op == "AND":
        if left is False or right is False:
            return False
        return None if left is None or right is None else True
    if op == "OR":
        if left is True or right is True:
            return True
        return None if left is None or right is None else False
    if op in ast.COMPARISONS:
        if left is None or right is None:
            return False
        a, b = _coerce_pair(_key(left), _key(right))
        return {"=": a == b, "<>": a != b, "<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]
    if left is None or right is None:
        return None
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    if right == 0:
        raise OracleFailure("division by zero")
    return left / right


# catalog walking and flattening

def _chain(catalog, cls):
    out = []
    while cls is not None:
        out.append(catalog.classes[cls])
        cls = catalog.classes[cls].parent
    return out


def _components(catalog, cls):
    """(name, type, params) of every component, ancestors' first."""
    comps = []
    for cdef in reversed(_chain(catalog, cls)):
        comps.extend(cdef.components)
    return comps


def _realization(catalog, cls, name):
    for cdef in _chain(catalog, cls):
        for comp in cdef.components + cdef.overrides:
            if comp.name == name and not isinstance(comp.realization, ast.Unrealized):
                return cdef.name, comp.realization
    return None, None


def _value(db, oid, name):
    state = db.objects[oid.value]
    if name in state.stored:
        return state.stored[name]
    if state.class_name == "Sale" and name == "Items":
        sums = defaultdict(int)
        for article, pieces, _ in state.stored["SaleItems"]:
            sums[article] += pieces
        return frozenset(sums.items())
    raise OracleFailure(f"{name} has no value")


def _prefixed(name, rows):
    return [{f"{name}.{k}": v for k, v in r.items()} for r in rows]


def _node_rows(db, name, t, value, chain):
    if isinstance(t, Reference):
        if t.target in chain:
            return [{name: value}]
        return [{name: value, **r} for r in _prefixed(name, flatten(db, value, t.target, chain + (t.target,)))]
    if isinstance(t, TupleT):
        return _prefixed(name, _struct(db, t.fields, value, chain))
    if isinstance(t, RelationT):
        if not value:
            return [{}]  # missing keys read as NULL
        out = []
        for elem in value:
            out.extend(_prefixed(name, _struct(db, t.fields, elem, chain)))
        return out
    return [{name: value}]


def _struct(db, fields, values, chain):
    parts = [_node_rows(db, f.name, f.type, v, chain) for f, v in zip(fields, values)]
    return [dict(itertools.chain.from_iterable(d.items() for d in combo))
            for combo in itertools.product(*parts)]


def flatten(db, oid, cls, chain=None):
    chain = chain or (cls,)
    parts = []
    for comp in _components(db.catalog, cls):
        if comp.params is None:
            parts.append(_node_rows(db, comp.name, comp.type, _value(db, oid, comp.name), chain))
    return [dict(itertools.chain.from_iterable(d.items() for d in combo))
            for combo in itertools.product(*parts)]


def _extent(db, cls):
    members = set()
    for name in db.catalog.classes:
        if any(c.name == cls for c in _chain(db.catalog, name)):
            members.add(name)
    return sorted(s.oid for s in db.objects.values() if s.class_name in members)


def targets(db, cls, predicate):
    out = []
    for oid in _extent(db, cls):
        if predicate is None:
            out.append(oid)
            continue
        for row in flatten(db, oid, cls):
            row = {cls: oid, **row}
            if evaluate(predicate, row.get) is True:
                out.append(oid)
                break
    return out


# conformance of assigned values

def _conform(value, t, db):
    if value is None:
        raise OracleFailure("NULL assigned")
    if isinstance(t, Reference):
        n = value.value
        if n not in db.objects:
            raise OracleFailure("dangling")
        return Oid(n, db.objects[n].class_name)
    base = t.base
    if base == "FLOAT" and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if base == "DATETIME" and isinstance(value, str):
        return dt.datetime.fromisoformat(value)
    expected = {"INTEGER": int, "FLOAT": float, "STRING": str, "BOOL": bool, "DATETIME": dt.datetime}[base]
    if not isinstance(value, expected) or (base == "INTEGER" and isinstance(value, bool)):
        raise OracleFailure("type")
    return value


def _check_key(rtype, rows):
    if rtype.key is None:
        return
    idx = [[f.name for f in rtype.fields].index(k) for k in rtype.key]
    keys = [tuple(r[i] for i in idx) for r in rows]
    if len(set(keys)) != len(keys):
        raise OracleFailure("key")


# commands

def _run_body(db, oid, proc, params):
    state = db.objects[oid.value]
    values = dict(state.stored)
    comps = {c.name: c for c in _components(db.catalog, state.class_name)}

    def own(name):
        if name in params:
            return params[name]
        if name not in values:
            raise OracleFailure(f"{name} not stored")
        return values[name]

    for stmt in proc.body:
        if isinstance(stmt, ast.SetStmt):
            if stmt.component not in values:
                raise OracleFailure("not stored")
            values[stmt.component] = _conform(evaluate(stmt.expr, own), comps[stmt.component].type, db)
        elif isinstance(stmt, ast.InsertStmt):
            if stmt.component not in values:
                raise OracleFailure("not stored")
            rtype = comps[stmt.component].type
            row = tuple(_conform(evaluate(v, own), f.type, db) for v, f in zip(stmt.values, rtype.fields))
            if row in values[stmt.component]:
                raise OracleFailure("duplicate")
            new = values[stmt.component] | {row}
            _check_key(rtype, new)
            values[stmt.component] = new
        elif isinstance(stmt, ast.DeleteStmt):
            if stmt.component not in values:
                raise OracleFailure("not stored")
            rtype = comps[stmt.component].type
            names = [f.name for f in rtype.fields]
            keep = set()
            for elem in values[stmt.component]:
                env = dict(zip(names, elem))
                if stmt.predicate is None or evaluate(stmt.predicate, lambda n: env[n] if n in env else own(n)) is True:
                    continue
                keep.add(elem)
            values[stmt.component] = frozenset(keep)
        else:
            result = evaluate(stmt.expr, own)
            if result is not None and proc.returns is not None:
                result = _conform(result, proc.returns, db)
            return values, result
    return values, None


def oracle_call(db, stmt: ast.GroupCall):
    comp = next(c for c in _components(db.catalog, stmt.class_name) if c.name == stmt.method)
    params = {p.name: _conform(evaluate(a, lambda n: None), p.type, db) for p, a in zip(comp.params, stmt.args)}
    returned = {}
    objects = dict(db.objects)
    for oid in targets(db, stmt.class_name, stmt.predicate):
        _, proc = _realization(db.catalog, oid.class_name, stmt.method)
        if proc is None:
            raise OracleFailure("unrealized")
        values, result = _run_body(Database(db.catalog, objects, db.next_oid), oid, proc, params)
        objects[oid.value] = ObjectState(oid, values)
        returned[oid] = result
    return Database(db.catalog, objects, db.next_oid), returned


def oracle_update(db, stmt: ast.GroupUpdate, descending: bool = False):
    root, *prefix = stmt.relation.split(".")
    objects = dict(db.objects)
    order = _extent(db, root)
    for oid in (reversed(order) if descending else order):
        state = objects[oid.value]
        if not prefix:
            rows = [{root: oid, **r} for r in flatten(db, oid, root)]
            matching = [r for r in rows if stmt.predicate is None or evaluate(stmt.predicate, r.get) is True]
            if not matching:
                continue
            comps = {c.name: c for c in _components(db.catalog, root)}
            changes = {}
            for attr, e in stmt.assignments:
                if attr not in state.stored:
                    raise OracleFailure("not updatable")
                changes[attr] = _conform(evaluate(e, matching[0].get), comps[attr].type, db)
            objects[oid.value] = state.with_values(**changes)
            continue
        (comp_name,) = prefix  # the generated commands step one level down
        rtype = next(c for c in _components(db.catalog, root) if c.name == comp_name).type
        names = [f.name for f in rtype.fields]
        new_rows, hit = [], False
        for elem in sorted(_value(db, oid, comp_name)):
            # each element is its own update context; the rows below it are its flattening
            sub = [{root: oid, **r} for r in _struct(db, rtype.fields, elem, (root,))]
            if stmt.predicate is not None and not any(evaluate(stmt.predicate, r.get) is True for r in sub):
                new_rows.append(elem)
                continue
            hit = True
            row = dict(zip(names, elem))
            for attr, e in stmt.assignments:
                ftype = rtype.fields[names.index(attr)].type
                row[attr] = _conform(evaluate(e, sub[0].get), ftype, db)
            new_rows.append(tuple(row[n] for n in names))
        if not hit:
            continue
        if comp_name not in state.stored:
            raise OracleFailure("not updatable")
        if len(set(new_rows)) != len(new_rows):
            raise OracleFailure("collapsed tuples")
        _check_key(rtype, new_rows)
        objects[oid.value] = state.with_values(**{comp_name: frozenset(new_rows)})
    return Database(db.catalog, objects, db.next_oid), None


def oracle_delete(db, stmt: ast.DeleteObjects):
    objects = dict(db.objects)
    for oid in targets(db, stmt.class_name, stmt.predicate):
        del objects[oid.value]
        for state in objects.values():
            if any(isinstance(v, Oid) and v.value == oid.value for v in state.stored.values()):
                raise OracleFailure("referenced")
    return Database(db.catalog, objects, db.next_oid), None


def oracle_execute(db, text: str, descending: bool = False):
    """Return (new db, returned map or None, failed flag); on failure the db is unchanged."""
    stmt = parse_statement(text)
    try:
        if isinstance(stmt, ast.GroupUpdate):
            new, returned = oracle_update(db, stmt, descending)
        elif isinstance(stmt, ast.GroupCall):
            new, returned = oracle_call(db, stmt)
        else:
            new, returned = oracle_delete(db, stmt)
    except OracleFailure:
        return db, None, True
    return new, returned, False
