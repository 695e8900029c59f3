"""Evaluation of components, derived relations, SELECT queries and views.

A derived relation is the union, over every object of the root class and
its descendants, of that object's flattened rows; each object contributes
through the realization its own class selects for each component.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Mapping, Optional

from . import ast
from .catalog import Catalog, effective_components, realizing_class
from .errors import (
    AggregateMisuse,
    DuplicateView,
    EvaluationError,
    QueryError,
    RxoError,
    TypeMismatch,
    UnknownAttribute,
    UnknownRelation,
    UnknownView,
    UnrealizedComponent,
)
from .expr import compile_predicate
from .namespace import PathNode, class_nodes, derive_relations, global_index, suffixes
from .types import (
    FLOAT,
    INTEGER,
    Oid,
    Reference,
    RelationT,
    TupleT,
    conform,
    format_value,
    is_numeric,
    is_scalar,
    sort_key,
)


@dataclass(frozen=True)
class Relation:
    heading: tuple  # (name, type) pairs
    rows: frozenset = frozenset()

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.heading]

    def __len__(self) -> int:
        return len(self.rows)

    def sorted_rows(self) -> list[tuple]:
        return sorted(self.rows, key=lambda r: tuple(sort_key(v) for v in r))

    def dicts(self) -> list[dict]:
        return [dict(zip(self.names, r)) for r in self.sorted_rows()]

    def project(self, *names: str) -> "Relation":
        idx = [self.names.index(n) for n in names]
        return Relation(tuple(self.heading[i] for i in idx),
                        frozenset(tuple(r[i] for i in idx) for r in self.rows))

    def union(self, other: "Relation") -> "Relation":
        if [t for _, t in self.heading] != [t for _, t in other.heading]:
            raise TypeMismatch("union of relations with different headings")
        return Relation(self.heading, self.rows | other.rows)

    def dump(self) -> str:
        """Header of quoted names, then tab-separated literals in canonical order."""
        lines = ["\t".join(f'"{n}"' for n in self.names)]
        lines.extend("\t".join(format_value(v) for v in r) for r in self.sorted_rows())
        return "".join(line + "\n" for line in lines)

    def table(self) -> str:
        cells = [self.names] + [[format_value(v) for v in r] for r in self.sorted_rows()]
        widths = [max(len(row[i]) for row in cells) for i in range(len(self.names))]
        fmt = lambda row: " | ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
        lines = [fmt(cells[0]), "-+-".join("-" * w for w in widths)]
        lines.extend(fmt(row) for row in cells[1:])
        n = len(self.rows)
        lines.append(f"({n} row{'s' if n != 1 else ''})")
        return "".join(line + "\n" for line in lines)


@dataclass(frozen=True)
class LocalRef:
    """A reference variable registered in a local context: ``name`` denotes these objects."""

    target_class: str
    oids: tuple[Oid, ...] = ()


@dataclass(frozen=True)
class EvalContext:
    """Global when ``oid`` is None; otherwise names resolve to that object's components first."""

    db: object
    oid: Optional[Oid] = None
    locals: Mapping[str, LocalRef] = field(default_factory=dict)


# static resolution

@dataclass(frozen=True)
class SourceInfo:
    kind: str  # "global", "object", "local", "view"
    relation: str
    alias: str
    heading: tuple
    root_class: str = ""  # class whose path tree the rows follow
    prefix: tuple = ()


@dataclass(frozen=True)
class ResolvedQuery:
    query: ast.QueryExpr
    sources: tuple[SourceInfo, ...]
    heading: tuple
    columns: tuple  # per projection: ("attr", index) or ("agg", func, index|None)
    predicate: object
    group_by: tuple[int, ...]
    aggregated: bool


def source_info(catalog: Catalog, relation: str, alias: str, local_class: str | None = None,
                locals: Mapping[str, LocalRef] | None = None) -> SourceInfo:
    root, *prefix = relation.split(".")
    if local_class is not None:
        own = {c.name for c in effective_components(catalog, local_class) if not c.is_method}
        if root in own:
            name = f"{local_class}.{relation}"
            for schema in derive_relations(catalog, local_class):
                if schema.name == name:
                    return SourceInfo("object", relation, alias, schema.heading, local_class,
                                      (root, *prefix))
            raise UnknownRelation(f"{relation} is not a relation of {local_class} objects")
    if locals and root in locals:
        target = locals[root].target_class
        name = ".".join([target, *prefix])
        for schema in derive_relations(catalog, target):
            if schema.name == name:
                return SourceInfo("local", relation, alias, schema.heading, target, tuple(prefix))
        raise UnknownRelation(f"no relation named {relation!r} in this context")
    schema = global_index(catalog).relations.get(relation)
    if schema is not None:
        return SourceInfo("global", relation, alias, schema.heading, root, tuple(prefix))
    if relation in catalog.views:
        heading = resolve_query(catalog, catalog.views[relation]).heading
        return SourceInfo("view", relation, alias, heading)
    raise UnknownRelation(f"no relation named {relation!r}")


def resolve_query(catalog: Catalog, q: ast.QueryExpr, local_class: str | None = None,
                  locals: Mapping[str, LocalRef] | None = None, span=None) -> ResolvedQuery:
    """Name-resolve and type-check ``q``; raises on the first problem."""
    try:
        return _resolve(catalog, q, local_class, locals)
    except RxoError as exc:
        if exc.span is None:
            exc.span = span
        raise


def _resolve(catalog, q, local_class, locals) -> ResolvedQuery:
    sources = []
    aliases = set()
    for s in q.sources:
        alias = s.alias or s.relation
        if alias in aliases:
            raise QueryError(f"source name {alias} is used twice")
        aliases.add(alias)
        sources.append(source_info(catalog, s.relation, alias, local_class, locals))
    offsets = list(itertools.accumulate([0] + [len(s.heading) for s in sources]))
    types = [t for s in sources for _, t in s.heading]

    def lookup(path: str) -> tuple[int, str]:
        matches = set()
        for i, src in enumerate(sources):
            names = [n for n, _ in src.heading]
            if path.startswith(src.alias + "."):
                rest = path[len(src.alias) + 1:]
                if rest in names:
                    matches.add((offsets[i] + names.index(rest), rest))
            if path in names:
                matches.add((offsets[i] + names.index(path), path))
        if not matches:
            raise UnknownAttribute(f"no attribute {path!r} in {', '.join(s.relation for s in sources)}")
        if len(matches) > 1:
            raise UnknownAttribute(f"attribute {path!r} is ambiguous")
        return matches.pop()

    def resolver(path):
        idx, _ = lookup(path)
        return types[idx], lambda row: row[idx]

    predicate = compile_predicate(q.predicate, resolver) if q.predicate is not None else None
    group_by = tuple(lookup(g)[0] for g in q.group_by)
    aggregated = any(isinstance(p.expr, ast.Aggregate) for p in q.projections)
    heading, columns = [], []
    for p in q.projections:
        if isinstance(p.expr, ast.Aggregate):
            func, arg = p.expr.func, p.expr.arg
            if arg is None:
                if func != "COUNT":
                    raise AggregateMisuse(f"{func}(*) is not allowed")
                idx, name, rtype = None, "COUNT", INTEGER
            else:
                idx, name = lookup(arg)
                rtype = _aggregate_type(func, types[idx])
            columns.append(("agg", func, idx))
        else:
            idx, name = lookup(p.expr.path)
            if (aggregated or group_by) and idx not in group_by:
                raise AggregateMisuse(f"{p.expr.path} must appear in GROUP BY")
            rtype = types[idx]
            columns.append(("attr", idx))
        heading.append((p.name or name, rtype))
    names = [n for n, _ in heading]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise QueryError(f"duplicate output attribute(s) {', '.join(dupes)}; rename with AS")
    return ResolvedQuery(q, tuple(sources), tuple(heading), tuple(columns), predicate, group_by,
                         aggregated or bool(group_by))


def _aggregate_type(func: str, t):
    if func == "COUNT":
        return INTEGER
    if func in ("SUM", "AVG"):
        if not is_numeric(t):
            raise AggregateMisuse(f"{func} needs a numeric attribute, got {t}")
        return FLOAT if func == "AVG" else t
    if isinstance(t, Reference) or t.base == "BOOL":
        raise AggregateMisuse(f"{func} needs an ordered attribute, got {t}")
    return t


def _aggregate(func: str, values: list):
    if func == "COUNT":
        return len(values)
    if not values:
        return None
    if func == "SUM":
        return sum(values)
    if func == "AVG":
        return sum(values) / len(values)
    return min(values) if func == "MIN" else max(values)


@functools.lru_cache(maxsize=None)
def _width(node: PathNode) -> int:
    return len(suffixes((node,)))


def _tuple_getter(t, value):
    index = {f.name: i for i, f in enumerate(t.fields)}
    return lambda name: value[index[name]]


class Evaluator:
    """Read-only evaluation over one database state; memoizes component values."""

    def __init__(self, db, locals: Mapping[str, LocalRef] | None = None):
        self.db = db
        self.catalog: Catalog = db.catalog
        self.locals = dict(locals or {})
        self._components: dict = {}
        self._active: set = set()
        self._relations: dict = {}
        self._resolved: dict = {}

    # components

    def component(self, oid: Oid, name: str):
        key = (oid.value, name)
        if key in self._components:
            return self._components[key]
        state = self.db.get(oid)
        comp = self._find(state.class_name, name)
        r = comp.realization
        if isinstance(r, ast.Stored):
            value = state.stored[name]
        elif isinstance(r, ast.QueryRealization):
            if key in self._active:
                raise EvaluationError(f"{state.class_name}.{name} of @{oid.value} depends on itself")
            self._active.add(key)
            try:
                value = self._computed(state.oid, comp, r.query)
            except EvaluationError:
                raise
            except RxoError as exc:
                raise EvaluationError(
                    f"{state.class_name}.{name} of @{oid.value}: {exc.message}") from exc
            finally:
                self._active.discard(key)
        elif isinstance(r, ast.Procedure):
            raise TypeMismatch(f"{name} is a method and cannot be read as a value")
        else:
            raise UnrealizedComponent(f"{state.class_name}.{name} has no realization")
        self._components[key] = value
        return value

    def _find(self, class_name: str, name: str):
        for comp in effective_components(self.catalog, class_name):
            if comp.name == name:
                return comp
        raise UnknownAttribute(f"class {class_name} has no component {name}")

    def _computed(self, oid: Oid, comp, query):
        owner = realizing_class(self.catalog, oid.class_name, comp.name)
        key = (owner, comp.name)
        if key not in self._resolved:
            self._resolved[key] = resolve_query(self.catalog, query, local_class=owner)
        result = self.run(self._resolved[key], oid)
        return to_component_value(result, comp.type)

    # flattening

    def _object_getter(self, oid: Oid):
        return lambda name: self.component(oid, name)

    def struct_rows(self, nodes, getter) -> list[tuple]:
        parts = [self._node_rows(node, getter(node.name)) for node in nodes]
        return [tuple(itertools.chain.from_iterable(combo)) for combo in itertools.product(*parts)]

    def _node_rows(self, node: PathNode, value) -> list[tuple]:
        if node.is_terminal:
            if not node.expanded:
                return [(value,)]
            if value is None:
                return [(None,) * _width(node)]
            return [(value,) + r for r in self.struct_rows(node.children, self._object_getter(value))]
        if value is None:
            return [(None,) * _width(node)]
        if isinstance(node.type, TupleT):
            return self.struct_rows(node.children, _tuple_getter(node.type, value))
        if not value:
            # outer flatten: an empty relation still yields one all-NULL row
            return [(None,) * _width(node)]
        rows = []
        for elem in value:
            rows.extend(self.struct_rows(node.children, _tuple_getter(node.type, elem)))
        return rows

    def contexts(self, oid: Oid, root_class: str, prefix) -> tuple[tuple, list]:
        """Walk ``prefix`` from an object: (nodes below the prefix, getters for each context)."""
        nodes = class_nodes(self.catalog, root_class)
        getters = [self._object_getter(oid)]
        for seg in prefix:
            node = next((n for n in nodes if n.name == seg), None)
            if node is None or not node.children:
                raise UnknownRelation(f"{seg} does not lead to a relation")
            nxt = []
            for get in getters:
                value = get(seg)
                if value is None:
                    continue
                if isinstance(node.type, Reference):
                    nxt.append(self._object_getter(value))
                elif isinstance(node.type, TupleT):
                    nxt.append(_tuple_getter(node.type, value))
                else:
                    nxt.extend(_tuple_getter(node.type, e) for e in value)
            nodes, getters = node.children, nxt
        return nodes, getters

    def object_rows(self, oid: Oid, root_class: str, prefix) -> set:
        nodes, getters = self.contexts(oid, root_class, prefix)
        rows = set()
        for get in getters:
            rows.update((oid,) + r for r in self.struct_rows(nodes, get))
        return rows

    def derived(self, name: str) -> Relation:
        if name in self._relations:
            return self._relations[name]
        root, *prefix = name.split(".")
        if root in self.locals:
            ref = self.locals[root]
            info = source_info(self.catalog, name, name, locals=self.locals)
            oids = ref.oids
        else:
            schema = global_index(self.catalog).relations.get(name)
            if schema is None:
                raise UnknownRelation(f"no relation named {name!r}")
            info = SourceInfo("global", name, name, schema.heading, root, tuple(prefix))
            from .store import extent

            oids = extent(self.db, root, include_subclasses=True)
        rows = set()
        for oid in oids:
            rows |= self.object_rows(oid, info.root_class, info.prefix)
        rel = Relation(info.heading, frozenset(rows))
        self._relations[name] = rel
        return rel

    # queries

    def source_rows(self, src: SourceInfo, oid: Oid | None):
        if src.kind == "object":
            return self.object_rows(oid, src.root_class, src.prefix)
        if src.kind == "view":
            return self.run(resolve_query(self.catalog, self.catalog.views[src.relation])).rows
        return self.derived(src.relation).rows

    def run(self, rq: ResolvedQuery, oid: Oid | None = None) -> Relation:
        inputs = [self.source_rows(s, oid) for s in rq.sources]
        rows = (tuple(itertools.chain.from_iterable(c)) for c in itertools.product(*inputs))
        if rq.predicate is not None:
            rows = filter(rq.predicate, rows)
        if not rq.aggregated:
            idx = [c[1] for c in rq.columns]
            return Relation(rq.heading, frozenset(tuple(r[i] for i in idx) for r in rows))
        groups: dict = {}
        for r in rows:
            groups.setdefault(tuple(r[i] for i in rq.group_by), []).append(r)
        if not rq.group_by and not groups:
            groups[()] = []  # aggregates over no rows still give one row
        out = set()
        for members in groups.values():
            values = []
            for col in rq.columns:
                if col[0] == "attr":
                    values.append(members[0][col[1]])
                    continue
                _, func, idx = col
                if idx is None:
                    values.append(len(members))
                else:
                    values.append(_aggregate(func, [m[idx] for m in members if m[idx] is not None]))
            out.add(tuple(values))
        return Relation(rq.heading, frozenset(out))


def to_component_value(result: Relation, ctype):
    """Convert a query result into a value of the component's declared type."""
    if is_scalar(ctype):
        if len(result.rows) > 1:
            raise EvaluationError(f"query for a scalar component returned {len(result.rows)} rows")
        if not result.rows:
            return None
        (value,) = next(iter(result.rows))
        return None if value is None else conform(value, ctype)
    names = result.names
    order = [names.index(f.name) for f in ctype.fields]
    rows = [tuple(r[i] for i in order) for r in result.rows]
    if any(v is None for r in rows for v in r):
        raise EvaluationError("query result contains NULL and cannot form a component value")
    if isinstance(ctype, TupleT):
        if len(rows) != 1:
            raise EvaluationError(f"query for a tuple component returned {len(rows)} rows")
        return conform(rows[0], ctype)
    return conform(rows, RelationT(ctype.fields))


# module-level operations

def eval_component(db, oid: Oid, component: str):
    return Evaluator(db).component(oid, component)


def eval_derived_relation(db, name: str, locals: Mapping[str, LocalRef] | None = None) -> Relation:
    return Evaluator(db, locals).derived(name)


def eval_select(db, q: ast.QueryExpr, ctx: EvalContext | None = None) -> Relation:
    ctx = ctx or EvalContext(db)
    local_class = db.get(ctx.oid).class_name if ctx.oid is not None else None
    rq = resolve_query(db.catalog, q, local_class=local_class, locals=ctx.locals)
    return Evaluator(db, ctx.locals).run(rq, ctx.oid)


def validate_view(catalog: Catalog, name: str, q: ast.QueryExpr, span=None) -> Catalog:
    if name in catalog.views or name in catalog.classes:
        raise DuplicateView(f"{name} is already defined", span)
    resolve_query(catalog, q, span=span)
    return catalog.with_view(name, q)


def create_view(db, name: str, q: ast.QueryExpr, span=None):
    return db.with_catalog(validate_view(db.catalog, name, q, span))


def eval_view(db, name: str) -> Relation:
    q = db.catalog.views.get(name)
    if q is None:
        raise UnknownView(f"no view named {name}")
    try:
        return eval_select(db, q)
    except RxoError as exc:
        exc.message = f"view {name}: {exc.message}"
        raise
