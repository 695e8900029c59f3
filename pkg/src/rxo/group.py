"""Set-oriented commands: group method calls, group updates, creation and deletion.

The observable contract of every command is that of running it object by
object in ascending Oid order, all-or-nothing. Method calls are executed
statement-major instead: each body statement is applied to the whole target
set before the next one starts, which is equivalent because bodies only
touch the receiving object's own stored state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import ast
from .catalog import Catalog, effective_components, find_component, realizing_class
from .errors import (
    ArityMismatch,
    EvaluationError,
    KeyViolation,
    NotAProcedure,
    NotUpdatable,
    QueryError,
    ReferencedObject,
    RxoError,
    TypeMismatch,
    UnknownAttribute,
    UnknownComponent,
    UnknownMethod,
    UnknownRelation,
    UnrealizedComponent,
)
from .expr import COMPOUND, Compiled, coerce, compile_expr, compile_predicate, literal_value
from .namespace import class_nodes, global_index, suffixes
from .query import Evaluator, _tuple_getter
from .store import Database, ObjectState, check_instantiable, conform_initial, extent, referrers
from .types import Oid, Reference, RelationT, TupleT, check_key, conform, is_scalar


@dataclass(frozen=True)
class TargetSet:
    class_name: str
    predicate: Optional[ast.Expr] = None


@dataclass(frozen=True)
class ExecutionReport:
    targeted: int
    succeeded: int
    failures: tuple = ()  # (Oid, RxoError) pairs
    returned: Optional[dict] = None  # Oid -> value, for method calls
    created: tuple = ()
    committed: bool = True


# targets

def resolve_targets(db: Database, target: TargetSet) -> list[Oid]:
    """Extent of the class (with descendants) filtered by the predicate, ascending Oid."""
    oids = extent(db, target.class_name, include_subclasses=True)
    if target.predicate is None:
        return oids
    nodes = class_nodes(db.catalog, target.class_name)
    heading = ((target.class_name, Reference(target.class_name)),) + tuple(suffixes(nodes))
    pred = compile_predicate(target.predicate, _row_resolver(heading))
    ev = Evaluator(db)
    rows = set()
    for oid in oids:
        rows |= ev.object_rows(oid, target.class_name, ())
    matched = {r[0] for r in rows if pred(r)}
    return [o for o in oids if o in matched]


def _row_resolver(heading, allowed=None):
    names = [n for n, _ in heading]

    def resolve(path):
        if path not in names:
            raise UnknownAttribute(f"no attribute {path!r}; available: {', '.join(names)}")
        if allowed is not None and path not in allowed:
            raise UnknownAttribute(f"{path!r} is multi-valued and cannot be used here")
        idx = names.index(path)
        return heading[idx][1], lambda row: row[idx]

    return resolve


def _constant(e, what: str):
    def no_names(path):
        raise UnknownAttribute(f"{what} cannot refer to {path!r}")

    c = compile_expr(e, no_names)
    return c.raw if c.constant else c.fn(None)


# procedure bodies

class _Frame:
    """Mutable per-object state while a body runs."""

    def __init__(self, state: ObjectState, params: dict):
        self.oid = state.oid
        self.values = dict(state.stored)
        self.params = params
        self.elem = None
        self.result = None

    def read(self, name: str):
        if name not in self.values:
            raise EvaluationError(f"{name} is not stored in {self.oid.class_name}; bodies read stored state only")
        return self.values[name]


def _body_resolver(catalog: Catalog, class_name: str, params, elem_type=None):
    comps = {c.name: c for c in effective_components(catalog, class_name) if not c.is_method}
    ptypes = {p.name: p.type for p in params}
    fields = {f.name: (i, f.type) for i, f in enumerate(elem_type.fields)} if elem_type else {}

    def resolve(path):
        if path in fields:
            i, t = fields[path]
            if is_scalar(t):
                return t, lambda fr: fr.elem[i]
        if path in ptypes:
            return ptypes[path], lambda fr: fr.params[path]
        comp = comps.get(path)
        if comp is not None and is_scalar(comp.type):
            return comp.type, lambda fr: fr.read(path)
        raise UnknownAttribute(f"{path!r} is not a parameter or scalar component of {class_name}")

    return resolve


def _check_assign(catalog: Catalog, c: Compiled, target, what: str) -> Compiled:
    c = coerce(c, target)
    if c.type == COMPOUND:
        if is_scalar(target):
            raise TypeMismatch(f"{what}: a tuple or relation literal cannot be {target}")
        conform(c.raw, target, lambda n, t: Oid(n, t))
        return c
    if isinstance(c.type, Reference) and c.type.target == "" and isinstance(target, Reference):
        return c
    if not catalog.ref_assignable(c.type, target):
        raise TypeMismatch(f"{what}: cannot assign {c.type} to {target}")
    return c


def _relation_comp(comps, name, class_name):
    comp = comps.get(name)
    if comp is None or not isinstance(comp.type, RelationT):
        raise UnknownComponent(f"{class_name} has no relation component {name}")
    return comp


def _compile_body(catalog: Catalog, class_name: str, proc: ast.Procedure):
    """Type-check a body; return one runner ``fn(frame, resolve) -> finished`` per statement."""
    comps = {c.name: c for c in effective_components(catalog, class_name) if not c.is_method}
    base = _body_resolver(catalog, class_name, proc.params)
    runners = []
    for stmt in proc.body:
        if isinstance(stmt, ast.SetStmt):
            comp = comps.get(stmt.component)
            if comp is None:
                raise UnknownComponent(f"{class_name} has no data component {stmt.component}")
            c = _check_assign(catalog, compile_expr(stmt.expr, base), comp.type, f"SET {comp.name}")
            runners.append(_run_set(comp, c.fn))
        elif isinstance(stmt, ast.InsertStmt):
            comp = _relation_comp(comps, stmt.component, class_name)
            fields = comp.type.fields
            if len(stmt.values) != len(fields):
                raise ArityMismatch(f"INSERT INTO {comp.name} needs {len(fields)} values, got {len(stmt.values)}")
            fns = [_check_assign(catalog, compile_expr(v, base), f.type, f"{comp.name}.{f.name}").fn
                   for v, f in zip(stmt.values, fields)]
            runners.append(_run_insert(comp, fns))
        elif isinstance(stmt, ast.DeleteStmt):
            comp = _relation_comp(comps, stmt.component, class_name)
            pred = None
            if stmt.predicate is not None:
                pred = compile_predicate(
                    stmt.predicate, _body_resolver(catalog, class_name, proc.params, comp.type))
            runners.append(_run_delete(comp, pred))
        elif isinstance(stmt, ast.ReturnStmt):
            c = compile_expr(stmt.expr, base)
            if proc.returns is not None:
                c = _check_assign(catalog, c, proc.returns, "RETURN")
            runners.append(_run_return(c.fn, proc.returns))
        else:
            raise TypeMismatch(f"unsupported body statement {stmt!r}")
    return runners


def _run_set(comp, fn):
    def run(frame, resolve):
        frame.read(comp.name)
        frame.values[comp.name] = conform(fn(frame), comp.type, resolve)
        return False
    return run


def _run_insert(comp, fns):
    def run(frame, resolve):
        current = frame.read(comp.name)
        row = conform(tuple(f(frame) for f in fns), TupleT(comp.type.fields), resolve)
        if row in current:
            raise KeyViolation(f"{comp.name} already contains {row}")
        new = current | {row}
        check_key(comp.type, new)
        frame.values[comp.name] = new
        return False
    return run


def _run_delete(comp, pred):
    def run(frame, resolve):
        current = frame.read(comp.name)
        if pred is None:
            frame.values[comp.name] = frozenset()
            return False
        keep = []
        for elem in current:
            frame.elem = elem
            if not pred(frame):
                keep.append(elem)
        frame.elem = None
        frame.values[comp.name] = frozenset(keep)
        return False
    return run


def _run_return(fn, returns):
    def run(frame, resolve):
        value = fn(frame)
        frame.result = None if value is None or returns is None else conform(value, returns, resolve)
        return True
    return run


def check_procedure(catalog: Catalog, class_name: str, comp, proc: ast.Procedure, span=None) -> None:
    try:
        _compile_body(catalog, class_name, proc)
    except RxoError as exc:
        exc.message = f"{class_name}.{comp.name}: {exc.message}"
        exc.span = exc.span or span
        raise


# commands

def _method(db: Database, class_name: str, method: str):
    db.catalog.get(class_name)
    try:
        comp = find_component(db.catalog, class_name, method)
    except UnknownComponent:
        raise UnknownMethod(f"class {class_name} has no method {method}") from None
    if not comp.is_method:
        raise NotAProcedure(f"{class_name}.{method} is a data component, not a method")
    return comp


def exec_group_call(db: Database, target: TargetSet, method: str, args) -> tuple[Database, ExecutionReport]:
    comp = _method(db, target.class_name, method)
    if len(args) != len(comp.params):
        raise ArityMismatch(f"{target.class_name}.{method} takes {len(comp.params)} argument(s), got {len(args)}")
    resolve = db.resolver()
    values = {}
    for p, a in zip(comp.params, args):
        values[p.name] = conform(_constant(a, "an argument"), p.type, resolve)
    oids = resolve_targets(db, target)

    # group receivers by the body their class dispatches to
    batches: dict = {}
    failures = {}
    for oid in oids:
        owner = realizing_class(db.catalog, oid.class_name, method)
        if owner is None:
            failures[oid] = UnrealizedComponent(f"{oid.class_name}.{method} has no realization")
            continue
        batches.setdefault(owner, []).append(oid)
    frames = {}
    returned = {}
    for owner, members in batches.items():
        proc = find_component(db.catalog, owner, method).realization
        runners = _compile_body(db.catalog, owner, proc)
        active = []
        for oid in members:
            frames[oid] = _Frame(db.get(oid), values)
            active.append(oid)
        for run in runners:
            still = []
            for oid in active:
                try:
                    if run(frames[oid], resolve):
                        returned[oid] = frames[oid].result
                    else:
                        still.append(oid)
                except RxoError as exc:
                    failures[oid] = exc
            active = still
        for oid in active:
            returned[oid] = None
    if failures:
        report = ExecutionReport(len(oids), len(oids) - len(failures),
                                 tuple(sorted(failures.items())), None, committed=False)
        return db, report
    objects = dict(db.objects)
    for oid, frame in frames.items():
        objects[oid.value] = ObjectState(oid, frame.values)
    report = ExecutionReport(len(oids), len(oids), (), dict(sorted(returned.items())))
    return db.with_objects(objects), report


def _attribute_shape(nodes):
    """Map each attribute below ``nodes`` to whether it is single-valued per context."""
    shape = {}
    for node in nodes:
        if node.is_terminal:
            shape[node.name] = True
        single = not isinstance(node.type, RelationT)
        for sub, sv in _attribute_shape(node.children).items():
            shape[f"{node.name}.{sub}"] = single and sv
    return shape


def exec_group_update(db: Database, relation: str, assignments, predicate=None) -> tuple[Database, ExecutionReport]:
    catalog = db.catalog
    schema = global_index(catalog).relations.get(relation)
    if schema is None:
        raise UnknownRelation(f"no relation named {relation!r}")
    root, *prefix = relation.split(".")
    nodes = class_nodes(catalog, root)
    path_nodes = []
    for seg in prefix:
        node = next(n for n in nodes if n.name == seg)
        if isinstance(node.type, Reference):
            # updates never pass through a dereference into another object
            raise NotUpdatable([(root, ".".join(prefix))])
        path_nodes.append(node)
        nodes = node.children
    heading = schema.heading
    shape = _attribute_shape(nodes)
    single = {schema.ref_attribute} | {a for a, sv in shape.items() if sv}
    targets = {}
    seen = set()
    for attr, e in assignments:
        node = next((n for n in nodes if n.name == attr), None)
        if node is None or not node.is_terminal:
            raise UnknownAttribute(f"{attr!r} is not a direct scalar attribute of {relation}")
        if attr in seen:
            raise QueryError(f"{attr} is assigned twice")
        seen.add(attr)
        c = _check_assign(catalog, compile_expr(e, _row_resolver(heading, single)), node.type, f"SET {attr}")
        targets[attr] = (node.type, c.fn)
    pred = compile_predicate(predicate, _row_resolver(heading)) if predicate is not None else None
    resolve = db.resolver()
    ev = Evaluator(db)

    def updated(oid, value_fields, get, node_children):
        rows = [(oid,) + r for r in ev.struct_rows(node_children, get)]
        if pred is not None and not any(pred(r) for r in rows):
            return None
        row = rows[0]
        return {attr: conform(fn(row), t, resolve) for attr, (t, fn) in targets.items()}

    def rebuild(oid, value, depth):
        """New value of the component at ``path_nodes[depth]`` and whether any context matched."""
        node = path_nodes[depth]
        t = node.type
        elems = [value] if isinstance(t, TupleT) else sorted(value, key=_elem_key)
        out, hit = [], False
        for elem in elems:
            get = _tuple_getter(t, elem)
            if depth + 1 == len(path_nodes):
                changes = updated(oid, t.fields, get, node.children)
                if changes is None:
                    out.append(elem)
                    continue
                hit = True
                names = [f.name for f in t.fields]
                elem = tuple(changes.get(n, v) for n, v in zip(names, elem))
                out.append(elem)
            else:
                seg = path_nodes[depth + 1].name
                i = [f.name for f in t.fields].index(seg)
                inner, sub_hit = rebuild(oid, elem[i], depth + 1)
                hit |= sub_hit
                out.append(elem[:i] + (inner,) + elem[i + 1:])
        if isinstance(t, TupleT):
            return out[0], hit
        new = frozenset(out)
        if len(new) != len(out):
            raise KeyViolation(f"update makes two tuples of {node.name} equal")
        check_key(t, new)
        return new, hit

    offenders, changed = [], {}
    matched = 0
    for oid in extent(db, root, include_subclasses=True):
        state = db.get(oid)
        if not path_nodes:
            changes = updated(oid, None, ev._object_getter(oid), nodes)
            if changes is None:
                continue
            matched += 1
            bad = [a for a in changes if a not in state.stored]
            offenders.extend((oid.class_name, a) for a in bad)
            changed[oid.value] = changes
            continue
        top = path_nodes[0].name
        new, hit = rebuild(oid, ev.component(oid, top), 0)
        if not hit:
            continue
        matched += 1
        if top not in state.stored:
            offenders.append((oid.class_name, top))
        changed[oid.value] = {top: new}
    if offenders:
        raise NotUpdatable(sorted(set(offenders)))
    objects = dict(db.objects)
    for key, changes in changed.items():
        objects[key] = objects[key].with_values(**changes)
    return db.with_objects(objects), ExecutionReport(matched, matched)


def _elem_key(elem):
    from .types import sort_key

    return sort_key(elem)


def exec_create_objects(db: Database, stmt: ast.CreateObjects) -> tuple[Database, ExecutionReport]:
    from .store import create_object

    check_instantiable(db.catalog, stmt.class_name)
    initial = {}
    for name, e in stmt.assignments:
        if name in initial:
            raise QueryError(f"{name} is initialized twice")
        initial[name] = literal_value(e)
    created = []
    new_db = db
    for _ in range(stmt.count):
        new_db, oid = create_object(new_db, stmt.class_name, initial)
        created.append(oid)
    return new_db, ExecutionReport(stmt.count, stmt.count, created=tuple(created))


def exec_delete_objects(db: Database, target: TargetSet) -> tuple[Database, ExecutionReport]:
    oids = resolve_targets(db, target)
    gone = set()
    failures = []
    for oid in oids:
        # ascending-order contract: only already-deleted targets may refer to this one
        refs = [r for r in referrers(db, oid) if r not in gone]
        if refs:
            failures.append((oid, ReferencedObject(oid, refs)))
        gone.add(oid)
    if failures:
        return db, ExecutionReport(len(oids), len(oids) - len(failures), tuple(failures), committed=False)
    objects = {k: v for k, v in db.objects.items() if v.oid not in gone}
    return db.with_objects(objects), ExecutionReport(len(oids), len(oids))
