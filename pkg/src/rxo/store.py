"""Object identity, extents, stored component values and snapshots.

A :class:`Database` is an immutable value; every operation returns a new
one, which is what makes group commands all-or-nothing for free.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from . import ast
from .catalog import Catalog, define_class, effective_components, unrealized_data_components
from .errors import (
    CorruptSnapshot,
    DanglingReference,
    NotInstantiable,
    ReferencedObject,
    RxoError,
    TypeMismatch,
    UnknownClass,
    UnknownComponent,
    UnknownOid,
    VersionMismatch,
)
from .types import Oid, conform, format_value, iter_oids

SNAPSHOT_MAGIC = "RXODB"
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class ObjectState:
    oid: Oid
    stored: Mapping[str, object]

    def __post_init__(self):
        object.__setattr__(self, "stored", MappingProxyType(dict(self.stored)))

    @property
    def class_name(self) -> str:
        return self.oid.class_name

    def with_values(self, **changes) -> "ObjectState":
        stored = dict(self.stored)
        stored.update(changes)
        return ObjectState(self.oid, stored)


@dataclass(frozen=True)
class Database:
    catalog: Catalog = field(default_factory=Catalog)
    objects: Mapping[int, ObjectState] = field(default_factory=dict)
    next_oid: int = 1

    def __post_init__(self):
        object.__setattr__(self, "objects", MappingProxyType(dict(self.objects)))

    def get(self, oid) -> ObjectState:
        key = oid.value if isinstance(oid, Oid) else oid
        try:
            return self.objects[key]
        except KeyError:
            raise UnknownOid(f"no live object @{key}") from None

    def with_objects(self, objects: Mapping[int, ObjectState], next_oid: int | None = None) -> "Database":
        return Database(self.catalog, objects, self.next_oid if next_oid is None else next_oid)

    def with_catalog(self, catalog: Catalog) -> "Database":
        return Database(catalog, self.objects, self.next_oid)

    def resolver(self, extra: Mapping[int, str] | None = None):
        """Resolve ``@n`` against live objects (plus ``extra`` oid -> class pairs)."""

        def resolve(n: int, target: str) -> Oid:
            if n in self.objects:
                class_name = self.objects[n].class_name
            elif extra and n in extra:
                class_name = extra[n]
            else:
                raise DanglingReference(f"@{n} is not a live object")
            if not self.catalog.is_subclass(class_name, target):
                raise TypeMismatch(f"@{n} is a {class_name}, not a {target}")
            return Oid(n, class_name)

        return resolve


def stored_components(catalog: Catalog, class_name: str):
    return [c for c in effective_components(catalog, class_name)
            if not c.is_method and isinstance(c.realization, ast.Stored)]


def check_instantiable(catalog: Catalog, class_name: str) -> None:
    if class_name not in catalog.classes:
        raise UnknownClass(f"no class named {class_name}")
    missing = unrealized_data_components(catalog, class_name)
    if missing:
        raise NotInstantiable(class_name, missing)


def conform_initial(db: Database, class_name: str, initial: Mapping[str, object], resolve=None) -> dict:
    """Check an initializer against the class's stored components; return conformed values."""
    comps = {c.name: c for c in effective_components(db.catalog, class_name) if not c.is_method}
    stored = {c.name: c for c in stored_components(db.catalog, class_name)}
    for name in initial:
        if name not in comps:
            raise UnknownComponent(f"class {class_name} has no data component {name}")
        if name not in stored:
            raise TypeMismatch(f"{class_name}.{name} is {comps[name].realization.kind.lower()}, not stored")
    missing = [n for n in stored if n not in initial]
    if missing:
        raise TypeMismatch(f"missing value(s) for stored component(s) {', '.join(missing)} of {class_name}")
    resolve = resolve or db.resolver()
    values = {}
    for name, comp in stored.items():
        try:
            values[name] = conform(initial[name], comp.type, resolve)
        except RxoError as exc:
            exc.message = f"{class_name}.{name}: {exc.message}"
            raise
    return values


def create_object(db: Database, class_name: str, initial: Mapping[str, object]) -> tuple[Database, Oid]:
    check_instantiable(db.catalog, class_name)
    values = conform_initial(db, class_name, initial)
    oid = Oid(db.next_oid, class_name)
    objects = dict(db.objects)
    objects[oid.value] = ObjectState(oid, values)
    return db.with_objects(objects, db.next_oid + 1), oid


def referrers(db: Database, oid: Oid, ignore=()) -> list[Oid]:
    skip = {o.value if isinstance(o, Oid) else o for o in ignore} | {oid.value}
    found = []
    for key, state in db.objects.items():
        if key in skip:
            continue
        if any(ref.value == oid.value for v in state.stored.values() for ref in iter_oids(v)):
            found.append(state.oid)
    return sorted(found)


def delete_object(db: Database, oid: Oid) -> Database:
    state = db.get(oid)
    refs = referrers(db, state.oid)
    if refs:
        raise ReferencedObject(state.oid, refs)
    objects = dict(db.objects)
    del objects[state.oid.value]
    return db.with_objects(objects)


def extent(db: Database, class_name: str, include_subclasses: bool = True) -> list[Oid]:
    if class_name not in db.catalog.classes:
        raise UnknownClass(f"no class named {class_name}")
    if include_subclasses:
        classes = set(db.catalog.descendants(class_name))
    else:
        classes = {class_name}
    return sorted(s.oid for s in db.objects.values() if s.class_name in classes)


# snapshots

def catalog_script(catalog: Catalog) -> list:
    """DDL statements that rebuild ``catalog`` when replayed in order."""
    statements = []
    for cdef in catalog.classes.values():
        specs = tuple(ast.ComponentSpec(c.name, c.type, c.params) for c in cdef.components)
        statements.append(ast.CreateClass(cdef.name, cdef.parent, specs))
    # views only need the namespace; realizations may read views
    for name, query in catalog.views.items():
        statements.append(ast.CreateView(name, query))
    for name, cdef in catalog.classes.items():
        inherited = [c.name for c in effective_components(catalog, name) if c.owner != name]
        overrides = {c.name: c for c in cdef.overrides}
        ordered = [overrides[n] for n in inherited if n in overrides] + list(cdef.components)
        for comp in ordered:
            r = comp.realization
            if isinstance(r, ast.Unrealized):
                continue
            if isinstance(r, ast.Procedure):
                statements.append(ast.AlterRealize(name, comp.name, r, comp.params, comp.type))
            else:
                statements.append(ast.AlterRealize(name, comp.name, r))
    return statements


def replay_catalog(statements) -> Catalog:
    from .catalog import alter_realize
    from .query import validate_view

    catalog = Catalog()
    for stmt in statements:
        if isinstance(stmt, ast.CreateClass):
            catalog = define_class(catalog, stmt)
        elif isinstance(stmt, ast.AlterRealize):
            catalog = alter_realize(catalog, stmt)
        elif isinstance(stmt, ast.CreateView):
            catalog = validate_view(catalog, stmt.name, stmt.query)
        else:
            raise TypeMismatch(f"statement not allowed in a catalog script: {type(stmt).__name__}")
    return catalog


def format_object(catalog: Catalog, state: ObjectState) -> str:
    parts = [f"{c.name} := {format_value(state.stored[c.name])}"
             for c in stored_components(catalog, state.class_name)]
    return f"@{state.oid.value} {state.class_name} ({', '.join(parts)})"


def snapshot_save(db: Database) -> bytes:
    from .formatter import format_script

    catalog_lines = format_script(catalog_script(db.catalog)).splitlines()
    lines = [f"{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION}", f"next-oid {db.next_oid}",
             f"catalog {len(catalog_lines)}", *catalog_lines,
             f"objects {len(db.objects)}"]
    lines.extend(format_object(db.catalog, db.objects[k]) for k in sorted(db.objects))
    lines.append("end")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _parse_object_line(line: str):
    from .expr import literal_value
    from .parser import Parser

    p = Parser(line)
    p.expect_symbol("@")
    num = p.next()
    if num is None or not isinstance(num.value, int) or isinstance(num.value, bool):
        raise p.error("integer-literal")
    class_name = p.expect_name("class name")
    p.expect_symbol("(")
    values = {}
    if not p.at_symbol(")"):
        while True:
            comp = p.expect_name("component name")
            p.expect_symbol(":=")
            values[comp] = literal_value(p.expr())
            if not p.accept_symbol(","):
                break
    p.expect_symbol(")")
    if not p.at_end():
        raise p.error("end of line")
    return num.value, class_name, values


def snapshot_load(data: bytes) -> Database:
    from .parser import parse_script

    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorruptSnapshot(1, f"not UTF-8 text ({exc.reason})") from None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    pos = 0

    def take(what: str) -> str:
        nonlocal pos
        if pos >= len(lines):
            raise CorruptSnapshot(pos + 1, f"truncated: expected {what}")
        pos += 1
        return lines[pos - 1]

    def counted(prefix: str) -> int:
        line = take(f"'{prefix} <n>'")
        head, _, num = line.partition(" ")
        if head != prefix or not num.isdigit():
            raise CorruptSnapshot(pos, f"expected '{prefix} <n>', found {line!r}")
        return int(num)

    header = take("header").split(" ")
    if len(header) != 2 or header[0] != SNAPSHOT_MAGIC or not header[1].isdigit():
        raise CorruptSnapshot(1, "missing RXODB header")
    if int(header[1]) != SNAPSHOT_VERSION:
        raise VersionMismatch(f"snapshot format {header[1]}, this build reads {SNAPSHOT_VERSION}")
    next_oid = counted("next-oid")
    n_catalog = counted("catalog")
    start = pos + 1
    script = "\n".join(take("catalog line") for _ in range(n_catalog))
    try:
        catalog = replay_catalog(parse_script(script))
    except RxoError as exc:
        line = start + (exc.span[0] - 1 if exc.span else 0)
        raise CorruptSnapshot(line, f"bad catalog: {exc.message}") from None

    n_objects = counted("objects")
    records = []
    for _ in range(n_objects):
        line = take("object record")
        try:
            records.append((pos, *_parse_object_line(line)))
        except RxoError as exc:
            raise CorruptSnapshot(pos, f"bad object record: {exc.message}") from None
    if take("'end'") != "end":
        raise CorruptSnapshot(pos, "expected 'end'")
    if pos != len(lines):
        raise CorruptSnapshot(pos + 1, "data after 'end'")

    classes = {}
    for lineno, num, class_name, _ in records:
        if num in classes:
            raise CorruptSnapshot(lineno, f"duplicate object @{num}")
        if num >= next_oid or num < 1:
            raise CorruptSnapshot(lineno, f"@{num} is outside the allocated range")
        if class_name not in catalog.classes:
            raise CorruptSnapshot(lineno, f"unknown class {class_name}")
        classes[num] = class_name
    empty = Database(catalog, {}, next_oid)
    resolve = empty.resolver(classes)
    objects = {}
    for lineno, num, class_name, values in records:
        try:
            check_instantiable(catalog, class_name)
            stored = conform_initial(empty, class_name, values, resolve)
        except RxoError as exc:
            raise CorruptSnapshot(lineno, exc.message) from None
        objects[num] = ObjectState(Oid(num, class_name), stored)
    return Database(catalog, objects, next_oid)


def dump_objects(db: Database) -> str:
    return "".join(format_object(db.catalog, db.objects[k]) + "\n" for k in sorted(db.objects))
