"""Class definitions, realizations and the immutable catalog snapshot."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping, Optional

from . import ast
from .errors import (
    ArityMismatch,
    CatalogError,
    DuplicateClass,
    DuplicateComponent,
    HeadingMismatch,
    NamespaceConflict,
    TypeMismatch,
    UnknownClass,
    UnknownComponent,
    UnknownParent,
    UnknownReferenceTarget,
)
from .types import Reference, RelationT, Scalar, TupleT, ValuableType, assignable, is_scalar


@dataclass(frozen=True)
class ComponentDef:
    name: str
    type: ValuableType
    params: Optional[tuple] = None
    realization: object = ast.Unrealized()
    owner: str = ""  # declaring class

    @property
    def is_method(self) -> bool:
        return self.params is not None


@dataclass(frozen=True)
class ClassDef:
    name: str
    parent: Optional[str]
    components: tuple[ComponentDef, ...]  # declared here
    overrides: tuple[ComponentDef, ...] = ()  # inherited components re-realized here

    def own(self, name: str) -> ComponentDef | None:
        for c in self.overrides + self.components:
            if c.name == name:
                return c
        return None


@dataclass(frozen=True)
class Catalog:
    classes: Mapping[str, ClassDef] = field(default_factory=dict)
    views: Mapping[str, ast.QueryExpr] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "classes", MappingProxyType(dict(self.classes)))
        object.__setattr__(self, "views", MappingProxyType(dict(self.views)))
        object.__setattr__(self, "_memo", {})

    def memo(self, key, compute):
        """Cache a value derived from this (immutable) snapshot."""
        try:
            return self._memo[key]
        except KeyError:
            value = self._memo[key] = compute()
            return value

    def get(self, name: str) -> ClassDef:
        try:
            return self.classes[name]
        except KeyError:
            raise UnknownClass(f"no class named {name}") from None

    def with_class(self, cdef: ClassDef) -> "Catalog":
        classes = dict(self.classes)
        classes[cdef.name] = cdef
        return Catalog(classes, self.views)

    def with_view(self, name: str, query: ast.QueryExpr) -> "Catalog":
        views = dict(self.views)
        views[name] = query
        return Catalog(self.classes, views)

    def ancestors(self, name: str) -> list[str]:
        """``name`` followed by its ancestors, nearest first."""
        chain, seen = [], set()
        current: str | None = name
        while current is not None:
            if current in seen:
                raise CatalogError(f"inheritance cycle through {current}")
            seen.add(current)
            chain.append(current)
            current = self.get(current).parent
        return chain

    def is_subclass(self, name: str, ancestor: str) -> bool:
        return ancestor in self.ancestors(name)

    def descendants(self, name: str) -> list[str]:
        """``name`` and every class below it, in definition order."""
        return [c for c in self.classes if name in self.ancestors(c)]

    def ref_assignable(self, source, target) -> bool:
        if isinstance(source, Reference) and isinstance(target, Reference):
            return source.target in self.classes and self.is_subclass(source.target, target.target)
        return assignable(source, target)


def effective_components(catalog: Catalog, class_name: str) -> list[ComponentDef]:
    """Inherited components first (in the parent's order), then own ones.

    Each entry carries the realization declared by the nearest class in the
    chain (including ``class_name`` itself) that realizes it.
    """
    return list(catalog.memo(("effective", class_name), lambda: _effective(catalog, class_name)))


def _effective(catalog: Catalog, class_name: str) -> tuple[ComponentDef, ...]:
    chain = catalog.ancestors(class_name)
    result: list[ComponentDef] = []
    for cname in reversed(chain):
        result.extend(catalog.classes[cname].components)
    for i, comp in enumerate(result):
        for cname in chain:
            own = catalog.classes[cname].own(comp.name)
            if own is not None and not isinstance(own.realization, ast.Unrealized):
                result[i] = own
                break
    return tuple(result)


def find_component(catalog: Catalog, class_name: str, name: str) -> ComponentDef:
    for comp in effective_components(catalog, class_name):
        if comp.name == name:
            return comp
    raise UnknownComponent(f"class {class_name} has no component {name}")


def realizing_class(catalog: Catalog, class_name: str, component: str) -> str | None:
    """Nearest class in the chain whose own definition realizes ``component``."""
    for cname in catalog.ancestors(class_name):
        own = catalog.classes[cname].own(component)
        if own is not None and not isinstance(own.realization, ast.Unrealized):
            return cname
    return None


def unrealized_data_components(catalog: Catalog, class_name: str) -> list[str]:
    return [c.name for c in effective_components(catalog, class_name)
            if not c.is_method and isinstance(c.realization, ast.Unrealized)]


def _type_refs(t):
    if isinstance(t, Reference):
        yield t.target
    elif isinstance(t, (TupleT, RelationT)):
        for f in t.fields:
            yield from _type_refs(f.type)


def _check_type(t, where: str, known) -> None:
    for target in _type_refs(t):
        if target not in known:
            raise UnknownReferenceTarget(f"{where} refers to unknown class {target}")
    _check_structure(t, where)


def _check_structure(t, where: str) -> None:
    if isinstance(t, (TupleT, RelationT)):
        names = [f.name for f in t.fields]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise DuplicateComponent(f"{where} repeats field(s) {', '.join(dupes)}")
        if isinstance(t, RelationT) and t.key is not None:
            bad = [k for k in t.key if k not in names]
            if bad:
                raise CatalogError(f"{where} key names unknown field(s) {', '.join(bad)}")
        for f in t.fields:
            _check_structure(f.type, f"{where}.{f.name}")


def define_class(catalog: Catalog, stmt: ast.CreateClass) -> Catalog:
    name = stmt.name
    if name in catalog.classes or name in catalog.views:
        raise DuplicateClass(f"{name} is already defined", stmt.span)
    if stmt.parent is not None and stmt.parent not in catalog.classes:
        raise UnknownParent(f"{name} extends unknown class {stmt.parent}", stmt.span)
    inherited = {c.name for c in effective_components(catalog, stmt.parent)} if stmt.parent else set()
    known = set(catalog.classes) | {name}
    seen: set[str] = set()
    components = []
    for spec in stmt.components:
        if spec.name in seen or spec.name in inherited:
            raise DuplicateComponent(f"{name} already has a component {spec.name}", stmt.span)
        seen.add(spec.name)
        where = f"{name}.{spec.name}"
        try:
            _check_type(spec.type, where, known)
            if spec.is_method:
                if not is_scalar(spec.type):
                    raise TypeMismatch(f"method {where} must return a scalar type")
                pnames = [p.name for p in spec.params]
                if len(set(pnames)) != len(pnames):
                    raise DuplicateComponent(f"method {where} repeats a parameter name")
                for p in spec.params:
                    if not is_scalar(p.type):
                        raise TypeMismatch(f"parameter {p.name} of {where} must be scalar")
                    _check_type(p.type, where, known)
        except CatalogError as exc:
            exc.span = exc.span or stmt.span
            raise
        except TypeMismatch as exc:
            exc.span = exc.span or stmt.span
            raise
        components.append(ComponentDef(spec.name, spec.type, spec.params, ast.Unrealized(), name))
    result = catalog.with_class(ClassDef(name, stmt.parent, tuple(components)))
    _check_namespace(result, name, stmt.span)
    return result


def _check_namespace(catalog: Catalog, name: str, span) -> None:
    # an attribute may not shadow the reference attribute named after the root
    from .namespace import derive_relations

    for schema in derive_relations(catalog, name):
        if name in [a for a, _ in schema.attributes]:
            raise NamespaceConflict(
                f"relation {schema.name!r} would contain attribute {name!r} twice", span)


def alter_realize(catalog: Catalog, stmt: ast.AlterRealize) -> Catalog:
    cdef = catalog.classes.get(stmt.class_name)
    if cdef is None:
        raise UnknownClass(f"no class named {stmt.class_name}", stmt.span)
    try:
        comp = find_component(catalog, stmt.class_name, stmt.component)
    except UnknownComponent as exc:
        exc.span = stmt.span
        raise
    realization = stmt.realization
    where = f"{stmt.class_name}.{stmt.component}"
    if comp.is_method:
        if not isinstance(realization, ast.Procedure):
            raise TypeMismatch(f"method {where} can only be realized by a procedure", stmt.span)
        if stmt.params is not None:
            if len(stmt.params) != len(comp.params):
                raise ArityMismatch(
                    f"{where} declares {len(comp.params)} parameter(s), realization gives "
                    f"{len(stmt.params)}", stmt.span)
            for given, declared in zip(stmt.params, comp.params):
                if given.type != declared.type:
                    raise TypeMismatch(
                        f"parameter {given.name} of {where} is declared {declared.type}", stmt.span)
        if stmt.returns is not None and stmt.returns != comp.type:
            raise TypeMismatch(f"{where} is declared to return {comp.type}", stmt.span)
        params = stmt.params if stmt.params is not None else comp.params
        realization = ast.Procedure(tuple(params), comp.type, realization.body)
        from .group import check_procedure

        check_procedure(catalog, stmt.class_name, comp, realization, stmt.span)
    else:
        if stmt.params is not None:
            raise ArityMismatch(f"{where} is not a method and takes no parameters", stmt.span)
        if isinstance(realization, ast.Procedure):
            raise TypeMismatch(f"data component {where} cannot be realized by a procedure", stmt.span)
        if isinstance(realization, ast.QueryRealization):
            check_query_realization(catalog, stmt.class_name, comp, realization.query, stmt.span)
    new_comp = replace(comp, realization=realization)
    if comp.owner == stmt.class_name:
        components = tuple(new_comp if c.name == comp.name else c for c in cdef.components)
        new_def = replace(cdef, components=components)
    else:
        overrides = tuple(c for c in cdef.overrides if c.name != comp.name) + (new_comp,)
        new_def = replace(cdef, overrides=overrides)
    return catalog.with_class(new_def)


def check_query_realization(catalog, class_name, comp, query, span=None) -> None:
    from .query import resolve_query

    resolved = resolve_query(catalog, query, local_class=class_name, span=span)
    heading = resolved.heading
    expected = comp.type
    if is_scalar(expected):
        if len(heading) != 1 or not catalog.ref_assignable(heading[0][1], expected):
            raise HeadingMismatch(str(expected), _heading_text(heading), span)
        return
    declared = [(f.name, f.type) for f in expected.fields]
    actual = dict(heading)
    ok = len(actual) == len(heading) == len(declared) and all(
        n in actual and catalog.ref_assignable(actual[n], t) for n, t in declared)
    if not ok:
        raise HeadingMismatch(_heading_text(declared), _heading_text(heading), span)


def _heading_text(heading) -> str:
    return "(" + ", ".join(f"{n} {t}" for n, t in heading) + ")"


@dataclass(frozen=True)
class Violation:
    kind: str
    class_name: str
    component: Optional[str]
    message: str


def validate_catalog(catalog: Catalog) -> list[Violation]:
    """Check every catalog invariant; return all violations found (empty when valid)."""
    report: list[Violation] = []
    add = lambda kind, cls, comp, msg: report.append(Violation(kind, cls, comp, msg))
    overlap = sorted(set(catalog.classes) & set(catalog.views))
    for name in overlap:
        add("NameClash", name, None, f"{name} is both a class and a view")
    cyclic = set()
    for name, cdef in catalog.classes.items():
        if cdef.name != name:
            add("NameMismatch", name, None, f"entry {name} holds class {cdef.name}")
        if cdef.parent is not None and cdef.parent not in catalog.classes:
            add("UnknownParent", name, None, f"{name} extends unknown class {cdef.parent}")
            continue
        seen, current = [name], cdef.parent
        while current is not None and current in catalog.classes:
            if current in seen:
                add("InheritanceCycle", name, None, " -> ".join(seen + [current]))
                cyclic.add(name)
                break
            seen.append(current)
            current = catalog.classes[current].parent
    for name, cdef in catalog.classes.items():
        names = [c.name for c in cdef.components]
        for dupe in sorted({n for n in names if names.count(n) > 1}):
            add("DuplicateComponent", name, dupe, f"{name} declares {dupe} more than once")
        for comp in cdef.components + cdef.overrides:
            types = [comp.type] + [p.type for p in comp.params or ()]
            for t in types:
                for target in _type_refs(t):
                    if target not in catalog.classes:
                        add("UnknownReferenceTarget", name, comp.name,
                            f"{name}.{comp.name} refers to unknown class {target}")
                try:
                    _check_structure(t, f"{name}.{comp.name}")
                except CatalogError as exc:
                    add(type(exc).__name__, name, comp.name, exc.message)
            if comp.is_method and not isinstance(comp.realization, (ast.Unrealized, ast.Procedure)):
                add("MethodRealization", name, comp.name, f"method {comp.name} is not a procedure")
            if not comp.is_method and isinstance(comp.realization, ast.Procedure):
                add("DataRealization", name, comp.name, f"data component {comp.name} is a procedure")
        if name in cyclic or (cdef.parent is not None and cdef.parent not in catalog.classes):
            continue
        try:
            chain = catalog.ancestors(name)
        except CatalogError:
            continue
        inherited = set()
        for anc in chain[1:]:
            if anc in cyclic:
                break
            inherited |= {c.name for c in catalog.classes[anc].components}
        for comp in cdef.components:
            if comp.name in inherited:
                add("DuplicateComponent", name, comp.name,
                    f"{name}.{comp.name} redeclares an inherited component")
        for comp in cdef.overrides:
            if comp.name not in inherited:
                add("UnknownComponent", name, comp.name,
                    f"{name} re-realizes {comp.name}, which it does not inherit")
    return report


def dump_catalog(catalog: Catalog) -> str:
    """Deterministic listing: one block per class, effective components with realization kinds."""
    from .formatter import format_params, format_type

    lines = []
    for name, cdef in catalog.classes.items():
        head = f"CLASS {name}" + (f" EXTEND {cdef.parent}" if cdef.parent else "")
        lines.append(head)
        for comp in effective_components(catalog, name):
            sig = format_params(comp.params) if comp.is_method else ""
            ctype = " ".join(format_type(comp.type).split())
            kind = comp.realization.kind
            origin = realizing_class(catalog, name, comp.name)
            notes = []
            if comp.owner != name:
                notes.append(f"declared in {comp.owner}")
            if origin is not None and origin != name:
                notes.append(f"realized in {origin}")
            suffix = f"  -- {'; '.join(notes)}" if notes else ""
            lines.append(f"  {comp.name}{sig} {ctype} {kind}{suffix}")
    for name in catalog.views:
        lines.append(f"VIEW {name}")
    return "".join(line + "\n" for line in lines)
