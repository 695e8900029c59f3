"""Relations induced by class specifications through the naming rule.

Every correct path expression ``C.p1...pn`` (ending at a scalar component)
splits into a relation name ``C.p1...pk`` and an attribute name
``p(k+1)...pn``; the relation also carries a reference attribute named
after the root class.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .catalog import Catalog, effective_components
from .errors import IncorrectPath, UnknownClass
from .types import Reference, RelationT, TupleT, ValuableType, is_scalar


@dataclass(frozen=True)
class PathNode:
    """One component or field reachable from a root; ``children`` is empty for leaves."""

    name: str
    type: ValuableType
    children: tuple["PathNode", ...] = ()
    expanded: bool = False  # reference followed into its target class

    @property
    def is_terminal(self) -> bool:
        return is_scalar(self.type)

    @property
    def multiplying(self) -> bool:
        return isinstance(self.type, RelationT)


@dataclass(frozen=True)
class PathExpression:
    root: str
    segments: tuple[str, ...]

    def __str__(self) -> str:
        return ".".join((self.root,) + self.segments)

    @classmethod
    def parse(cls, text: str) -> "PathExpression":
        root, *segments = text.split(".")
        return cls(root, tuple(segments))


@dataclass(frozen=True)
class DerivedRelationSchema:
    name: str
    ref_attribute: str
    ref_class: str
    attributes: tuple[tuple[str, ValuableType], ...]

    @property
    def heading(self) -> tuple[tuple[str, ValuableType], ...]:
        return ((self.ref_attribute, Reference(self.ref_class)),) + self.attributes

    def attribute_names(self) -> list[str]:
        return [self.ref_attribute] + [a for a, _ in self.attributes]

    def __str__(self) -> str:
        names = ", ".join(f'"{n}"' for n in self.attribute_names())
        return f'"{self.name}" ({names})'


def class_nodes(catalog: Catalog, class_name: str, chain: tuple[str, ...] = ()) -> tuple[PathNode, ...]:
    """Path tree below an object of ``class_name``; ``chain`` holds classes already dereferenced."""
    if not chain:
        return catalog.memo(("nodes", class_name), lambda: _class_nodes(catalog, class_name, ()))
    return _class_nodes(catalog, class_name, chain)


def _class_nodes(catalog: Catalog, class_name: str, chain: tuple[str, ...]) -> tuple[PathNode, ...]:
    chain = chain + (class_name,)
    return tuple(_node(catalog, c.name, c.type, chain)
                 for c in effective_components(catalog, class_name) if not c.is_method)


def _node(catalog: Catalog, name: str, t, chain) -> PathNode:
    if isinstance(t, Reference):
        # cycle rule: a class already on the dereference chain is not entered again
        if t.target in chain:
            return PathNode(name, t)
        return PathNode(name, t, class_nodes(catalog, t.target, chain), expanded=True)
    if isinstance(t, (TupleT, RelationT)):
        return PathNode(name, t, tuple(_node(catalog, f.name, f.type, chain) for f in t.fields))
    return PathNode(name, t)


def _require_class(catalog: Catalog, name: str) -> None:
    if name not in catalog.classes:
        raise UnknownClass(f"no class named {name}")


def suffixes(nodes) -> list[tuple[str, ValuableType]]:
    """Attribute names (dotted suffixes) below ``nodes`` in specification order, depth first."""
    out = []
    for node in nodes:
        if node.is_terminal:
            out.append((node.name, node.type))
        out.extend((f"{node.name}.{s}", t) for s, t in suffixes(node.children))
    return out


def enumerate_paths(catalog: Catalog, root_class: str) -> list[PathExpression]:
    _require_class(catalog, root_class)
    return [PathExpression(root_class, tuple(s.split(".")))
            for s, _ in suffixes(class_nodes(catalog, root_class))]


def _relations(root: str, ref_class: str, nodes, prefix: tuple[str, ...], out: list) -> None:
    attrs = tuple(suffixes(nodes))
    if attrs:
        out.append(DerivedRelationSchema(".".join((root,) + prefix), ref_class, ref_class, attrs))
    for node in nodes:
        if node.children:
            _relations(root, ref_class, node.children, prefix + (node.name,), out)


def derive_relations(catalog: Catalog, root_class: str) -> list[DerivedRelationSchema]:
    _require_class(catalog, root_class)
    out: list[DerivedRelationSchema] = []
    _relations(root_class, root_class, class_nodes(catalog, root_class), (), out)
    return out


def local_namespace(catalog: Catalog, ref_name: str, target_class: str) -> list[DerivedRelationSchema]:
    """Relations visible through a reference variable; the reference attribute keeps the class name."""
    _require_class(catalog, target_class)
    out: list[DerivedRelationSchema] = []
    _relations(ref_name, target_class, class_nodes(catalog, target_class), (), out)
    return out


def resolve_prefix(catalog: Catalog, root_class: str, prefix) -> tuple[PathNode, ...]:
    """Walk ``prefix`` segments from a root class; return the nodes below the last one.

    Returns None when the prefix does not name a node with children.
    """
    nodes = class_nodes(catalog, root_class)
    for seg in prefix:
        for node in nodes:
            if node.name == seg:
                nodes = node.children
                break
        else:
            return None
    return nodes


@dataclass(frozen=True)
class NamespaceIndex:
    relations: Mapping[str, DerivedRelationSchema]

    def __contains__(self, name: str) -> bool:
        return name in self.relations


def global_index(catalog: Catalog) -> NamespaceIndex:
    return catalog.memo("global-index", lambda: _global_index(catalog))


def _global_index(catalog: Catalog) -> NamespaceIndex:
    relations = {}
    for name in catalog.classes:
        for schema in derive_relations(catalog, name):
            relations[schema.name] = schema
    return NamespaceIndex(relations)


def local_index(catalog: Catalog, ref_name: str, target_class: str) -> NamespaceIndex:
    return NamespaceIndex({s.name: s for s in local_namespace(catalog, ref_name, target_class)})


def split_lookup(index: NamespaceIndex, path: PathExpression | str) -> list[tuple[str, str]]:
    """Every (relation, attribute) split of a correct path, shortest relation name first."""
    if isinstance(path, str):
        path = PathExpression.parse(path)
    if not path.segments:
        raise IncorrectPath(f"{path} names no component")
    pairs = []
    for i in range(len(path.segments)):
        rel = ".".join((path.root,) + path.segments[:i])
        attr = ".".join(path.segments[i:])
        schema = index.relations.get(rel)
        if schema is None or attr not in dict(schema.attributes):
            raise IncorrectPath(f"{path} is not a correct path expression")
        pairs.append((rel, attr))
    return pairs


def dump_relations(catalog: Catalog) -> str:
    """All derived relation schemas, classes in definition order, one per line."""
    lines = [str(s) for name in catalog.classes for s in derive_relations(catalog, name)]
    return "".join(line + "\n" for line in lines)
