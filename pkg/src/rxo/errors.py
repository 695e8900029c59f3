"""Exception hierarchy shared by every layer of the engine."""

from __future__ import annotations


class RxoError(Exception):
    """Base class; ``span`` is a 1-based (line, column) pair when known."""

    def __init__(self, message: str, span: tuple[int, int] | None = None):
        super().__init__(message)
        self.message = message
        self.span = span

    def __str__(self) -> str:
        if self.span is None:
            return f"{type(self).__name__}: {self.message}"
        line, col = self.span
        return f"line {line}, column {col}: {type(self).__name__}: {self.message}"


class LexError(RxoError):
    pass


class ParseError(RxoError):
    def __init__(self, span, expected, found):
        self.expected = tuple(sorted(set(expected)))
        self.found = found
        what = "end of input" if found is None else repr(found.lexeme)
        super().__init__(f"expected {' or '.join(self.expected)}, found {what}", span)


# catalog
class CatalogError(RxoError):
    pass


class DuplicateClass(CatalogError):
    pass


class UnknownParent(CatalogError):
    pass


class UnknownReferenceTarget(CatalogError):
    pass


class DuplicateComponent(CatalogError):
    pass


class UnknownClass(CatalogError):
    pass


class UnknownComponent(CatalogError):
    pass


class HeadingMismatch(CatalogError):
    def __init__(self, expected, actual, span=None):
        self.expected = expected
        self.actual = actual
        super().__init__(f"expected heading {expected}, query produces {actual}", span)


class ArityMismatch(CatalogError):
    pass


class NamespaceConflict(CatalogError):
    pass


class DuplicateView(CatalogError):
    pass


class UnknownView(CatalogError):
    pass


# object store
class StoreError(RxoError):
    pass


class NotInstantiable(StoreError):
    def __init__(self, class_name, unrealized, span=None):
        self.class_name = class_name
        self.unrealized = tuple(unrealized)
        super().__init__(
            f"class {class_name} has unrealized components: {', '.join(self.unrealized)}", span
        )


class TypeMismatch(RxoError):
    pass


class DanglingReference(StoreError):
    pass


class KeyViolation(StoreError):
    pass


class UnknownOid(StoreError):
    pass


class ReferencedObject(StoreError):
    def __init__(self, oid, referrers, span=None):
        self.oid = oid
        self.referrers = tuple(referrers)
        refs = ", ".join(f"@{r.value}" for r in self.referrers)
        super().__init__(f"@{oid.value} is referenced by {refs}", span)


class CorruptSnapshot(StoreError):
    def __init__(self, position, reason):
        self.position = position
        self.reason = reason
        super().__init__(f"at line {position}: {reason}")


class VersionMismatch(StoreError):
    pass


# evaluation
class QueryError(RxoError):
    pass


class UnknownRelation(QueryError):
    pass


class UnknownAttribute(QueryError):
    pass


class AggregateMisuse(QueryError):
    pass


class IncorrectPath(QueryError):
    pass


class UnrealizedComponent(QueryError):
    pass


class EvaluationError(QueryError):
    pass


# group commands
class UnknownMethod(RxoError):
    pass


class NotAProcedure(RxoError):
    pass


class NotUpdatable(RxoError):
    def __init__(self, offenders, span=None):
        # offenders: (class name, component name) pairs
        self.offenders = tuple(offenders)
        desc = ", ".join(f"{c}.{k}" for c, k in self.offenders)
        super().__init__(f"component is not stored in: {desc}", span)
