"""Statement execution over one database value."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import ast
from .catalog import alter_realize, define_class, find_component
from .errors import EvaluationError, RxoError, TypeMismatch
from .group import (
    ExecutionReport,
    TargetSet,
    exec_create_objects,
    exec_delete_objects,
    exec_group_call,
    exec_group_update,
)
from .parser import parse_script
from .query import Evaluator, Relation, create_view, eval_select
from .store import Database
from .types import format_value


class CommandFailed(RxoError):
    """A group command had per-object failures and was rolled back."""

    def __init__(self, report: ExecutionReport, span=None):
        self.report = report
        first_oid, first = report.failures[0]
        more = len(report.failures) - 1
        tail = f" (and {more} more)" if more else ""
        super().__init__(
            f"{len(report.failures)} of {report.targeted} object(s) failed, nothing changed; "
            f"@{first_oid.value}: {type(first).__name__}: {first.message}{tail}", span)


@dataclass(frozen=True)
class Result:
    statement: object
    message: str = ""
    relation: Optional[Relation] = None
    report: Optional[ExecutionReport] = None


def _migrate(before: Database, catalog) -> Database:
    """Bring stored maps in line with a changed catalog.

    A component that stops being stored loses its value; one that becomes
    stored is materialized from what it computed under the old realization.
    """
    ev = None
    objects = dict(before.objects)
    for key, state in before.objects.items():
        wanted = {c.name for c in catalog_stored(catalog, state.class_name)}
        have = set(state.stored)
        if wanted == have:
            continue
        values = {k: v for k, v in state.stored.items() if k in wanted}
        for name in sorted(wanted - have):
            ev = ev or Evaluator(before)
            value = ev.component(state.oid, name)
            if value is None:
                raise TypeMismatch(
                    f"@{key}.{name} computes no value and cannot become stored")
            values[name] = value
        objects[key] = type(state)(state.oid, values)
    return Database(catalog, objects, before.next_oid)


def catalog_stored(catalog, class_name):
    from .store import stored_components

    return stored_components(catalog, class_name)


class Session:
    def __init__(self, db: Database | None = None):
        self.db = db or Database()

    def execute(self, stmt) -> Result:
        try:
            return self._execute(stmt)
        except RxoError as exc:
            if exc.span is None:
                exc.span = getattr(stmt, "span", None)
            raise

    def run_script(self, source: str):
        """Parse then execute statements one by one; yields a Result per statement."""
        for stmt in parse_script(source):
            yield self.execute(stmt)

    def _execute(self, stmt) -> Result:
        db = self.db
        if isinstance(stmt, ast.CreateClass):
            self.db = db.with_catalog(define_class(db.catalog, stmt))
            return Result(stmt, f"class {stmt.name} created")
        if isinstance(stmt, ast.AlterRealize):
            catalog = alter_realize(db.catalog, stmt)
            self.db = _migrate(db, catalog) if db.objects else db.with_catalog(catalog)
            kind = find_component(catalog, stmt.class_name, stmt.component).realization.kind.lower()
            return Result(stmt, f"{stmt.class_name}.{stmt.component} realized as {kind}")
        if isinstance(stmt, ast.CreateView):
            self.db = create_view(db, stmt.name, stmt.query, stmt.span)
            return Result(stmt, f"view {stmt.name} created")
        if isinstance(stmt, ast.Select):
            return Result(stmt, relation=eval_select(db, stmt.query))
        if isinstance(stmt, ast.CreateObjects):
            self.db, report = exec_create_objects(db, stmt)
            oids = ", ".join(f"@{o.value}" for o in report.created)
            return Result(stmt, f"{len(report.created)} {stmt.class_name} object(s) created: {oids}",
                          report=report)
        if isinstance(stmt, ast.DeleteObjects):
            new, report = exec_delete_objects(db, TargetSet(stmt.class_name, stmt.predicate))
            self._commit(new, report, stmt)
            return Result(stmt, f"{report.targeted} object(s) deleted", report=report)
        if isinstance(stmt, ast.GroupCall):
            new, report = exec_group_call(db, TargetSet(stmt.class_name, stmt.predicate),
                                          stmt.method, stmt.args)
            self._commit(new, report, stmt)
            lines = [f"{stmt.class_name}.{stmt.method} called on {report.targeted} object(s)"]
            lines += [f"@{o.value} -> {format_value(v)}" for o, v in (report.returned or {}).items()]
            return Result(stmt, "\n".join(lines), report=report)
        if isinstance(stmt, ast.GroupUpdate):
            self.db, report = exec_group_update(db, stmt.relation, stmt.assignments, stmt.predicate)
            return Result(stmt, f"{report.targeted} object(s) updated", report=report)
        raise EvaluationError(f"cannot execute {type(stmt).__name__}")

    def _commit(self, new: Database, report: ExecutionReport, stmt) -> None:
        if not report.committed:
            raise CommandFailed(report, stmt.span)
        self.db = new
