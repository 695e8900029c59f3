"""Command line entry point: script runner, REPL and schema dumps.

Exit codes: 0 success, 1 script error, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, TextIO

from .catalog import dump_catalog
from .engine import Result, Session
from .errors import ParseError, RxoError
from .formatter import format_statement
from .namespace import dump_relations
from .parser import parse_script
from .store import Database, snapshot_load, snapshot_save

EXIT_OK, EXIT_SCRIPT, EXIT_USAGE = 0, 1, 2


class SnapshotIOError(Exception):
    pass


@dataclass
class SessionConfig:
    mode: str = "repl"
    snapshot_path: Optional[Path] = None
    script_paths: list = field(default_factory=list)
    echo: bool = False
    output_format: str = "table"


def render(result: Result, output_format: str = "table") -> str:
    if result.relation is not None:
        return result.relation.dump() if output_format == "tsv" else result.relation.table()
    return result.message + "\n" if result.message else ""


def load_database(path: Optional[Path]) -> Database:
    if path is None or not path.exists():
        return Database()
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise SnapshotIOError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return snapshot_load(data)
    except RxoError as exc:
        raise SnapshotIOError(f"{path}: {exc}") from None


def save_database(db: Database, path: Path) -> None:
    try:
        path.write_bytes(snapshot_save(db))
    except OSError as exc:
        raise SnapshotIOError(f"cannot write {path}: {exc.strerror}") from None


def _error(where: str, exc: RxoError, err: TextIO) -> None:
    if exc.span is not None:
        line, col = exc.span
        err.write(f"{where}:{line}:{col}: {type(exc).__name__}: {exc.message}\n")
    else:
        err.write(f"{where}: {type(exc).__name__}: {exc.message}\n")


def execute_source(session: Session, source: str, where: str, config: SessionConfig,
                   out: TextIO, err: TextIO) -> bool:
    """Run every statement of ``source``; stop and report at the first error."""
    try:
        statements = parse_script(source)
    except RxoError as exc:
        _error(where, exc, err)
        return False
    for stmt in statements:
        if config.echo:
            out.write(format_statement(stmt) + "\n")
        try:
            result = session.execute(stmt)
        except RxoError as exc:
            _error(where, exc, err)
            return False
        out.write(render(result, config.output_format))
    return True


def _read_scripts(paths) -> list[tuple[str, str]]:
    scripts = []
    for p in paths:
        try:
            scripts.append((str(p), Path(p).read_text(encoding="utf-8")))
        except (OSError, UnicodeDecodeError) as exc:
            raise SnapshotIOError(f"cannot read script {p}: {exc}") from None
    return scripts


def run_script(config: SessionConfig, out: TextIO = sys.stdout, err: TextIO = sys.stderr) -> int:
    try:
        scripts = _read_scripts(config.script_paths)
        session = Session(load_database(config.snapshot_path))
    except SnapshotIOError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_USAGE
    for where, source in scripts:
        if not execute_source(session, source, where, config, out, err):
            return EXIT_SCRIPT
    if config.snapshot_path is not None:
        try:
            save_database(session.db, config.snapshot_path)
        except SnapshotIOError as exc:
            err.write(f"error: {exc}\n")
            return EXIT_USAGE
    return EXIT_OK


def _build(config: SessionConfig, err: TextIO) -> tuple[Optional[Database], int]:
    try:
        scripts = _read_scripts(config.script_paths)
        session = Session(load_database(config.snapshot_path))
    except SnapshotIOError as exc:
        err.write(f"error: {exc}\n")
        return None, EXIT_USAGE
    quiet = SessionConfig(echo=False)
    sink = _Null()
    for where, source in scripts:
        if not execute_source(session, source, where, quiet, sink, err):
            return None, EXIT_SCRIPT
    return session.db, EXIT_OK


class _Null:
    def write(self, text: str) -> int:
        return len(text)


def run_dump(config: SessionConfig, out: TextIO = sys.stdout, err: TextIO = sys.stderr) -> int:
    db, status = _build(config, err)
    if db is None:
        return status
    if config.mode == "dump-relations":
        out.write(dump_relations(db.catalog))
    else:
        out.write(dump_catalog(db.catalog))
    return EXIT_OK


def _incomplete(source: str) -> bool:
    try:
        parse_script(source)
    except ParseError as exc:
        return exc.found is None
    except RxoError:
        return False
    return False


def run_repl(config: SessionConfig, inp: TextIO = sys.stdin, out: TextIO = sys.stdout,
             err: TextIO = sys.stderr) -> int:
    try:
        session = Session(load_database(config.snapshot_path))
    except SnapshotIOError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_USAGE
    interactive = inp.isatty()
    buffer = []
    while True:
        if interactive:
            out.write("...> " if buffer else "rxo> ")
            out.flush()
        line = inp.readline()
        if not line:
            break
        if not buffer and line.strip().startswith(":"):
            status = _meta(line.strip(), session, config, out, err)
            if status is not None:
                return status
            continue
        buffer.append(line)
        source = "".join(buffer)
        if not source.strip() or _incomplete(source):
            continue
        buffer = []
        execute_source(session, source, "<stdin>", config, out, err)
    if "".join(buffer).strip():
        execute_source(session, "".join(buffer), "<stdin>", config, out, err)
    return EXIT_OK


def _meta(line: str, session: Session, config: SessionConfig, out: TextIO, err: TextIO):
    cmd, _, arg = line.partition(" ")
    arg = arg.strip()
    if cmd in (":quit", ":q", ":exit"):
        return EXIT_OK
    if cmd == ":relations":
        out.write(dump_relations(session.db.catalog))
    elif cmd == ":catalog":
        out.write(dump_catalog(session.db.catalog))
    elif cmd in (":save", ":load"):
        path = Path(arg) if arg else config.snapshot_path
        if path is None:
            err.write(f"{cmd}: no snapshot path given\n")
            return None
        try:
            if cmd == ":save":
                save_database(session.db, path)
                out.write(f"saved {path}\n")
            else:
                if not path.exists():
                    raise SnapshotIOError(f"cannot read {path}: no such file")
                session.db = load_database(path)
                out.write(f"loaded {path}\n")
        except SnapshotIOError as exc:
            # a broken snapshot path is fatal for the session
            err.write(f"error: {exc}\n")
            return EXIT_USAGE
    elif cmd == ":help":
        out.write(":save [path]  :load [path]  :relations  :catalog  :quit\n")
    else:
        err.write(f"unknown command {cmd}; try :help\n")
    return None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rxo", description="Run the rxo object-relational engine.")
    parser.add_argument("--db", type=Path, help="snapshot file to load at start and save after run")
    parser.add_argument("--echo", action="store_true", help="print each statement before its result")
    parser.add_argument("--format", choices=("table", "tsv"), default="table",
                        help="how SELECT results are printed")
    sub = parser.add_subparsers(dest="mode")
    sub.add_parser("repl", help="interactive session (default)")
    run = sub.add_parser("run", help="execute script files in order")
    run.add_argument("scripts", nargs="+", type=Path)
    for name in ("dump-relations", "dump-catalog"):
        p = sub.add_parser(name, help=f"build the database from scripts, then {name.replace('-', ' ')}")
        p.add_argument("scripts", nargs="*", type=Path)
    return parser


def main(argv=None, stdin: TextIO = None, stdout: TextIO = None, stderr: TextIO = None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    config = SessionConfig(
        mode=args.mode or "repl",
        snapshot_path=args.db,
        script_paths=list(getattr(args, "scripts", []) or []),
        echo=args.echo,
        output_format=args.format,
    )
    if config.mode == "run":
        return run_script(config, stdout, stderr)
    if config.mode in ("dump-relations", "dump-catalog"):
        return run_dump(config, stdout, stderr)
    return run_repl(config, stdin, stdout, stderr)


def main_entry() -> None:
    sys.exit(main())
