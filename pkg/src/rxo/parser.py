"""Recursive descent parser producing :mod:`rxo.ast` statements."""

from __future__ import annotations

from . import ast
from .errors import ParseError
from .lexer import Token, TokenKind, end_span, tokenize
from .types import BASE_TYPES, Field, Reference, RelationT, Scalar, TupleT, parse_datetime

_TERMINATORS = (";", "..")
_NAME_KINDS = (TokenKind.IDENTIFIER,)
_PATH_KINDS = (TokenKind.IDENTIFIER, TokenKind.DOTTED_PATH)
_LITERAL_KINDS = (TokenKind.INTEGER, TokenKind.FLOAT, TokenKind.STRING, TokenKind.DATETIME,
                  TokenKind.BOOL)


class Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = tokenize(source)
        self.pos = 0

    # token helpers

    @property
    def tok(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def peek(self, offset: int = 1) -> Token | None:
        i = self.pos + offset
        return self.tokens[i] if i < len(self.tokens) else None

    def error(self, *expected: str) -> ParseError:
        tok = self.tok
        span = tok.span if tok is not None else end_span(self.source)
        return ParseError(span, expected, tok)

    def next(self) -> Token:
        tok = self.tok
        self.pos += 1
        return tok

    def at_symbol(self, *symbols: str) -> bool:
        return self.tok is not None and self.tok.is_symbol(*symbols)

    def at_keyword(self, *words: str) -> bool:
        return self.tok is not None and self.tok.is_keyword(*words)

    def accept_symbol(self, *symbols: str) -> Token | None:
        return self.next() if self.at_symbol(*symbols) else None

    def accept_keyword(self, *words: str) -> Token | None:
        return self.next() if self.at_keyword(*words) else None

    def expect_symbol(self, *symbols: str) -> Token:
        if not self.at_symbol(*symbols):
            raise self.error(*(f"'{s}'" for s in symbols))
        return self.next()

    def expect_keyword(self, *words: str) -> Token:
        if not self.at_keyword(*words):
            raise self.error(*words)
        return self.next()

    def expect_name(self, what: str = "identifier") -> str:
        if self.tok is None or self.tok.kind not in _NAME_KINDS:
            raise self.error(what)
        return self.next().value

    def expect_path(self, what: str = "name") -> str:
        if self.tok is None or self.tok.kind not in _PATH_KINDS:
            raise self.error(what)
        return self.next().value

    def expect_terminator(self) -> None:
        self.expect_symbol(*_TERMINATORS)

    def accept_terminator(self) -> None:
        self.accept_symbol(*_TERMINATORS)

    def at_end(self) -> bool:
        return self.pos >= len(self.tokens)

    # statements

    def script(self) -> list:
        statements = []
        while not self.at_end():
            statements.append(self.statement())
        return statements

    def statement(self):
        tok = self.tok
        if self.at_keyword("CREATE"):
            nxt = self.peek()
            if nxt is not None and nxt.is_keyword("CLASS"):
                return self.create_class()
            if nxt is not None and nxt.is_keyword("OBJECT"):
                return self.create_objects()
            return self.create_view()
        if self.at_keyword("ALTER"):
            return self.alter_realize()
        if self.at_keyword("SELECT"):
            query = self.query()
            self.expect_terminator()
            return ast.Select(query, span=tok.span)
        if self.at_keyword("CALL"):
            return self.group_call()
        if self.at_keyword("UPDATE"):
            return self.group_update()
        if self.at_keyword("DELETE"):
            return self.delete_objects()
        raise self.error("CREATE", "ALTER", "SELECT", "CALL", "UPDATE", "DELETE")

    def create_class(self) -> ast.CreateClass:
        span = self.expect_keyword("CREATE").span
        self.expect_keyword("CLASS")
        name = self.expect_name("class name")
        parent = None
        if self.accept_keyword("EXTEND"):
            parent = self.expect_name("parent class name")
        self.expect_symbol("{")
        components = []
        while not self.at_symbol("}"):
            tok = self.tok
            comp = self.component()
            if any(c.name == comp.name for c in components):
                raise ParseError(tok.span, ("a component name not used before",), tok)
            components.append(comp)
        self.expect_symbol("}")
        self.accept_terminator()
        return ast.CreateClass(name, parent, tuple(components), span=span)

    def component(self) -> ast.ComponentSpec:
        name = self.expect_name("component name")
        params = None
        if self.accept_symbol("("):
            params = self.params()
        ctype = self.type_spec()
        self.accept_terminator()
        return ast.ComponentSpec(name, ctype, params)

    def params(self) -> tuple:
        """Parameter list after the opening parenthesis, through ')'."""
        params = []
        if not self.at_symbol(")"):
            while True:
                tok = self.tok
                pname = self.expect_name("parameter name")
                if any(p.name == pname for p in params):
                    raise ParseError(tok.span, ("a parameter name not used before",), tok)
                params.append(ast.Param(pname, self.type_spec()))
                if not self.accept_symbol(","):
                    break
        self.expect_symbol(")")
        return tuple(params)

    def type_spec(self):
        tok = self.tok
        if tok is not None and tok.kind is TokenKind.KEYWORD and tok.value in BASE_TYPES:
            self.next()
            return Scalar(tok.value)
        if tok is not None and tok.kind is TokenKind.IDENTIFIER:
            self.next()
            return Reference(tok.value)
        if self.accept_keyword("SET"):
            self.expect_keyword("OF")
            fields, key = self.field_block(allow_key=True)
            return RelationT(fields, key)
        if self.accept_keyword("TUPLE"):
            fields, _ = self.field_block(allow_key=False)
            return TupleT(fields)
        raise self.error("type", "SET OF", "TUPLE")

    def field_block(self, allow_key: bool):
        self.expect_symbol("{")
        fields, key = [], None
        while not self.at_symbol("}"):
            if allow_key and key is None and self.accept_keyword("KEY"):
                self.expect_symbol("(")
                key = [self.expect_name("key attribute")]
                while self.accept_symbol(","):
                    key.append(self.expect_name("key attribute"))
                self.expect_symbol(")")
                self.accept_terminator()
                continue
            tok = self.tok
            fname = self.expect_name("field name")
            if any(f.name == fname for f in fields):
                raise ParseError(tok.span, ("a field name not used before",), tok)
            fields.append(Field(fname, self.type_spec()))
            self.accept_terminator()
        self.expect_symbol("}")
        self.accept_terminator()
        return tuple(fields), (tuple(key) if key is not None else None)

    def alter_realize(self) -> ast.AlterRealize:
        span = self.expect_keyword("ALTER").span
        self.expect_keyword("CLASS")
        class_name = self.expect_name("class name")
        self.expect_keyword("REALIZE")
        component = self.expect_name("component name")
        params = returns = None
        if self.accept_symbol("("):
            params = self.params()
            if not self.at_keyword("AS"):
                returns = self.type_spec()
        self.expect_keyword("AS")
        if self.accept_keyword("STORED"):
            realization = ast.Stored()
            self.expect_terminator()
        elif self.at_keyword("SELECT"):
            realization = ast.QueryRealization(self.query())
            self.expect_terminator()
        elif self.accept_keyword("BEGIN"):
            body = []
            while not self.accept_keyword("END"):
                if self.at_end():
                    raise self.error("END")
                body.append(self.body_statement())
            self.expect_terminator()
            realization = ast.Procedure(params or (), returns, tuple(body))
        else:
            raise self.error("STORED", "SELECT", "BEGIN")
        return ast.AlterRealize(class_name, component, realization, params, returns, span=span)

    def body_statement(self):
        if self.accept_keyword("SET"):
            component = self.expect_name("component name")
            self.expect_symbol(":=", "=")
            stmt = ast.SetStmt(component, self.expr())
        elif self.accept_keyword("INSERT"):
            self.expect_keyword("INTO")
            component = self.expect_name("component name")
            self.expect_keyword("VALUES")
            self.expect_symbol("(")
            values = [self.expr()]
            while self.accept_symbol(","):
                values.append(self.expr())
            self.expect_symbol(")")
            stmt = ast.InsertStmt(component, tuple(values))
        elif self.accept_keyword("DELETE"):
            self.expect_keyword("FROM")
            component = self.expect_name("component name")
            predicate = self.expr() if self.accept_keyword("WHERE") else None
            stmt = ast.DeleteStmt(component, predicate)
        elif self.accept_keyword("RETURN"):
            stmt = ast.ReturnStmt(self.expr())
        else:
            raise self.error("SET", "INSERT", "DELETE", "RETURN", "END")
        self.expect_symbol(";")
        return stmt

    def create_view(self) -> ast.CreateView:
        span = self.expect_keyword("CREATE").span
        name = self.expect_name("view name")
        self.expect_keyword("AS")
        query = self.query()
        self.expect_terminator()
        return ast.CreateView(name, query, span=span)

    def create_objects(self) -> ast.CreateObjects:
        span = self.expect_keyword("CREATE").span
        self.expect_keyword("OBJECT")
        class_name = self.expect_name("class name")
        assignments = []
        self.expect_symbol("(")
        if not self.at_symbol(")"):
            while True:
                comp = self.expect_name("component name")
                self.expect_symbol(":=")
                assignments.append((comp, self.expr()))
                if not self.accept_symbol(","):
                    break
        self.expect_symbol(")")
        count = 1
        if self.accept_keyword("COUNT"):
            tok = self.tok
            if tok is None or tok.kind is not TokenKind.INTEGER:
                raise self.error("integer-literal")
            count = self.next().value
        self.expect_terminator()
        return ast.CreateObjects(class_name, tuple(assignments), count, span=span)

    def delete_objects(self) -> ast.DeleteObjects:
        span = self.expect_keyword("DELETE").span
        class_name = self.expect_name("class name")
        predicate = self.expr() if self.accept_keyword("WHERE") else None
        self.expect_terminator()
        return ast.DeleteObjects(class_name, predicate, span=span)

    def group_call(self) -> ast.GroupCall:
        span = self.expect_keyword("CALL").span
        tok = self.tok
        if tok is None or tok.kind is not TokenKind.DOTTED_PATH:
            raise self.error("Class.Method")
        target = self.next().value
        class_name, _, method = target.rpartition(".")
        self.expect_symbol("(")
        args = []
        if not self.at_symbol(")"):
            args.append(self.expr())
            while self.accept_symbol(","):
                args.append(self.expr())
        self.expect_symbol(")")
        predicate = self.expr() if self.accept_keyword("WHERE") else None
        self.expect_terminator()
        return ast.GroupCall(class_name, method, tuple(args), predicate, span=span)

    def group_update(self) -> ast.GroupUpdate:
        span = self.expect_keyword("UPDATE").span
        relation = self.expect_path("relation name")
        self.expect_keyword("SET")
        assignments = []
        while True:
            attr = self.expect_path("attribute name")
            self.expect_symbol("=", ":=")
            assignments.append((attr, self.expr()))
            if not self.accept_symbol(","):
                break
        predicate = self.expr() if self.accept_keyword("WHERE") else None
        self.expect_terminator()
        return ast.GroupUpdate(relation, tuple(assignments), predicate, span=span)

    # queries

    def query(self) -> ast.QueryExpr:
        self.expect_keyword("SELECT")
        projections = [self.projection()]
        while self.accept_symbol(","):
            projections.append(self.projection())
        self.expect_keyword("FROM")
        sources = [self.query_source()]
        while self.accept_symbol(","):
            sources.append(self.query_source())
        predicate = self.expr() if self.accept_keyword("WHERE") else None
        group_by = []
        if self.accept_keyword("GROUP"):
            self.expect_keyword("BY")
            group_by.append(self.expect_path("attribute"))
            while self.accept_symbol(","):
                group_by.append(self.expect_path("attribute"))
        return ast.QueryExpr(tuple(projections), tuple(sources), predicate, tuple(group_by))

    def projection(self) -> ast.Projection:
        if self.tok is not None and self.tok.kind is TokenKind.KEYWORD and self.tok.value in ast.AGGREGATES:
            func = self.next().value
            self.expect_symbol("(")
            if func == "COUNT" and self.accept_symbol("*"):
                arg = None
            else:
                arg = self.expect_path("attribute")
            self.expect_symbol(")")
            expr = ast.Aggregate(func, arg)
        else:
            expr = ast.Name(self.expect_path("attribute or aggregate"))
        name = self.expect_name("output name") if self.accept_keyword("AS") else None
        return ast.Projection(expr, name)

    def query_source(self) -> ast.Source:
        relation = self.expect_path("relation name")
        alias = None
        if self.tok is not None and self.tok.kind is TokenKind.IDENTIFIER:
            alias = self.next().value
        return ast.Source(relation, alias)

    # expressions

    def expr(self):
        left = self.and_expr()
        while self.accept_keyword("OR"):
            left = ast.Binary("OR", left, self.and_expr())
        return left

    def and_expr(self):
        left = self.not_expr()
        while self.accept_keyword("AND"):
            left = ast.Binary("AND", left, self.not_expr())
        return left

    def not_expr(self):
        if self.accept_keyword("NOT"):
            return ast.Unary("NOT", self.not_expr())
        return self.comparison()

    def comparison(self):
        left = self.additive()
        if self.at_symbol(*ast.COMPARISONS, "!="):
            op = self.next().lexeme
            left = ast.Binary("<>" if op == "!=" else op, left, self.additive())
        return left

    def additive(self):
        left = self.multiplicative()
        while self.at_symbol("+", "-"):
            op = self.next().lexeme
            left = ast.Binary(op, left, self.multiplicative())
        return left

    def multiplicative(self):
        left = self.unary()
        while self.at_symbol("*", "/"):
            op = self.next().lexeme
            left = ast.Binary(op, left, self.unary())
        return left

    def unary(self):
        if self.accept_symbol("-"):
            tok = self.tok
            if tok is not None and tok.kind in (TokenKind.INTEGER, TokenKind.FLOAT):
                return ast.Literal(-self.next().value)
            return ast.Unary("-", self.unary())
        return self.primary()

    def primary(self):
        tok = self.tok
        if tok is None:
            raise self.error("expression")
        if tok.kind in _LITERAL_KINDS:
            self.next()
            if tok.kind is TokenKind.DATETIME:
                return ast.Literal(parse_datetime(tok.lexeme))
            return ast.Literal(tok.value)
        if tok.kind in _PATH_KINDS:
            self.next()
            return ast.Name(tok.value)
        if tok.is_symbol("@"):
            self.next()
            num = self.tok
            if num is None or num.kind is not TokenKind.INTEGER:
                raise self.error("integer-literal")
            return ast.OidLiteral(self.next().value)
        if tok.is_symbol("("):
            self.next()
            first = self.expr()
            if self.accept_symbol(","):
                items = [first, self.expr()]
                while self.accept_symbol(","):
                    items.append(self.expr())
                self.expect_symbol(")")
                return ast.TupleLiteral(tuple(items))
            self.expect_symbol(")")
            return first
        if tok.is_symbol("{"):
            self.next()
            rows = []
            if not self.at_symbol("}"):
                while True:
                    rows.append(self.tuple_literal())
                    if not self.accept_symbol(","):
                        break
            self.expect_symbol("}")
            return ast.RelationLiteral(tuple(rows))
        raise self.error("expression")

    def tuple_literal(self) -> ast.TupleLiteral:
        """Relation rows are always parenthesized, even with a single field."""
        self.expect_symbol("(")
        items = [self.expr()]
        while self.accept_symbol(","):
            items.append(self.expr())
        self.expect_symbol(")")
        return ast.TupleLiteral(tuple(items))


def parse_script(source: str) -> list:
    return Parser(source).script()


def parse_statement(source: str):
    statements = parse_script(source)
    if len(statements) != 1:
        raise ValueError(f"expected one statement, got {len(statements)}")
    return statements[0]


def parse_expression(source: str):
    parser = Parser(source)
    expr = parser.expr()
    if not parser.at_end():
        raise parser.error("end of input")
    return expr
