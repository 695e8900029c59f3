"""Tokenizer for the rxo command language."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from .errors import LexError


class TokenKind(str, Enum):
    KEYWORD = "keyword"
    IDENTIFIER = "identifier"
    DOTTED_PATH = "dotted-path"
    INTEGER = "integer-literal"
    FLOAT = "float-literal"
    STRING = "string-literal"
    DATETIME = "datetime-literal"
    BOOL = "bool-literal"
    SYMBOL = "symbol"


KEYWORDS = frozenset(
    """
    CREATE CLASS EXTEND SET OF TUPLE KEY ALTER REALIZE AS STORED
    SELECT FROM WHERE GROUP BY BEGIN END INSERT INTO VALUES DELETE RETURN
    CALL UPDATE OBJECT COUNT SUM MIN MAX AVG AND OR NOT
    INTEGER FLOAT STRING BOOL DATETIME
    """.split()
)

SYMBOLS = ("..", ":=", "<>", "!=", "<=", ">=", "{", "}", "(", ")", ";", ",", ".", "=", "<", ">",
           "+", "-", "*", "/", "@")

_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_DATETIME_RE = re.compile(r"\d{4}-\d{2}-\d{2}(?:T\d{2}:\d{2}(?::\d{2}(?:\.\d+)?)?)?(?![A-Za-z0-9_])")
_NUMBER_RE = re.compile(r"\d+(\.\d+)?([eE][+-]?\d+)?")
_WORD_RE = re.compile(rf"{_IDENT}(?:\.{_IDENT})*")
_SPACE_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    lexeme: str
    span: tuple[int, int]
    offset: int = field(default=0, compare=False)

    @property
    def value(self):
        """The lexeme's meaning: keyword upper-cased, unquoted names, unescaped strings."""
        if self.kind is TokenKind.KEYWORD:
            return self.lexeme.upper()
        if self.kind in (TokenKind.IDENTIFIER, TokenKind.DOTTED_PATH):
            if self.lexeme.startswith('"'):
                return self.lexeme[1:-1]
            return self.lexeme
        if self.kind is TokenKind.STRING:
            return self.lexeme[1:-1].replace("''", "'")
        if self.kind is TokenKind.INTEGER:
            return int(self.lexeme)
        if self.kind is TokenKind.FLOAT:
            return float(self.lexeme)
        if self.kind is TokenKind.BOOL:
            return self.lexeme.upper() == "TRUE"
        return self.lexeme

    def is_symbol(self, *symbols: str) -> bool:
        return self.kind is TokenKind.SYMBOL and self.lexeme in symbols

    def is_keyword(self, *words: str) -> bool:
        return self.kind is TokenKind.KEYWORD and self.lexeme.upper() in words


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, col = 0, 1, 1
    n = len(source)

    def advance(text: str) -> None:
        nonlocal pos, line, col
        pos += len(text)
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)

    def emit(kind: TokenKind, text: str) -> None:
        tokens.append(Token(kind, text, (line, col), pos))
        advance(text)

    while pos < n:
        ch = source[pos]
        if ch.isspace():
            advance(_SPACE_RE.match(source, pos).group())
            continue
        if source.startswith("//", pos):
            end = source.find("\n", pos)
            advance(source[pos:] if end == -1 else source[pos:end])
            continue
        if ch == "'":
            end = pos + 1
            while True:
                end = source.find("'", end)
                if end == -1:
                    raise LexError("unterminated string literal", (line, col))
                if source.startswith("''", end):
                    end += 2
                    continue
                break
            emit(TokenKind.STRING, source[pos:end + 1])
            continue
        if ch == '"':
            end = source.find('"', pos + 1)
            if end == -1 or "\n" in source[pos:end]:
                raise LexError("unterminated quoted name", (line, col))
            text = source[pos:end + 1]
            if end == pos + 1:
                raise LexError("empty quoted name", (line, col))
            emit(TokenKind.DOTTED_PATH if "." in text else TokenKind.IDENTIFIER, text)
            continue
        if ch.isdigit():
            m = _DATETIME_RE.match(source, pos)
            if m:
                emit(TokenKind.DATETIME, m.group())
                continue
            m = _NUMBER_RE.match(source, pos)
            text = m.group()
            emit(TokenKind.FLOAT if (m.group(1) or m.group(2)) else TokenKind.INTEGER, text)
            continue
        if ch.isalpha() or ch == "_":
            text = _WORD_RE.match(source, pos).group()
            if "." in text:
                emit(TokenKind.DOTTED_PATH, text)
            elif text.upper() in ("TRUE", "FALSE"):
                emit(TokenKind.BOOL, text)
            elif text.upper() in KEYWORDS:
                emit(TokenKind.KEYWORD, text)
            else:
                emit(TokenKind.IDENTIFIER, text)
            continue
        for sym in SYMBOLS:
            if source.startswith(sym, pos):
                emit(TokenKind.SYMBOL, sym)
                break
        else:
            raise LexError(f"illegal character {ch!r}", (line, col))
    return tokens


def end_span(source: str) -> tuple[int, int]:
    """Position just past the last character, used for end-of-input errors."""
    line = source.count("\n") + 1
    col = len(source) - (source.rfind("\n") + 1) + 1
    return line, col
