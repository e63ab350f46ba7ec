"""Lexical Java tokenizer.

Works on whole files and on fragments (truncated methods, signatures).
Comments and whitespace are skipped; unterminated strings and comments
run to the end of the line / text instead of raising.
"""

from __future__ import annotations

import re
from enum import Enum
from typing import Iterator, NamedTuple

# The 50 reserved words of the Java language.
RESERVED_WORDS = frozenset(
    """
    abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package
    private protected public return short static strictfp super switch
    synchronized this throw throws transient try void volatile while
    """.split()
)
LITERAL_WORDS = frozenset({"true", "false", "null"})
KEYWORDS = RESERVED_WORDS | LITERAL_WORDS


class Kind(str, Enum):
    IDENTIFIER = "identifier"
    KEYWORD = "keyword"
    LITERAL = "literal"
    OPERATOR = "operator"
    SEPARATOR = "separator"
    OTHER = "other"


class Token(NamedTuple):
    kind: Kind
    text: str
    start: int
    end: int


_OPERATORS = [
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "++", "--", "&&", "||",
    "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "&=", "|=", "^=", "%=",
    "<<", ">>", "=", ">", "<", "!", "~", "?", ":", "+", "-", "*", "/", "&",
    "|", "^", "%",
]
_SEPARATORS = frozenset({"(", ")", "{", "}", "[", "]", ";", ",", ".", "...", "@", "::"})

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<line_comment>//[^\n]*)
  | (?P<block_comment>/\*(?:.|\n)*?(?:\*/|\Z))
  | (?P<text_block>\"\"\"(?:\\.|[^\\]|\n)*?(?:\"\"\"|\Z))
  | (?P<string>"(?:\\.|[^"\\\n])*(?:"|(?=\n)|\Z))
  | (?P<char>'(?:\\.|[^'\\\n])*(?:'|(?=\n)|\Z))
  | (?P<number>
        0[xX][0-9a-fA-F_]*(?:\.[0-9a-fA-F_]*)?(?:[pP][+-]?\d+)?[lLfFdD]?
      | 0[bB][01_]+[lL]?
      | (?:\d[\d_]*\.?[\d_]*|\.\d[\d_]*)(?:[eE][+-]?\d+)?[lLfFdD]?
    )
  | (?P<word>(?:[^\W\d]|\$)[\w$]*)
  | (?P<op>"""
    + "|".join(re.escape(op) for op in _OPERATORS)
    + r"""|[(){}\[\];,.@])
  | (?P<other>.)
    """,
    re.VERBOSE,
)


def tokenize(code: str) -> Iterator[Token]:
    """Yield the lexical tokens of ``code`` in source order."""
    for match in _TOKEN_RE.finditer(code):
        group = match.lastgroup
        text = match.group()
        if group in ("ws", "line_comment", "block_comment"):
            continue
        if group == "word":
            if text in LITERAL_WORDS:
                kind = Kind.LITERAL
            else:
                kind = Kind.KEYWORD if text in RESERVED_WORDS else Kind.IDENTIFIER
        elif group in ("string", "char", "text_block", "number"):
            kind = Kind.LITERAL
        elif group == "op":
            kind = Kind.SEPARATOR if text in _SEPARATORS else Kind.OPERATOR
        else:
            kind = Kind.OTHER
        yield Token(kind, text, match.start(), match.end())


def token_texts(code: str) -> list[str]:
    return [tok.text for tok in tokenize(code)]


def count_tokens(code: str) -> int:
    return sum(1 for _ in tokenize(code))


def cut_after_tokens(code: str, n: int) -> str:
    """Return the prefix of ``code`` that ends right after its ``n``-th token."""
    if n <= 0:
        return ""
    end = 0
    for i, tok in enumerate(tokenize(code)):
        end = tok.end
        if i + 1 == n:
            break
    return code[:end]


def strip_comments(code: str) -> str:
    """Drop comments and collapse whitespace runs to single spaces."""
    out = []
    last = 0
    for match in _TOKEN_RE.finditer(code):
        if match.lastgroup in ("ws", "line_comment", "block_comment"):
            out.append(code[last : match.start()])
            out.append(" ")
            last = match.end()
    out.append(code[last:])
    return re.sub(r"\s+", " ", "".join(out)).strip()
