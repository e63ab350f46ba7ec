"""Leveled focal-context renderings under a token budget.

Every level above ``fm`` renders as::

    ClassName { <focal method> <constructor sigs>; <method sigs>; <field decls> }

with items separated by single spaces; the focal method keeps its source
formatting and ``fm`` alone is just that source. When the full rendering is
over budget, content is kept in priority order (focal method, class name,
constructors, public methods, public fields) and the rest dropped at token
boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

from . import lexer
from .miner import MappedPair
from .records import ContextInfo, PairRecord, to_record

DEFAULT_BUDGET = 1024


class ContextLevel(str, Enum):
    FM = "fm"
    FM_FC = "fm+fc"
    FM_FC_C = "fm+fc+c"
    FM_FC_C_M = "fm+fc+c+m"
    FM_FC_C_M_F = "fm+fc+c+m+f"

    @classmethod
    def parse(cls, name: str) -> ContextLevel:
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown level {name!r}; expected one of {', '.join(l.value for l in cls)}"
            ) from None

    @property
    def rank(self) -> int:
        return list(ContextLevel).index(self)


ALL_LEVELS = tuple(ContextLevel)

_KINDS = (
    "focal_method",
    "class_name",
    "constructor_signatures",
    "public_method_signatures",
    "public_field_declarations",
)


def level_contents(level: ContextLevel) -> list[str]:
    return list(_KINDS[: ContextLevel(level).rank + 1])


@dataclass(frozen=True)
class ContextRendering:
    level: ContextLevel
    text: str
    token_count: int
    truncated: bool

    def info(self) -> ContextInfo:
        return ContextInfo(self.level.value, self.text, self.token_count, self.truncated)


TokenCounter = Callable[[str], int]


def _segments(record: PairRecord, level: ContextLevel) -> list[str]:
    """Member items inside the class braces, in inclusion order."""
    fc = record.focal_class
    kinds = level_contents(level)
    items = [record.focal_method.body]
    if "constructor_signatures" in kinds:
        items += [f"{sig};" for sig in fc.constructor_signatures]
    if "public_method_signatures" in kinds:
        items += [f"{sig};" for sig in fc.method_signatures]
    if "public_field_declarations" in kinds:
        items += list(fc.field_declarations)
    return items


def untruncated_text(record: PairRecord, level: ContextLevel) -> str:
    level = ContextLevel(level)
    if level is ContextLevel.FM:
        return record.focal_method.body
    return f"{record.focal_class.name} {{ {' '.join(_segments(record, level))} }}"


def render_context(pair: MappedPair | PairRecord, level: ContextLevel | str,
                   budget: int = DEFAULT_BUDGET,
                   count_tokens: TokenCounter = lexer.count_tokens) -> ContextRendering:
    """Render ``pair`` at ``level`` within ``budget`` tokens.

    ``count_tokens`` defaults to the lexical Java tokenizer; truncation
    always happens at lexical token boundaries.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    record = to_record(pair) if isinstance(pair, MappedPair) else pair
    level = ContextLevel(level)
    full = untruncated_text(record, level)
    full_count = count_tokens(full)
    if full_count <= budget:
        return ContextRendering(level, full, full_count, False)

    focal = record.focal_method.body
    wrapper = count_tokens(f"{record.focal_class.name} {{ }}")
    focal_count = count_tokens(focal)
    if level is ContextLevel.FM or focal_count + wrapper > budget:
        text = _cut(focal, budget, count_tokens)
        return ContextRendering(level, text, count_tokens(text), True)

    room = budget - focal_count - wrapper
    kept = [focal]
    for item in _segments(record, level)[1:]:
        n = count_tokens(item)
        if n <= room:
            kept.append(item)
            room -= n
            continue
        if room > 0:
            kept.append(_cut(item, room, count_tokens))
        break
    text = f"{record.focal_class.name} {{ {' '.join(kept)} }}"
    return ContextRendering(level, text, count_tokens(text), True)


def _cut(text: str, n: int, count_tokens: TokenCounter) -> str:
    cut = lexer.cut_after_tokens(text, n)
    # a non-lexical counter may disagree with the lexer; shrink until it fits
    while cut and count_tokens(cut) > n:
        n -= 1
        cut = lexer.cut_after_tokens(text, n)
    return cut


def render_all(pair: MappedPair | PairRecord, budget: int = DEFAULT_BUDGET,
               levels=ALL_LEVELS) -> dict[ContextLevel, ContextRendering]:
    record = to_record(pair) if isinstance(pair, MappedPair) else pair
    return {ContextLevel(l): render_context(record, l, budget) for l in levels}
