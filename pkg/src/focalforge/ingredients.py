"""Token overlap ("ingredients") between focal-context renderings and tests."""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import lexer
from .context import ALL_LEVELS, ContextLevel, ContextRendering, render_context, untruncated_text
from .javamodel import MethodModel
from .records import PairRecord

_KEPT_KINDS = (lexer.Kind.IDENTIFIER, lexer.Kind.LITERAL)


@dataclass(frozen=True)
class TokenBag:
    tokens: frozenset[str]
    counts: Counter = field(default_factory=Counter, compare=False, hash=False)

    def __len__(self) -> int:
        return len(self.tokens)


def code_tokens(code: str) -> TokenBag:
    """Identifiers and literals of ``code``; keywords and punctuation are dropped."""
    kept = [t.text for t in lexer.tokenize(code) if t.kind in _KEPT_KINDS]
    return TokenBag(frozenset(kept), Counter(kept))


def _text(x) -> str:
    if isinstance(x, ContextRendering):
        return x.text
    if isinstance(x, MethodModel):
        return x.body_text
    return x


def shared_token_count(context, test, multiset: bool = False) -> int:
    """Number of distinct tokens common to both sides.

    With ``multiset=True`` repeated tokens count up to their smaller multiplicity.
    """
    a, b = code_tokens(_text(context)), code_tokens(_text(test))
    if multiset:
        return sum((a.counts & b.counts).values())
    return len(a.tokens & b.tokens)


def describe(values) -> dict[str, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return {"n": 0}
    q1, median, q3 = np.percentile(arr, [25, 50, 75])
    return {
        "n": int(arr.size),
        "mean": float(arr.mean()),
        "median": float(median),
        "q1": float(q1),
        "q3": float(q3),
        "min": float(arr.min()),
        "max": float(arr.max()),
    }


@dataclass
class OverlapStats:
    counts: dict[ContextLevel, list[int]]
    pair_ids: list[str]

    def summary(self) -> dict[str, dict[str, float]]:
        return {level.value: describe(values) for level, values in self.counts.items()}

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"levels": self.summary()}, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["pair_id", "level", "shared_tokens"])
            for level, values in self.counts.items():
                for pid, value in zip(self.pair_ids, values):
                    writer.writerow([pid, level.value, value])


def overlap_distribution(pairs: Iterable[PairRecord], levels=ALL_LEVELS,
                         budget: int | None = None, multiset: bool = False) -> OverlapStats:
    """Shared-token counts of every pair at every level.

    ``budget=None`` measures the untruncated renderings.
    """
    levels = [ContextLevel(l) for l in levels]
    counts: dict[ContextLevel, list[int]] = {level: [] for level in levels}
    ids = []
    for record in pairs:
        ids.append(record.pair_id)
        test = record.test_case.body
        for level in levels:
            text = (untruncated_text(record, level) if budget is None
                    else render_context(record, level, budget).text)
            counts[level].append(shared_token_count(text, test, multiset))
    return OverlapStats(counts, ids)
