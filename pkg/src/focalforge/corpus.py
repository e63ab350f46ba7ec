"""Deduplication, repository-disjoint splitting and JSON Lines I/O."""

from __future__ import annotations

import json
import os
import random
import re
from dataclasses import dataclass
from typing import Any, Callable, Iterable, TypeVar

from .records import SCHEMA_VERSION, PairRecord

T = TypeVar("T")

SPLIT_NAMES = ("train", "validation", "test")
DEFAULT_FRACTIONS = (0.8, 0.1, 0.1)
DEDUP_MODES = ("whitespace", "exact", "none")


class JsonlError(ValueError):
    def __init__(self, path: str, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = path
        self.line = line
        self.reason = reason


class SplitError(ValueError):
    pass


_WS = re.compile(r"\s+")


def _normalize(text: str, mode: str) -> str:
    return _WS.sub(" ", text).strip() if mode == "whitespace" else text


def dedup_key(pair, mode: str = "whitespace") -> tuple[str, str]:
    if isinstance(pair, PairRecord):
        test, focal = pair.test_case.body, pair.focal_method.body
    else:
        test, focal = pair.test_case.body_text, pair.focal_method.body_text
    return _normalize(test, mode), _normalize(focal, mode)


def deduplicate(pairs: Iterable[T], mode: str = "whitespace") -> list[T]:
    """Keep the first pair for each (test body, focal body) key, preserving order."""
    if mode not in DEDUP_MODES:
        raise ValueError(f"unknown dedup mode {mode!r}")
    pairs = list(pairs)
    if mode == "none":
        return pairs
    seen = set()
    out = []
    for pair in pairs:
        key = dedup_key(pair, mode)
        if key not in seen:
            seen.add(key)
            out.append(pair)
    return out


@dataclass
class CorpusSplit:
    train: list
    validation: list
    test: list
    fractions: tuple[float, float, float] = DEFAULT_FRACTIONS

    def parts(self) -> dict[str, list]:
        return {"train": self.train, "validation": self.validation, "test": self.test}

    def summary(self) -> dict[str, Any]:
        total = sum(len(p) for p in self.parts().values()) or 1
        return {
            name: {
                "repositories": len({p.repo_id for p in part}),
                "pairs": len(part),
                "fraction": len(part) / total,
                "target": target,
            }
            for (name, part), target in zip(self.parts().items(), self.fractions)
        }


def check_fractions(fractions) -> tuple[float, float, float]:
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3:
        raise SplitError(f"exactly 3 fractions required, got {len(fractions)}")
    if any(f <= 0 for f in fractions):
        raise SplitError("fractions must be positive")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise SplitError(f"fractions must sum to 1, got {sum(fractions)}")
    return fractions


def split_by_repo(pairs: Iterable, fractions=DEFAULT_FRACTIONS, seed: int = 0) -> CorpusSplit:
    """Partition pairs into train/validation/test so no repository spans two splits.

    Repositories are shuffled with ``seed`` and then assigned one at a time,
    largest pair count first (the shuffle breaks ties), each to the split
    furthest below its target pair count.
    """
    fractions = check_fractions(fractions)
    groups: dict[str, list] = {}
    for pair in pairs:
        groups.setdefault(pair.repo_id, []).append(pair)
    if len(groups) < 3:
        raise SplitError(f"need at least 3 repositories for 3 non-empty splits, got {len(groups)}")

    repos = sorted(groups)
    random.Random(seed).shuffle(repos)
    repos.sort(key=lambda r: len(groups[r]), reverse=True)

    total = sum(len(g) for g in groups.values())
    assigned = [0, 0, 0]
    members: list[list[str]] = [[], [], []]
    for i, repo in enumerate(repos):
        empty = [s for s in range(3) if not members[s]]
        if empty and len(repos) - i <= len(empty):
            target = empty[0]
        else:
            target = max(range(3), key=lambda s: (fractions[s] * total - assigned[s], -s))
        assigned[target] += len(groups[repo])
        members[target].append(repo)

    split_of = {repo: s for s in range(3) for repo in members[s]}
    parts: list[list] = [[], [], []]
    for repo, group in groups.items():
        parts[split_of[repo]].extend(group)
    return CorpusSplit(parts[0], parts[1], parts[2], fractions)


def write_jsonl(items: Iterable, path: str | os.PathLike) -> int:
    """Write one JSON object per line; returns the number of rows written."""
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for item in items:
            row = item.to_dict() if hasattr(item, "to_dict") else dict(item)
            row.setdefault("schema_version", SCHEMA_VERSION)
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True))
            fh.write("\n")
            n += 1
    return n


def read_jsonl(path: str | os.PathLike,
               factory: Callable[[dict], T] = PairRecord.from_dict) -> list[T]:
    """Read rows written by :func:`write_jsonl`.

    Raises:
        JsonlError: on malformed JSON, a schema-version mismatch or a row the
            factory rejects; the error carries the 1-based line number.
    """
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise JsonlError(str(path), lineno, f"malformed JSON ({exc.msg})") from None
            if not isinstance(row, dict):
                raise JsonlError(str(path), lineno, "expected a JSON object")
            version = row.get("schema_version", SCHEMA_VERSION)
            if version != SCHEMA_VERSION:
                raise JsonlError(str(path), lineno,
                                 f"schema_version {version} unsupported (expected {SCHEMA_VERSION})")
            try:
                out.append(factory(row))
            except (TypeError, KeyError, ValueError) as exc:
                raise JsonlError(str(path), lineno, f"invalid row: {exc}") from None
    return out
