"""Static checks on candidate test methods produced by an external generator."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

from . import lexer
from .ingredients import describe
from .javamodel import MethodModel, ParseFailure, SourceFile, is_test_method, parse_file

JUNIT_APIS = (
    "assertEquals", "assertTrue", "assertFalse", "assertNull", "assertNotNull",
    "assertSame", "assertNotSame", "assertArrayEquals", "assertThrows", "fail",
)
MOCKITO_APIS = (
    "mock", "verify", "when", "thenReturn", "spy", "doReturn", "doThrow", "any", "eq", "times",
)
DEFAULT_APIS: dict[str, tuple[str, ...]] = {"junit": JUNIT_APIS, "mockito": MOCKITO_APIS}

_WRAP_HEAD = "class __W {\n"
_WRAP_TAIL = "\n}\n"


class UnparseableCandidate(ValueError):
    pass


@dataclass(frozen=True)
class Candidate:
    id: str
    text: str
    focal_pair_id: str = ""
    generator: str = ""
    repaired: bool = False

    def to_dict(self) -> dict:
        return {"id": self.id, "focal_pair_id": self.focal_pair_id,
                "text": self.text, "generator": self.generator}

    @classmethod
    def from_dict(cls, row: Mapping) -> Candidate:
        return cls(id=str(row["id"]), text=row["text"],
                   focal_pair_id=row.get("focal_pair_id", ""),
                   generator=row.get("generator", ""))


def _text(c: Candidate | str) -> str:
    return c.text if isinstance(c, Candidate) else c


def _parse(text: str) -> MethodModel:
    try:
        classes = parse_file(SourceFile("", "<candidate>", _WRAP_HEAD + text + _WRAP_TAIL))
    except ParseFailure as exc:
        raise UnparseableCandidate(_shift_lines(exc.reason, text.count("\n") + 1)) from None
    wrapper = classes[0]
    if len(classes) != 1 or len(wrapper.methods) != 1 or wrapper.fields or wrapper.methods[0].is_constructor:
        raise UnparseableCandidate("text is not a single method declaration")
    return wrapper.methods[0]


def _shift_lines(reason: str, n_lines: int) -> str:
    # diagnostics count the synthetic wrapper line; report candidate lines
    head, sep, tail = reason.partition(" at line ")
    if not sep:
        return reason
    line, _, rest = tail.partition(",")
    try:
        line = int(line) - 1
    except ValueError:
        return reason
    if line > n_lines:
        return f"{head} at end of input"
    return f"{head} at line {max(line, 1)},{rest}"


def check_syntax(c: Candidate | str) -> str | None:
    """Return ``None`` when the candidate is one well-formed method, else the first diagnostic."""
    try:
        _parse(_text(c))
    except UnparseableCandidate as exc:
        return str(exc)
    return None


def parse_candidate(c: Candidate | str) -> MethodModel:
    return _parse(_text(c))


def _cut_points(text: str) -> list[tuple[int, int]]:
    """Offsets right after a statement or block at method-body level, with open-brace depth."""
    cuts = []
    braces = others = 0
    body_open = False
    for tok in lexer.tokenize(text):
        t = tok.text
        if t == "{":
            braces += 1
            if not body_open and others == 0:
                body_open = True
                cuts.append((tok.end, braces))
        elif t in ("(", "["):
            others += 1
        elif t in (")", "]"):
            others = max(others - 1, 0)
        elif t == "}":
            braces = max(braces - 1, 0)
            if braces and not others:
                cuts.append((tok.end, braces))
        elif t == ";" and braces and not others:
            cuts.append((tok.end, braces))
    return cuts


def repair_truncation(c: Candidate) -> Candidate:
    """Drop a trailing partial statement and close the open blocks.

    Cut points are tried from the end backwards; the first cut whose
    completion parses wins. If none does, ``c`` is returned unchanged.
    """
    if check_syntax(c) is None:
        return c
    for end, depth in reversed(_cut_points(c.text)):
        fixed = c.text[:end] + " }" * depth
        if check_syntax(fixed) is None:
            return replace(c, text=fixed, repaired=True)
    return c


def has_test_annotation(c: Candidate | str) -> bool:
    return is_test_method(parse_candidate(c))


def invokes_focal_method(c: Candidate | str, focal_name: str) -> bool:
    return focal_name in parse_candidate(c).invocations


@dataclass(frozen=True)
class ApiProfile:
    counts: Counter = field(default_factory=Counter)

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def load_api_lists(path: str | Path) -> dict[str, tuple[str, ...]]:
    """Read framework -> API names from a JSON or TOML file, merged over the defaults."""
    path = Path(path)
    if path.suffix == ".toml":
        from ._toml import load_toml

        data = load_toml(path)
    else:
        data = json.loads(path.read_text(encoding="utf-8"))
    merged = dict(DEFAULT_APIS)
    for framework, names in data.items():
        if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
            raise ValueError(f"{path}: {framework!r} must map to a list of names")
        merged[framework] = tuple(names)
    return merged


def api_names(apis: Mapping[str, Iterable[str]] = DEFAULT_APIS) -> frozenset[str]:
    return frozenset(n for names in apis.values() for n in names)


def api_profile(c: Candidate | str | MethodModel,
                apis: Mapping[str, Iterable[str]] = DEFAULT_APIS) -> ApiProfile:
    method = c if isinstance(c, MethodModel) else parse_candidate(c)
    known = api_names(apis)
    return ApiProfile(Counter(name for name in method.invocations if name in known))


def compare_profiles(a: list[ApiProfile], b: list[ApiProfile],
                     labels: tuple[str, str] = ("original", "generated"), top: int = 16) -> dict:
    """Per-API totals and per-candidate API-count distributions of two populations."""
    report: dict = {}
    combined: Counter = Counter()
    for label, population in zip(labels, (a, b)):
        totals: Counter = Counter()
        for profile in population:
            totals.update(profile.counts)
        combined.update(totals)
        report[label] = {
            "candidates": len(population),
            "api_totals": dict(sorted(totals.items())),
            "per_candidate": describe([p.total for p in population]),
        }
    ranked = sorted(combined.items(), key=lambda kv: (-kv[1], kv[0]))[:top]
    report["top_apis"] = [
        {"api": name, **{label: report[label]["api_totals"].get(name, 0) for label in labels}}
        for name, _ in ranked
    ]
    return report


@dataclass
class ValidationResult:
    id: str
    focal_pair_id: str
    generator: str
    syntax_ok: bool
    syntax_error: str | None
    repaired: bool
    parseable: bool
    has_test_annotation: bool | None = None
    invokes_focal_method: bool | None = None
    api_counts: dict[str, int] = field(default_factory=dict)
    text: str = ""

    @property
    def api_total(self) -> int:
        return sum(self.api_counts.values())

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "focal_pair_id": self.focal_pair_id,
            "generator": self.generator,
            "syntax_ok": self.syntax_ok,
            "syntax_error": self.syntax_error,
            "repaired": self.repaired,
            "parseable": self.parseable,
            "has_test_annotation": self.has_test_annotation,
            "invokes_focal_method": self.invokes_focal_method,
            "api_counts": dict(sorted(self.api_counts.items())),
            "api_total": self.api_total,
        }


def validate_candidate(c: Candidate, focal_name: str | None,
                       apis: Mapping[str, Iterable[str]] = DEFAULT_APIS) -> ValidationResult:
    """Run every static check on one candidate, repairing truncation first."""
    error = check_syntax(c)
    fixed = repair_truncation(c) if error else c
    result = ValidationResult(c.id, c.focal_pair_id, c.generator, error is None, error,
                              fixed.repaired, False, text=fixed.text)
    try:
        method = parse_candidate(fixed)
    except UnparseableCandidate:
        return result
    result.parseable = True
    result.has_test_annotation = is_test_method(method)
    result.invokes_focal_method = focal_name in method.invocations if focal_name else None
    result.api_counts = dict(api_profile(method, apis).counts)
    return result
