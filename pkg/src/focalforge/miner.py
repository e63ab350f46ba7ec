"""Map test cases to focal methods inside one repository.

Two class-level heuristics (mirrored path, then unique name) pick the focal
class of each test class; two method-level heuristics (test name, then a
unique invoked method) pick the focal method of each test case. Test cases
that no heuristic resolves are discarded with a recorded reason.
"""

from __future__ import annotations

import logging
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath

from .javamodel import ClassModel, MethodModel, ParseFailure, SourceFile, is_test_class, is_test_method, parse_file

log = logging.getLogger(__name__)

PATH = "path"
NAME = "name"
UNIQUE_CALL = "unique_call"

# discard reasons, counted per test case
NO_FOCAL_CLASS = "no_focal_class"
AMBIGUOUS_FOCAL_CLASS = "ambiguous_focal_class"
NO_FOCAL_METHOD = "no_name_match_no_unique_call"
OVERLOAD_AMBIGUOUS = "overload_ambiguous"
CONSTRUCTOR = "constructor"


class AmbiguousMatch(Exception):
    def __init__(self, name: str, count: int):
        super().__init__(f"{count} classes named {name!r}")
        self.name = name
        self.count = count


@dataclass(frozen=True)
class MappedPair:
    repo_id: str
    test_class: ClassModel
    test_case: MethodModel
    focal_class: ClassModel
    focal_method: MethodModel
    class_match: str
    method_match: str


@dataclass
class MiningReport:
    files_parsed: int = 0
    parse_failures: int = 0
    io_errors: int = 0
    test_classes: int = 0
    test_cases: int = 0
    pairs: int = 0
    discards: Counter = field(default_factory=Counter)
    class_matches: Counter = field(default_factory=Counter)
    method_matches: Counter = field(default_factory=Counter)
    failed_files: list[tuple[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "files_parsed": self.files_parsed,
            "parse_failures": self.parse_failures,
            "io_errors": self.io_errors,
            "test_classes": self.test_classes,
            "test_cases": self.test_cases,
            "pairs": self.pairs,
            "discards": dict(sorted(self.discards.items())),
            "class_matches": dict(sorted(self.class_matches.items())),
            "method_matches": dict(sorted(self.method_matches.items())),
            "failed_files": [{"path": p, "reason": r} for p, r in self.failed_files],
        }

    def merge(self, other: MiningReport) -> None:
        for name in ("files_parsed", "parse_failures", "io_errors", "test_classes", "test_cases", "pairs"):
            setattr(self, name, getattr(self, name) + getattr(other, name))
        self.discards.update(other.discards)
        self.class_matches.update(other.class_matches)
        self.method_matches.update(other.method_matches)
        self.failed_files.extend(other.failed_files)


def strip_test_affix(name: str) -> list[str]:
    """Candidate focal class names for a test class name, suffix form first."""
    out = []
    if name.endswith("Test") and len(name) > 4:
        out.append(name[:-4])
    if name.startswith("Test") and len(name) > 4:
        out.append(name[4:])
    return out


def mirrored_dir(rel_path: str) -> str | None:
    """Swap the ``test`` segment directly under a ``src`` directory for ``main``."""
    parts = list(PurePosixPath(rel_path).parent.parts)
    for i in range(len(parts) - 1):
        if parts[i] == "src" and parts[i + 1] == "test":
            parts[i + 1] = "main"
            return "/".join(parts)
    return None


def find_test_classes(repo: list[ClassModel]) -> list[ClassModel]:
    return [c for c in repo if is_test_class(c)]


def resolve_focal_class(test_class: ClassModel, repo: list[ClassModel]) -> tuple[ClassModel, str] | None:
    """Resolve the class under test, returning it with the heuristic that fired.

    Raises:
        AmbiguousMatch: name matching found several classes with the name.
    """
    names = strip_test_affix(test_class.name)
    if not names:
        return None
    mirror = mirrored_dir(test_class.rel_path)
    if mirror is not None:
        for name in names:
            path = f"{mirror}/{name}.java"
            hits = [c for c in repo if c.rel_path == path and c.name == name]
            if hits:
                # prefer the top-level declaration when a nested class shares the name
                hits.sort(key=lambda c: c.is_nested)
                return hits[0], PATH
    for name in names:
        hits = [c for c in repo if c.name == name and c is not test_class]
        if len(hits) == 1:
            return hits[0], NAME
        if len(hits) > 1:
            raise AmbiguousMatch(name, len(hits))
    return None


def match_focal_class(test_class: ClassModel, repo: list[ClassModel]) -> ClassModel | None:
    match = resolve_focal_class(test_class, repo)
    return match[0] if match else None


def _strip_method_affix(name: str) -> list[str]:
    out = []
    for prefix in ("test", "Test"):
        if name.startswith(prefix) and len(name) > len(prefix):
            out.append(name[len(prefix):].lstrip("_"))
    for suffix in ("Test", "test"):
        if name.endswith(suffix) and len(name) > len(suffix):
            out.append(name[: -len(suffix)].rstrip("_"))
    return [n for n in out if n] or [name]


def _same_name(candidate: str, method: str) -> bool:
    return (
        len(candidate) == len(method)
        and candidate[:1].lower() == method[:1].lower()
        and candidate[1:] == method[1:]
    )


class Unresolved(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def resolve_focal_method(test_case: MethodModel, focal_class: ClassModel) -> tuple[MethodModel, str]:
    """Like :func:`match_focal_method` but raises :class:`Unresolved` with a reason."""
    methods = [m for m in focal_class.methods if not m.is_constructor]
    for candidate in _strip_method_affix(test_case.name):
        hits = [m for m in methods if _same_name(candidate, m.name)]
        if len(hits) == 1:
            return hits[0], NAME
        if hits:
            break

    called = set(test_case.invocations)
    common = sorted({m.name for m in focal_class.methods} & called)
    if len(common) != 1:
        raise Unresolved(NO_FOCAL_METHOD)
    overloads = [m for m in focal_class.methods if m.name == common[0]]
    if any(m.is_constructor for m in overloads):
        raise Unresolved(CONSTRUCTOR)
    if len(overloads) > 1:
        arities = {a for n, a in zip(test_case.invocations, test_case.call_arities) if n == common[0]}
        overloads = [m for m in overloads if m.arity in arities]
        if len(overloads) != 1:
            raise Unresolved(OVERLOAD_AMBIGUOUS)
    return overloads[0], UNIQUE_CALL


def match_focal_method(test_case: MethodModel, focal_class: ClassModel) -> MethodModel | None:
    try:
        return resolve_focal_method(test_case, focal_class)[0]
    except Unresolved:
        return None


def map_classes(repo_id: str, classes: list[ClassModel], report: MiningReport) -> list[MappedPair]:
    """Run the class and method heuristics over an already parsed repository."""
    pairs = []
    for test_class in find_test_classes(classes):
        report.test_classes += 1
        tests = [m for m in test_class.methods if is_test_method(m)]
        report.test_cases += len(tests)
        try:
            match = resolve_focal_class(test_class, classes)
        except AmbiguousMatch as exc:
            log.debug("%s: ambiguous focal class (%s)", test_class.qualified_name, exc)
            report.discards[AMBIGUOUS_FOCAL_CLASS] += len(tests)
            continue
        if match is None:
            report.discards[NO_FOCAL_CLASS] += len(tests)
            continue
        focal_class, class_match = match
        for test in tests:
            try:
                focal_method, method_match = resolve_focal_method(test, focal_class)
            except Unresolved as exc:
                report.discards[exc.reason] += 1
                continue
            pairs.append(MappedPair(repo_id, test_class, test, focal_class, focal_method,
                                    class_match, method_match))
            report.class_matches[class_match] += 1
            report.method_matches[method_match] += 1
    report.pairs += len(pairs)
    return pairs


def _load(args: tuple[str, str, str]) -> tuple[str, list[ClassModel] | None, str | None]:
    repo_id, path, rel = args
    try:
        content = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        return "io", None, str(exc)
    try:
        return "ok", parse_file(SourceFile(repo_id, rel, content)), None
    except ParseFailure as exc:
        return "parse", None, exc.reason


def java_files(root: Path) -> list[str]:
    found = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = sorted(d for d in dirnames if not d.startswith("."))
        for name in filenames:
            if name.endswith(".java"):
                found.append(Path(dirpath, name).relative_to(root).as_posix())
    return sorted(found)


def mine_repository(root: str | os.PathLike, repo_id: str | None = None,
                    jobs: int = 1) -> tuple[list[MappedPair], MiningReport]:
    """Parse every ``.java`` file under ``root`` and map its test cases.

    Pairs come out ordered by test file path, then source order. Files that
    cannot be read or parsed are counted in the report and skipped.
    """
    root = Path(root)
    if not root.is_dir():
        raise NotADirectoryError(str(root))
    repo_id = repo_id or root.resolve().name
    report = MiningReport()
    tasks = [(repo_id, str(root / rel), rel) for rel in java_files(root)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_load, tasks, chunksize=16))
    else:
        results = [_load(t) for t in tasks]

    classes: list[ClassModel] = []
    for (_, _, rel), (status, parsed, reason) in zip(tasks, results):
        if status == "ok":
            report.files_parsed += 1
            classes.extend(parsed)
        elif status == "parse":
            report.parse_failures += 1
            report.failed_files.append((rel, reason))
            log.info("skipping unparseable %s: %s", rel, reason)
        else:
            report.io_errors += 1
            report.failed_files.append((rel, reason))
            log.warning("cannot read %s: %s", rel, reason)
    return map_classes(repo_id, classes, report), report


def _mine_one(root: str) -> tuple[list[MappedPair], MiningReport]:
    return mine_repository(root)


def mine_repositories(roots: list[str | os.PathLike], jobs: int = 1) -> tuple[list[MappedPair], MiningReport]:
    """Mine several independent repositories, keeping the input order in the output."""
    roots = [str(r) for r in roots]
    if jobs > 1 and len(roots) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_mine_one, roots))
    else:
        results = [_mine_one(r) for r in roots]
    pairs: list[MappedPair] = []
    total = MiningReport()
    for repo_pairs, report in results:
        pairs.extend(repo_pairs)
        total.merge(report)
    return pairs, total
