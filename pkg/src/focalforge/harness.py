"""Compile, run and grade candidate tests against a project.

The Java toolchain is never invoked directly: compile and test commands come
from a :class:`RunnerConfig` as templates, and the process launcher itself is
injectable so the pipeline can be driven by stubs.
"""

from __future__ import annotations

import logging
import re
import shlex
import shutil
import string
import subprocess
import tempfile
import xml.etree.ElementTree as ET
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .records import PairRecord
from .validator import MOCKITO_APIS, Candidate, UnparseableCandidate, check_syntax, parse_candidate, repair_truncation

log = logging.getLogger(__name__)


class Category(str, Enum):
    SYNTAX_ERROR = "SyntaxError"
    BUILD_ERROR = "BuildError"
    FAILING_TEST = "FailingTest"
    PASSING_TEST = "PassingTest"


class VerdictInvariantError(AssertionError):
    pass


@dataclass(frozen=True)
class Verdict:
    candidate_id: str
    category: Category
    correct: bool = False
    reason: str = ""
    warnings: tuple[str, ...] = ()
    repaired: bool = False
    focal_key: str = ""
    focal_pair_id: str = ""
    project: str = ""

    def __post_init__(self):
        object.__setattr__(self, "category", Category(self.category))
        if self.correct and self.category is not Category.PASSING_TEST:
            raise VerdictInvariantError(f"{self.candidate_id}: correct but {self.category.value}")

    def to_dict(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "focal_pair_id": self.focal_pair_id,
            "focal_key": self.focal_key,
            "project": self.project,
            "category": self.category.value,
            "correct": self.correct,
            "reason": self.reason,
            "warnings": list(self.warnings),
            "repaired": self.repaired,
        }

    @classmethod
    def from_dict(cls, row: dict) -> Verdict:
        return cls(
            candidate_id=str(row["candidate_id"]),
            category=Category(row["category"]),
            correct=bool(row.get("correct", False)),
            reason=row.get("reason", ""),
            warnings=tuple(row.get("warnings", ())),
            repaired=bool(row.get("repaired", False)),
            focal_key=row.get("focal_key", ""),
            focal_pair_id=row.get("focal_pair_id", ""),
            project=row.get("project", ""),
        )


# --------------------------------------------------------------------------
# coverage

@dataclass(frozen=True)
class CoverageRecord:
    filename: str
    class_name: str
    method_name: str
    signature: str
    lines_covered: int
    conditions_covered: int
    lines_total: int = 0
    conditions_total: int = 0


class CoverageError(ValueError):
    pass


_CONDITIONS = re.compile(r"\((\d+)\s*/\s*(\d+)\)")


def _conditions(line: ET.Element) -> tuple[int, int]:
    if line.get("branch", "false").lower() != "true":
        return 0, 0
    m = _CONDITIONS.search(line.get("condition-coverage", ""))
    if m:
        return int(m.group(1)), int(m.group(2))
    # fall back on the per-condition children
    conds = line.findall("./conditions/condition")
    covered = sum(1 for c in conds if c.get("coverage", "0%").strip() not in ("0%", "0.0%"))
    return covered, len(conds)


def parse_coverage_xml(path: str | Path) -> list[CoverageRecord]:
    """One record per ``<method>`` of a Cobertura-style report.

    JaCoCo XML (root ``<report>``) is accepted too, using its method counters.

    Raises:
        CoverageError: the file is not well-formed XML or has no coverage root.
    """
    try:
        root = ET.parse(path).getroot()
    except (ET.ParseError, OSError) as exc:
        raise CoverageError(f"{path}: {exc}") from None
    if root.tag == "report":
        return _jacoco_records(root)
    if root.tag != "coverage":
        raise CoverageError(f"{path}: root element is <{root.tag}>, expected <coverage> or <report>")
    records = []
    for cls in root.iter("class"):
        for method in cls.findall("./methods/method"):
            lines = method.findall("./lines/line")
            covered = conds = conds_total = 0
            for line in lines:
                if int(float(line.get("hits", "0"))) > 0:
                    covered += 1
                c, t = _conditions(line)
                conds += c
                conds_total += t
            records.append(CoverageRecord(
                filename=cls.get("filename", ""),
                class_name=cls.get("name", ""),
                method_name=method.get("name", ""),
                signature=method.get("signature", ""),
                lines_covered=covered,
                conditions_covered=conds,
                lines_total=len(lines),
                conditions_total=conds_total,
            ))
    return records


def _counter(el: ET.Element, kind: str) -> tuple[int, int]:
    for c in el.findall("counter"):
        if c.get("type") == kind:
            covered = int(c.get("covered", "0"))
            return covered, covered + int(c.get("missed", "0"))
    return 0, 0


def _jacoco_records(root: ET.Element) -> list[CoverageRecord]:
    # JaCoCo reports carry per-method LINE and BRANCH counters instead of line lists
    records = []
    for cls in root.iter("class"):
        for method in cls.findall("method"):
            lines, lines_total = _counter(method, "LINE")
            conds, conds_total = _counter(method, "BRANCH")
            records.append(CoverageRecord(
                filename=cls.get("sourcefilename", ""),
                class_name=cls.get("name", "").replace("/", "."),
                method_name=method.get("name", ""),
                signature=method.get("desc", ""),
                lines_covered=lines,
                conditions_covered=conds,
                lines_total=lines_total,
                conditions_total=conds_total,
            ))
    return records


_PRIMITIVES = {"Z": "boolean", "B": "byte", "C": "char", "S": "short", "I": "int",
               "J": "long", "F": "float", "D": "double", "V": "void"}


def descriptor_param_types(descriptor: str) -> list[str]:
    """``(ILjava/lang/String;[J)V`` -> ``['int', 'String', 'long[]']``."""
    start, end = descriptor.find("("), descriptor.find(")")
    if start < 0 or end < start:
        raise ValueError(f"not a method descriptor: {descriptor!r}")
    body = descriptor[start + 1 : end]
    out, i, dims = [], 0, 0
    while i < len(body):
        ch = body[i]
        if ch == "[":
            dims += 1
            i += 1
            continue
        if ch == "L":
            j = body.index(";", i)
            name = re.split(r"[/$]", body[i + 1 : j])[-1]
            i = j + 1
        else:
            name = _PRIMITIVES[ch]
            i += 1
        out.append(name + "[]" * dims)
        dims = 0
    return out


def simple_type(source_type: str) -> str:
    """Erase generics, annotations and qualification: ``java.util.List<T>...`` -> ``List[]``."""
    t = re.sub(r"@[\w.]+(\([^)]*\))?", " ", source_type)
    t = re.sub(r"\bfinal\b", " ", t)
    while "<" in t:
        reduced = re.sub(r"<[^<>]*>", "", t)
        if reduced == t:
            break
        t = reduced
    t = re.sub(r"\s+", "", t)
    t = t.replace("...", "[]")
    dims = t.count("[]")
    base = t.replace("[]", "").rsplit(".", 1)[-1]
    return base + "[]" * dims


@dataclass(frozen=True)
class FocalTarget:
    """What a candidate is supposed to exercise."""

    name: str
    class_name: str
    qualified_class: str
    param_types: tuple[str, ...] = ()
    type_parameters: tuple[str, ...] = ()
    package: str = ""

    @property
    def key(self) -> str:
        return f"{self.qualified_class}#{self.name}({','.join(simple_type(p) for p in self.param_types)})"

    @classmethod
    def from_record(cls, record: PairRecord) -> FocalTarget:
        return cls(
            name=record.focal_method.name,
            class_name=record.focal_class.name,
            qualified_class=record.focal_class.qualified_name,
            param_types=tuple(record.focal_method.param_types),
            type_parameters=tuple(record.focal_method.type_parameters) + tuple(record.focal_class.type_parameters),
            package=record.focal_class.package,
        )


def _params_match(target: FocalTarget, descriptor: str) -> bool:
    if not descriptor:
        return True
    try:
        reported = descriptor_param_types(descriptor)
    except (ValueError, KeyError):
        return False
    expected = [simple_type(p) for p in target.param_types]
    if len(reported) != len(expected):
        return False
    for want, got in zip(expected, reported):
        base = want.replace("[]", "")
        if base in target.type_parameters:
            # erased type variable: only the array depth is checked
            if want.count("[]") > got.count("[]"):
                return False
        elif want != got:
            return False
    return True


def _class_matches(target: FocalTarget, record: CoverageRecord) -> bool:
    if record.class_name:
        reported = record.class_name.replace("$", ".").replace("/", ".")
        return reported == target.qualified_class or (
            "." not in reported and reported == target.class_name
        )
    return Path(record.filename).stem == target.class_name


def covers_focal(records: Iterable[CoverageRecord], target: FocalTarget) -> bool:
    """True iff some record for the focal method shows at least one covered line."""
    return any(
        r.lines_covered > 0
        and r.method_name == target.name
        and _class_matches(target, r)
        and _params_match(target, r.signature)
        for r in records
    )


# --------------------------------------------------------------------------
# runner configuration and scaffolding

PLACEHOLDERS = frozenset({"class_file", "class_name", "classpath", "workdir", "project"})
REQUIRED = {"compile_cmd": {"class_file"}, "test_cmd": {"classpath"}}

IMPORT_PROFILES = {
    "junit4": ("org.junit.Test", "static org.junit.Assert.*"),
    "junit5": ("org.junit.jupiter.api.Test", "static org.junit.jupiter.api.Assertions.*"),
}
MOCKITO_IMPORTS = ("static org.mockito.Mockito.*",)

DEFAULT_SCAFFOLD = """$package_decl$imports
public class $class_name {

$test_method

}
"""
DEFAULT_FAILURE_PATTERN = r"FAILURES!!!|Tests run: \d+,\s*Failures: [1-9]|\[\s*[1-9]\d* tests failed\s*\]"


class RunnerConfigError(ValueError):
    pass


@dataclass
class RunnerConfig:
    compile_cmd: str
    test_cmd: str
    timeout: float = 120.0
    classpath: str = ""
    scaffold_template: str = DEFAULT_SCAFFOLD
    profile: str = "junit4"
    mockito: str = "auto"
    imports: tuple[str, ...] = ()
    package: str | None = None
    test_class_name: str = "GeneratedTest"
    coverage_report: str | None = None
    failure_pattern: str = DEFAULT_FAILURE_PATTERN
    keep_workdirs: bool = False

    def __post_init__(self):
        for name in ("compile_cmd", "test_cmd"):
            fields = template_fields(getattr(self, name))
            unknown = fields - PLACEHOLDERS
            if unknown:
                raise RunnerConfigError(f"{name}: unknown placeholders {sorted(unknown)}")
            missing = REQUIRED[name] - fields
            if missing:
                raise RunnerConfigError(f"{name}: missing placeholders {sorted(missing)}")
        if self.profile not in IMPORT_PROFILES:
            raise RunnerConfigError(f"profile must be one of {sorted(IMPORT_PROFILES)}")
        if self.mockito not in ("auto", "always", "never"):
            raise RunnerConfigError("mockito must be auto, always or never")
        if self.timeout <= 0:
            raise RunnerConfigError("timeout must be positive")
        self.imports = tuple(self.imports)

    @classmethod
    def load(cls, path: str | Path) -> RunnerConfig:
        from ._toml import load_toml

        data = load_toml(path)
        data = data.get("runner", data)
        try:
            return cls(**data)
        except TypeError as exc:
            raise RunnerConfigError(f"{path}: {exc}") from None


def template_fields(template: str) -> set[str]:
    return {name for _, name, _, _ in string.Formatter().parse(template) if name}


def _uses_mockito(c: Candidate) -> bool:
    try:
        calls = parse_candidate(c).invocations
    except UnparseableCandidate:
        return False
    return any(name in MOCKITO_APIS for name in calls)


def scaffold(c: Candidate, cfg: RunnerConfig, target: FocalTarget | None = None) -> str:
    """Embed the candidate method in a test class with the configured imports.

    Raises:
        UnparseableCandidate: the candidate is not a well-formed method.
    """
    parse_candidate(c)
    imports = list(IMPORT_PROFILES[cfg.profile])
    if cfg.mockito == "always" or (cfg.mockito == "auto" and _uses_mockito(c)):
        imports += MOCKITO_IMPORTS
    imports += cfg.imports
    package = cfg.package if cfg.package is not None else (target.package if target else "")
    lines = "".join(f"import {imp};\n" for imp in dict.fromkeys(imports))
    return string.Template(cfg.scaffold_template).substitute(
        package_decl=f"package {package};\n\n" if package else "",
        imports=lines,
        class_name=cfg.test_class_name,
        test_method=_indent(c.text),
    )


def _indent(text: str) -> str:
    return "\n".join(("    " + line) if line.strip() else line for line in text.splitlines())


# --------------------------------------------------------------------------
# running

@dataclass(frozen=True)
class CommandResult:
    returncode: int
    output: str = ""
    timed_out: bool = False


CommandRunner = Callable[[Sequence[str], Path, float], CommandResult]


def run_command(argv: Sequence[str], cwd: Path, timeout: float) -> CommandResult:
    try:
        proc = subprocess.run(list(argv), cwd=cwd, stdout=subprocess.PIPE, stderr=subprocess.STDOUT,
                              timeout=timeout, text=True, errors="replace")
    except subprocess.TimeoutExpired as exc:
        out = exc.stdout.decode("utf-8", "replace") if isinstance(exc.stdout, bytes) else (exc.stdout or "")
        return CommandResult(-1, out, timed_out=True)
    return CommandResult(proc.returncode, proc.stdout)


def expand(template: str, values: dict[str, str]) -> list[str]:
    return [arg.format_map(values) for arg in shlex.split(template)]


def _tail(text: str, n: int = 5) -> str:
    return "\n".join(text.strip().splitlines()[-n:])


def classify_candidate(c: Candidate, cfg: RunnerConfig, target: FocalTarget | None = None,
                       coverage: Iterable[CoverageRecord] | str | Path | None = None,
                       project: str | Path = ".", runner: CommandRunner = run_command,
                       workdir: str | Path | None = None) -> Verdict:
    """Classify one candidate as SyntaxError, BuildError, FailingTest or PassingTest.

    A passing candidate is marked correct when the coverage (passed in, or read
    from ``cfg.coverage_report`` after the run) shows a hit line in the focal
    method. Syntax errors never reach ``runner``.
    """
    common = dict(candidate_id=c.id, focal_pair_id=c.focal_pair_id,
                  focal_key=target.key if target else c.focal_pair_id,
                  project=Path(project).name if project else "")
    error = check_syntax(c)
    if error is not None:
        fixed = repair_truncation(c)
        if not fixed.repaired:
            return Verdict(category=Category.SYNTAX_ERROR, reason=error, **common)
        c = fixed
    common["repaired"] = c.repaired

    own_dir = workdir is None
    work = Path(tempfile.mkdtemp(prefix="focalforge-")) if own_dir else Path(workdir)
    try:
        return _run(c, cfg, target, coverage, Path(project).resolve(), runner, work, common)
    finally:
        if own_dir and not cfg.keep_workdirs:
            shutil.rmtree(work, ignore_errors=True)


def _run(c, cfg, target, coverage, project, runner, work, common) -> Verdict:
    package = cfg.package if cfg.package is not None else (target.package if target else "")
    src_dir = work.joinpath("src", *package.split(".")) if package else work / "src"
    src_dir.mkdir(parents=True, exist_ok=True)
    class_file = src_dir / f"{cfg.test_class_name}.java"
    class_file.write_text(scaffold(c, cfg, target), encoding="utf-8")
    values = {
        "class_file": str(class_file),
        "class_name": f"{package}.{cfg.test_class_name}" if package else cfg.test_class_name,
        "workdir": str(work),
        "project": str(project),
    }
    values["classpath"] = cfg.classpath.format_map(values)

    built = runner(expand(cfg.compile_cmd, values), work, cfg.timeout)
    if built.timed_out:
        return Verdict(category=Category.FAILING_TEST, reason="compile timeout", **common)
    if built.returncode != 0:
        return Verdict(category=Category.BUILD_ERROR, reason=_tail(built.output), **common)

    ran = runner(expand(cfg.test_cmd, values), work, cfg.timeout)
    if ran.timed_out:
        return Verdict(category=Category.FAILING_TEST, reason="timeout", **common)
    if ran.returncode != 0 or re.search(cfg.failure_pattern, ran.output or ""):
        return Verdict(category=Category.FAILING_TEST, reason=_tail(ran.output), **common)

    warnings = []
    records = None
    if coverage is not None and not isinstance(coverage, (str, Path)):
        records = list(coverage)
    else:
        report = Path(coverage) if coverage is not None else (
            Path(cfg.coverage_report.format_map(values)) if cfg.coverage_report else None)
        if report is not None:
            if report.is_file():
                try:
                    records = parse_coverage_xml(report)
                except CoverageError as exc:
                    warnings.append(f"unreadable coverage report: {exc}")
            else:
                warnings.append(f"coverage report not found: {report}")
    if target is None:
        warnings.append("no focal target; correctness not assessed")
    correct = bool(records is not None and target is not None and covers_focal(records, target))
    return Verdict(category=Category.PASSING_TEST, correct=correct, warnings=tuple(warnings), **common)


def evaluate_candidates(candidates: Sequence[Candidate], cfg: RunnerConfig,
                        targets: dict[str, FocalTarget] | None = None, project: str | Path = ".",
                        jobs: int = 1, runner: CommandRunner = run_command,
                        runs_dir: str | Path | None = None) -> list[Verdict]:
    """Classify candidates in isolated work directories, ``jobs`` at a time, keeping input order."""
    targets = targets or {}

    def one(item: tuple[int, Candidate]) -> Verdict:
        i, cand = item
        workdir = None
        if runs_dir is not None:
            workdir = Path(runs_dir) / f"{i:06d}"
            workdir.mkdir(parents=True, exist_ok=True)
        return classify_candidate(cand, cfg, targets.get(cand.focal_pair_id), project=project,
                                  runner=runner, workdir=workdir)

    items = list(enumerate(candidates))
    if jobs <= 1:
        return [one(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, items))


# --------------------------------------------------------------------------
# aggregation

_COLUMNS = (
    ("correct", None),
    ("passing", Category.PASSING_TEST),
    ("failing", Category.FAILING_TEST),
    ("build_error", Category.BUILD_ERROR),
    ("syntax_error", Category.SYNTAX_ERROR),
)


def check_verdicts(verdicts: Iterable[Verdict]) -> None:
    """Raise :class:`VerdictInvariantError` unless the category algebra holds."""
    verdicts = list(verdicts)
    counts = {cat: 0 for cat in Category}
    for v in verdicts:
        if not isinstance(v.category, Category):
            raise VerdictInvariantError(f"{v.candidate_id}: unknown category {v.category!r}")
        counts[v.category] += 1
        if v.correct and v.category is not Category.PASSING_TEST:
            raise VerdictInvariantError(f"{v.candidate_id}: correct outside PassingTest")
    if sum(counts.values()) != len(verdicts):
        raise VerdictInvariantError("category counts do not sum to the total")


def _row(verdicts: list[Verdict]) -> dict:
    by_method: dict[str, list[Verdict]] = defaultdict(list)
    for v in verdicts:
        by_method[v.focal_key or v.focal_pair_id or v.candidate_id].append(v)
    total = len(verdicts)
    row = {
        "methods_total": len(by_method),
        "methods_tested": sum(1 for vs in by_method.values() if any(v.correct for v in vs)),
        "total": total,
    }
    for name, cat in _COLUMNS:
        n = sum(1 for v in verdicts if (v.correct if cat is None else v.category is cat))
        row[name] = n
        row[f"{name}_pct"] = round(100.0 * n / total, 2) if total else 0.0
    row["methods_tested_pct"] = (
        round(100.0 * row["methods_tested"] / row["methods_total"], 2) if row["methods_total"] else 0.0
    )
    return row


def aggregate(verdicts: Iterable[Verdict], focal_methods: Iterable[str] = ()) -> dict:
    """Per-project and overall verdict tallies plus method-level "tested" rates.

    ``focal_methods`` lists method keys expected to have candidates; those with
    none are left out of the totals and reported as warnings.
    """
    verdicts = list(verdicts)
    check_verdicts(verdicts)
    seen = {v.focal_key or v.focal_pair_id or v.candidate_id for v in verdicts}
    warnings = [f"no candidates for focal method {m}; excluded" for m in focal_methods if m not in seen]
    for w in warnings:
        log.warning(w)
    groups: dict[str, list[Verdict]] = defaultdict(list)
    for v in verdicts:
        groups[v.project or "all"].append(v)
    rows = {name: _row(vs) for name, vs in sorted(groups.items())}
    return {"projects": rows, "total": _row(verdicts), "warnings": warnings}


def format_table(summary: dict) -> str:
    """Plain-text table with the focal-method columns on the left, test cases on the right."""
    header = ["Project", "Tested", "Total", "Correct", "Passing", "Failing", "Build Error",
              "Syntax Error", "Total"]

    def fmt(row: dict, name: str) -> list[str]:
        cells = [name, f"{row['methods_tested']} ({row['methods_tested_pct']:.2f}%)", str(row["methods_total"])]
        cells += [f"{row[k]} ({row[k + '_pct']:.2f}%)" for k, _ in _COLUMNS]
        cells.append(str(row["total"]))
        return cells

    body = [fmt(row, name) for name, row in summary["projects"].items()]
    body.append(fmt(summary["total"], "Total"))
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in [header, *body]]
    lines.insert(1, "-" * len(lines[0]))
    lines.insert(len(lines) - 1, "-" * len(lines[0]))
    return "\n".join(lines) + "\n"
