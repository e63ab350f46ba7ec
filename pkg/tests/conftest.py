import json
import sys
from pathlib import Path

import pytest

from focalforge.miner import mine_repository
from focalforge.records import to_record

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = FIXTURES / "corpus"


def corpus_repos() -> list[Path]:
    return sorted(p for p in CORPUS.iterdir() if p.is_dir())


@pytest.fixture(scope="session")
def labels() -> dict:
    return json.loads((CORPUS / "labels.json").read_text())


@pytest.fixture(scope="session")
def mined():
    """(repo name, pairs, report) for every fixture repository."""
    return [(root.name, *mine_repository(root)) for root in corpus_repos()]


@pytest.fixture(scope="session")
def records(mined):
    return [to_record(p) for _, pairs, _ in mined for p in pairs]


def pair_key(repo: str, pair) -> tuple:
    return (repo, pair.test_class.rel_path, pair.test_class.name, pair.test_case.name,
            pair.focal_class.qualified_name, pair.focal_method.name, pair.focal_method.arity,
            pair.class_match, pair.method_match)


def label_key(row: dict) -> tuple:
    return (row["repo"], row["test_class_path"], row["test_class"], row["test_case"],
            row["focal_class"], row["focal_method"], row["arity"], row["class_match"],
            row["method_match"])


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
