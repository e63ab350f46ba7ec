"""Serializable corpus rows.

A :class:`PairRecord` is the flat, self-contained form of a mapped pair:
it carries everything needed to render focal context or grade a candidate
without going back to the repository.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field

from .miner import MappedPair

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class TestCaseInfo:
    __test__ = False  # not a pytest class

    name: str
    body: str


@dataclass(frozen=True)
class FocalMethodInfo:
    name: str
    signature: str
    body: str
    param_types: tuple[str, ...] = ()
    type_parameters: tuple[str, ...] = ()


@dataclass(frozen=True)
class FocalClassInfo:
    name: str
    qualified_name: str
    package: str = ""
    constructor_signatures: tuple[str, ...] = ()
    method_signatures: tuple[str, ...] = ()
    field_declarations: tuple[str, ...] = ()
    type_parameters: tuple[str, ...] = ()


@dataclass(frozen=True)
class ContextInfo:
    level: str
    text: str
    token_count: int
    truncated: bool


@dataclass(frozen=True)
class PairRecord:
    pair_id: str
    repo_id: str
    test_class_path: str
    test_class: str
    test_case: TestCaseInfo
    focal_class_path: str
    focal_class: FocalClassInfo
    focal_method: FocalMethodInfo
    class_match: str
    method_match: str
    context: ContextInfo | None = None
    schema_version: int = field(default=SCHEMA_VERSION)

    def to_dict(self) -> dict:
        data = asdict(self)
        if self.context is None:
            del data["context"]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> PairRecord:
        data = dict(data)
        data["test_case"] = TestCaseInfo(**data["test_case"])
        fm = data["focal_method"]
        data["focal_method"] = FocalMethodInfo(
            **{**fm, "param_types": tuple(fm.get("param_types", ())),
               "type_parameters": tuple(fm.get("type_parameters", ()))}
        )
        fc = data["focal_class"]
        data["focal_class"] = FocalClassInfo(
            **{k: tuple(v) if isinstance(v, list) else v for k, v in fc.items()}
        )
        if data.get("context") is not None:
            data["context"] = ContextInfo(**data["context"])
        return cls(**data)


def pair_id(repo_id: str, test_path: str, test_class: str, test_name: str, span_start: int) -> str:
    key = f"{repo_id}\0{test_path}\0{test_class}\0{test_name}\0{span_start}"
    return hashlib.sha1(key.encode("utf-8")).hexdigest()[:16]


def to_record(pair: MappedPair) -> PairRecord:
    fc, fm = pair.focal_class, pair.focal_method
    others = [m for m in fc.methods if not m.is_constructor and m.is_public and m is not fm]
    return PairRecord(
        pair_id=pair_id(pair.repo_id, pair.test_class.rel_path, pair.test_class.qualified_name,
                        pair.test_case.name, pair.test_case.span[0]),
        repo_id=pair.repo_id,
        test_class_path=pair.test_class.rel_path,
        test_class=pair.test_class.qualified_name,
        test_case=TestCaseInfo(pair.test_case.name, pair.test_case.body_text),
        focal_class_path=fc.rel_path,
        focal_class=FocalClassInfo(
            name=fc.name,
            qualified_name=fc.qualified_name,
            package=fc.package,
            constructor_signatures=tuple(c.signature for c in fc.constructors),
            method_signatures=tuple(m.signature for m in others),
            field_declarations=tuple(f.declaration() for f in fc.fields if f.is_public),
            type_parameters=fc.type_parameters,
        ),
        focal_method=FocalMethodInfo(fm.name, fm.signature, fm.body_text, fm.param_types, fm.type_parameters),
        class_match=pair.class_match,
        method_match=pair.method_match,
    )
