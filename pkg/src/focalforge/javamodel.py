"""Queryable model of Java classes, methods, fields and annotations.

Built on the tree-sitter Java grammar. Models are frozen dataclasses so they
can be shared freely between threads and pickled across processes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import tree_sitter_java
from tree_sitter import Language, Node, Parser

from .lexer import strip_comments

CLASS_DECLARATIONS = frozenset(
    {
        "class_declaration",
        "interface_declaration",
        "enum_declaration",
        "record_declaration",
        "annotation_type_declaration",
    }
)


class ParseFailure(Exception):
    """Raised when the grammar rejects a source file."""

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


@dataclass(frozen=True)
class SourceFile:
    repo_id: str
    rel_path: str
    content: str

    def __post_init__(self):
        if "\\" in self.rel_path:
            object.__setattr__(self, "rel_path", self.rel_path.replace("\\", "/"))


@dataclass(frozen=True)
class FieldModel:
    name: str
    declared_type: str
    modifiers: frozenset[str] = frozenset()

    @property
    def is_public(self) -> bool:
        return "public" in self.modifiers

    def declaration(self) -> str:
        mods = " ".join(m for m in _ordered(self.modifiers))
        return f"{mods} {self.declared_type} {self.name};".strip()


@dataclass(frozen=True)
class MethodModel:
    name: str
    signature: str
    body_text: str
    annotations: tuple[str, ...] = ()
    invocations: tuple[str, ...] = ()
    modifiers: frozenset[str] = frozenset()
    is_constructor: bool = False
    return_type: str | None = None
    param_types: tuple[str, ...] = ()
    type_parameters: tuple[str, ...] = ()
    # arity of each call site, parallel to ``invocations``
    call_arities: tuple[int, ...] = ()
    span: tuple[int, int] = (0, 0)

    @property
    def is_public(self) -> bool:
        return "public" in self.modifiers

    @property
    def arity(self) -> int:
        return len(self.param_types)


@dataclass(frozen=True)
class ClassModel:
    name: str
    qualified_name: str
    rel_path: str
    methods: tuple[MethodModel, ...] = ()
    fields: tuple[FieldModel, ...] = ()
    is_nested: bool = False
    kind: str = "class"
    type_parameters: tuple[str, ...] = ()
    repo_id: str = ""
    package: str = ""

    @property
    def constructors(self) -> tuple[MethodModel, ...]:
        return tuple(m for m in self.methods if m.is_constructor)

    def methods_named(self, name: str) -> list[MethodModel]:
        return [m for m in self.methods if m.name == name and not m.is_constructor]


def _ordered(modifiers) -> list[str]:
    order = {m: i for i, m in enumerate(
        ("public", "protected", "private", "abstract", "static", "final", "transient",
         "volatile", "synchronized", "native", "strictfp", "default", "sealed", "non-sealed")
    )}
    return sorted(modifiers, key=lambda m: (order.get(m, len(order)), m))


@lru_cache(maxsize=1)
def java_language() -> Language:
    return Language(tree_sitter_java.language())


def new_parser() -> Parser:
    # Parser objects are not thread-safe; create one per call site.
    return Parser(java_language())


def first_error(node: Node) -> Node | None:
    """Depth-first search for the first ERROR or MISSING node."""
    if not node.has_error:
        return None
    stack = [node]
    while stack:
        n = stack.pop()
        if n.is_error or n.is_missing:
            return n
        stack.extend(c for c in reversed(n.children) if c.has_error or c.is_missing)
    return node


def describe_error(node: Node) -> str:
    row, col = node.start_point
    if node.is_missing:
        return f"missing '{node.type}' at line {row + 1}, column {col + 1}"
    text = node.text.decode("utf-8", "replace")[:40]
    return f"unexpected input {text!r} at line {row + 1}, column {col + 1}"


class _Extractor:
    def __init__(self, source: SourceFile, data: bytes):
        self.source = source
        self.data = data
        ascii_only = len(data) == len(source.content)
        self._char_of = None if ascii_only else _byte_to_char_table(data)
        self.package = ""
        self.classes: list[ClassModel] = []

    def text(self, node: Node | None) -> str:
        if node is None:
            return ""
        return self.data[node.start_byte : node.end_byte].decode("utf-8")

    def char_offset(self, byte_offset: int) -> int:
        return byte_offset if self._char_of is None else self._char_of[byte_offset]

    def run(self, root: Node) -> list[ClassModel]:
        for child in root.named_children:
            if child.type == "package_declaration":
                name = next((c for c in child.named_children if c.type != "annotation"
                             and c.type != "marker_annotation"), None)
                self.package = self.text(name)
            elif child.type in CLASS_DECLARATIONS:
                self.visit_class(child, self.package, nested=False)
        return self.classes

    def visit_class(self, node: Node, outer: str, nested: bool) -> None:
        name = self.text(node.child_by_field_name("name"))
        qualified = f"{outer}.{name}" if outer else name
        type_params = _type_parameter_names(self, node.child_by_field_name("type_parameters"))
        kind = node.type.removesuffix("_declaration")
        interface_like = kind in ("interface", "annotation_type")

        methods: list[MethodModel] = []
        fields: list[FieldModel] = []
        inner: list[Node] = []
        body = node.child_by_field_name("body")
        if node.type == "record_declaration":
            for param in _children_of_type(node.child_by_field_name("parameters"), "formal_parameter"):
                fields.append(FieldModel(self.text(param.child_by_field_name("name")),
                                         self.text(param.child_by_field_name("type")),
                                         frozenset({"private", "final"})))
        for member in _members(body):
            if member.type in ("method_declaration", "constructor_declaration",
                               "compact_constructor_declaration", "annotation_type_element_declaration"):
                methods.append(self.method(member, interface_like))
            elif member.type in ("field_declaration", "constant_declaration"):
                fields.extend(self.fields(member, interface_like))
            elif member.type in CLASS_DECLARATIONS:
                inner.append(member)
        self.classes.append(
            ClassModel(
                name=name,
                qualified_name=qualified,
                rel_path=self.source.rel_path,
                methods=tuple(methods),
                fields=tuple(fields),
                is_nested=nested,
                kind=kind,
                type_parameters=type_params,
                repo_id=self.source.repo_id,
                package=self.package,
            )
        )
        for child in inner:
            self.visit_class(child, qualified, nested=True)

    def modifiers(self, node: Node) -> tuple[frozenset[str], tuple[str, ...]]:
        mods = next((c for c in node.children if c.type == "modifiers"), None)
        if mods is None:
            return frozenset(), ()
        keywords, annotations = set(), []
        for c in mods.children:
            if c.type in ("annotation", "marker_annotation"):
                annotations.append(_simple_name(self.text(c.child_by_field_name("name"))))
            else:
                keywords.add(self.text(c))
        return frozenset(keywords), tuple(annotations)

    def method(self, node: Node, interface_like: bool) -> MethodModel:
        modifiers, annotations = self.modifiers(node)
        if interface_like and "private" not in modifiers:
            modifiers = modifiers | {"public"}
        is_ctor = node.type in ("constructor_declaration", "compact_constructor_declaration")
        params = node.child_by_field_name("parameters")
        param_types = []
        for p in params.named_children if params is not None else ():
            if p.type == "formal_parameter":
                param_types.append(strip_comments(self.text(p.child_by_field_name("type"))))
            elif p.type == "spread_parameter":
                t = next((c for c in p.named_children if c.type not in ("modifiers", "variable_declarator")), None)
                param_types.append(strip_comments(self.text(t)) + "...")
        return_node = node.child_by_field_name("type")
        body = node.child_by_field_name("body")

        # header: everything between the modifiers block's keywords and the body
        header_start = node.start_byte
        mods = next((c for c in node.children if c.type == "modifiers"), None)
        if mods is not None:
            keyword_children = [c for c in mods.children
                                if c.type not in ("annotation", "marker_annotation")]
            header_start = keyword_children[0].start_byte if keyword_children else mods.end_byte
        header_end = body.start_byte if body is not None else node.end_byte
        header = strip_comments(self.data[header_start:header_end].decode("utf-8")).rstrip(";").strip()

        sites = []
        if body is not None:
            for call in _walk(body, "method_invocation"):
                name = call.child_by_field_name("name")
                args = call.child_by_field_name("arguments")
                sites.append((name.start_byte, self.text(name),
                              len(args.named_children) if args is not None else 0))
        sites.sort()
        invocations = [name for _, name, _ in sites]
        arities = [arity for _, _, arity in sites]

        start, end = self.char_offset(node.start_byte), self.char_offset(node.end_byte)
        return MethodModel(
            name=self.text(node.child_by_field_name("name")),
            signature=header,
            body_text=self.source.content[start:end],
            annotations=annotations,
            invocations=tuple(invocations),
            modifiers=modifiers,
            is_constructor=is_ctor,
            return_type=None if is_ctor else strip_comments(self.text(return_node)),
            param_types=tuple(param_types),
            type_parameters=_type_parameter_names(self, node.child_by_field_name("type_parameters")),
            call_arities=tuple(arities),
            span=(start, end),
        )

    def fields(self, node: Node, interface_like: bool) -> list[FieldModel]:
        modifiers, _ = self.modifiers(node)
        if interface_like:
            modifiers = modifiers | {"public", "static", "final"}
        declared_type = strip_comments(self.text(node.child_by_field_name("type")))
        out = []
        for decl in node.children_by_field_name("declarator"):
            name = self.text(decl.child_by_field_name("name"))
            dims = decl.child_by_field_name("dimensions")
            out.append(FieldModel(name, declared_type + (self.text(dims) if dims else ""), modifiers))
        return out


def _byte_to_char_table(data: bytes) -> list[int]:
    table = [0] * (len(data) + 1)
    chars = 0
    for i, b in enumerate(data):
        table[i] = chars
        if b & 0xC0 != 0x80:  # not a UTF-8 continuation byte
            chars += 1
    table[len(data)] = chars
    return table


def _members(body: Node | None):
    if body is None:
        return
    for child in body.named_children:
        if child.type == "enum_body_declarations":
            yield from child.named_children
        else:
            yield child


def _children_of_type(node: Node | None, kind: str):
    if node is None:
        return []
    return [c for c in node.named_children if c.type == kind]


def _walk(node: Node, kind: str):
    stack = [node]
    while stack:
        n = stack.pop()
        if n.type == kind:
            yield n
        stack.extend(reversed(n.children))


def _type_parameter_names(ex: _Extractor, node: Node | None) -> tuple[str, ...]:
    names = []
    for tp in _children_of_type(node, "type_parameter"):
        ident = next((c for c in tp.named_children if c.type in ("type_identifier", "identifier")), None)
        if ident is not None:
            names.append(ex.text(ident))
    return tuple(names)


def _simple_name(name: str) -> str:
    return name.rsplit(".", 1)[-1].strip()


def parse_file(file: SourceFile) -> list[ClassModel]:
    """Parse ``file`` into class models, outermost classes first.

    Nested member classes follow their enclosing class. Anonymous and local
    classes are not modelled; calls made inside them still count towards
    the enclosing method's invocations.

    Raises:
        ParseFailure: if the grammar reports any syntax error.
    """
    data = file.content.encode("utf-8")
    tree = new_parser().parse(data)
    err = first_error(tree.root_node)
    if err is not None:
        raise ParseFailure(file.rel_path, describe_error(err))
    return _Extractor(file, data).run(tree.root_node)


def is_test_method(method: MethodModel) -> bool:
    return any(_simple_name(a.split("(", 1)[0]) == "Test" for a in method.annotations)


def is_test_class(cls: ClassModel) -> bool:
    return any(is_test_method(m) for m in cls.methods)
