"""Recursive schema inference over corpora of JSON documents.

A schema is a tree of five node kinds: numeric, string (n-gram), and
categorical leaves, bags (homogeneous arrays), and products (objects
with a fixed field set). Inference folds per-document schemas together
with ``merge_schemas`` in one streaming pass; memory grows with the
schema and its vocabularies, never with the corpus.

Conventions: ``null`` means "field absent" and is never a kind; JSON
booleans are numeric 0/1; arrays must be homogeneous or inference
reports a conflict at the offending path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Union

__all__ = [
    "NumericLeaf",
    "StringLeaf",
    "CategoricalLeaf",
    "Bag",
    "Product",
    "ProductField",
    "Unknown",
    "SchemaNode",
    "SchemaError",
    "SchemaConflict",
    "Violation",
    "infer_schema",
    "merge_schemas",
    "validate",
    "structurally_equal",
    "schema_to_dict",
    "schema_from_dict",
    "dumps_schema",
    "loads_schema",
]

SCHEMA_VERSION = 1

DEFAULT_CATEGORICAL_THRESHOLD = 32
DEFAULT_NGRAM_N = 3
DEFAULT_HASH_DIM = 64


class SchemaError(Exception):
    """Schema inference or serialization failed."""


class SchemaConflict(SchemaError):
    """Two values at one JSON path have irreconcilable kinds."""

    def __init__(self, path: str, expected: str, actual: str):
        super().__init__(f"{path}: cannot reconcile {expected} with {actual}")
        self.path = path
        self.expected = expected
        self.actual = actual


@dataclass(frozen=True)
class NumericLeaf:
    count: int
    mean: float
    std: float

    kind = "numeric"


@dataclass(frozen=True)
class StringLeaf:
    count: int
    ngram_n: int
    hash_dim: int

    kind = "string"


@dataclass(frozen=True)
class CategoricalLeaf:
    count: int
    values: tuple[str, ...]  # sorted; index of a value is its position

    kind = "categorical"

    def index(self, value: str) -> int | None:
        try:
            return self.values.index(value)
        except ValueError:
            return None


@dataclass(frozen=True)
class Bag:
    count: int
    child: "SchemaNode"

    kind = "bag"


@dataclass(frozen=True)
class ProductField:
    name: str
    schema: "SchemaNode"
    optional: bool


@dataclass(frozen=True)
class Product:
    count: int
    fields: tuple[ProductField, ...]  # sorted by name

    kind = "product"

    def field(self, name: str) -> ProductField | None:
        for f in self.fields:
            if f.name == name:
                return f
        return None

    @property
    def field_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.fields)


@dataclass(frozen=True)
class Unknown:
    """Placeholder for the element kind of arrays never seen non-empty."""

    count: int = 0

    kind = "unknown"


SchemaNode = Union[NumericLeaf, StringLeaf, CategoricalLeaf, Bag, Product, Unknown]


@dataclass(frozen=True)
class Violation:
    path: str
    expected: str
    actual: str

    def __str__(self) -> str:
        return f"{self.path}: expected {self.expected}, got {self.actual}"


def _kind_of_value(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool) or isinstance(value, (int, float)):
        return "numeric"
    if isinstance(value, str):
        return "string"
    if isinstance(value, list):
        return "bag"
    if isinstance(value, dict):
        return "product"
    return type(value).__name__


def _schema_from_value(value, path: str) -> SchemaNode:
    """Single-document schema: every leaf has count 1, every field required."""
    kind = _kind_of_value(value)
    if kind == "null":
        raise SchemaConflict(path, "a JSON value", "null")
    if kind == "numeric":
        v = float(value)
        if not math.isfinite(v):
            raise SchemaConflict(path, "finite number", repr(value))
        return NumericLeaf(count=1, mean=v, std=0.0)
    if kind == "string":
        return CategoricalLeaf(count=1, values=(value,))
    if kind == "bag":
        child: SchemaNode = Unknown()
        for i, item in enumerate(value):
            child = _merge(child, _schema_from_value(item, f"{path}[{i}]"),
                           f"{path}[{i}]")
        return Bag(count=1, child=child)
    if kind == "product":
        fields = []
        for name in sorted(value.keys()):
            if value[name] is None:
                continue  # null == absent
            fields.append(ProductField(
                name=name,
                schema=_schema_from_value(value[name], f"{path}.{name}"),
                optional=False))
        return Product(count=1, fields=tuple(fields))
    raise SchemaConflict(path, "a JSON value", kind)


def _merge_numeric(a: NumericLeaf, b: NumericLeaf) -> NumericLeaf:
    n = a.count + b.count
    mean = (a.count * a.mean + b.count * b.mean) / n
    delta = b.mean - a.mean
    m2 = (a.count * a.std * a.std + b.count * b.std * b.std) \
        + delta * delta * (a.count * b.count / n)
    return NumericLeaf(count=n, mean=mean, std=math.sqrt(max(m2, 0.0) / n))


def _merge(a: SchemaNode, b: SchemaNode, path: str) -> SchemaNode:
    if isinstance(a, Unknown):
        return b
    if isinstance(b, Unknown):
        return a
    if isinstance(a, NumericLeaf) and isinstance(b, NumericLeaf):
        return _merge_numeric(a, b)
    if isinstance(a, StringLeaf) and isinstance(b, StringLeaf):
        if (a.ngram_n, a.hash_dim) != (b.ngram_n, b.hash_dim):
            raise SchemaConflict(path, f"n-gram config {(a.ngram_n, a.hash_dim)}",
                                 f"{(b.ngram_n, b.hash_dim)}")
        return StringLeaf(count=a.count + b.count, ngram_n=a.ngram_n,
                          hash_dim=a.hash_dim)
    if isinstance(a, StringLeaf) and isinstance(b, CategoricalLeaf):
        return StringLeaf(count=a.count + b.count, ngram_n=a.ngram_n,
                          hash_dim=a.hash_dim)
    if isinstance(a, CategoricalLeaf) and isinstance(b, StringLeaf):
        return StringLeaf(count=a.count + b.count, ngram_n=b.ngram_n,
                          hash_dim=b.hash_dim)
    if isinstance(a, CategoricalLeaf) and isinstance(b, CategoricalLeaf):
        return CategoricalLeaf(count=a.count + b.count,
                               values=tuple(sorted(set(a.values) | set(b.values))))
    if isinstance(a, Bag) and isinstance(b, Bag):
        return Bag(count=a.count + b.count,
                   child=_merge(a.child, b.child, f"{path}[]"))
    if isinstance(a, Product) and isinstance(b, Product):
        total = a.count + b.count
        names = sorted({f.name for f in a.fields} | {f.name for f in b.fields})
        fields = []
        for name in names:
            fa, fb = a.field(name), b.field(name)
            if fa is not None and fb is not None:
                merged = _merge(fa.schema, fb.schema, f"{path}.{name}")
            else:
                merged = (fa or fb).schema
            fields.append(ProductField(
                name=name, schema=merged,
                optional=_node_count(merged) < total))
        return Product(count=total, fields=tuple(fields))
    raise SchemaConflict(path, a.kind, b.kind)


def _node_count(node: SchemaNode) -> int:
    return node.count


def merge_schemas(a: SchemaNode, b: SchemaNode) -> SchemaNode:
    """Least upper bound of two schemas.

    Counts add, numeric statistics combine by the parallel mean/variance
    formula, vocabularies union, and a product field present in only one
    operand comes out optional. Commutative; associative up to float
    round-off in leaf statistics.
    """
    return _merge(a, b, "$")


def _apply_categorical_threshold(node: SchemaNode, threshold: int,
                                 ngram_n: int, hash_dim: int) -> SchemaNode:
    if isinstance(node, CategoricalLeaf) and len(node.values) > threshold:
        return StringLeaf(count=node.count, ngram_n=ngram_n, hash_dim=hash_dim)
    if isinstance(node, Bag):
        return Bag(count=node.count,
                   child=_apply_categorical_threshold(node.child, threshold,
                                                      ngram_n, hash_dim))
    if isinstance(node, Product):
        return Product(count=node.count, fields=tuple(
            ProductField(f.name,
                         _apply_categorical_threshold(f.schema, threshold,
                                                      ngram_n, hash_dim),
                         f.optional)
            for f in node.fields))
    return node


def _find_unknown(node: SchemaNode, path: str) -> str | None:
    if isinstance(node, Unknown):
        return path
    if isinstance(node, Bag):
        return _find_unknown(node.child, f"{path}[]")
    if isinstance(node, Product):
        for f in node.fields:
            found = _find_unknown(f.schema, f"{path}.{f.name}")
            if found:
                return found
    return None


def infer_schema(docs: Iterable, categorical_threshold: int = DEFAULT_CATEGORICAL_THRESHOLD,
                 ngram_n: int = DEFAULT_NGRAM_N,
                 hash_dim: int = DEFAULT_HASH_DIM) -> SchemaNode:
    """Fold a stream of JSON values into one schema.

    String leaves end up categorical iff their corpus-wide distinct-value
    count is at most ``categorical_threshold``; beyond that they become
    hashed n-gram histograms with the given config. Raises SchemaError on
    an empty corpus, SchemaConflict on irreconcilable kinds, and a
    diagnostic if some array never showed a non-empty instance.
    """
    merged: SchemaNode | None = None
    for doc in docs:
        doc_schema = _schema_from_value(doc, "$")
        merged = doc_schema if merged is None else _merge(merged, doc_schema, "$")
        # cap vocabulary growth as we go; the end state is unchanged
        merged = _apply_categorical_threshold(merged, categorical_threshold,
                                              ngram_n, hash_dim)
    if merged is None:
        raise SchemaError("empty corpus")
    unknown_at = _find_unknown(merged, "$")
    if unknown_at is not None:
        raise SchemaError(
            f"{unknown_at}: array was empty in every document; "
            "element kind cannot be inferred")
    return merged


def validate(doc, schema: SchemaNode, path: str = "$") -> list[Violation]:
    """All points where ``doc`` does not fit ``schema``; empty list if it does.

    Unseen categorical values are fine (they encode to the unknown slot);
    missing required fields, extra fields, kind mismatches, and non-finite
    numbers are violations.
    """
    out: list[Violation] = []
    actual = _kind_of_value(doc)

    if isinstance(schema, NumericLeaf):
        if actual != "numeric":
            out.append(Violation(path, "numeric", actual))
        elif not math.isfinite(float(doc)):
            out.append(Violation(path, "finite number", repr(doc)))
    elif isinstance(schema, (StringLeaf, CategoricalLeaf)):
        if actual != "string":
            out.append(Violation(path, "string", actual))
    elif isinstance(schema, Bag):
        if actual != "bag":
            out.append(Violation(path, "array", actual))
        else:
            for i, item in enumerate(doc):
                out.extend(validate(item, schema.child, f"{path}[{i}]"))
    elif isinstance(schema, Product):
        if actual != "product":
            out.append(Violation(path, "object", actual))
        else:
            known = set(schema.field_names)
            for f in schema.fields:
                value = doc.get(f.name)
                if value is None:  # missing or explicit null: absent
                    if not f.optional:
                        out.append(Violation(f"{path}.{f.name}",
                                             f"required field {f.name!r}",
                                             "missing"))
                else:
                    out.extend(validate(value, f.schema, f"{path}.{f.name}"))
            for name in sorted(doc.keys()):
                if name not in known and doc[name] is not None:
                    out.append(Violation(f"{path}.{name}", "no such field",
                                         "unexpected field"))
    elif isinstance(schema, Unknown):
        out.append(Violation(path, "resolved element kind", actual))
    return out


def structurally_equal(a: SchemaNode, b: SchemaNode) -> bool:
    """Equality of shape: kinds, field names/optionality, vocabularies and
    n-gram configs, ignoring counts and numeric statistics."""
    if a.kind != b.kind:
        return False
    if isinstance(a, StringLeaf):
        return (a.ngram_n, a.hash_dim) == (b.ngram_n, b.hash_dim)
    if isinstance(a, CategoricalLeaf):
        return a.values == b.values
    if isinstance(a, Bag):
        return structurally_equal(a.child, b.child)
    if isinstance(a, Product):
        if a.field_names != b.field_names:
            return False
        return all(fa.optional == fb.optional
                   and structurally_equal(fa.schema, fb.schema)
                   for fa, fb in zip(a.fields, b.fields))
    return True  # numeric / unknown carry no structure beyond kind


def _node_to_dict(node: SchemaNode) -> dict:
    if isinstance(node, NumericLeaf):
        return {"kind": "numeric", "count": node.count,
                "mean": node.mean, "std": node.std}
    if isinstance(node, StringLeaf):
        return {"kind": "string", "count": node.count,
                "ngram_n": node.ngram_n, "hash_dim": node.hash_dim}
    if isinstance(node, CategoricalLeaf):
        return {"kind": "categorical", "count": node.count,
                "values": list(node.values)}
    if isinstance(node, Bag):
        return {"kind": "bag", "count": node.count,
                "child": _node_to_dict(node.child)}
    if isinstance(node, Product):
        return {"kind": "product", "count": node.count,
                "fields": {f.name: {"optional": f.optional,
                                    "schema": _node_to_dict(f.schema)}
                           for f in node.fields}}
    raise SchemaError(f"cannot serialize unresolved schema node {node.kind!r}")


def _node_from_dict(d: dict) -> SchemaNode:
    kind = d.get("kind")
    if kind == "numeric":
        return NumericLeaf(count=d["count"], mean=d["mean"], std=d["std"])
    if kind == "string":
        return StringLeaf(count=d["count"], ngram_n=d["ngram_n"],
                          hash_dim=d["hash_dim"])
    if kind == "categorical":
        return CategoricalLeaf(count=d["count"], values=tuple(d["values"]))
    if kind == "bag":
        return Bag(count=d["count"], child=_node_from_dict(d["child"]))
    if kind == "product":
        fields = tuple(
            ProductField(name=name, schema=_node_from_dict(fd["schema"]),
                         optional=fd["optional"])
            for name, fd in sorted(d["fields"].items()))
        return Product(count=d["count"], fields=fields)
    raise SchemaError(f"unknown schema node kind {kind!r}")


def schema_to_dict(schema: SchemaNode) -> dict:
    return {"schema_version": SCHEMA_VERSION, "root": _node_to_dict(schema)}


def schema_from_dict(d: dict) -> SchemaNode:
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version!r}")
    return _node_from_dict(d["root"])


def dumps_schema(schema: SchemaNode) -> str:
    """Canonical JSON: sorted keys, compact separators, versioned."""
    return json.dumps(schema_to_dict(schema), sort_keys=True,
                      separators=(",", ":"))


def loads_schema(text: str) -> SchemaNode:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema file is not valid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise SchemaError("schema file must hold a JSON object")
    return schema_from_dict(d)
