"""Fixed-width float encodings for leaf values and whole documents.

Numbers standardize against the schema's running statistics, strings
become L1-normalized histograms of hashed byte n-grams (FNV-1a 64,
fixed constants, so histograms reproduce across platforms), and
categorical values one-hot with a trailing unknown slot.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .schema import (
    Bag,
    CategoricalLeaf,
    NumericLeaf,
    Product,
    SchemaNode,
    StringLeaf,
    Violation,
    validate,
)

__all__ = [
    "EncodingError",
    "LeafValue",
    "BagValue",
    "ProductValue",
    "EncodedDoc",
    "fnv1a64",
    "encode_numeric",
    "encode_string_ngram",
    "encode_categorical",
    "leaf_width",
    "encode_document",
    "absent_value",
]

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


class EncodingError(Exception):
    def __init__(self, message: str, violations: list[Violation] | None = None):
        super().__init__(message)
        self.violations = violations or []


@dataclass
class LeafValue:
    vector: np.ndarray  # shape (width,)


@dataclass
class BagValue:
    items: list["EncodedDoc"]


@dataclass
class ProductValue:
    children: dict[str, "EncodedDoc"]  # every schema field, present or not
    flags: dict[str, float]  # optional fields only: 1.0 present, 0.0 absent


EncodedDoc = Union[LeafValue, BagValue, ProductValue]


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def encode_numeric(v: float, mean: float, std: float) -> np.ndarray:
    """Standardized value ``(v - mean) / std``; a degenerate leaf
    (std == 0) always encodes to 0."""
    v = float(v)
    if not np.isfinite(v):
        raise EncodingError(f"non-finite number {v!r}")
    z = 0.0 if std == 0.0 else (v - mean) / std
    return np.array([z])


def encode_string_ngram(s: str, n: int, dim: int) -> np.ndarray:
    """L1-normalized histogram over hashed byte n-grams of ``s``.

    Strings shorter than ``n`` bytes have no n-grams and stay all-zero.
    """
    out = np.zeros(dim)
    raw = s.encode("utf-8")
    for i in range(len(raw) - n + 1):
        out[fnv1a64(raw[i:i + n]) % dim] += 1.0
    total = out.sum()
    if total > 0:
        out /= total
    return out


def encode_categorical(v: str, leaf: CategoricalLeaf) -> np.ndarray:
    """One-hot over the vocabulary; unseen values hit the extra last slot."""
    out = np.zeros(len(leaf.values) + 1)
    idx = leaf.index(v)
    out[len(leaf.values) if idx is None else idx] = 1.0
    return out


def leaf_width(leaf: SchemaNode) -> int:
    if isinstance(leaf, NumericLeaf):
        return 1
    if isinstance(leaf, StringLeaf):
        return leaf.hash_dim
    if isinstance(leaf, CategoricalLeaf):
        return len(leaf.values) + 1
    raise TypeError(f"not a leaf: {leaf.kind}")


def absent_value(schema: SchemaNode) -> EncodedDoc:
    """Neutral stand-in for a missing optional subtree: zero leaves,
    empty bags, recursively absent products with presence flags 0."""
    if isinstance(schema, Bag):
        return BagValue(items=[])
    if isinstance(schema, Product):
        return ProductValue(
            children={f.name: absent_value(f.schema) for f in schema.fields},
            flags={f.name: 0.0 for f in schema.fields if f.optional})
    return LeafValue(vector=np.zeros(leaf_width(schema)))


def _encode(value, schema: SchemaNode) -> EncodedDoc:
    if isinstance(schema, NumericLeaf):
        return LeafValue(encode_numeric(float(value), schema.mean, schema.std))
    if isinstance(schema, StringLeaf):
        return LeafValue(encode_string_ngram(value, schema.ngram_n,
                                             schema.hash_dim))
    if isinstance(schema, CategoricalLeaf):
        return LeafValue(encode_categorical(value, schema))
    if isinstance(schema, Bag):
        return BagValue([_encode(item, schema.child) for item in value])
    if isinstance(schema, Product):
        children: dict[str, EncodedDoc] = {}
        flags: dict[str, float] = {}
        for f in schema.fields:
            present = value.get(f.name) is not None
            if f.optional:
                flags[f.name] = 1.0 if present else 0.0
            children[f.name] = (_encode(value[f.name], f.schema) if present
                                else absent_value(f.schema))
        return ProductValue(children=children, flags=flags)
    raise EncodingError(f"cannot encode against schema node {schema.kind!r}")


def encode_document(doc, schema: SchemaNode) -> EncodedDoc:
    """Map a validated JSON document onto the schema tree.

    Raises EncodingError carrying the violation list if the document
    does not fit.
    """
    violations = validate(doc, schema)
    if violations:
        raise EncodingError(
            "; ".join(str(v) for v in violations), violations)
    return _encode(doc, schema)
