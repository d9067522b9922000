"""Ragged batching: pack encoded documents into flat per-node matrices.

Variable-length bags never pad.  Each bag node gets an int64 offsets
array of length parent_rows + 1; instances of bag i occupy rows
offsets[i]:offsets[i+1] of the child matrices.  Each product node gets
a presence matrix with one column per optional field (kept even at
width zero so every node knows its row count).

Node paths name positions in the schema tree: "$" at the root, ".name"
steps into a product field, "[]" steps into a bag's element.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schema import Bag, Product, SchemaNode
from .encoding import BagValue, EncodedDoc, LeafValue, ProductValue, leaf_width

__all__ = ["RaggedBatch", "BatchError", "build_batch", "node_paths"]


class BatchError(Exception):
    pass


@dataclass
class RaggedBatch:
    batch_size: int
    data: dict[str, np.ndarray]      # leaf path -> (rows, width) float64
    offsets: dict[str, np.ndarray]   # bag path -> (parent_rows + 1,) int64
    presence: dict[str, np.ndarray]  # product path -> (rows, n_optional)


def node_paths(schema: SchemaNode, path: str = "$") -> list[tuple[str, SchemaNode]]:
    """Preorder list of (path, node) pairs for the whole tree."""
    out = [(path, schema)]
    if isinstance(schema, Bag):
        out.extend(node_paths(schema.child, path + "[]"))
    elif isinstance(schema, Product):
        for f in schema.fields:
            out.extend(node_paths(f.schema, path + "." + f.name))
    return out


def _walk(enc: EncodedDoc, node: SchemaNode, path: str, doc_index: int,
          data_acc, off_acc, pres_acc) -> None:
    if isinstance(node, Bag):
        if not isinstance(enc, BagValue):
            raise BatchError(
                f"document {doc_index} does not match the schema at {path}")
        off = off_acc[path]
        off.append(off[-1] + len(enc.items))
        for item in enc.items:
            _walk(item, node.child, path + "[]", doc_index,
                  data_acc, off_acc, pres_acc)
    elif isinstance(node, Product):
        if not isinstance(enc, ProductValue):
            raise BatchError(
                f"document {doc_index} does not match the schema at {path}")
        pres_acc[path].append(
            [enc.flags[f.name] for f in node.fields if f.optional])
        for f in node.fields:
            _walk(enc.children[f.name], f.schema, path + "." + f.name,
                  doc_index, data_acc, off_acc, pres_acc)
    else:
        if not isinstance(enc, LeafValue):
            raise BatchError(
                f"document {doc_index} does not match the schema at {path}")
        data_acc[path].append(enc.vector)


def build_batch(docs: list[EncodedDoc], schema: SchemaNode) -> RaggedBatch:
    """Batch encoded documents.  Document order is preserved: batching
    the concatenation of two lists yields, per node, the row-wise
    concatenation of their batches with shifted offsets."""
    paths = node_paths(schema)
    data_acc: dict[str, list[np.ndarray]] = {}
    off_acc: dict[str, list[int]] = {}
    pres_acc: dict[str, list[list[float]]] = {}
    widths: dict[str, int] = {}
    n_opt: dict[str, int] = {}
    for path, node in paths:
        if isinstance(node, Bag):
            off_acc[path] = [0]
        elif isinstance(node, Product):
            pres_acc[path] = []
            n_opt[path] = sum(1 for f in node.fields if f.optional)
        else:
            data_acc[path] = []
            widths[path] = leaf_width(node)

    for i, enc in enumerate(docs):
        _walk(enc, schema, "$", i, data_acc, off_acc, pres_acc)

    data = {p: (np.vstack(vecs) if vecs else np.empty((0, widths[p])))
            for p, vecs in data_acc.items()}
    offsets = {p: np.asarray(off, dtype=np.int64)
               for p, off in off_acc.items()}
    presence = {p: (np.asarray(rows, dtype=np.float64).reshape(len(rows), n_opt[p]))
                for p, rows in pres_acc.items()}
    return RaggedBatch(batch_size=len(docs), data=data, offsets=offsets,
                       presence=presence)
