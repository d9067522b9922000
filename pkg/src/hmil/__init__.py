"""Hierarchical multi-instance learning for JSON-like tree-structured data.

The pipeline: infer a recursive schema from a corpus of JSON documents,
compile the schema into a permutation-invariant neural network (bags pool
their instances, products concatenate their fields), train it with labels
attached to whole documents, and verify the structural guarantees the
architecture is supposed to have.
"""

__version__ = "0.1.0"
