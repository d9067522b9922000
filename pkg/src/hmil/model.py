"""Compile a schema into a hierarchical permutation-invariant network.

Each bag node becomes: a per-instance dense layer, order-insensitive
pooling over every bag's rows, an appended non-empty indicator column,
and a linear map producing the bag embedding.  Each product node
concatenates child outputs plus presence flags for its optional fields
and mixes them with a dense layer.  A two-layer head on the root
representation produces task outputs.

The linear map after pooling keeps two facts checkable: an extra
per-instance linear layer composes into it exactly (``collapse_model``),
and with tanh units every embedding coordinate obeys the
data-independent bound returned by ``embedding_bound``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from typing import Union

import numpy as np

from .batching import RaggedBatch
from .encoding import leaf_width
from .nn import (
    IDENTITY,
    RELU,
    TANH,
    Activation,
    Tape,
    Tensor,
    concat_cols,
    dense_forward,
    glorot_uniform,
    segment_max,
    segment_mean,
)
from .schema import Bag, Product, SchemaNode, dumps_schema, loads_schema

__all__ = [
    "ModelConfig",
    "Model",
    "ModelError",
    "ModelLoadError",
    "build_model",
    "build_two_matrix_variant",
    "collapse_model",
    "collapse_equivalence_check",
    "forward",
    "forward_with_embeddings",
    "embed",
    "embedding_bound",
    "param_count",
    "save_model",
    "load_model",
    "describe_model",
]

MAGIC = b"HMIL"
FORMAT_VERSION = 1

_ACTIVATIONS = {"tanh": TANH, "relu": RELU}
_AGGREGATIONS = ("mean", "max", "meanmax")


class ModelError(Exception):
    pass


class ModelLoadError(ModelError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 32
    hidden_dim: int = 32
    output_dim: int = 1
    activation: str = "tanh"
    aggregation: str = "mean"
    seed: int = 0

    def __post_init__(self):
        for name in ("embed_dim", "hidden_dim", "output_dim"):
            if getattr(self, name) < 1:
                raise ModelError(f"{name} must be >= 1")
        if self.activation not in _ACTIVATIONS:
            raise ModelError(f"unknown activation {self.activation!r}")
        if self.aggregation not in _AGGREGATIONS:
            raise ModelError(f"unknown aggregation {self.aggregation!r}")


class LeafNet:
    """Pass-through for encoded leaf matrices; holds no parameters."""

    def __init__(self, path: str, node: SchemaNode):
        self.path = path
        self.node = node
        self.out_dim = leaf_width(node)

    def own_params(self) -> list[Tensor]:
        return []


class BagNet:
    def __init__(self, path: str, child: "Net", phi_w: Tensor, phi_b: Tensor,
                 post_w: Tensor, post_b: Tensor, aggregation: str,
                 activation: Activation, inner_w: Tensor | None = None):
        self.path = path
        self.child = child
        self.phi_w = phi_w
        self.phi_b = phi_b
        self.inner_w = inner_w
        self.post_w = post_w
        self.post_b = post_b
        self.aggregation = aggregation
        self.activation = activation
        self.out_dim = post_w.cols

    def own_params(self) -> list[Tensor]:
        inner = [] if self.inner_w is None else [self.inner_w]
        return [self.phi_w, self.phi_b, *inner, self.post_w, self.post_b]


class ProductNet:
    def __init__(self, path: str, children: list[tuple[str, "Net"]],
                 n_optional: int, comb_w: Tensor, comb_b: Tensor,
                 activation: Activation):
        self.path = path
        self.children = children
        self.n_optional = n_optional
        self.comb_w = comb_w
        self.comb_b = comb_b
        self.activation = activation
        self.out_dim = comb_w.cols

    def own_params(self) -> list[Tensor]:
        return [self.comb_w, self.comb_b]


Net = Union[LeafNet, BagNet, ProductNet]


class Head:
    def __init__(self, w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor,
                 activation: Activation):
        self.w1 = w1
        self.b1 = b1
        self.w2 = w2
        self.b2 = b2
        self.activation = activation

    def own_params(self) -> list[Tensor]:
        return [self.w1, self.b1, self.w2, self.b2]


@dataclass
class Model:
    schema: SchemaNode
    config: ModelConfig
    root: Net
    head: Head

    def parameters(self) -> list[Tensor]:
        """Module-tree preorder (each node's own tensors, then its
        children's), head last.  Serialization relies on this order."""
        out: list[Tensor] = []

        def visit(net: Net) -> None:
            out.extend(net.own_params())
            if isinstance(net, BagNet):
                visit(net.child)
            elif isinstance(net, ProductNet):
                for _, child in net.children:
                    visit(child)

        visit(self.root)
        out.extend(self.head.own_params())
        return out

    def bag_paths(self) -> list[str]:
        out = []

        def visit(net: Net) -> None:
            if isinstance(net, BagNet):
                out.append(net.path)
                visit(net.child)
            elif isinstance(net, ProductNet):
                for _, child in net.children:
                    visit(child)

        visit(self.root)
        return out


def _agg_width(aggregation: str, embed_dim: int) -> int:
    return 2 * embed_dim if aggregation == "meanmax" else embed_dim


def _bias_init(rng: np.random.Generator, fan_in: int, dim: int) -> Tensor:
    # nonzero biases keep pre-activations of all-zero rows off the relu
    # kink, which would otherwise break finite-difference checks exactly;
    # fan_in 0 happens for products inferred from field-free objects
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return Tensor(rng.uniform(-bound, bound, dim))


def _build_net(node: SchemaNode, path: str, config: ModelConfig,
               rng: np.random.Generator, act: Activation,
               inner_dim: int | None) -> Net:
    if isinstance(node, Bag):
        child = _build_net(node.child, path + "[]", config, rng, act,
                           inner_dim)
        k = config.embed_dim
        phi_w = glorot_uniform(rng, child.out_dim, k)
        phi_b = _bias_init(rng, child.out_dim, k)
        inner_w = None
        agg_dim = _agg_width(config.aggregation, k)
        if inner_dim is not None:
            inner_w = glorot_uniform(rng, k, inner_dim)
            agg_dim = inner_dim  # mean pooling only; checked by caller
        post_w = glorot_uniform(rng, agg_dim + 1, k)
        post_b = _bias_init(rng, agg_dim + 1, k)
        return BagNet(path, child, phi_w, phi_b, post_w, post_b,
                      config.aggregation, act, inner_w)
    if isinstance(node, Product):
        children = [(f.name, _build_net(f.schema, f"{path}.{f.name}", config,
                                        rng, act, inner_dim))
                    for f in node.fields]
        n_optional = sum(1 for f in node.fields if f.optional)
        in_dim = sum(c.out_dim for _, c in children) + n_optional
        comb_w = glorot_uniform(rng, in_dim, config.hidden_dim)
        comb_b = _bias_init(rng, in_dim, config.hidden_dim)
        return ProductNet(path, children, n_optional, comb_w, comb_b, act)
    return LeafNet(path, node)


def _build(schema: SchemaNode, config: ModelConfig,
           inner_dim: int | None) -> Model:
    rng = np.random.default_rng(config.seed)
    act = _ACTIVATIONS[config.activation]
    root = _build_net(schema, "$", config, rng, act, inner_dim)
    w1 = glorot_uniform(rng, root.out_dim, config.hidden_dim)
    b1 = _bias_init(rng, root.out_dim, config.hidden_dim)
    w2 = glorot_uniform(rng, config.hidden_dim, config.output_dim)
    b2 = _bias_init(rng, config.hidden_dim, config.output_dim)
    return Model(schema=schema, config=config, root=root,
                 head=Head(w1, b1, w2, b2, act))


def build_model(schema: SchemaNode, config: ModelConfig) -> Model:
    """Deterministic compilation: same schema, config, and seed give
    bit-identical initial parameters."""
    return _build(schema, config, inner_dim=None)


def build_two_matrix_variant(schema: SchemaNode, config: ModelConfig,
                             inner_dim: int = 8) -> Model:
    """Variant with an extra per-instance linear layer inside every bag
    (so pooling sees ``inner_dim`` columns).  Exists to demonstrate that
    the extra matrix collapses into the post-pooling map; requires mean
    pooling, the only aggregation linear maps commute with."""
    if config.aggregation != "mean":
        raise ModelError("the two-matrix variant requires mean aggregation")
    return _build(schema, config, inner_dim=inner_dim)


def collapse_model(model: Model) -> Model:
    """Fold each bag's inner linear layer into its post-pooling map.

    With mean pooling, pool(h @ M) == pool(h) @ M, so post weights
    [M @ W_rows; indicator_row] reproduce the two-matrix computation up
    to float round-off. Empty bags agree exactly: both pipelines pool
    to a zero row.
    """

    def fold(net: Net) -> Net:
        if isinstance(net, BagNet):
            child = fold(net.child)
            if net.inner_w is None:
                return BagNet(net.path, child, net.phi_w, net.phi_b,
                              net.post_w, net.post_b, net.aggregation,
                              net.activation)
            w = net.post_w.data
            merged = np.vstack([net.inner_w.data @ w[:-1, :], w[-1:, :]])
            return BagNet(net.path, child, net.phi_w, net.phi_b,
                          Tensor(merged), net.post_b, net.aggregation,
                          net.activation)
        if isinstance(net, ProductNet):
            return ProductNet(net.path, [(n, fold(c)) for n, c in net.children],
                              net.n_optional, net.comb_w, net.comb_b,
                              net.activation)
        return net

    return Model(schema=model.schema, config=model.config,
                 root=fold(model.root), head=model.head)


def _has_inner(net: Net) -> bool:
    if isinstance(net, BagNet):
        return net.inner_w is not None or _has_inner(net.child)
    if isinstance(net, ProductNet):
        return any(_has_inner(c) for _, c in net.children)
    return False


def _net_forward(net: Net, batch: RaggedBatch, tape: Tape | None,
                 sink: dict[str, Tensor] | None) -> Tensor:
    if isinstance(net, LeafNet):
        return Tensor(batch.data[net.path])
    if isinstance(net, BagNet):
        x = _net_forward(net.child, batch, tape, sink)
        h = dense_forward(x, net.phi_w, net.phi_b, net.activation, tape)
        if net.inner_w is not None:
            h = dense_forward(h, net.inner_w, None, IDENTITY, tape)
        offsets = batch.offsets[net.path]
        if net.aggregation == "mean":
            pooled = segment_mean(h, offsets, tape)
        elif net.aggregation == "max":
            pooled = segment_max(h, offsets, tape)
        else:
            pooled = concat_cols([segment_mean(h, offsets, tape),
                                  segment_max(h, offsets, tape)], tape)
        non_empty = (np.diff(offsets) > 0).astype(np.float64).reshape(-1, 1)
        z = concat_cols([pooled, Tensor(non_empty)], tape)
        e = dense_forward(z, net.post_w, net.post_b, IDENTITY, tape)
        if sink is not None:
            sink[net.path] = e
        return e
    parts = [_net_forward(child, batch, tape, sink)
             for _, child in net.children]
    parts.append(Tensor(batch.presence[net.path]))
    z = concat_cols(parts, tape)
    return dense_forward(z, net.comb_w, net.comb_b, net.activation, tape)


def forward(model: Model, batch: RaggedBatch, tape: Tape | None = None) -> Tensor:
    """Task outputs, one row per document."""
    rep = _net_forward(model.root, batch, tape, None)
    h = dense_forward(rep, model.head.w1, model.head.b1,
                      model.head.activation, tape)
    return dense_forward(h, model.head.w2, model.head.b2, IDENTITY, tape)


def forward_with_embeddings(model: Model, batch: RaggedBatch,
                            tape: Tape | None = None
                            ) -> tuple[Tensor, dict[str, Tensor]]:
    """Outputs plus every bag node's embedding rows, keyed by node path."""
    sink: dict[str, Tensor] = {}
    rep = _net_forward(model.root, batch, tape, sink)
    h = dense_forward(rep, model.head.w1, model.head.b1,
                      model.head.activation, tape)
    out = dense_forward(h, model.head.w2, model.head.b2, IDENTITY, tape)
    return out, sink


def embed(model: Model, batch: RaggedBatch, path: str) -> np.ndarray:
    """Embedding matrix of the bag node at ``path``, one row per bag."""
    _, sink = forward_with_embeddings(model, batch)
    if path not in sink:
        raise ModelError(f"no bag node at {path!r}; "
                         f"bag paths: {model.bag_paths()}")
    return sink[path].data


def _find_bag(net: Net, path: str) -> BagNet | None:
    if isinstance(net, BagNet):
        if net.path == path:
            return net
        return _find_bag(net.child, path)
    if isinstance(net, ProductNet):
        for _, child in net.children:
            found = _find_bag(child, path)
            if found is not None:
                return found
    return None


def embedding_bound(model: Model, path: str) -> np.ndarray:
    """Per-coordinate bound on the bag embedding at ``path``: the
    absolute column sums of the post-pooling weights plus |bias|.

    Holds because every input to that map lies in [-1, 1]: tanh
    outputs, their means and maxes, and the indicator column.  Only
    meaningful for tanh models; relu outputs are unbounded.
    """
    if model.config.activation != "tanh":
        raise ModelError("embedding bounds require tanh activation")
    net = _find_bag(model.root, path)
    if net is None:
        raise ModelError(f"no bag node at {path!r}")
    return np.abs(net.post_w.data).sum(axis=0) + np.abs(net.post_b.data[0])


def collapse_equivalence_check(two_matrix: Model, collapsed: Model,
                               batches: list[RaggedBatch]) -> float:
    """Largest absolute disagreement, over the given batches, between
    the two models' outputs and all bag embeddings."""
    worst = 0.0
    for batch in batches:
        out_a, emb_a = forward_with_embeddings(two_matrix, batch)
        out_b, emb_b = forward_with_embeddings(collapsed, batch)
        worst = max(worst, float(np.max(np.abs(out_a.data - out_b.data),
                                        initial=0.0)))
        for path in emb_a:
            worst = max(worst, float(np.max(
                np.abs(emb_a[path].data - emb_b[path].data), initial=0.0)))
    return worst


def param_count(schema: SchemaNode, config: ModelConfig) -> int:
    """Closed-form parameter count of ``build_model(schema, config)``.

    Per bag over a child of width w: w*k + k for the instance layer and
    (A+2)*k for the post-pooling map, where k is embed_dim and A is the
    pooled width (k, or 2k for meanmax).  Per product over children of
    total width s with q optional fields: (s+q+1)*h.  Head over a root
    of width r: (r+1)*h + (h+1)*o.
    """
    k, h, o = config.embed_dim, config.hidden_dim, config.output_dim
    agg = _agg_width(config.aggregation, k)

    def width_and_count(node: SchemaNode) -> tuple[int, int]:
        if isinstance(node, Bag):
            w, n = width_and_count(node.child)
            return k, n + (w + 1) * k + (agg + 2) * k
        if isinstance(node, Product):
            total, n = 0, 0
            for f in node.fields:
                w, c = width_and_count(f.schema)
                total += w
                n += c
            q = sum(1 for f in node.fields if f.optional)
            return h, n + (total + q + 1) * h
        return leaf_width(node), 0

    r, n = width_and_count(schema)
    return n + (r + 1) * h + (h + 1) * o


def describe_model(model: Model) -> str:
    """Human-readable table of nodes, their kinds, widths, and sizes."""
    lines = [f"{'node':<40} {'kind':<10} {'out':>5} {'params':>8}"]

    def visit(net: Net) -> None:
        own = sum(p.data.size for p in net.own_params())
        kind = {LeafNet: "leaf", BagNet: "bag", ProductNet: "product"}[type(net)]
        lines.append(f"{net.path:<40} {kind:<10} {net.out_dim:>5} {own:>8}")
        if isinstance(net, BagNet):
            visit(net.child)
        elif isinstance(net, ProductNet):
            for _, child in net.children:
                visit(child)

    visit(model.root)
    head_params = sum(p.data.size for p in model.head.own_params())
    lines.append(f"{'(head)':<40} {'head':<10} "
                 f"{model.config.output_dim:>5} {head_params:>8}")
    total = sum(p.data.size for p in model.parameters())
    lines.append(f"{'total':<40} {'':<10} {'':>5} {total:>8}")
    return "\n".join(lines)


def save_model(model: Model, path: str, extra: dict | None = None) -> None:
    """Write a self-contained model container.

    Layout: magic "HMIL", u32 format version, then length-prefixed
    canonical schema JSON and config JSON, then a u64 value count and
    the parameters as little-endian float64 in ``parameters()`` order.
    Same model and extra give byte-identical files.
    """
    if _has_inner(model.root):
        raise ModelError("collapse the two-matrix variant before saving")
    schema_blob = dumps_schema(model.schema).encode("utf-8")
    config_blob = json.dumps(
        {"model": asdict(model.config), "extra": extra or {}},
        sort_keys=True, separators=(",", ":")).encode("utf-8")
    values = np.concatenate(
        [p.data.reshape(-1) for p in model.parameters()]) \
        if model.parameters() else np.empty(0)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(schema_blob)))
        fh.write(schema_blob)
        fh.write(struct.pack("<Q", len(config_blob)))
        fh.write(config_blob)
        fh.write(struct.pack("<Q", values.size))
        fh.write(values.astype("<f8").tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    blob = fh.read(n)
    if len(blob) != n:
        raise ModelLoadError(f"truncated container: {what}")
    return blob


def load_model(path: str) -> tuple[Model, dict]:
    """Read a container written by ``save_model``; returns the model and
    the extra metadata dict."""
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != MAGIC:
            raise ModelLoadError("not a model container (bad magic)")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != FORMAT_VERSION:
            raise ModelLoadError(f"unsupported format version {version}")
        (n,) = struct.unpack("<Q", _read_exact(fh, 8, "schema length"))
        schema = loads_schema(_read_exact(fh, n, "schema").decode("utf-8"))
        (n,) = struct.unpack("<Q", _read_exact(fh, 8, "config length"))
        blob = json.loads(_read_exact(fh, n, "config").decode("utf-8"))
        try:
            config = ModelConfig(**blob["model"])
            extra = blob["extra"]
        except (KeyError, TypeError) as exc:
            raise ModelLoadError(f"malformed config blob: {exc}") from exc
        (count,) = struct.unpack("<Q", _read_exact(fh, 8, "value count"))
        values = np.frombuffer(
            _read_exact(fh, count * 8, "parameters"), dtype="<f8")
        if fh.read(1):
            raise ModelLoadError("trailing bytes after parameters")
    model = build_model(schema, config)
    params = model.parameters()
    expected = sum(p.data.size for p in params)
    if count != expected:
        raise ModelLoadError(
            f"parameter count mismatch: container has {count}, "
            f"schema and config need {expected}")
    pos = 0
    for p in params:
        size = p.data.size
        p.data = values[pos:pos + size].reshape(p.data.shape).copy()
        pos += size
    return model, extra
