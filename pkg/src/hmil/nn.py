"""Dense 2-D float64 tensors with a reverse-mode gradient tape.

Only the handful of operations the bag/product architectures need:
dense layers, segment aggregation over contiguous row ranges, column
concatenation, and Adam. Everything is float64 and single-threaded;
ops never mutate their inputs (parameters are updated only through
``adam_step``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "Activation",
    "TANH",
    "RELU",
    "IDENTITY",
    "ShapeError",
    "OffsetError",
    "dense_forward",
    "segment_mean",
    "segment_max",
    "concat_cols",
    "backward",
    "AdamState",
    "adam_step",
    "glorot_uniform",
]


class ShapeError(ValueError):
    """Operand shapes do not conform."""


class OffsetError(ValueError):
    """Segment offsets are malformed."""


class Tensor:
    """A dense row-major matrix of 64-bit floats.

    1-D input is promoted to a single row so biases can be written as
    plain lists. Hashable by identity; gradient dictionaries key on it.
    """

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"tensor must be 2-D, got shape {arr.shape}")
        self.data = arr

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor({self.rows}x{self.cols})"


@dataclass(frozen=True)
class Activation:
    """Element-wise non-linearity: ``tanh``, ``relu``, or ``identity``.

    ``identity`` exists for linear layers and internal testing only; the
    model builder refuses it as the non-linearity of a hidden layer.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in ("tanh", "relu", "identity"):
            raise ValueError(f"unknown activation {self.kind!r}")

    def apply(self, z: np.ndarray) -> np.ndarray:
        if self.kind == "tanh":
            return np.tanh(z)
        if self.kind == "relu":
            return np.maximum(z, 0.0)
        return z

    def deriv(self, z: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Derivative at pre-activation ``z`` with output ``y = apply(z)``."""
        if self.kind == "tanh":
            return 1.0 - y * y
        if self.kind == "relu":
            return (z > 0.0).astype(np.float64)
        return np.ones_like(z)


TANH = Activation("tanh")
RELU = Activation("relu")
IDENTITY = Activation("identity")


class _Node:
    __slots__ = ("out", "parents", "backward_fn")

    def __init__(self, out, parents, backward_fn):
        self.out = out
        self.parents = parents
        self.backward_fn = backward_fn


class Tape:
    """Ordered record of ops; replaying it in reverse yields gradients.

    Nodes are appended in execution order, so every node's inputs precede
    it and one reverse sweep is a valid backward pass.
    """

    def __init__(self):
        self.nodes: list[_Node] = []

    def record(self, out: Tensor, parents: tuple[Tensor, ...], backward_fn) -> None:
        """Register ``out = op(*parents)``.

        ``backward_fn`` maps the upstream gradient (ndarray shaped like
        ``out``) to one gradient ndarray per parent, in order.
        """
        self.nodes.append(_Node(out, parents, backward_fn))


def dense_forward(x: Tensor, w: Tensor, b: Tensor | None, act: Activation,
                  tape: Tape | None = None) -> Tensor:
    """``act(x @ w + b)`` with the op recorded on ``tape`` if given.

    ``b`` is a single row broadcast over the batch, or None for a purely
    linear map (used by the two-matrix bag variant, where the inner
    matrix must commute exactly with the empty-bag convention).
    """
    if x.cols != w.rows:
        raise ShapeError(f"dense: x is {x.shape}, w is {w.shape}")
    if b is not None and b.shape != (1, w.cols):
        raise ShapeError(f"dense: bias is {b.shape}, expected (1, {w.cols})")
    z = x.data @ w.data
    if b is not None:
        z = z + b.data
    y = act.apply(z)
    out = Tensor(y)
    if tape is not None:
        parents = (x, w) if b is None else (x, w, b)

        def bwd(g: np.ndarray) -> list[np.ndarray]:
            gz = g if act.kind == "identity" else g * act.deriv(z, y)
            grads = [gz @ w.data.T, x.data.T @ gz]
            if b is not None:
                grads.append(gz.sum(axis=0, keepdims=True))
            return grads

        tape.record(out, parents, bwd)
    return out


def _check_offsets(offsets, n_rows: int) -> np.ndarray:
    offs = np.asarray(offsets, dtype=np.int64)
    # length 1 is legal: zero segments, as in a batch of zero documents
    if offs.ndim != 1 or offs.size < 1:
        raise OffsetError(f"offsets must be a 1-D array of length >= 1, got {offs.shape}")
    if offs[0] != 0:
        raise OffsetError(f"offsets must start at 0, got {offs[0]}")
    if offs[-1] != n_rows:
        raise OffsetError(f"offsets must end at the row count {n_rows}, got {offs[-1]}")
    if np.any(np.diff(offs) < 0):
        raise OffsetError("offsets must be non-decreasing")
    return offs


def segment_mean(instances: Tensor, offsets, tape: Tape | None = None) -> Tensor:
    """Row ``b`` = mean of instance rows ``offsets[b]:offsets[b+1]``.

    An empty segment yields a zero row (the model appends a presence
    indicator so downstream layers can tell empty from mean-zero).
    """
    offs = _check_offsets(offsets, instances.rows)
    counts = np.diff(offs)
    out_data = np.zeros((counts.size, instances.cols))
    for i in range(counts.size):
        if counts[i] > 0:
            s, e = offs[i], offs[i + 1]
            out_data[i] = instances.data[s:e].sum(axis=0) / counts[i]
    out = Tensor(out_data)
    if tape is not None:

        def bwd(g: np.ndarray) -> list[np.ndarray]:
            per_row = g / np.maximum(counts, 1)[:, None]
            return [np.repeat(per_row, counts, axis=0)]

        tape.record(out, (instances,), bwd)
    return out


def segment_max(instances: Tensor, offsets, tape: Tape | None = None) -> Tensor:
    """Element-wise max per segment; empty segments yield zero rows.

    Backward routes each column's gradient to the first row attaining
    the max (deterministic subgradient on ties).
    """
    offs = _check_offsets(offsets, instances.rows)
    counts = np.diff(offs)
    k = instances.cols
    out_data = np.zeros((counts.size, k))
    argmaxes = np.zeros((counts.size, k), dtype=np.int64)
    for i in range(counts.size):
        if counts[i] > 0:
            seg = instances.data[offs[i]:offs[i + 1]]
            idx = seg.argmax(axis=0)
            argmaxes[i] = offs[i] + idx
            out_data[i] = seg[idx, np.arange(k)]
    out = Tensor(out_data)
    if tape is not None:

        def bwd(g: np.ndarray) -> list[np.ndarray]:
            gx = np.zeros_like(instances.data)
            cols = np.arange(k)
            for i in range(counts.size):
                if counts[i] > 0:
                    gx[argmaxes[i], cols] += g[i]
            return [gx]

        tape.record(out, (instances,), bwd)
    return out


def concat_cols(parts: list[Tensor], tape: Tape | None = None) -> Tensor:
    """Concatenate tensors with equal row counts along columns."""
    rows = parts[0].rows
    for p in parts:
        if p.rows != rows:
            raise ShapeError(
                f"concat: row counts differ, {p.shape} vs ({rows}, ...)")
    out = Tensor(np.concatenate([p.data for p in parts], axis=1))
    if tape is not None:
        widths = [p.cols for p in parts]

        def bwd(g: np.ndarray) -> list[np.ndarray]:
            grads = []
            at = 0
            for w in widths:
                grads.append(g[:, at:at + w])
                at += w
            return grads

        tape.record(out, tuple(parts), bwd)
    return out


def backward(tape: Tape, loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Gradients of the scalar ``loss`` w.r.t. every tensor on the tape.

    One reverse sweep over the recorded nodes; fan-out accumulates by
    addition. Returns a dict keyed by tensor identity.
    """
    if loss.shape != (1, 1):
        raise ShapeError(f"loss must be a 1x1 scalar, got {loss.shape}")
    grads: dict[Tensor, np.ndarray] = {loss: np.ones((1, 1))}
    for node in reversed(tape.nodes):
        g = grads.get(node.out)
        if g is None:
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            acc = grads.get(parent)
            grads[parent] = pg.copy() if acc is None else acc + pg
    return grads


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per parameter."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: list[Tensor]) -> "AdamState":
        return cls(m=[np.zeros(p.shape) for p in params],
                   v=[np.zeros(p.shape) for p in params])


def adam_step(params: list[Tensor], grads: list[np.ndarray], state: AdamState,
              lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """One Adam update with bias correction, in place on ``params``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and state must have equal lengths")
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.data.shape:
            raise ShapeError(f"adam: grad {g.shape} vs param {p.data.shape}")
        m[:] = beta1 * m + (1.0 - beta1) * g
        v[:] = beta2 * v + (1.0 - beta2) * g * g
        p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + eps)


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> Tensor:
    """Weights uniform in +/- sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
