"""Minibatch training on the tape: losses, the Adam loop, evaluation.

Losses are recorded on the same tape as the forward pass, so one
backward sweep yields parameter gradients.  Shuffling derives from
(seed, epoch), making whole runs reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .batching import build_batch
from .encoding import EncodedDoc
from .model import Model, forward
from .nn import AdamState, ShapeError, Tape, Tensor, adam_step, backward

__all__ = [
    "TrainConfig",
    "TrainingReport",
    "TrainingDiverged",
    "loss_softmax_ce",
    "loss_mse",
    "softmax",
    "train",
    "predict_scores",
    "evaluate_accuracy",
    "evaluate_mse",
]


class TrainingDiverged(Exception):
    def __init__(self, epoch: int, batch_index: int, value: float):
        super().__init__(
            f"non-finite loss {value!r} in epoch {epoch}, batch {batch_index}")
        self.epoch = epoch
        self.batch_index = batch_index


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0
    loss: str = "ce"  # "ce" (softmax cross-entropy) or "mse"

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.loss not in ("ce", "mse"):
            raise ValueError(f"unknown loss {self.loss!r}")


@dataclass
class TrainingReport:
    metric_name: str
    epoch_loss: list[float] = field(default_factory=list)
    epoch_metric: list[float] = field(default_factory=list)
    n_documents: int = 0
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"metric_name": self.metric_name,
                "epoch_loss": self.epoch_loss,
                "epoch_metric": self.epoch_metric,
                "n_documents": self.n_documents,
                "config": self.config}


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_softmax_ce(logits: Tensor, labels: np.ndarray,
                    tape: Tape | None = None) -> Tensor:
    """Mean cross-entropy of softmax(logits) against integer labels."""
    labels = np.asarray(labels)
    if labels.shape != (logits.rows,):
        raise ShapeError(f"labels shape {labels.shape} does not match "
                         f"{logits.rows} logit rows")
    if logits.cols < 2:
        raise ShapeError("softmax cross-entropy needs >= 2 columns")
    if labels.size and (labels.min() < 0 or labels.max() >= logits.cols):
        raise ShapeError(f"labels must lie in [0, {logits.cols})")
    z = logits.data
    zmax = z.max(axis=1, keepdims=True)
    logsumexp = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    picked = z[np.arange(z.shape[0]), labels]
    out = Tensor(np.mean(logsumexp - picked))
    if tape is not None:
        n = z.shape[0]

        def backward_fn(g: np.ndarray):
            d = softmax(z)
            d[np.arange(n), labels] -= 1.0
            return (g[0, 0] * d / n,)

        tape.record(out, (logits,), backward_fn)
    return out


def loss_mse(pred: Tensor, target: np.ndarray,
             tape: Tape | None = None) -> Tensor:
    """Mean squared error over every entry of ``pred``."""
    target = np.asarray(target, dtype=np.float64)
    if target.shape != pred.shape:
        raise ShapeError(f"target shape {target.shape} does not match "
                         f"prediction shape {pred.shape}")
    diff = pred.data - target
    out = Tensor(np.mean(diff * diff))
    if tape is not None:
        def backward_fn(g: np.ndarray):
            return (g[0, 0] * 2.0 * diff / diff.size,)

        tape.record(out, (pred,), backward_fn)
    return out


def _check_targets(config: TrainConfig, model: Model, targets: np.ndarray,
                   n_docs: int) -> np.ndarray:
    if config.loss == "ce":
        targets = np.asarray(targets, dtype=np.int64)
        if targets.shape != (n_docs,):
            raise ShapeError(f"expected {n_docs} integer labels, "
                             f"got shape {targets.shape}")
        return targets
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != (n_docs, model.config.output_dim):
        raise ShapeError(
            f"expected targets of shape ({n_docs}, "
            f"{model.config.output_dim}), got {targets.shape}")
    return targets


def train(model: Model, docs: list[EncodedDoc], targets,
          config: TrainConfig) -> TrainingReport:
    """Adam minibatch training, in place on the model's parameters.

    Raises TrainingDiverged the moment a loss comes out non-finite; the
    model is left in its mid-training state for inspection.
    """
    targets = _check_targets(config, model, targets, len(docs))
    params = model.parameters()
    state = AdamState.for_params(params)
    report = TrainingReport(
        metric_name="accuracy" if config.loss == "ce" else "mse",
        n_documents=len(docs), config=asdict(config))

    for epoch in range(config.epochs):
        order = np.random.default_rng([config.seed, epoch]).permutation(len(docs))
        total_loss = 0.0
        hits = 0.0
        for batch_index, start in enumerate(
                range(0, len(docs), config.batch_size)):
            chosen = order[start:start + config.batch_size]
            batch = build_batch([docs[i] for i in chosen], model.schema)
            batch_targets = targets[chosen]

            tape = Tape()
            out = forward(model, batch, tape)
            if config.loss == "ce":
                loss = loss_softmax_ce(out, batch_targets, tape)
                hits += float(np.sum(out.data.argmax(axis=1) == batch_targets))
            else:
                loss = loss_mse(out, batch_targets, tape)
            value = loss.data[0, 0]
            if not np.isfinite(value):
                raise TrainingDiverged(epoch, batch_index, value)
            total_loss += value * len(chosen)

            grads = backward(tape, loss)
            adam_step(params,
                      [grads.get(p, np.zeros(p.data.shape)) for p in params],
                      state, lr=config.learning_rate)

        epoch_loss = total_loss / max(len(docs), 1)
        report.epoch_loss.append(float(epoch_loss))
        report.epoch_metric.append(
            float(hits / max(len(docs), 1)) if config.loss == "ce"
            else float(epoch_loss))
    return report


def predict_scores(model: Model, docs: list[EncodedDoc],
                   chunk_size: int = 256) -> np.ndarray:
    """Raw model outputs, one row per document, computed in chunks."""
    parts = [forward(model, build_batch(docs[i:i + chunk_size], model.schema)).data
             for i in range(0, max(len(docs), 1), chunk_size)]
    return np.vstack(parts) if parts else np.empty((0, model.config.output_dim))


def evaluate_accuracy(model: Model, docs: list[EncodedDoc], labels) -> float:
    labels = np.asarray(labels)
    scores = predict_scores(model, docs)
    return float(np.mean(scores.argmax(axis=1) == labels)) if len(docs) else 0.0


def evaluate_mse(model: Model, docs: list[EncodedDoc], targets) -> float:
    targets = np.asarray(targets, dtype=np.float64)
    scores = predict_scores(model, docs)
    return float(np.mean((scores - targets) ** 2)) if len(docs) else 0.0
