"""Adam training loop, evaluation, and the checkpoint container."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import (DivergenceError, InvalidArgumentError, MmGestureError,
                      NumericsError, ShapeError)
from .layers import softmax_cross_entropy
from .network import GestureNet


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    epochs: int = 200
    lr: float = 0.001
    lr_decay: float = 0.1
    lr_decay_every: int = 200  # never fires in a standard 200-epoch run
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if min(self.batch_size, self.epochs, self.lr_decay_every) < 1:
            raise InvalidArgumentError("batch_size/epochs/lr_decay_every must be >= 1")
        if self.lr <= 0 or self.lr_decay <= 0:
            raise InvalidArgumentError("lr and lr_decay must be positive")

    def lr_at(self, epoch: int) -> float:
        return self.lr * self.lr_decay ** (epoch // self.lr_decay_every)


class Adam:
    """Adaptive moments with bias correction; one state slot per parameter."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]
        self.t = 0

    def step(self, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, m, v in zip(self.params, self.m, self.v):
            m += (1 - b1) * (p.grad - m)
            v += (1 - b2) * (p.grad**2 - v)
            m_hat = m / (1 - b1**self.t)
            v_hat = v / (1 - b2**self.t)
            p.value -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def train(model: GestureNet, tensors: np.ndarray, labels: np.ndarray,
          cfg: TrainConfig, log=None) -> list[dict]:
    """Minibatch Adam with the step-decay schedule; returns per-epoch history.

    Deterministic for a fixed config seed: shuffling comes from one PCG64
    stream and all math is single-threaded numpy.
    """
    tensors = np.asarray(tensors, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if tensors.ndim != 4 or tensors.shape[0] == 0:
        raise InvalidArgumentError("training set must be a non-empty (N,5,30,65) array")
    if labels.shape != (tensors.shape[0],):
        raise ShapeError(f"labels {labels.shape} do not match tensors {tensors.shape}")
    if labels.min() < 0 or labels.max() >= model.n_classes:
        raise InvalidArgumentError("label index outside the model's class set")

    rng = np.random.default_rng(cfg.seed)
    optimizer = Adam(
        [p for _, p in model.named_parameters()],
        beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    n = tensors.shape[0]
    history = []
    model.set_training(True)
    for epoch in range(cfg.epochs):
        lr = cfg.lr_at(epoch)
        order = rng.permutation(n)
        total_loss = 0.0
        correct = 0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            try:
                logits = model.forward(tensors[batch])
                loss, dlogits, probs = softmax_cross_entropy(logits, labels[batch])
            except NumericsError as exc:
                raise DivergenceError(f"training diverged at epoch {epoch}: {exc}")
            if not np.isfinite(loss):
                raise DivergenceError(f"loss became non-finite at epoch {epoch}")
            model.zero_grad()
            model.backward(dlogits)
            optimizer.step(lr)
            total_loss += loss * batch.size
            correct += int((np.argmax(probs, axis=1) == labels[batch]).sum())
        record = {"epoch": epoch, "lr": lr, "loss": total_loss / n,
                  "accuracy": correct / n}
        history.append(record)
        if log:
            log(f"epoch {epoch:3d}  lr {lr:.2e}  loss {record['loss']:.4f}  "
                f"acc {record['accuracy']:.3f}")
    model.set_training(False)
    return history


@dataclass
class ConfusionMatrix:
    """Row-normalized confusion counts; row = true class, column = predicted."""

    counts: np.ndarray
    class_names: list[str] = field(default_factory=list)

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / max(self.counts.sum(), 1))

    def percentages(self) -> np.ndarray:
        totals = self.counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore"):
            pct = 100.0 * self.counts / totals
        return np.where(totals > 0, pct, 0.0)

    def render(self) -> str:
        names = self.class_names or [f"class{i}" for i in range(len(self.counts))]
        width = max(12, max(len(n) for n in names) + 2)
        header = "Types".ljust(width) + "".join(n.rjust(width) for n in names)
        lines = [header]
        for i, row in enumerate(self.percentages()):
            lines.append(names[i].ljust(width)
                         + "".join(f"{v:.2f}%".rjust(width) for v in row))
        return "\n".join(lines)


def evaluate(model: GestureNet, tensors: np.ndarray, labels: np.ndarray,
             class_names=None, batch_size: int = 64):
    """(ConfusionMatrix, accuracy) on a frozen model."""
    tensors = np.asarray(tensors, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if tensors.shape[0] == 0:
        raise InvalidArgumentError("evaluation set is empty")
    if labels.min() < 0 or labels.max() >= model.n_classes:
        raise InvalidArgumentError("label index outside the model's class set")
    model.set_training(False)
    preds = np.concatenate([
        model.predict(tensors[i:i + batch_size])
        for i in range(0, tensors.shape[0], batch_size)])
    counts = np.zeros((model.n_classes, model.n_classes), dtype=int)
    np.add.at(counts, (labels, preds), 1)
    matrix = ConfusionMatrix(counts=counts,
                             class_names=list(class_names or []))
    return matrix, matrix.accuracy


CHECKPOINT_MAGIC = b"MMGN"
CHECKPOINT_VERSION = 1


def save_checkpoint(path, model: GestureNet, metadata: dict) -> None:
    """Self-describing binary: magic, version byte, JSON header, raw arrays.

    Array payloads are little-endian float64 in header order, so identical
    models serialize to identical bytes.
    """
    entries = []
    payload = bytearray()
    for name, arr in model.state_dict().items():
        data = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": list(data.shape),
                        "offset": len(payload), "nbytes": data.nbytes})
        payload += data.tobytes()
    header = {
        "format": "mmgesture-checkpoint",
        "n_classes": model.n_classes,
        "model_seed": model.seed,
        "arrays": entries,
        "metadata": metadata,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(bytes([CHECKPOINT_VERSION]))
        fh.write(len(blob).to_bytes(4, "little"))
        fh.write(blob)
        fh.write(bytes(payload))


def load_checkpoint(path) -> tuple[GestureNet, dict]:
    raw = Path(path).read_bytes()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise MmGestureError(f"{path}: not a checkpoint (bad magic)")
    if raw[4] != CHECKPOINT_VERSION:
        raise MmGestureError(f"{path}: unsupported checkpoint version {raw[4]}")
    header_len = int.from_bytes(raw[5:9], "little")
    header = json.loads(raw[9:9 + header_len].decode())
    payload = raw[9 + header_len:]
    state = {}
    for entry in header["arrays"]:
        start, nbytes = entry["offset"], entry["nbytes"]
        state[entry["name"]] = np.frombuffer(
            payload[start:start + nbytes], dtype="<f8").reshape(entry["shape"]).copy()
    model = GestureNet(n_classes=header["n_classes"], seed=header["model_seed"])
    model.load_state_dict(state)
    model.set_training(False)
    return model, header["metadata"]


HISTORY_HEADER = "epoch,lr,loss,accuracy"


def write_history_csv(path, history) -> None:
    lines = [HISTORY_HEADER]
    for rec in history:
        lines.append(f"{rec['epoch']},{rec['lr']!r},{rec['loss']!r},{rec['accuracy']!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_history_csv(path) -> list[dict]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != HISTORY_HEADER:
        raise MmGestureError(f"{path}: expected history header {HISTORY_HEADER!r}")
    history = []
    for line in lines[1:]:
        if not line:
            continue
        epoch, lr, loss, acc = line.split(",")
        history.append({"epoch": int(epoch), "lr": float(lr),
                        "loss": float(loss), "accuracy": float(acc)})
    return history
