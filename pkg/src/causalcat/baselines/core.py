"""Softmax, cross-entropy and the classifier handle shared by every model kind."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from causalcat.corpus import N_CLASSES
from causalcat.errors import ConfigError

PROB_FLOOR = 1e-12


def softmax(logits) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("softmax input contains NaN or infinity")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs, label: int, n_classes: int = N_CLASSES) -> float:
    """-log probs[label] with the probability floored at 1e-12."""
    probs = np.asarray(probs, dtype=np.float64)
    if not 0 <= label < min(n_classes, probs.shape[-1]):
        raise ValueError(f"label {label} out of range")
    return float(-np.log(max(probs[label], PROB_FLOOR)))


def softmax_cross_entropy(logits, label: int) -> float:
    return cross_entropy(softmax(logits), label, n_classes=len(logits))


def softmax_cross_entropy_grad(logits, label: int) -> np.ndarray:
    """Gradient of cross_entropy(softmax(logits), label) w.r.t. the logits."""
    p = softmax(logits)
    p[..., label] -= 1.0
    return p


def batch_cross_entropy(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    picked = probs[np.arange(len(labels)), labels]
    return -np.log(np.maximum(picked, PROB_FLOOR))


def argmax_lowest(probs: np.ndarray) -> np.ndarray:
    """Row-wise argmax; exact ties go to the lowest class code (np.argmax's rule)."""
    return np.argmax(np.asarray(probs), axis=-1)


@dataclass
class BaselineTrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 30
    batch_size: int = 16
    seed: int = 0
    early_stop_patience: int = 3

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size <= 0:
            raise ConfigError("learning_rate and batch_size must be positive")
        if self.epochs < 0 or self.early_stop_patience < 0:
            raise ConfigError("epochs and early_stop_patience must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_accuracy: float


@dataclass
class TrainedClassifier:
    """Uniform prediction handle over baseline and fine-tuned models.

    Subclasses implement ``predict_proba`` and ``save``.
    """

    kind: str
    manifest: dict = field(default_factory=dict)
    history: list[EpochRecord] = field(default_factory=list)

    def predict_proba(self, texts: Sequence[str]) -> np.ndarray:
        raise NotImplementedError

    def predict(self, texts: Sequence[str]) -> list[tuple[int, np.ndarray]]:
        texts = list(texts)
        if not texts:
            return []
        for t in texts:
            if not isinstance(t, str) or not t.strip():
                raise ValueError("posts to classify must be nonempty strings")
        probs = self.predict_proba(texts)
        return [(int(c), row) for c, row in zip(argmax_lowest(probs), probs)]

    def save(self, directory) -> None:
        raise NotImplementedError


def accuracy_of(model: TrainedClassifier, texts: Sequence[str], labels: np.ndarray) -> float:
    if len(texts) == 0:
        return 0.0
    preds = argmax_lowest(model.predict_proba(list(texts)))
    return float(np.mean(preds == np.asarray(labels)))
