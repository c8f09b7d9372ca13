"""TF-IDF features and multinomial (softmax) logistic regression, trained from scratch."""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from causalcat.baselines.core import (
    BaselineTrainConfig,
    EpochRecord,
    TrainedClassifier,
    argmax_lowest,
    batch_cross_entropy,
    softmax,
)
from causalcat.corpus import N_CLASSES, Corpus
from causalcat.errors import ConfigError, DataError, TrainingAbort
from causalcat.textprep import Vocabulary, baseline_tokens, build_vocab

log = logging.getLogger(__name__)


@dataclass
class TfidfFeaturizer:
    """Unigram term frequencies scaled by smoothed IDF, rows L2-normalized.

    idf(t) = ln((1 + n_docs) / (1 + df(t))) + 1. Padding and unknown columns are
    always zero, so a text made only of unknown words maps to the zero vector.
    """

    vocabulary: Vocabulary
    idf: np.ndarray
    sublinear_tf: bool = False
    lowercase: bool = True

    @classmethod
    def fit(
        cls,
        texts: Sequence[str],
        min_frequency: int = 2,
        sublinear_tf: bool = False,
        lowercase: bool = True,
    ) -> "TfidfFeaturizer":
        texts = list(texts)
        vocab = build_vocab(texts, min_frequency, lowercase)
        df = np.zeros(len(vocab))
        for text in texts:
            idx = set(vocab.encode(baseline_tokens(text, lowercase)))
            df[list(idx)] += 1
        idf = np.log((1.0 + len(texts)) / (1.0 + df)) + 1.0
        idf[[vocab.pad_index, vocab.unk_index]] = 0.0
        return cls(vocab, idf, sublinear_tf, lowercase)

    @property
    def n_features(self) -> int:
        return len(self.vocabulary)

    def transform(self, texts: Sequence[str]) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        for r, text in enumerate(texts):
            ids, counts = np.unique(
                self.vocabulary.encode(baseline_tokens(text, self.lowercase)), return_counts=True
            )
            tf = 1.0 + np.log(counts) if self.sublinear_tf else counts.astype(np.float64)
            w = tf * self.idf[ids]
            norm = np.linalg.norm(w)
            if norm > 0:
                w = w / norm
            keep = w != 0
            rows.extend([r] * int(keep.sum()))
            cols.extend(ids[keep].tolist())
            vals.extend(w[keep].tolist())
        return sp.csr_matrix((vals, (rows, cols)), shape=(len(texts), self.n_features))


@dataclass
class SoftmaxRegressionModel:
    weights: np.ndarray  # [n_features, 6]
    bias: np.ndarray  # [6]
    l2_strength: float = 1.0

    def logits(self, X) -> np.ndarray:
        return np.asarray(X @ self.weights) + self.bias

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.logits(X))

    def predict(self, X) -> np.ndarray:
        return argmax_lowest(self.logits(X))


def objective_and_grad(
    model: SoftmaxRegressionModel, X, y: np.ndarray, n_total: int
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy over the batch plus the batch's share of the L2 penalty.

    The full objective is mean CE + l2 / (2 n_total) * ||W||^2 (bias not
    penalized), i.e. inverse regularization C = 1 / l2 on the summed loss.
    """
    probs = model.predict_proba(X)
    m = X.shape[0]
    loss = float(batch_cross_entropy(probs, y).mean())
    loss += model.l2_strength / (2.0 * n_total) * float(np.sum(model.weights**2))
    delta = probs
    delta[np.arange(m), y] -= 1.0
    delta /= m
    grad_w = np.asarray(X.T @ delta) + model.l2_strength / n_total * model.weights
    grad_b = delta.sum(axis=0)
    return loss, grad_w, grad_b


class _Adam:
    def __init__(self, shapes, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            m_hat = m / (1 - self.b1**self.t)
            v_hat = v / (1 - self.b2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class LogRegClassifier(TrainedClassifier):
    kind: str = "logreg"
    featurizer: TfidfFeaturizer | None = None
    model: SoftmaxRegressionModel | None = None

    def predict_proba(self, texts: Sequence[str]) -> np.ndarray:
        if self.model is None or self.featurizer is None:
            raise ConfigError("classifier has no trained model")
        return self.model.predict_proba(self.featurizer.transform(texts))

    def save(self, directory) -> None:
        from causalcat.checkpoint import save_logreg

        save_logreg(self, Path(directory))


def init_model(n_features: int, labels: np.ndarray, l2_strength: float) -> SoftmaxRegressionModel:
    # Zero weights with log-prior bias: the untrained model predicts the majority class.
    counts = np.bincount(labels, minlength=N_CLASSES).astype(np.float64)
    bias = np.log((counts + 1.0) / (counts.sum() + N_CLASSES))
    return SoftmaxRegressionModel(np.zeros((n_features, N_CLASSES)), bias, l2_strength)


def train_logreg(
    train: Corpus,
    dev: Corpus,
    featurizer: TfidfFeaturizer,
    config: BaselineTrainConfig,
    l2_strength: float = 1.0,
) -> LogRegClassifier:
    """Mini-batch Adam on mean cross-entropy + L2; keeps the best dev-accuracy epoch.

    Epoch 0 is the initial model. Training stops after ``early_stop_patience``
    epochs without a dev improvement (0 disables early stopping).
    """
    if len(train) == 0 or len(dev) == 0:
        raise DataError("train and dev corpora must be nonempty")
    X = featurizer.transform(train.texts)
    Xd = featurizer.transform(dev.texts)
    y, yd = train.labels, dev.labels
    model = init_model(featurizer.n_features, y, l2_strength)
    if model.weights.shape[0] != X.shape[1]:
        raise ConfigError("feature dimension does not match the model")
    rng = np.random.default_rng(config.seed)
    opt = _Adam([model.weights.shape, model.bias.shape], config.learning_rate)

    best_acc = float(np.mean(model.predict(Xd) == yd))
    best = copy.deepcopy(model)
    best_epoch = 0
    history = [EpochRecord(0, objective_and_grad(model, X, y, len(y))[0], best_acc)]
    stale = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(y))
        losses = []
        for start in range(0, len(y), config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, gw, gb = objective_and_grad(model, X[idx], y[idx], len(y))
            if not np.isfinite(loss):
                raise TrainingAbort(f"non-finite loss at epoch {epoch}")
            opt.step([model.weights, model.bias], [gw, gb])
            losses.append(loss * len(idx))
        dev_acc = float(np.mean(model.predict(Xd) == yd))
        history.append(EpochRecord(epoch, sum(losses) / len(y), dev_acc))
        log.info("logreg epoch %d loss %.4f dev_acc %.4f", epoch, history[-1].train_loss, dev_acc)
        if dev_acc > best_acc:
            best_acc, best, best_epoch, stale = dev_acc, copy.deepcopy(model), epoch, 0
        else:
            stale += 1
            if config.early_stop_patience and stale >= config.early_stop_patience:
                break

    manifest = {
        "model_kind": "logreg",
        "config": config.to_dict(),
        "l2_strength": l2_strength,
        "min_frequency": featurizer.vocabulary.min_frequency,
        "sublinear_tf": featurizer.sublinear_tf,
        "lowercase": featurizer.lowercase,
        "n_features": featurizer.n_features,
        "vocab_hash": featurizer.vocabulary.digest(),
        "best_epoch": best_epoch,
        "dev_accuracy": best_acc,
    }
    return LogRegClassifier(manifest=manifest, history=history, featurizer=featurizer, model=best)
