"""CNN-LSTM hybrid: embedding, 1-D convolution, max-pooling, LSTM, dense softmax."""

from __future__ import annotations

import copy
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F
from torch.nn.utils.rnn import pack_padded_sequence

from causalcat.baselines.core import BaselineTrainConfig, EpochRecord, TrainedClassifier
from causalcat.corpus import N_CLASSES, Corpus
from causalcat.errors import ConfigError, DataError, TrainingAbort
from causalcat.textprep import Vocabulary, baseline_tokens

log = logging.getLogger(__name__)


@dataclass
class CnnLstmArch:
    embedding_dim: int = 128
    n_filters: int = 64
    kernel_width: int = 5
    pool_width: int = 2
    hidden_size: int = 64
    max_len: int = 256
    lowercase: bool = True


class CnnLstmModel(nn.Module):
    def __init__(self, vocab_size: int, arch: CnnLstmArch):
        super().__init__()
        self.arch = arch
        self.embedding = nn.Embedding(vocab_size, arch.embedding_dim, padding_idx=0)
        self.conv = nn.Conv1d(arch.embedding_dim, arch.n_filters, arch.kernel_width)
        self.pool = nn.MaxPool1d(arch.pool_width)
        self.lstm = nn.LSTM(arch.n_filters, arch.hidden_size, batch_first=True)
        self.out = nn.Linear(arch.hidden_size, N_CLASSES)

    def pooled_lengths(self, lengths: torch.Tensor) -> torch.Tensor:
        k, w = self.arch.kernel_width, self.arch.pool_width
        conv_len = torch.clamp(lengths, min=k) - k + 1
        return torch.clamp(conv_len // w, min=1)

    def forward(self, ids: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        """Logits [batch, 6]. ``ids`` is [batch, L] with L >= kernel width."""
        x = self.embedding(ids).transpose(1, 2)  # [B, E, L]
        x = self.pool(F.relu(self.conv(x))).transpose(1, 2)  # [B, L', filters]
        plen = torch.clamp(self.pooled_lengths(lengths), max=x.shape[1])
        packed = pack_padded_sequence(x, plen.cpu(), batch_first=True, enforce_sorted=False)
        _, (h, _) = self.lstm(packed)
        return self.out(h[-1])


def encode_ids(texts: Sequence[str], vocab: Vocabulary, arch: CnnLstmArch) -> tuple[torch.Tensor, torch.Tensor]:
    """Word ids truncated to max_len and zero-padded to at least the kernel width."""
    width = max(arch.max_len, arch.kernel_width)
    ids = np.zeros((len(texts), width), dtype=np.int64)
    lengths = np.zeros(len(texts), dtype=np.int64)
    for i, text in enumerate(texts):
        seq = vocab.encode(baseline_tokens(text, arch.lowercase))[: arch.max_len]
        if not seq:
            raise DataError(f"text {i} has no tokens after encoding")
        ids[i, : len(seq)] = seq
        lengths[i] = len(seq)
    return torch.from_numpy(ids), torch.from_numpy(lengths)


@dataclass
class CnnLstmClassifier(TrainedClassifier):
    kind: str = "cnn_lstm"
    vocab: Vocabulary | None = None
    network: CnnLstmModel | None = None
    eval_batch_size: int = field(default=64, repr=False)

    def predict_proba(self, texts: Sequence[str]) -> np.ndarray:
        if self.network is None or self.vocab is None:
            raise ConfigError("classifier has no trained model")
        return _predict_proba(self.network, self.vocab, list(texts), self.eval_batch_size)

    def save(self, directory) -> None:
        from causalcat.checkpoint import save_cnn_lstm

        save_cnn_lstm(self, Path(directory))


@torch.no_grad()
def _predict_proba(net: CnnLstmModel, vocab: Vocabulary, texts: list[str], batch: int) -> np.ndarray:
    net.eval()
    out = []
    for start in range(0, len(texts), batch):
        ids, lengths = encode_ids(texts[start : start + batch], vocab, net.arch)
        out.append(torch.softmax(net(ids, lengths).double(), dim=-1).numpy())
    return np.concatenate(out) if out else np.zeros((0, N_CLASSES))


def train_cnn_lstm(
    train: Corpus,
    dev: Corpus,
    vocab: Vocabulary,
    config: BaselineTrainConfig,
    arch: CnnLstmArch | None = None,
) -> CnnLstmClassifier:
    """Adam on cross-entropy; early stopping on dev accuracy, best epoch kept."""
    arch = arch or CnnLstmArch()
    if len(train) == 0 or len(dev) == 0:
        raise DataError("train and dev corpora must be nonempty")
    torch.manual_seed(config.seed)
    net = CnnLstmModel(len(vocab), arch)
    ids, lengths = encode_ids(train.texts, vocab, arch)
    labels = torch.from_numpy(train.labels)
    dev_texts, dev_labels = dev.texts, dev.labels
    opt = torch.optim.Adam(net.parameters(), lr=config.learning_rate)
    gen = torch.Generator().manual_seed(config.seed)

    def dev_acc() -> float:
        probs = _predict_proba(net, vocab, dev_texts, 64)
        return float(np.mean(np.argmax(probs, axis=1) == dev_labels))

    best_acc = dev_acc()
    best_state = copy.deepcopy(net.state_dict())
    best_epoch, stale = 0, 0
    history = [EpochRecord(0, float("nan"), best_acc)]
    for epoch in range(1, config.epochs + 1):
        net.train()
        order = torch.randperm(len(labels), generator=gen)
        total = 0.0
        for start in range(0, len(labels), config.batch_size):
            idx = order[start : start + config.batch_size]
            loss = F.cross_entropy(net(ids[idx], lengths[idx]), labels[idx])
            if not torch.isfinite(loss):
                raise TrainingAbort(f"non-finite loss at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
        acc = dev_acc()
        history.append(EpochRecord(epoch, total / len(labels), acc))
        log.info("cnn_lstm epoch %d loss %.4f dev_acc %.4f", epoch, history[-1].train_loss, acc)
        if acc > best_acc:
            best_acc, best_epoch, stale = acc, epoch, 0
            best_state = copy.deepcopy(net.state_dict())
        else:
            stale += 1
            if config.early_stop_patience and stale >= config.early_stop_patience:
                break
    net.load_state_dict(best_state)
    net.eval()
    manifest = {
        "model_kind": "cnn_lstm",
        "config": config.to_dict(),
        "arch": asdict(arch),
        "vocab_hash": vocab.digest(),
        "vocab_size": len(vocab),
        "min_frequency": vocab.min_frequency,
        "best_epoch": best_epoch,
        "dev_accuracy": best_acc,
    }
    return CnnLstmClassifier(manifest=manifest, history=history, vocab=vocab, network=net)
