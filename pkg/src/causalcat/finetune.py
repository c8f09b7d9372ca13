"""Fine-tuning of pre-trained sequence encoders with a six-way classification head."""

from __future__ import annotations

import copy
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from causalcat.baselines.core import EpochRecord, TrainedClassifier
from causalcat.corpus import N_CLASSES, Corpus
from causalcat.errors import CheckpointError, ConfigError, DataError, TrainingAbort
from causalcat.textprep import clean, encode_batch

log = logging.getLogger(__name__)

CACHE_ENV = "CAUSALCAT_CACHE"
POOLING_RULES = ("first_token", "last_token", "mean")


@dataclass(frozen=True)
class BackendSpec:
    default_checkpoint: str
    pooling: str


# The emotion slot takes any emotion-adapted BERT checkpoint; this is only the default.
BACKENDS: dict[str, BackendSpec] = {
    "distilbert": BackendSpec("distilbert-base-uncased", "first_token"),
    "bert_emotion": BackendSpec("bhadresh-savani/bert-base-uncased-emotion", "first_token"),
    "roberta": BackendSpec("roberta-base", "first_token"),
    "xlnet": BackendSpec("xlnet-base-cased", "last_token"),
}


def register_backend(backend_id: str, default_checkpoint: str, pooling: str = "first_token") -> None:
    if pooling not in POOLING_RULES:
        raise ConfigError(f"unknown pooling rule {pooling!r}")
    BACKENDS[backend_id] = BackendSpec(default_checkpoint, pooling)


def cache_dir(override: str | os.PathLike | None = None) -> Path | None:
    value = override or os.environ.get(CACHE_ENV)
    return Path(value) if value else None


def resolve_checkpoint(ref: str, cache: str | os.PathLike | None = None) -> tuple[str, bool]:
    """Map a checkpoint reference to something ``from_pretrained`` can open.

    Returns (location, local_only). Existing directories win; then the cache
    directory, where a hub id ``org/name`` is stored as ``org--name``.
    """
    if Path(ref).is_dir():
        return str(ref), True
    root = cache_dir(cache)
    if root is not None:
        candidate = root / ref.replace("/", "--")
        if candidate.is_dir():
            return str(candidate), True
    if Path(ref).is_absolute() or ref.startswith("."):
        raise CheckpointError(f"checkpoint path does not exist: {ref}")
    return ref, False


@dataclass
class EncoderBackend:
    backend_id: str
    checkpoint_ref: str
    hidden_size: int
    tokenizer: object
    encoder: nn.Module
    pooling: str = "first_token"


def load_backend(
    backend_id: str, checkpoint_ref: str | None = None, cache: str | os.PathLike | None = None
) -> EncoderBackend:
    from transformers import AutoModel, AutoTokenizer

    if backend_id not in BACKENDS:
        raise ConfigError(f"unknown backend {backend_id!r}; known: {sorted(BACKENDS)}")
    spec = BACKENDS[backend_id]
    ref = checkpoint_ref or spec.default_checkpoint
    location, local_only = resolve_checkpoint(ref, cache)
    hub_cache = str(cache_dir(cache)) if cache_dir(cache) and not local_only else None
    try:
        tokenizer = AutoTokenizer.from_pretrained(location, cache_dir=hub_cache, local_files_only=local_only)
        encoder = AutoModel.from_pretrained(location, cache_dir=hub_cache, local_files_only=local_only)
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"could not load checkpoint {ref!r}: {exc}") from exc
    if len(tokenizer) > encoder.config.vocab_size:
        raise CheckpointError(
            f"tokenizer has {len(tokenizer)} entries but encoder embeds only "
            f"{encoder.config.vocab_size}; they do not come from the same checkpoint"
        )
    if tokenizer.pad_token is None:
        raise CheckpointError(f"tokenizer for {ref!r} defines no padding token")
    hidden = int(encoder.config.hidden_size)
    if hidden <= 0:
        raise CheckpointError(f"checkpoint {ref!r} declares hidden size {hidden}")
    encoder.requires_grad_(False)
    return EncoderBackend(backend_id, ref, hidden, tokenizer, encoder, spec.pooling)


def pool(hidden: torch.Tensor, mask: torch.Tensor, rule: str) -> torch.Tensor:
    """Reduce per-token vectors [..., L, H] to [..., H] using the unmasked positions.

    Masks are right-padded: ones followed by zeros.
    """
    mask = mask.to(hidden.dtype)
    n_real = mask.sum(dim=-1)
    if torch.any(n_real == 0):
        raise ValueError("cannot pool a fully masked sequence")
    if rule == "first_token":
        return hidden[..., 0, :]
    if rule == "last_token":
        last = (n_real.long() - 1).unsqueeze(-1).unsqueeze(-1)
        last = last.expand(*last.shape[:-1], hidden.shape[-1])
        return torch.gather(hidden, -2, last).squeeze(-2)
    if rule == "mean":
        summed = (hidden * mask.unsqueeze(-1)).sum(dim=-2)
        return summed / n_real.unsqueeze(-1)
    raise ConfigError(f"unknown pooling rule {rule!r}; expected one of {POOLING_RULES}")


class ClassificationHead(nn.Module):
    def __init__(self, hidden_size: int, pooling: str):
        super().__init__()
        if pooling not in POOLING_RULES:
            raise ConfigError(f"unknown pooling rule {pooling!r}")
        self.pooling = pooling
        self.linear = nn.Linear(hidden_size, N_CLASSES)

    def forward(self, hidden: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        return self.linear(pool(hidden, mask, self.pooling))


class EncoderClassifierNet(nn.Module):
    def __init__(self, encoder: nn.Module, head: ClassificationHead):
        super().__init__()
        self.encoder = encoder
        self.head = head

    def forward(self, input_ids: torch.Tensor, attention_mask: torch.Tensor) -> torch.Tensor:
        out = self.encoder(input_ids=input_ids, attention_mask=attention_mask)
        return self.head(out.last_hidden_state, attention_mask)


@dataclass
class FineTuneConfig:
    max_len: int = 256
    learning_rate: float = 5e-5
    batch_size: int = 16
    epochs: int = 4
    seed: int = 0
    pooling: str | None = None  # None: the backend's default
    accumulation_steps: int = 1
    clean_text: bool = True
    device: str | None = None
    optimizer: str = field(default="adam", init=False)

    def __post_init__(self):
        if self.max_len < 8:
            raise ConfigError("max_len must be at least 8")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epochs >= 0")
        if self.accumulation_steps < 1 or self.batch_size % self.accumulation_steps:
            raise ConfigError("accumulation_steps must divide batch_size")
        if self.pooling is not None and self.pooling not in POOLING_RULES:
            raise ConfigError(f"unknown pooling rule {self.pooling!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("device")
        return d


def _device(config: FineTuneConfig) -> torch.device:
    if config.device:
        return torch.device(config.device)
    return torch.device("cuda" if torch.cuda.is_available() else "cpu")


def _encode(texts: Sequence[str], tokenizer, config: FineTuneConfig) -> tuple[torch.Tensor, torch.Tensor]:
    if config.clean_text:
        texts = [clean(t).text for t in texts]
    enc = encode_batch(list(texts), tokenizer, config.max_len)
    ids = torch.tensor(enc["input_ids"], dtype=torch.long)
    mask = torch.tensor(enc["attention_mask"], dtype=torch.long)
    if ids.shape[1] != config.max_len:
        raise ConfigError(f"encoded length {ids.shape[1]} != max_len {config.max_len}")
    return ids, mask


@dataclass
class EncoderClassifier(TrainedClassifier):
    kind: str = "encoder"
    backend: EncoderBackend | None = None
    network: EncoderClassifierNet | None = None
    config: FineTuneConfig | None = None

    @torch.no_grad()
    def predict_proba(self, texts: Sequence[str]) -> np.ndarray:
        if self.network is None or self.backend is None:
            raise ConfigError("classifier has no trained model")
        config = self.config or FineTuneConfig()
        device = _device(config)
        self.network.to(device).eval()
        ids, mask = _encode(texts, self.backend.tokenizer, config)
        out = []
        for start in range(0, len(ids), 64):
            logits = self.network(ids[start : start + 64].to(device), mask[start : start + 64].to(device))
            out.append(torch.softmax(logits.double(), dim=-1).cpu().numpy())
        return np.concatenate(out) if out else np.zeros((0, N_CLASSES))

    def save(self, directory) -> None:
        from causalcat.checkpoint import save_encoder

        save_encoder(self, Path(directory))


def init_network(backend: EncoderBackend, config: FineTuneConfig) -> EncoderClassifierNet:
    torch.manual_seed(config.seed)
    head = ClassificationHead(backend.hidden_size, config.pooling or backend.pooling)
    encoder = copy.deepcopy(backend.encoder)
    encoder.requires_grad_(True)
    return EncoderClassifierNet(encoder, head)


def _is_oom(exc: BaseException) -> bool:
    return isinstance(exc, torch.cuda.OutOfMemoryError) or "out of memory" in str(exc).lower()


def fine_tune(
    backend: EncoderBackend,
    train: Corpus,
    dev: Corpus,
    config: FineTuneConfig,
) -> EncoderClassifier:
    """Train encoder and head jointly with Adam on sparse categorical cross-entropy.

    The backend itself is left untouched: training runs on a copy of its encoder.
    The returned classifier holds the weights of the best dev-accuracy epoch
    (epoch 0 being the freshly initialized head).
    """
    if len(train) == 0 or len(dev) == 0:
        raise DataError("train and dev corpora must be nonempty")
    train_ids = {p.id for p in train.posts}
    if any(p.id in train_ids for p in dev.posts):
        raise DataError("train and dev share post ids")
    device = _device(config)
    net = init_network(backend, config).to(device)
    ids, mask = _encode(train.texts, backend.tokenizer, config)
    labels = torch.from_numpy(train.labels)
    dev_ids, dev_mask = _encode(dev.texts, backend.tokenizer, config)
    dev_labels = dev.labels
    opt = torch.optim.Adam(net.parameters(), lr=config.learning_rate)
    gen = torch.Generator().manual_seed(config.seed)
    micro = config.batch_size // config.accumulation_steps

    @torch.no_grad()
    def dev_accuracy() -> float:
        net.eval()
        preds = []
        for start in range(0, len(dev_ids), 64):
            logits = net(dev_ids[start : start + 64].to(device), dev_mask[start : start + 64].to(device))
            preds.append(logits.argmax(dim=-1).cpu().numpy())
        return float(np.mean(np.concatenate(preds) == dev_labels))

    best_acc = dev_accuracy()
    best_state = {k: v.detach().cpu().clone() for k, v in net.state_dict().items()}
    best_epoch = 0
    history = [EpochRecord(0, float("nan"), best_acc)]
    for epoch in range(1, config.epochs + 1):
        net.train()
        order = torch.randperm(len(labels), generator=gen)
        total = 0.0
        try:
            for start in range(0, len(labels), config.batch_size):
                batch = order[start : start + config.batch_size]
                opt.zero_grad()
                for m_start in range(0, len(batch), micro):
                    idx = batch[m_start : m_start + micro]
                    logits = net(ids[idx].to(device), mask[idx].to(device))
                    loss = F.cross_entropy(logits, labels[idx].to(device), reduction="sum")
                    if not torch.isfinite(loss):
                        raise TrainingAbort(
                            f"loss became {loss.item()} at epoch {epoch}, step {start // config.batch_size}; "
                            f"try a lower learning rate than {config.learning_rate}"
                        )
                    (loss / len(batch)).backward()
                    total += loss.item()
                opt.step()
        except RuntimeError as exc:
            if _is_oom(exc):
                raise TrainingAbort(
                    f"out of memory at batch size {config.batch_size}; raise accumulation_steps "
                    f"(keeps the effective batch) or lower max_len"
                ) from exc
            raise
        acc = dev_accuracy()
        history.append(EpochRecord(epoch, total / len(labels), acc))
        log.info("%s epoch %d loss %.4f dev_acc %.4f", backend.backend_id, epoch, history[-1].train_loss, acc)
        if acc > best_acc:
            best_acc, best_epoch = acc, epoch
            best_state = {k: v.detach().cpu().clone() for k, v in net.state_dict().items()}
    net.load_state_dict(best_state)
    net.eval()
    manifest = {
        "model_kind": "encoder",
        "backend_id": backend.backend_id,
        "checkpoint_ref": backend.checkpoint_ref,
        "hidden_size": backend.hidden_size,
        "pooling": net.head.pooling,
        "max_len": config.max_len,
        "learning_rate": config.learning_rate,
        "batch_size": config.batch_size,
        "epochs": config.epochs,
        "seed": config.seed,
        "accumulation_steps": config.accumulation_steps,
        "optimizer": config.optimizer,
        "best_epoch": best_epoch,
        "dev_accuracy": best_acc,
    }
    return EncoderClassifier(manifest=manifest, history=history, backend=backend, network=net, config=config)


def build_local_checkpoint(
    directory: str | os.PathLike,
    texts: Sequence[str],
    hidden_size: int = 32,
    n_layers: int = 2,
    n_heads: int = 2,
    seed: int = 0,
    dropout: float = 0.1,
) -> Path:
    """Write a small randomly initialized DistilBERT-style checkpoint for offline runs.

    The word-level vocabulary is taken from ``texts`` (lowercased). Useful for
    smoke tests and learning checks when no hub access exists; it carries no
    pre-trained knowledge.
    """
    from transformers import BertTokenizer, DistilBertConfig, DistilBertModel

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    specials = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    words: set[str] = set()
    probe = BertTokenizer(vocab={t: i for i, t in enumerate(specials)})
    backend = probe.backend_tokenizer
    for text in texts:
        normalized = backend.normalizer.normalize_str(text)
        words.update(w for w, _ in backend.pre_tokenizer.pre_tokenize_str(normalized))
    vocab = specials + sorted(words - set(specials))
    tokenizer = BertTokenizer(vocab={t: i for i, t in enumerate(vocab)})
    torch.manual_seed(seed)
    config = DistilBertConfig(
        vocab_size=len(vocab),
        dim=hidden_size,
        n_layers=n_layers,
        n_heads=n_heads,
        hidden_dim=4 * hidden_size,
        max_position_embeddings=512,
        pad_token_id=0,
        dropout=dropout,
        attention_dropout=dropout,
    )
    DistilBertModel(config).save_pretrained(directory)
    tokenizer.save_pretrained(directory)
    return directory
