"""Model checkpoints on disk.

Every checkpoint is a directory holding:

``manifest.txt``
    plain-text ``key = value`` lines (model kind, config, seed, hashes).
``history.tsv``
    per-epoch ``epoch, train_loss, dev_accuracy``.
``weights.npz``
    numpy ``.npz`` archive (zip of ``.npy`` arrays, little-endian float64/float32).
    logreg: ``weights`` [n_features, 6], ``bias`` [6], ``idf`` [n_features].
    cnn_lstm: one array per torch state-dict key.
``vocab.txt``
    ``token<TAB>index`` per line (baselines only).
``encoder/`` and ``head.npz``
    fine-tuned encoder plus tokenizer in the transformers layout, and the
    head's ``linear.weight`` [6, hidden] / ``linear.bias`` [6] (encoders only).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from causalcat.baselines.cnn_lstm import CnnLstmArch, CnnLstmClassifier, CnnLstmModel
from causalcat.baselines.core import EpochRecord, TrainedClassifier
from causalcat.baselines.logreg import LogRegClassifier, SoftmaxRegressionModel, TfidfFeaturizer
from causalcat.errors import CheckpointError, CheckpointMismatch
from causalcat.manifest import read_manifest, write_manifest
from causalcat.textprep import Vocabulary

MANIFEST = "manifest.txt"


def _truthy(value: str) -> bool:
    return value.strip().lower() in ("1", "true", "yes")


def _write_common(model: TrainedClassifier, directory: Path, extra: dict | None = None) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    write_manifest(directory / MANIFEST, {**model.manifest, **(extra or {})})
    lines = ["epoch\ttrain_loss\tdev_accuracy"]
    lines += [f"{r.epoch}\t{r.train_loss!r}\t{r.dev_accuracy!r}" for r in model.history]
    (directory / "history.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_history(directory: Path) -> list[EpochRecord]:
    path = directory / "history.tsv"
    if not path.is_file():
        return []
    rows = path.read_text(encoding="utf-8").splitlines()[1:]
    out = []
    for row in rows:
        e, loss, acc = row.split("\t")
        out.append(EpochRecord(int(e), float(loss), float(acc)))
    return out


def _load_vocab(directory: Path, manifest: dict) -> Vocabulary:
    vocab = Vocabulary.load(directory / "vocab.txt", int(manifest.get("min_frequency", 1)))
    if vocab.digest() != manifest.get("vocab_hash"):
        raise CheckpointMismatch(
            f"{directory}: vocabulary hash {vocab.digest()[:12]} does not match the manifest's "
            f"{manifest.get('vocab_hash', '')[:12]}"
        )
    return vocab


def save_logreg(model: LogRegClassifier, directory: Path) -> None:
    _write_common(model, directory)
    model.featurizer.vocabulary.save(directory / "vocab.txt")
    np.savez(
        directory / "weights.npz",
        weights=model.model.weights,
        bias=model.model.bias,
        idf=model.featurizer.idf,
    )


def save_cnn_lstm(model: CnnLstmClassifier, directory: Path) -> None:
    _write_common(model, directory)
    model.vocab.save(directory / "vocab.txt")
    state = {k: v.detach().cpu().numpy() for k, v in model.network.state_dict().items()}
    np.savez(directory / "weights.npz", **state)


def save_encoder(model, directory: Path) -> None:
    _write_common(model, directory)
    model.network.encoder.save_pretrained(directory / "encoder")
    model.backend.tokenizer.save_pretrained(directory / "encoder")
    head = {k: v.detach().cpu().numpy() for k, v in model.network.head.state_dict().items()}
    np.savez(directory / "head.npz", **head)


def _arch_from_manifest(manifest: dict) -> CnnLstmArch:
    defaults = CnnLstmArch()
    kwargs = {}
    for name in CnnLstmArch.__dataclass_fields__:
        default, raw = getattr(defaults, name), manifest[f"arch.{name}"]
        kwargs[name] = _truthy(raw) if isinstance(default, bool) else type(default)(raw)
    return CnnLstmArch(**kwargs)


def load_classifier(directory: str | Path) -> TrainedClassifier:
    directory = Path(directory)
    if not directory.is_dir():
        raise CheckpointError(f"checkpoint directory not found: {directory}")
    manifest = read_manifest(directory / MANIFEST)
    kind = manifest.get("model_kind")
    history = _read_history(directory)
    try:
        if kind == "logreg":
            vocab = _load_vocab(directory, manifest)
            arrays = np.load(directory / "weights.npz")
            if arrays["weights"].shape[0] != len(vocab):
                raise CheckpointMismatch(f"{directory}: weight rows do not match vocabulary size")
            featurizer = TfidfFeaturizer(
                vocab, arrays["idf"], _truthy(manifest.get("sublinear_tf", "false")),
                _truthy(manifest.get("lowercase", "true")),
            )
            reg = SoftmaxRegressionModel(arrays["weights"], arrays["bias"], float(manifest["l2_strength"]))
            return LogRegClassifier(manifest=manifest, history=history, featurizer=featurizer, model=reg)
        if kind == "cnn_lstm":
            vocab = _load_vocab(directory, manifest)
            arch = _arch_from_manifest(manifest)
            net = CnnLstmModel(len(vocab), arch)
            arrays = np.load(directory / "weights.npz")
            net.load_state_dict({k: torch.from_numpy(arrays[k]) for k in arrays.files})
            net.eval()
            return CnnLstmClassifier(manifest=manifest, history=history, vocab=vocab, network=net)
        if kind == "encoder":
            return _load_encoder(directory, manifest, history)
    except KeyError as exc:
        raise CheckpointError(f"{directory}: manifest lacks {exc}") from exc
    except (RuntimeError, ValueError, OSError) as exc:
        if isinstance(exc, CheckpointMismatch):
            raise
        raise CheckpointError(f"{directory}: corrupt checkpoint: {exc}") from exc
    raise CheckpointError(f"{directory}: unknown model kind {kind!r}")


def _load_encoder(directory: Path, manifest: dict, history) -> TrainedClassifier:
    from causalcat.finetune import (
        ClassificationHead,
        EncoderClassifier,
        EncoderClassifierNet,
        FineTuneConfig,
        load_backend,
    )

    backend = load_backend(manifest["backend_id"], str(directory / "encoder"))
    if backend.hidden_size != int(manifest["hidden_size"]):
        raise CheckpointMismatch(f"{directory}: encoder hidden size differs from manifest")
    head = ClassificationHead(backend.hidden_size, manifest["pooling"])
    arrays = np.load(directory / "head.npz")
    head.load_state_dict({k: torch.from_numpy(arrays[k]) for k in arrays.files})
    config = FineTuneConfig(
        max_len=int(manifest["max_len"]),
        learning_rate=float(manifest["learning_rate"]),
        batch_size=int(manifest["batch_size"]),
        epochs=int(manifest["epochs"]),
        seed=int(manifest["seed"]),
        pooling=manifest["pooling"],
    )
    net = EncoderClassifierNet(backend.encoder, head).eval()
    backend.checkpoint_ref = manifest.get("checkpoint_ref", backend.checkpoint_ref)
    return EncoderClassifier(manifest=manifest, history=history, backend=backend, network=net, config=config)
