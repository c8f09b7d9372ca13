"""End-to-end run steps shared by the command line and the acceptance checks."""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from causalcat.baselines import (
    BaselineTrainConfig,
    CnnLstmArch,
    TfidfFeaturizer,
    TrainedClassifier,
    train_cnn_lstm,
    train_logreg,
)
from causalcat.checkpoint import load_classifier
from causalcat.config import BASELINE_MODELS
from causalcat.corpus import (
    CATEGORIES,
    ColumnMap,
    Corpus,
    Split,
    load_corpus,
    oversample_minority,
    stratified_split,
)
from causalcat.errors import CheckpointMismatch, ConfigError
from causalcat.evaluation import (
    EvalReport,
    bootstrap_test,
    check_same_test_split,
    error_analysis,
    evaluate,
    render_table,
    significance_test,
)
from causalcat.manifest import file_digest
from causalcat.stats import emit_stats_table, length_stats
from causalcat.textprep import build_vocab

log = logging.getLogger(__name__)

COMPOSITION_SPLITS = {
    "crawled": (Split.CRAWLED,),
    "sdcnl_train": (Split.SDCNL_TRAIN,),
    "both": (Split.CRAWLED, Split.SDCNL_TRAIN),
}


def column_map(config: Mapping) -> ColumnMap:
    d = config["data"]
    return ColumnMap(d["text_column"], d["label_column"], d["label_encoding"], d.get("id_column"))


def split_path(config: Mapping, split: Split) -> Path:
    path = config["data"].get(split.value)
    if not path:
        raise ConfigError(f"no path configured for split {split.value} (set data.{split.value})")
    return Path(path)


def load_split(config: Mapping, split: Split | str) -> Corpus:
    split = Split.parse(split)
    return load_corpus(split_path(config, split), column_map(config), split)


def training_corpus(config: Mapping) -> Corpus:
    splits = COMPOSITION_SPLITS[config["train_composition"]]
    return Corpus.concat([load_split(config, s) for s in splits])


def prepare_training_data(config: Mapping) -> tuple[Corpus, Corpus, dict]:
    """Load the training composition, hold out a stratified dev set, then oversample.

    Balancing touches the training part only; the dev set keeps the natural
    class distribution and contains no duplicates created here.
    """
    full = training_corpus(config)
    seed = int(config["seed"])
    train, dev = stratified_split(full, float(config["dev_fraction"]), seed)
    balance = config.get("balance") or {}
    classes = [CATEGORIES[int(c)] for c in balance.get("classes") or []]
    n = int(balance.get("n") or 0)
    bseed = seed if balance.get("seed") is None else int(balance["seed"])
    train = oversample_minority(train, classes, n, bseed)
    splits = COMPOSITION_SPLITS[config["train_composition"]]
    info = {
        "train_composition": config["train_composition"],
        "balance": {"classes": [int(c) for c in classes], "n": n, "seed": bseed},
        "dev_fraction": float(config["dev_fraction"]),
        "n_train": len(train),
        "n_dev": len(dev),
        "data_hash": {s.value: file_digest(split_path(config, s)) for s in splits},
    }
    return train, dev, info


def baseline_config(config: Mapping, kind: str) -> BaselineTrainConfig:
    b = config["baseline"]
    return BaselineTrainConfig(
        learning_rate=float(config[kind]["learning_rate"]),
        epochs=int(b["epochs"]),
        batch_size=int(b["batch_size"]),
        seed=int(config["seed"]),
        early_stop_patience=int(b["early_stop_patience"]),
    )


def finetune_config(config: Mapping):
    from causalcat.finetune import FineTuneConfig

    f = config["finetune"]
    return FineTuneConfig(
        max_len=int(f["max_len"]),
        learning_rate=float(f["learning_rate"]),
        batch_size=int(f["batch_size"]),
        epochs=int(f["epochs"]),
        seed=int(config["seed"]),
        pooling=f.get("pooling"),
        accumulation_steps=int(f.get("accumulation_steps") or 1),
    )


def train_model(config: Mapping, train: Corpus, dev: Corpus) -> TrainedClassifier:
    kind = config["model"]
    if kind == "logreg":
        lr_cfg = config["logreg"]
        featurizer = TfidfFeaturizer.fit(
            train.texts,
            min_frequency=int(config["baseline"]["min_frequency"]),
            sublinear_tf=bool(lr_cfg["sublinear_tf"]),
        )
        return train_logreg(train, dev, featurizer, baseline_config(config, kind), float(lr_cfg["l2_strength"]))
    if kind == "cnn_lstm":
        vocab = build_vocab(train.texts, int(config["baseline"]["min_frequency"]))
        arch = CnnLstmArch(**{k: int(v) for k, v in config["cnn_lstm"].items() if k != "learning_rate"})
        return train_cnn_lstm(train, dev, vocab, baseline_config(config, kind), arch)
    from causalcat.finetune import BACKENDS, fine_tune, load_backend

    if kind not in BACKENDS:
        raise ConfigError(f"unknown model {kind!r}; choose from {list(BASELINE_MODELS) + sorted(BACKENDS)}")
    backend = load_backend(kind, config.get("backend_checkpoint"), config.get("cache"))
    return fine_tune(backend, train, dev, finetune_config(config))


def run_train(config: Mapping, out: str | Path) -> TrainedClassifier:
    out = Path(out)
    train, dev, info = prepare_training_data(config)
    log.info("training %s on %d posts (%d dev)", config["model"], len(train), len(dev))
    model = train_model(config, train, dev)
    model.manifest.update(info)
    model.manifest["seed"] = int(config["seed"])
    model.save(out)
    return model


def run_stats(config: Mapping, out: str | Path, splits: Iterable[Split] | None = None) -> dict[str, list]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    chosen = list(splits) if splits else [s for s in Split if config["data"].get(s.value)]
    if not chosen:
        raise ConfigError("no dataset paths configured (set data.crawled / data.sdcnl_train / data.sdcnl_test)")
    results = {}
    for split in chosen:
        rows = length_stats(load_split(config, split), raw=bool(config["stats"]["raw"]))
        for fmt, ext in (("text", "txt"), ("csv", "csv"), ("json", "json")):
            (out / f"stats_{split.value}.{ext}").write_text(emit_stats_table(rows, fmt), encoding="utf-8")
        results[split.value] = rows
    return results


def model_name(model: TrainedClassifier) -> str:
    return str(model.manifest.get("backend_id") or model.manifest.get("model_kind") or model.kind)


def run_evaluate(
    config: Mapping, checkpoint: str | Path, split: Split | str, out: str | Path
) -> EvalReport:
    model = load_classifier(checkpoint)
    requested = config.get("model")
    if requested and requested != model_name(model):
        raise CheckpointMismatch(
            f"config asks for model {requested!r} but checkpoint {checkpoint} holds {model_name(model)!r}"
        )
    corpus = load_split(config, split)
    seed = model.manifest.get("seed")
    report = evaluate(
        model,
        corpus,
        name=model_name(model),
        manifest_ref=str(Path(checkpoint) / "manifest.txt"),
        seed=int(seed) if seed not in (None, "") else None,
    )
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    text = render_table([report]) + "\n" + error_analysis(report).render()
    (out / "report.txt").write_text(text, encoding="utf-8")
    return report


def _groups(reports: Sequence[EvalReport], names: Sequence[str], by_model: bool) -> dict[str, list[EvalReport]]:
    groups: dict[str, list[EvalReport]] = defaultdict(list)
    for name, report in zip(names, reports):
        key = report.model if by_model else f"{report.model} [{name}]"
        if not by_model:
            base, k = key, 2
            while key in groups:
                key, k = f"{base} #{k}", k + 1
        groups[key].append(report)
    return dict(groups)


def _seed_pairs(a: list[EvalReport], b: list[EvalReport]) -> tuple[list[float], list[float], str]:
    seeds_a = {r.seed: r for r in a}
    seeds_b = {r.seed: r for r in b}
    if None not in seeds_a and seeds_a.keys() == seeds_b.keys() and len(seeds_a) == len(a) == len(b):
        order = sorted(seeds_a)
        return [seeds_a[s].accuracy for s in order], [seeds_b[s].accuracy for s in order], "paired by seed"
    if len(a) != len(b):
        raise ConfigError("seed-paired comparison needs equally many runs per model")
    return [r.accuracy for r in a], [r.accuracy for r in b], "paired by run order"


def compare_reports(
    reports: Sequence[EvalReport],
    names: Sequence[str] | None = None,
    mode: str = "auto",
    alpha: float = 0.05,
    by_model: bool = False,
) -> dict:
    """Side-by-side table plus pairwise significance between groups of reports.

    mode ``seeds``: paired t-test over per-seed test accuracies (groups of runs).
    mode ``examples``: paired t-test over per-example correctness of single runs.
    mode ``bootstrap``: paired bootstrap over test examples.
    ``auto`` picks ``seeds`` when every group has two or more runs, else ``examples``.
    """
    if len(reports) < 2:
        raise ConfigError("compare needs at least two reports")
    check_same_test_split(reports)
    names = list(names or [str(i) for i in range(len(reports))])
    groups = _groups(reports, names, by_model)
    if mode == "auto":
        mode = "seeds" if all(len(g) >= 2 for g in groups.values()) else "examples"
    if mode not in ("seeds", "examples", "bootstrap"):
        raise ConfigError(f"unknown comparison mode {mode!r}")
    keys = list(groups)
    results = []
    for i, ka in enumerate(keys):
        for kb in keys[i + 1 :]:
            ga, gb = groups[ka], groups[kb]
            if mode == "seeds":
                a, b, how = _seed_pairs(ga, gb)
                sig = significance_test(a, b, alpha, paired=True,
                                        description=f"paired t-test over {len(a)} per-seed accuracies ({how})")
            else:
                ra, rb = ga[0], gb[0]
                if ra.golds != rb.golds:
                    raise ConfigError("reports disagree on gold labels; not the same test set")
                if mode == "examples":
                    g = np.asarray(ra.golds)
                    sig = significance_test(
                        (np.asarray(ra.preds) == g).astype(float),
                        (np.asarray(rb.preds) == g).astype(float),
                        alpha, paired=True,
                        description=f"paired t-test over {len(g)} per-example correctness indicators",
                    )
                else:
                    sig = bootstrap_test(ra.golds, ra.preds, rb.preds, alpha)
            results.append({"a": ka, "b": kb, **sig.to_dict()})
    table_rows = []
    for key, group in groups.items():
        mean = EvalReport(
            per_class_f1=np.mean([r.per_class_f1 for r in group], axis=0),
            accuracy=float(np.mean([r.accuracy for r in group])),
            macro_f1=float(np.mean([r.macro_f1 for r in group])),
            confusion=group[0].confusion,
            n=group[0].n,
            model=key if len(group) == 1 else f"{key} (mean of {len(group)} runs)",
        )
        table_rows.append(mean)
    return {"mode": mode, "table": render_table(table_rows), "significance": results}


def write_comparison(result: dict, out: str | Path) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "compare.json").write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
    lines = [result["table"], f"significance ({result['mode']}):"]
    for s in result["significance"]:
        verdict = "significant" if s["verdict"] else "not significant"
        warn = f" [{s['warning']}]" if s["warning"] else ""
        lines.append(
            f"  {s['a']} vs {s['b']}: t={s['t_statistic']:.4f} p={s['p_value']:.4g} "
            f"alpha={s['alpha']} -> {verdict}{warn}"
        )
    (out / "compare.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def predict_lines(checkpoint: str | Path, lines: Sequence[str]) -> list[str]:
    posts = [line.rstrip("\n") for line in lines if line.strip()]
    if not posts:
        raise ConfigError("no input posts to classify")
    model = load_classifier(checkpoint)
    out = []
    for code, probs in model.predict(posts):
        cells = [str(code), CATEGORIES[code].label] + [f"{p:.6f}" for p in probs]
        out.append("\t".join(cells))
    return out

