import io
import json

import pytest

from causalcat.cli import main
from causalcat.corpus import save_corpus
from causalcat.manifest import read_manifest, without_timestamps
from causalcat.synthetic import synthetic_corpus

CANON = ["--data.label_column", "label_code", "--data.id_column", "id"]


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    paths = {}
    for split, n, seed in (("crawled", 120, 10), ("sdcnl_train", 120, 11), ("sdcnl_test", 90, 12)):
        paths[split] = root / f"{split}.csv"
        save_corpus(synthetic_corpus(n, seed=seed, split=split), paths[split])
    return paths


def data_flags(data, *splits):
    flags = list(CANON)
    for s in splits or data:
        flags += [f"--data.{s}", str(data[s])]
    return flags


def test_stats_single_file(data, tmp_path, capsys):
    out = tmp_path / "stats"
    assert main(["stats", "--out", str(out), *data_flags(data, "crawled")]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["stats_crawled.csv", "stats_crawled.json", "stats_crawled.txt"]
    rows = json.loads((out / "stats_crawled.json").read_text())
    assert len(rows) == 6 and sum(r["n_posts"] for r in rows) == 120


def test_stats_all_splits(data, tmp_path):
    assert main(["stats", "--out", str(tmp_path), "--raw", *data_flags(data)]) == 0
    for split in data:
        assert len((tmp_path / f"stats_{split}.csv").read_text().splitlines()) == 7


def test_stats_missing_file(tmp_path, capsys):
    missing = tmp_path / "gone.csv"
    assert main(["stats", "--out", str(tmp_path), "--data.crawled", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_usage_errors_exit_1(tmp_path, capsys):
    assert main(["stats", "--out", str(tmp_path), "--no.such.key", "1"]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


@pytest.fixture(scope="module")
def trained(data, tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "lr"
    code = main(["train", "--model", "logreg", "--out", str(out), "--seed", "3", "--epochs", "20", *data_flags(data)])
    assert code == 0
    return out


def test_train_writes_checkpoint_and_manifest(trained, data):
    m = read_manifest(trained / "manifest.txt")
    assert m["model_kind"] == "logreg"
    assert m["train_composition"] == "both"
    assert m["balance.classes"] == "1,2,3" and m["balance.n"] == "120"
    assert m["seed"] == "3"
    assert set(m) >= {"data_hash.crawled", "data_hash.sdcnl_train", "vocab_hash", "best_epoch", "dev_accuracy"}
    assert (trained / "history.tsv").read_text().startswith("epoch\ttrain_loss\tdev_accuracy")


def test_train_is_reproducible(data, trained, tmp_path):
    again = tmp_path / "again"
    assert main(["train", "--model", "logreg", "--out", str(again), "--seed", "3", "--epochs", "20", *data_flags(data)]) == 0
    assert without_timestamps(read_manifest(again / "manifest.txt")) == without_timestamps(
        read_manifest(trained / "manifest.txt")
    )
    assert (again / "weights.npz").read_bytes() == (trained / "weights.npz").read_bytes()


def test_train_composition_and_balance_flags(data, tmp_path):
    out = tmp_path / "m"
    args = ["train", "--model", "logreg", "--out", str(out), "--epochs", "1", "--train-composition", "crawled",
            "--balance", "c4:7", *data_flags(data, "crawled")]
    assert main(args) == 0
    m = read_manifest(out / "manifest.txt")
    assert m["train_composition"] == "crawled" and m["balance.classes"] == "4" and m["balance.n"] == "7"
    assert set(k for k in m if k.startswith("data_hash")) == {"data_hash.crawled"}


def test_train_config_file_and_flag_precedence(data, tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(
        "model: cnn_lstm\nseed: 1\nbaseline:\n  epochs: 5\ncnn_lstm:\n  max_len: 32\n"
        f"data:\n  sdcnl_train: {data['sdcnl_train']}\n  label_column: label_code\n  id_column: id\n"
        "train_composition: sdcnl_train\n"
    )
    out = tmp_path / "cnn"
    assert main(["train", "--config", str(cfg), "--out", str(out), "--epochs", "1", "--seed", "2"]) == 0
    m = read_manifest(out / "manifest.txt")
    assert m["model_kind"] == "cnn_lstm" and m["config.epochs"] == "1" and m["seed"] == "2"
    assert m["arch.max_len"] == "32"


def test_train_encoder_zero_epochs(data, tiny_checkpoint, tmp_path):
    out = tmp_path / "enc"
    args = ["train", "--model", "distilbert", "--backend-checkpoint", str(tiny_checkpoint), "--epochs", "0",
            "--max-len", "16", "--out", str(out), *data_flags(data)]
    assert main(args) == 0
    m = read_manifest(out / "manifest.txt")
    for key in ("backend_id", "checkpoint_ref", "max_len", "learning_rate", "batch_size", "epochs", "seed",
                "train_composition", "best_epoch", "dev_accuracy"):
        assert key in m
    assert m["best_epoch"] == "0" and m["max_len"] == "16" and m["learning_rate"] == "5e-05"
    assert (out / "encoder" / "config.json").is_file() and (out / "head.npz").is_file()


def test_training_abort_exit_code(data, tmp_path, monkeypatch):
    import causalcat.baselines.logreg as lr

    monkeypatch.setattr(lr, "batch_cross_entropy", lambda p, y: p[:, 0] * float("nan"))
    assert main(["train", "--model", "logreg", "--out", str(tmp_path), *data_flags(data)]) == 3


def test_evaluate_writes_report(trained, data, tmp_path, capsys):
    out = tmp_path / "eval"
    assert main(["evaluate", "--checkpoint", str(trained), "--out", str(out), *data_flags(data)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert len(report["f1"]) == 6 and 0 <= report["accuracy"] <= 1 and report["n"] == 90
    header = (out / "report.txt").read_text().splitlines()[0]
    assert header.split()[0] == "Classifier" and header.split()[-1] == "Accuracy"
    assert "Per-class recall" in capsys.readouterr().out


def test_evaluate_on_training_split_memorizes(trained, data, tmp_path):
    out = tmp_path / "mem"
    args = ["evaluate", "--checkpoint", str(trained), "--split", "sdcnl_train", "--out", str(out), *data_flags(data)]
    assert main(args) == 0
    assert json.loads((out / "report.json").read_text())["accuracy"] == 1.0


def test_evaluate_vocab_mismatch(trained, data, tmp_path, capsys):
    import shutil

    broken = tmp_path / "broken"
    shutil.copytree(trained, broken)
    vocab = broken / "vocab.txt"
    lines = vocab.read_text().splitlines()
    lines[2], lines[3] = lines[3].split("\t")[0] + "\t2", lines[2].split("\t")[0] + "\t3"
    vocab.write_text("\n".join(lines) + "\n")
    assert main(["evaluate", "--checkpoint", str(broken), "--out", str(tmp_path), *data_flags(data)]) == 1
    assert "mismatch" in capsys.readouterr().err.lower() or "does not match" in capsys.readouterr().err


def test_evaluate_model_mismatch(trained, data, tmp_path):
    args = ["evaluate", "--checkpoint", str(trained), "--model", "cnn_lstm", "--out", str(tmp_path), *data_flags(data)]
    assert main(args) == 1


@pytest.fixture(scope="module")
def report_path(trained, data, tmp_path_factory):
    out = tmp_path_factory.mktemp("rep")
    assert main(["evaluate", "--checkpoint", str(trained), "--out", str(out), *data_flags(data)]) == 0
    return out / "report.json"


def test_compare_self_is_not_significant(report_path, tmp_path, capsys):
    out = tmp_path / "cmp"
    assert main(["compare", str(report_path), str(report_path), "--out", str(out)]) == 0
    result = json.loads((out / "compare.json").read_text())
    (sig,) = result["significance"]
    assert sig["verdict"] is False and sig["mean_difference"] == 0.0
    assert "not significant" in capsys.readouterr().out


def test_compare_refuses_different_test_sets(report_path, trained, data, tmp_path, capsys):
    other = tmp_path / "other"
    args = ["evaluate", "--checkpoint", str(trained), "--split", "crawled", "--out", str(other), *data_flags(data)]
    assert main(args) == 0
    assert main(["compare", str(report_path), str(other / "report.json"), "--out", str(tmp_path)]) == 1
    assert "different test sets" in capsys.readouterr().err


def test_compare_seed_groups(data, tmp_path):
    reports = []
    for model in ("logreg", "cnn_lstm"):
        for seed in (1, 2):
            ck = tmp_path / f"{model}-{seed}"
            extra = ["--cnn_lstm.max_len", "32"] if model == "cnn_lstm" else []
            assert main(["train", "--model", model, "--seed", str(seed), "--epochs", "2", "--out", str(ck),
                         *extra, *data_flags(data)]) == 0
            ev = tmp_path / f"ev-{model}-{seed}"
            assert main(["evaluate", "--checkpoint", str(ck), "--out", str(ev), *data_flags(data)]) == 0
            reports.append(str(ev / "report.json"))
    assert main(["compare", *reports, "--by-model", "--out", str(tmp_path / "c")]) == 0
    result = json.loads((tmp_path / "c" / "compare.json").read_text())
    assert result["mode"] == "seeds"
    assert "per-seed accuracies (paired by seed)" in result["significance"][0]["sample_description"]


def test_predict_preserves_order(trained, tmp_path, capsys, monkeypatch):
    posts = ["i was unemployed and unemployed again", "so lonely lonely tonight", "my girlfriend girlfriend left"]
    monkeypatch.setattr("sys.stdin", io.StringIO("\n".join(posts) + "\n"))
    assert main(["predict", "--checkpoint", str(trained)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3
    assert [line.split("\t")[:2] for line in lines] == [["2", "jobs_careers"], ["5", "alienation"], ["4", "relationship"]]
    probs = [float(x) for x in lines[0].split("\t")[2:]]
    assert len(probs) == 6 and abs(sum(probs) - 1) < 1e-5


def test_predict_from_file(trained, tmp_path, capsys):
    f = tmp_path / "in.txt"
    f.write_text("lonely lonely\n\nbullied bullied\n")
    assert main(["predict", "--checkpoint", str(trained), "--input", str(f)]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 2


def test_predict_empty_stdin(trained, capsys, monkeypatch):
    monkeypatch.setattr("sys.stdin", io.StringIO(""))
    assert main(["predict", "--checkpoint", str(trained)]) == 1


def test_cli_does_not_modify_inputs(data, trained, tmp_path):
    before = {k: p.read_bytes() for k, p in data.items()}
    main(["stats", "--out", str(tmp_path), *data_flags(data)])
    main(["evaluate", "--checkpoint", str(trained), "--out", str(tmp_path), *data_flags(data)])
    assert {k: p.read_bytes() for k, p in data.items()} == before
