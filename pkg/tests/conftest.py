import csv
import logging

import pytest

from causalcat.synthetic import synthetic_corpus

logging.getLogger("transformers").setLevel(logging.ERROR)


def write_csv(path, rows, header=("text", "label")):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


@pytest.fixture
def csv_writer(tmp_path):
    def _write(name, rows, header=("text", "label")):
        return write_csv(tmp_path / name, rows, header)

    return _write


@pytest.fixture(scope="session")
def synth_train():
    return synthetic_corpus(200, seed=0)


@pytest.fixture(scope="session")
def synth_dev():
    return synthetic_corpus(60, seed=2)


@pytest.fixture(scope="session")
def synth_holdout():
    return synthetic_corpus(120, seed=1)


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory, synth_train):
    from causalcat.finetune import build_local_checkpoint

    extra = ["with this 2 years of unemployment , i want to quit my life ."]
    return build_local_checkpoint(tmp_path_factory.mktemp("tiny-encoder"), synth_train.texts + extra)


@pytest.fixture(scope="session")
def tiny_backend(tiny_checkpoint):
    from causalcat.finetune import load_backend

    return load_backend("distilbert", str(tiny_checkpoint))
