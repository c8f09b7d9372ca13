import json

import pytest

from causalcat.corpus import CausalCategory, Corpus, LabeledPost, Split
from causalcat.errors import ConfigError, DataError
from causalcat.stats import LengthStats, emit_stats_table, length_stats


def corpus_of(items, split=Split.CRAWLED):
    return Corpus(
        tuple(LabeledPost(str(i), text, label, split) for i, (text, label) in enumerate(items)), split
    )


def test_single_post_class():
    (s,) = length_stats(corpus_of([("one two three four five six seven", 3)]))
    assert (s.min, s.max, s.avg, s.n_posts) == (7, 7, 7.0, 1)


def test_two_posts():
    (s,) = length_stats(corpus_of([("a b c d", 1), ("a b c d e f g h i j", 1)]))
    assert (s.min, s.max, s.avg) == (4, 10, 7.0)


def test_classes_omitted_and_counts_sum():
    items = [("x y", 0), ("x", 0), ("p q r", 5), ("z", 2)]
    stats = length_stats(corpus_of(items))
    assert [int(s.category) for s in stats] == [0, 2, 5]
    assert sum(s.n_posts for s in stats) == len(items)
    for s in stats:
        assert s.min <= s.avg <= s.max


def test_raw_vs_clean_counting():
    corpus = corpus_of([("see http://a.b  now", 0), ("a \x00 b", 0)])
    assert length_stats(corpus)[0].max == 3
    assert length_stats(corpus, raw=True)[0].max == 3
    assert length_stats(corpus_of([("a \x00 b", 0)]), raw=True)[0].max == 3
    assert length_stats(corpus_of([("a \x00 b", 0)]))[0].max == 2


def test_empty_corpus_rejected():
    with pytest.raises(DataError):
        length_stats(Corpus((), Split.CRAWLED))


def _row(code, split=Split.CRAWLED, avg=59.78):
    return LengthStats(CausalCategory(code), split, 1, 508, avg, 10)


def test_emit_csv_single_row():
    out = emit_stats_table([_row(0)], "csv")
    assert out.splitlines() == ["split,class_code,class_name,min,max,avg,n_posts", "crawled,0,no_reason,1,508,59.78,10"]


def test_emit_empty_list_header_only():
    assert emit_stats_table([], "csv").splitlines() == ["split,class_code,class_name,min,max,avg,n_posts"]
    assert json.loads(emit_stats_table([], "json")) == []
    assert len(emit_stats_table([], "text").splitlines()) == 2


def test_emit_orders_by_split_then_class():
    rows = [_row(4, Split.SDCNL_TEST), _row(2), _row(0, Split.SDCNL_TEST), _row(1)]
    parsed = json.loads(emit_stats_table(rows, "json"))
    assert [(r["split"], r["class_code"]) for r in parsed] == [
        ("crawled", 1), ("crawled", 2), ("sdcnl_test", 0), ("sdcnl_test", 4)
    ]


def test_emit_text_six_rows_per_split():
    rows = [_row(c, s) for s in Split for c in range(6)]
    lines = emit_stats_table(rows, "text").splitlines()[2:]
    assert len(lines) == 18
    assert lines[0].split()[:5] == ["crawled", "no_reason", "1", "508", "59.78"]


def test_emit_is_deterministic_and_rejects_unknown():
    rows = [_row(c) for c in range(6)]
    for fmt in ("text", "csv", "json"):
        assert emit_stats_table(rows, fmt) == emit_stats_table(list(reversed(rows)), fmt)
    with pytest.raises(ConfigError):
        emit_stats_table(rows, "xml")
