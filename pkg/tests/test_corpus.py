import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causalcat.corpus import (
    CANONICAL_COLUMNS,
    CausalCategory,
    ColumnMap,
    Corpus,
    LabeledPost,
    Split,
    load_corpus,
    oversample_minority,
    parse_balance,
    save_corpus,
    stratified_split,
)
from causalcat.errors import ConfigError, DataError

C = CausalCategory


def make_corpus(counts: dict[int, int], split=Split.SDCNL_TRAIN) -> Corpus:
    posts = []
    for code, n in counts.items():
        posts += [LabeledPost(f"{code}-{i}", f"post {code} number {i}", C(code), split) for i in range(n)]
    return Corpus(tuple(posts), split)


def test_category_bijection():
    assert len(C) == 6
    for c in C:
        assert C.from_code(int(c)) is c
        assert C.from_name(c.label) is c
    assert [c.label for c in sorted(C)] == [
        "no_reason", "bias_abuse", "jobs_careers", "medication", "relationship", "alienation",
    ]


@pytest.mark.parametrize(
    "name,code", [("No reason", 0), ("Bias or Abuse", 1), ("Jobs and career", 2), ("relationships", 4)]
)
def test_category_aliases(name, code):
    assert C.from_name(name) == code


def test_load_counts_three_rows(csv_writer):
    path = csv_writer("f.csv", [("a", 0), ("b b", 4), ("c", 4)])
    corpus = load_corpus(path, ColumnMap(), Split.CRAWLED)
    assert len(corpus) == 3
    assert corpus.class_counts == {C(0): 1, C(1): 0, C(2): 0, C(3): 0, C(4): 2, C(5): 0}
    assert [p.text for p in corpus] == ["a", "b b", "c"]


def test_load_header_only(csv_writer):
    corpus = load_corpus(csv_writer("f.csv", []), ColumnMap(), "sdcnl_test")
    assert len(corpus) == 0
    assert set(corpus.class_counts.values()) == {0}


def test_load_category_names(csv_writer):
    path = csv_writer("f.csv", [("x", "jobs_careers"), ("y", "Alienation")], header=("post", "cause"))
    corpus = load_corpus(path, ColumnMap("post", "cause", "category_names"), Split.CRAWLED)
    assert corpus.labels.tolist() == [2, 5]


def test_load_quoted_multiline_field(csv_writer):
    path = csv_writer("f.csv", [('she said "hi",\nthen left', 1)])
    assert load_corpus(path, ColumnMap(), Split.CRAWLED).posts[0].text == 'she said "hi",\nthen left'


@pytest.mark.parametrize(
    "rows,fragment",
    [
        ([("ok", 0), ("bad", 7)], "row 3"),
        ([("ok", 0), ("bad", "x")], "row 3"),
        ([("   ", 1)], "row 2"),
    ],
)
def test_load_bad_rows_name_the_row(csv_writer, rows, fragment):
    with pytest.raises(DataError, match=fragment):
        load_corpus(csv_writer("f.csv", rows), ColumnMap(), Split.CRAWLED)


def test_load_missing_column_and_file(csv_writer, tmp_path):
    path = csv_writer("f.csv", [("a", 1)], header=("body", "label"))
    with pytest.raises(DataError, match="missing column 'text'"):
        load_corpus(path, ColumnMap(), Split.CRAWLED)
    with pytest.raises(DataError, match="nope.csv"):
        load_corpus(tmp_path / "nope.csv", ColumnMap(), Split.CRAWLED)


def test_column_map_rejects_same_columns():
    with pytest.raises(ConfigError):
        ColumnMap("text", "text")


def test_class_counts_must_match_posts():
    posts = make_corpus({0: 2}).posts
    with pytest.raises(DataError):
        Corpus(posts, Split.CRAWLED, {C(0): 3})


def test_save_load_round_trip(tmp_path):
    corpus = make_corpus({0: 2, 3: 1, 5: 4})
    save_corpus(corpus, tmp_path / "c.csv")
    again = load_corpus(tmp_path / "c.csv", CANONICAL_COLUMNS, Split.SDCNL_TRAIN)
    assert again.posts == corpus.posts


def test_oversample_adds_exactly_n():
    corpus = make_corpus({0: 50, 1: 100, 2: 30, 3: 20, 4: 60, 5: 40})
    out = oversample_minority(corpus, {C(1), C(2), C(3)}, 120, seed=0)
    assert out.class_counts[C(1)] == 220
    for c in (0, 4, 5):
        assert out.class_counts[C(c)] == corpus.class_counts[C(c)]
    for c in (1, 2, 3):
        assert out.class_counts[C(c)] - corpus.class_counts[C(c)] == 120
    assert out.posts[: len(corpus)] == corpus.posts
    assert set(out.posts[len(corpus):]) <= set(corpus.posts)


def test_oversample_zero_is_identity():
    corpus = make_corpus({1: 3})
    assert oversample_minority(corpus, [C(1)], 0, seed=5) == corpus


def test_oversample_single_post_duplicates():
    corpus = make_corpus({0: 4, 1: 1})
    out = oversample_minority(corpus, [C(1)], 3, seed=9)
    assert out.posts[-3:] == (corpus.of_class(C(1))[0],) * 3


def test_oversample_empty_class_rejected():
    with pytest.raises(DataError):
        oversample_minority(make_corpus({0: 3}), [C(2)], 1, seed=0)


def test_oversample_deterministic():
    corpus = make_corpus({1: 10, 2: 7})
    assert oversample_minority(corpus, [1, 2], 15, 3) == oversample_minority(corpus, [1, 2], 15, 3)


@given(
    counts=st.dictionaries(st.integers(0, 5), st.integers(1, 12), min_size=1),
    n=st.integers(0, 20),
    seed=st.integers(0, 2**32 - 1),
)
@settings(max_examples=50, deadline=None)
def test_oversample_count_property(counts, n, seed):
    corpus = make_corpus(counts)
    targets = {C(c) for c in counts if c % 2 == 0}
    out = oversample_minority(corpus, targets, n, seed)
    for c in C:
        expected = n if c in targets else 0
        assert out.class_counts[c] - corpus.class_counts[c] == expected
    assert out.posts[: len(corpus)] == corpus.posts


def test_split_single_class_90_10():
    kept, held = stratified_split(make_corpus({3: 100}), 0.1, seed=0)
    assert (len(kept), len(held)) == (90, 10)


def test_split_per_class_rounding():
    _, held = stratified_split(make_corpus({0: 10, 4: 20}), 0.1, seed=1)
    assert held.class_counts[C(0)] == 1 and held.class_counts[C(4)] == 2


def test_split_minimum_one_per_class():
    _, held = stratified_split(make_corpus({0: 3, 1: 40}), 0.1, seed=0)
    assert held.class_counts[C(0)] == 1


def test_split_deterministic_and_seed_sensitive():
    corpus = make_corpus({0: 30, 2: 30})
    assert stratified_split(corpus, 0.2, 4) == stratified_split(corpus, 0.2, 4)
    assert stratified_split(corpus, 0.2, 4) != stratified_split(corpus, 0.2, 5)


@pytest.mark.parametrize("fraction", [0.0, 1.0, -0.1, 1.5])
def test_split_fraction_bounds(fraction):
    with pytest.raises(ConfigError):
        stratified_split(make_corpus({0: 5}), fraction, 0)


def test_split_single_post_class_rejected():
    with pytest.raises(DataError):
        stratified_split(make_corpus({0: 5, 1: 1}), 0.2, 0)


@given(
    counts=st.dictionaries(st.integers(0, 5), st.integers(2, 30), min_size=1),
    fraction=st.floats(0.05, 0.95),
    seed=st.integers(0, 1000),
)
@settings(max_examples=50, deadline=None)
def test_split_is_partition(counts, fraction, seed):
    corpus = make_corpus(counts)
    kept, held = stratified_split(corpus, fraction, seed)
    assert sorted(kept.posts + held.posts, key=lambda p: p.id) == sorted(corpus.posts, key=lambda p: p.id)
    for c in C:
        if corpus.class_counts[c]:
            assert kept.class_counts[c] >= 1 and held.class_counts[c] >= 1


@pytest.mark.parametrize(
    "spec,classes,n",
    [("c1,c2,c3:120", [1, 2, 3], 120), ("1,4:5", [1, 4], 5), ("medication:2", [3], 2)],
)
def test_parse_balance(spec, classes, n):
    got, got_n = parse_balance(spec)
    assert [int(c) for c in got] == classes and got_n == n


def test_concat_mixed_split():
    a, b = make_corpus({0: 1}, Split.CRAWLED), make_corpus({1: 1}, Split.SDCNL_TRAIN)
    both = Corpus.concat([a, b])
    assert both.source_split is None and len(both) == 2
