"""Loading, validation, rebalancing and splitting of labeled post corpora.

Input files are UTF-8 CSV with a mandatory header row. The canonical output
layout written by :func:`save_corpus` is ``id,text,label_code,split``.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from causalcat.errors import ConfigError, DataError

# Cells in CAMS exports can exceed the csv module's default 128 KiB field limit.
csv.field_size_limit(2**31 - 1)


class CausalCategory(enum.IntEnum):
    NO_REASON = 0
    BIAS_ABUSE = 1
    JOBS_CAREERS = 2
    MEDICATION = 3
    RELATIONSHIP = 4
    ALIENATION = 5

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_code(cls, code: int | str) -> "CausalCategory":
        if isinstance(code, str):
            s = code.strip()
            try:
                value = float(s)
            except ValueError:
                raise ValueError(f"not an integer class code: {code!r}") from None
            if not value.is_integer():
                raise ValueError(f"not an integer class code: {code!r}")
            code = int(value)
        try:
            return cls(int(code))
        except ValueError:
            raise ValueError(f"class code {code!r} outside 0..5") from None

    @classmethod
    def from_name(cls, name: str) -> "CausalCategory":
        key = re.sub(r"[^a-z0-9]+", "_", name.strip().lower()).strip("_")
        key = _NAME_ALIASES.get(key, key)
        for member in cls:
            if member.label == key:
                return member
        raise ValueError(f"unknown category name {name!r}")


_NAME_ALIASES = {
    "no_reason": "no_reason",
    "noreason": "no_reason",
    "none": "no_reason",
    "bias": "bias_abuse",
    "abuse": "bias_abuse",
    "bias_or_abuse": "bias_abuse",
    "bias_and_abuse": "bias_abuse",
    "jobs": "jobs_careers",
    "jobs_and_careers": "jobs_careers",
    "jobs_and_career": "jobs_careers",
    "job_and_career": "jobs_careers",
    "jobs_career": "jobs_careers",
    "medication": "medication",
    "relationships": "relationship",
}

CATEGORIES: tuple[CausalCategory, ...] = tuple(CausalCategory)
N_CLASSES = len(CATEGORIES)


class Split(str, enum.Enum):
    CRAWLED = "crawled"
    SDCNL_TRAIN = "sdcnl_train"
    SDCNL_TEST = "sdcnl_test"

    @classmethod
    def parse(cls, value: "str | Split") -> "Split":
        try:
            return cls(value)
        except ValueError:
            raise ConfigError(
                f"unknown split {value!r}; expected one of {[s.value for s in cls]}"
            ) from None


@dataclass(frozen=True)
class LabeledPost:
    id: str
    text: str
    label: CausalCategory
    split: Split

    def __post_init__(self):
        if not self.text.strip():
            raise DataError(f"post {self.id!r} has empty text")
        object.__setattr__(self, "label", CausalCategory(self.label))
        object.__setattr__(self, "split", Split(self.split))


def count_classes(posts: Iterable[LabeledPost]) -> dict[CausalCategory, int]:
    tally = Counter(p.label for p in posts)
    return {c: tally.get(c, 0) for c in CATEGORIES}


@dataclass(frozen=True)
class Corpus:
    """Immutable ordered collection of posts.

    ``source_split`` is ``None`` for corpora concatenated from several splits.
    """

    posts: tuple[LabeledPost, ...]
    source_split: Split | None
    class_counts: Mapping[CausalCategory, int] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "posts", tuple(self.posts))
        actual = count_classes(self.posts)
        if self.class_counts is None:
            object.__setattr__(self, "class_counts", actual)
        else:
            given = {c: int(self.class_counts.get(c, 0)) for c in CATEGORIES}
            if given != actual:
                raise DataError(f"class_counts {given} do not match posts {actual}")
            object.__setattr__(self, "class_counts", given)

    def __len__(self) -> int:
        return len(self.posts)

    def __iter__(self):
        return iter(self.posts)

    @property
    def texts(self) -> list[str]:
        return [p.text for p in self.posts]

    @property
    def labels(self) -> np.ndarray:
        return np.array([int(p.label) for p in self.posts], dtype=np.int64)

    def of_class(self, category: CausalCategory) -> list[LabeledPost]:
        return [p for p in self.posts if p.label == category]

    def digest(self) -> str:
        """SHA-256 over the canonical serialization; identifies a corpus's content."""
        h = hashlib.sha256()
        for p in self.posts:
            for part in (p.id, p.text, str(int(p.label)), p.split.value):
                h.update(part.encode("utf-8"))
                h.update(b"\x1f")
            h.update(b"\x1e")
        return h.hexdigest()

    @classmethod
    def concat(cls, corpora: Sequence["Corpus"]) -> "Corpus":
        splits = {c.source_split for c in corpora}
        source = splits.pop() if len(splits) == 1 else None
        return cls(tuple(p for c in corpora for p in c.posts), source)


@dataclass(frozen=True)
class ColumnMap:
    text_column: str = "text"
    label_column: str = "label"
    label_encoding: str = "integer_codes"  # or "category_names"
    id_column: str | None = None

    def __post_init__(self):
        if self.text_column == self.label_column:
            raise ConfigError("text_column and label_column must differ")
        if self.label_encoding not in ("integer_codes", "category_names"):
            raise ConfigError(f"unknown label_encoding {self.label_encoding!r}")


CANONICAL_COLUMNS = ColumnMap("text", "label_code", "integer_codes", id_column="id")


def load_corpus(path: str | Path, column_map: ColumnMap, split: Split | str) -> Corpus:
    split = Split.parse(split)
    path = Path(path)
    if not path.is_file():
        raise DataError(f"dataset file not found: {path}")
    decode = (
        CausalCategory.from_code
        if column_map.label_encoding == "integer_codes"
        else CausalCategory.from_name
    )
    posts = []
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in (column_map.text_column, column_map.label_column, column_map.id_column):
            if col is not None and col not in header:
                raise DataError(f"{path}: missing column {col!r} (header: {header})")
        # Row numbers are 1-based file lines; the header is line 1.
        for lineno, row in enumerate(reader, start=2):
            text = row.get(column_map.text_column) or ""
            if not text.strip():
                raise DataError(f"{path}: row {lineno} has empty text")
            raw_label = row.get(column_map.label_column) or ""
            try:
                label = decode(raw_label)
            except ValueError as exc:
                raise DataError(f"{path}: row {lineno}: {exc}") from None
            pid = row[column_map.id_column] if column_map.id_column else f"{split.value}:{lineno - 1}"
            posts.append(LabeledPost(pid, text, label, split))
    return Corpus(tuple(posts), split)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "text", "label_code", "split"])
        for p in corpus.posts:
            writer.writerow([p.id, p.text, int(p.label), p.split.value])


def oversample_minority(
    corpus: Corpus, classes: Iterable[CausalCategory | int], n: int, seed: int
) -> Corpus:
    """Append ``n`` duplicates for each class in ``classes``.

    Duplicates are drawn uniformly with replacement from the class's existing
    posts. The input posts are kept, unchanged, as a prefix of the result.
    """
    if n < 0:
        raise ConfigError(f"n must be nonnegative, got {n}")
    targets = sorted({CausalCategory(c) for c in classes})
    if n == 0 or not targets:
        return corpus
    rng = np.random.default_rng(seed)
    extra: list[LabeledPost] = []
    for category in targets:
        pool = corpus.of_class(category)
        if not pool:
            raise DataError(f"cannot oversample {category.label}: class has no posts")
        picks = rng.integers(0, len(pool), size=n)
        extra.extend(pool[i] for i in picks)
    return Corpus(corpus.posts + tuple(extra), corpus.source_split)


def _holdout_size(count: int, fraction: float) -> int:
    if count == 0:
        return 0
    size = max(1, math.floor(count * fraction + 0.5))
    return min(size, count - 1)


def stratified_split(corpus: Corpus, holdout_fraction: float, seed: int) -> tuple[Corpus, Corpus]:
    """Split per class into (kept, holdout), preserving corpus order within each part."""
    if not 0.0 < holdout_fraction < 1.0:
        raise ConfigError(f"holdout_fraction must lie in (0, 1), got {holdout_fraction}")
    rng = np.random.default_rng(seed)
    holdout_idx: set[int] = set()
    for category in CATEGORIES:
        members = [i for i, p in enumerate(corpus.posts) if p.label == category]
        if not members:
            continue
        if len(members) == 1:
            raise DataError(
                f"class {category.label} has a single post; cannot place it in both splits"
            )
        k = _holdout_size(len(members), holdout_fraction)
        holdout_idx.update(members[i] for i in rng.permutation(len(members))[:k])
    kept = tuple(p for i, p in enumerate(corpus.posts) if i not in holdout_idx)
    held = tuple(p for i, p in enumerate(corpus.posts) if i in holdout_idx)
    return Corpus(kept, corpus.source_split), Corpus(held, corpus.source_split)


def parse_balance(spec: str) -> tuple[list[CausalCategory], int]:
    """Parse a balance flag such as ``"c1,c2,c3:120"``. Names and bare codes also work."""
    try:
        classes_part, n_part = spec.rsplit(":", 1)
        n = int(n_part)
    except ValueError:
        raise ConfigError(f"bad balance spec {spec!r}; expected e.g. 'c1,c2,c3:120'") from None
    classes = []
    for token in classes_part.split(","):
        token = token.strip()
        if not token:
            continue
        code = token[1:] if re.fullmatch(r"[cC]\d", token) else token
        try:
            classes.append(
                CausalCategory.from_code(code) if code.isdigit() else CausalCategory.from_name(code)
            )
        except ValueError as exc:
            raise ConfigError(f"bad balance spec {spec!r}: {exc}") from None
    return classes, n
