"""Per-class word-length statistics (min / max / average words per post)."""

from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import dataclass

from causalcat.corpus import CausalCategory, Corpus, Split
from causalcat.errors import ConfigError, DataError
from causalcat.textprep import CLEAN_STEPS, clean, word_count

STATS_COLUMNS = ("split", "class_code", "class_name", "min", "max", "avg", "n_posts")


@dataclass(frozen=True)
class LengthStats:
    category: CausalCategory
    split: Split
    min: int
    max: int
    avg: float
    n_posts: int

    def row(self) -> dict:
        return {
            "split": self.split.value,
            "class_code": int(self.category),
            "class_name": self.category.label,
            "min": self.min,
            "max": self.max,
            "avg": f"{self.avg:.2f}",
            "n_posts": self.n_posts,
        }


def length_stats(corpus: Corpus, raw: bool = False, steps=CLEAN_STEPS) -> list[LengthStats]:
    """Word-count statistics per (split, class).

    Counts whitespace tokens of the cleaned text, or of the raw text when ``raw``.
    Classes without posts are omitted.
    """
    if len(corpus) == 0:
        raise DataError("cannot compute statistics of an empty corpus")
    groups: dict[tuple[Split, CausalCategory], list[int]] = defaultdict(list)
    for post in corpus.posts:
        n = word_count(post.text if raw else clean(post.text, steps))
        groups[(post.split, post.label)].append(n)
    order = list(Split)
    out = []
    for (split, category), counts in sorted(groups.items(), key=lambda kv: (order.index(kv[0][0]), kv[0][1])):
        out.append(
            LengthStats(category, split, min(counts), max(counts), sum(counts) / len(counts), len(counts))
        )
    return out


def _sorted(stats: list[LengthStats]) -> list[LengthStats]:
    order = list(Split)
    return sorted(stats, key=lambda s: (order.index(s.split), int(s.category)))


def emit_stats_table(stats: list[LengthStats], fmt: str = "text") -> str:
    rows = [s.row() for s in _sorted(stats)]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=STATS_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue()
    if fmt == "json":
        for r in rows:
            r["avg"] = float(r["avg"])
        return json.dumps(rows, indent=2) + "\n"
    if fmt == "text":
        header = f"{'split':<12} {'class':<14} {'min':>6} {'max':>6} {'avg':>9} {'n':>6}"
        lines = [header, "-" * len(header)]
        for r in rows:
            lines.append(
                f"{r['split']:<12} {r['class_name']:<14} {r['min']:>6} {r['max']:>6} "
                f"{r['avg']:>9} {r['n_posts']:>6}"
            )
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown stats format {fmt!r}; expected text, csv or json")
