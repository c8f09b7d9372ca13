"""Keyword-separable synthetic posts for learning sanity checks.

Each class owns one keyword that never appears in other classes. Every post
holds its class keyword two or three times among shared filler words, so a
perfect classifier exists and small models find it from a few hundred posts.
"""

from __future__ import annotations

import numpy as np

from causalcat.corpus import CATEGORIES, Corpus, LabeledPost, Split

CLASS_KEYWORDS = {
    0: "whatever",
    1: "bullied",
    2: "unemployed",
    3: "prescription",
    4: "girlfriend",
    5: "lonely",
}

FILLER = (
    "i feel so tired today and the days keep going by without any change "
    "it is hard to explain how heavy everything seems when i wake up in the "
    "morning my thoughts race and i cannot sleep at night people say it gets "
    "better but i do not know anymore what to do with myself or where to go"
).split()


def synthetic_corpus(
    n: int = 200,
    seed: int = 0,
    split: Split = Split.SDCNL_TRAIN,
    min_words: int = 4,
    max_words: int = 12,
    keyword_repeats: tuple[int, int] = (2, 3),
) -> Corpus:
    """``n`` posts with classes assigned round-robin; words drawn under ``seed``."""
    rng = np.random.default_rng(seed)
    posts = []
    for i in range(n):
        label = CATEGORIES[i % len(CATEGORIES)]
        words = [str(w) for w in rng.choice(FILLER, size=int(rng.integers(min_words, max_words + 1)))]
        for _ in range(int(rng.integers(keyword_repeats[0], keyword_repeats[1] + 1))):
            words.insert(int(rng.integers(0, len(words) + 1)), CLASS_KEYWORDS[int(label)])
        posts.append(LabeledPost(f"synthetic-{seed}-{i}", " ".join(words), label, split))
    return Corpus(tuple(posts), split)
