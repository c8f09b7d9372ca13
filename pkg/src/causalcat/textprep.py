"""Text cleaning, word tokenization, vocabularies and fixed-length subword encoding."""

from __future__ import annotations

import hashlib
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from causalcat.errors import ConfigError, DataError

CLEAN_STEPS = ("normalize", "strip_control", "replace_urls", "collapse_whitespace", "trim")
URL_TOKEN = "URL"
_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class CleanText:
    text: str
    applied_steps: tuple[str, ...] = ()

    def __str__(self) -> str:
        return self.text


def _strip_control(s: str) -> str:
    # Whitespace controls (\n, \t, ...) become spaces so word boundaries survive.
    out = []
    for ch in s:
        if unicodedata.category(ch) == "Cc":
            if ch.isspace():
                out.append(" ")
            continue
        out.append(ch)
    return "".join(out)


_STEP_FUNCS = {
    "normalize": lambda s: unicodedata.normalize("NFKC", s),
    "strip_control": _strip_control,
    "replace_urls": lambda s: _URL_RE.sub(URL_TOKEN, s),
    "collapse_whitespace": lambda s: _WS_RE.sub(" ", s),
    "trim": str.strip,
}


def clean(raw: str | CleanText, steps: Sequence[str] = CLEAN_STEPS) -> CleanText:
    """Run the cleaning pipeline. ``steps`` selects a subset; order is always fixed."""
    if isinstance(raw, CleanText):
        raw = raw.text
    unknown = set(steps) - set(CLEAN_STEPS)
    if unknown:
        raise ConfigError(f"unknown cleaning steps: {sorted(unknown)}")
    text = raw
    applied = []
    for name in CLEAN_STEPS:
        if name in steps:
            text = _STEP_FUNCS[name](text)
            applied.append(name)
    return CleanText(text, tuple(applied))


def whitespace_tokens(text: str | CleanText) -> list[str]:
    if isinstance(text, CleanText):
        text = text.text
    return text.split()


def word_count(text: str | CleanText) -> int:
    return len(whitespace_tokens(text))


def baseline_tokens(raw: str, lowercase: bool = True) -> list[str]:
    """Tokens fed to the from-scratch baselines: cleaned, whitespace split, optionally lowercased."""
    text = clean(raw).text
    if lowercase:
        text = text.lower()
    return text.split()


PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"


class Vocabulary:
    """Token to index map. Index 0 is padding and index 1 is unknown."""

    def __init__(self, tokens: Sequence[str], min_frequency: int = 1):
        if list(tokens[:2]) != [PAD_TOKEN, UNK_TOKEN]:
            raise ValueError("vocabulary must start with the padding and unknown tokens")
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")
        self.itos = list(tokens)
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        self.min_frequency = min_frequency

    pad_index = 0
    unk_index = 1

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def index(self, token: str) -> int:
        return self.stoi.get(token, self.unk_index)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.stoi.get(t, self.unk_index) for t in tokens]

    def dumps(self) -> str:
        return "".join(f"{tok}\t{i}\n" for i, tok in enumerate(self.itos))

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, min_frequency: int = 1) -> "Vocabulary":
        tokens = []
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
            tok, _, idx = line.rpartition("\t")
            if int(idx) != lineno:
                raise DataError(f"{path}: vocabulary indices not contiguous at line {lineno + 1}")
            tokens.append(tok)
        return cls(tokens, min_frequency)


def build_vocab(
    texts: Iterable[str], min_frequency: int = 1, lowercase: bool = True
) -> Vocabulary:
    """Build a vocabulary over baseline tokens.

    Indices are assigned by descending frequency, ties broken lexicographically.
    ``texts`` may be a Corpus (iterating posts) or plain strings.
    """
    freq: Counter[str] = Counter()
    n_docs = 0
    for item in texts:
        text = getattr(item, "text", item)
        freq.update(baseline_tokens(text, lowercase))
        n_docs += 1
    if n_docs == 0:
        raise DataError("cannot build a vocabulary from an empty corpus")
    kept = sorted(
        (t for t, c in freq.items() if c >= min_frequency and t not in (PAD_TOKEN, UNK_TOKEN)),
        key=lambda t: (-freq[t], t),
    )
    return Vocabulary([PAD_TOKEN, UNK_TOKEN, *kept], min_frequency)


@dataclass(frozen=True)
class EncodedExample:
    ids: tuple[int, ...]
    mask: tuple[int, ...]
    label: int | None = None

    def __post_init__(self):
        if len(self.ids) != len(self.mask):
            raise ValueError("ids and mask differ in length")
        n_real = sum(self.mask)
        if tuple(self.mask) != (1,) * n_real + (0,) * (len(self.mask) - n_real):
            raise ValueError("mask must be a contiguous prefix of ones")

    @property
    def length(self) -> int:
        return len(self.ids)


def tokenizer_id(tokenizer) -> str:
    return str(getattr(tokenizer, "name_or_path", "") or "")


def encode_subword(
    text: str | CleanText,
    backend_tokenizer,
    max_len: int = 256,
    label: int | None = None,
    checkpoint_ref: str | None = None,
) -> EncodedExample:
    """Truncate and right-pad one text to exactly ``max_len`` subword ids.

    Special markers count toward ``max_len``. When ``checkpoint_ref`` is given it
    must equal the identifier the tokenizer was loaded from.
    """
    if checkpoint_ref is not None and tokenizer_id(backend_tokenizer) != str(checkpoint_ref):
        raise ConfigError(
            f"tokenizer {tokenizer_id(backend_tokenizer)!r} does not match "
            f"checkpoint {checkpoint_ref!r}"
        )
    if isinstance(text, CleanText):
        text = text.text
    batch = encode_batch([text], backend_tokenizer, max_len)
    return EncodedExample(tuple(batch["input_ids"][0]), tuple(batch["attention_mask"][0]), label)


def encode_batch(texts: Sequence[str], backend_tokenizer, max_len: int = 256) -> dict[str, list[list[int]]]:
    """Encode many texts at once; lists of length ``max_len`` for ids and mask."""
    # Some tokenizers (XLNet) pad on the left by default; force right padding.
    previous = getattr(backend_tokenizer, "padding_side", "right")
    backend_tokenizer.padding_side = "right"
    try:
        enc = backend_tokenizer(
            list(texts),
            truncation=True,
            padding="max_length",
            max_length=max_len,
            return_attention_mask=True,
        )
    finally:
        backend_tokenizer.padding_side = previous
    ids = [list(x) for x in enc["input_ids"]]
    mask = [list(x) for x in enc["attention_mask"]]
    for row_ids, row_mask in zip(ids, mask):
        if len(row_ids) != max_len or len(row_mask) != max_len:
            raise ConfigError(f"tokenizer produced length {len(row_ids)}, expected {max_len}")
    return {"input_ids": ids, "attention_mask": mask}
