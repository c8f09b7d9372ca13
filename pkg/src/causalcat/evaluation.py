"""Per-class F1, accuracy, confusion matrices, t-tests and error analysis."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats as sps

from causalcat.corpus import CATEGORIES, N_CLASSES, CausalCategory
from causalcat.errors import ConfigError, DataError


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are gold classes, columns predicted classes."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (N_CLASSES, N_CLASSES) or np.any(counts < 0):
            raise ValueError("confusion counts must be a nonnegative 6x6 matrix")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other) -> bool:
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)


def _check_codes(codes: Sequence[int], what: str) -> np.ndarray:
    arr = np.asarray(codes, dtype=np.int64).reshape(-1)
    if arr.size and (arr.min() < 0 or arr.max() >= N_CLASSES):
        raise ValueError(f"{what} contain a class code outside 0..5")
    return arr


def confusion(golds: Sequence[int], preds: Sequence[int]) -> ConfusionMatrix:
    if len(golds) != len(preds):
        raise ValueError(f"{len(golds)} gold labels but {len(preds)} predictions")
    g, p = _check_codes(golds, "gold labels"), _check_codes(preds, "predictions")
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(counts, (g, p), 1)
    return ConfusionMatrix(counts)


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros(num.shape, dtype=np.float64)
    np.divide(num, den, out=out, where=den > 0)
    return out


def precision_recall(cm: ConfusionMatrix) -> tuple[np.ndarray, np.ndarray]:
    tp = np.diag(cm.counts).astype(np.float64)
    return _ratio(tp, cm.counts.sum(axis=0)), _ratio(tp, cm.counts.sum(axis=1))


def f1_per_class(cm: ConfusionMatrix) -> np.ndarray:
    """One-vs-rest F1 per class; every 0/0 is taken as 0."""
    p, r = precision_recall(cm)
    return _ratio(2 * p * r, p + r)


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ValueError("accuracy of an empty confusion matrix is undefined")
    return float(np.trace(cm.counts) / cm.total)


def macro_f1(cm: ConfusionMatrix) -> float:
    """Mean F1 over the classes that occur in gold."""
    present = cm.counts.sum(axis=1) > 0
    if not present.any():
        return 0.0
    return float(f1_per_class(cm)[present].mean())


@dataclass
class SignificanceResult:
    t_statistic: float
    p_value: float
    alpha: float = 0.05
    verdict: bool = False
    sample_description: str = ""
    warning: str | None = None
    mean_difference: float = 0.0

    def to_dict(self) -> dict:
        return {
            "t_statistic": self.t_statistic,
            "p_value": self.p_value,
            "alpha": self.alpha,
            "verdict": self.verdict,
            "sample_description": self.sample_description,
            "warning": self.warning,
            "mean_difference": self.mean_difference,
        }


def significance_test(
    scores_a: Sequence[float],
    scores_b: Sequence[float],
    alpha: float = 0.05,
    paired: bool = True,
    description: str = "",
) -> SignificanceResult:
    """Two-tailed Student's t-test of mean(scores_a) against mean(scores_b).

    Paired mode tests the per-element differences (df = n - 1); unpaired mode
    uses the pooled-variance two-sample statistic (df = n_a + n_b - 2). With
    zero variance the statistic is undefined: t is reported as 0, p as 1, and
    ``warning`` is set.
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("a t-test needs at least two scores per side")
    if paired:
        if len(a) != len(b):
            raise ValueError("paired test needs equally many scores on both sides")
        d = a - b
        mean_diff = float(d.mean())
        se = float(d.std(ddof=1)) / math.sqrt(len(d))
        df = len(d) - 1
    else:
        mean_diff = float(a.mean() - b.mean())
        df = len(a) + len(b) - 2
        pooled = ((len(a) - 1) * a.var(ddof=1) + (len(b) - 1) * b.var(ddof=1)) / df
        se = math.sqrt(pooled * (1.0 / len(a) + 1.0 / len(b)))
    kind = "paired" if paired else "unpaired pooled-variance"
    desc = description or f"{kind} t-test, n_a={len(a)}, n_b={len(b)}"
    if se == 0.0 or not math.isfinite(se):
        return SignificanceResult(0.0, 1.0, alpha, False, desc, "zero variance: t undefined", mean_diff)
    t = mean_diff / se
    p = float(min(1.0, 2.0 * sps.t.sf(abs(t), df)))
    return SignificanceResult(float(t), p, alpha, p < alpha, desc, None, mean_diff)


def bootstrap_test(
    golds: Sequence[int],
    preds_a: Sequence[int],
    preds_b: Sequence[int],
    alpha: float = 0.05,
    n_resamples: int = 10_000,
    seed: int = 0,
) -> SignificanceResult:
    """Paired bootstrap over test examples on the accuracy difference a - b.

    The two-sided p-value is twice the smaller tail mass of the resampled
    differences around zero. ``t_statistic`` holds observed difference over the
    bootstrap standard error.
    """
    g = np.asarray(golds)
    ca = (np.asarray(preds_a) == g).astype(np.float64)
    cb = (np.asarray(preds_b) == g).astype(np.float64)
    if not len(g) == len(ca) == len(cb) or len(g) < 2:
        raise ValueError("bootstrap needs at least two aligned examples")
    rng = np.random.default_rng(seed)
    diff = ca - cb
    idx = rng.integers(0, len(g), size=(n_resamples, len(g)))
    deltas = diff[idx].mean(axis=1)
    observed = float(diff.mean())
    se = float(deltas.std(ddof=1))
    desc = f"paired bootstrap over {len(g)} test examples, {n_resamples} resamples"
    if se == 0.0:
        return SignificanceResult(0.0, 1.0, alpha, False, desc, "zero variance: t undefined", observed)
    p = float(min(1.0, 2.0 * min(np.mean(deltas <= 0), np.mean(deltas >= 0))))
    return SignificanceResult(observed / se, p, alpha, p < alpha, desc, None, observed)


@dataclass
class EvalReport:
    per_class_f1: np.ndarray
    accuracy: float
    macro_f1: float
    confusion: ConfusionMatrix
    n: int
    model: str = ""
    model_manifest_ref: str = ""
    test_split_id: str = ""
    seed: int | None = None
    golds: list[int] = field(default_factory=list)
    preds: list[int] = field(default_factory=list)
    significance: list[dict] = field(default_factory=list)

    @property
    def recall(self) -> np.ndarray:
        return precision_recall(self.confusion)[1]

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "manifest_ref": self.model_manifest_ref,
            "test_split_id": self.test_split_id,
            "seed": self.seed,
            "n": self.n,
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "f1": {f"c{i}": float(v) for i, v in enumerate(self.per_class_f1)},
            "confusion": self.confusion.counts.tolist(),
            "significance": self.significance,
            "golds": list(map(int, self.golds)),
            "preds": list(map(int, self.preds)),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        cm = ConfusionMatrix(np.array(d["confusion"]))
        return cls(
            per_class_f1=np.array([d["f1"][f"c{i}"] for i in range(N_CLASSES)], dtype=np.float64),
            accuracy=float(d["accuracy"]),
            macro_f1=float(d["macro_f1"]),
            confusion=cm,
            n=int(d["n"]),
            model=d.get("model", ""),
            model_manifest_ref=d.get("manifest_ref", ""),
            test_split_id=d.get("test_split_id", ""),
            seed=d.get("seed"),
            golds=list(d.get("golds", [])),
            preds=list(d.get("preds", [])),
            significance=list(d.get("significance", [])),
        )

    @classmethod
    def load(cls, path: str | Path) -> "EvalReport":
        path = Path(path)
        try:
            return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))
        except FileNotFoundError:
            raise DataError(f"report not found: {path}") from None
        except (KeyError, ValueError, TypeError) as exc:
            raise DataError(f"{path}: not an evaluation report ({exc})") from None


def build_report(
    golds: Sequence[int],
    preds: Sequence[int],
    model: str = "",
    manifest_ref: str = "",
    test_split_id: str = "",
    seed: int | None = None,
) -> EvalReport:
    cm = confusion(golds, preds)
    if cm.total == 0:
        raise DataError("cannot evaluate on an empty test set")
    return EvalReport(
        per_class_f1=f1_per_class(cm),
        accuracy=accuracy(cm),
        macro_f1=macro_f1(cm),
        confusion=cm,
        n=cm.total,
        model=model,
        model_manifest_ref=manifest_ref,
        test_split_id=test_split_id,
        seed=seed,
        golds=[int(g) for g in golds],
        preds=[int(p) for p in preds],
    )


def evaluate(model, corpus, name: str = "", manifest_ref: str = "", seed: int | None = None) -> EvalReport:
    """Predict every post of ``corpus`` with ``model`` and score against its labels."""
    preds = [code for code, _ in model.predict(corpus.texts)]
    return build_report(corpus.labels.tolist(), preds, name or model.kind, manifest_ref, corpus.digest(), seed)


@dataclass
class ErrorAnalysis:
    recall_ranking: list[tuple[CausalCategory, float]]
    weakest: CausalCategory | None
    strongest: CausalCategory | None
    confused_pairs: list[tuple[CausalCategory, CausalCategory, int]]

    def render(self) -> str:
        lines = ["Per-class recall (gold classes present), best first:"]
        for cat, r in self.recall_ranking:
            tag = "  <- strongest" if cat == self.strongest else "  <- weakest" if cat == self.weakest else ""
            lines.append(f"  c{int(cat)} {cat.label:<14} {r:.3f}{tag}")
        lines.append("Most confused gold -> predicted pairs:")
        if not self.confused_pairs:
            lines.append("  (none)")
        for g, p, n in self.confused_pairs:
            lines.append(f"  c{int(g)} {g.label} -> c{int(p)} {p.label}: {n}")
        return "\n".join(lines) + "\n"


def error_analysis(report: EvalReport, k: int = 5) -> ErrorAnalysis:
    """Rank classes by recall and list the k largest off-diagonal confusion cells.

    Ties in recall keep class-code order; ties in confusion counts order by
    (gold code, predicted code).
    """
    counts = report.confusion.counts
    recall = precision_recall(report.confusion)[1]
    present = [c for c in CATEGORIES if counts[int(c)].sum() > 0]
    ranking = sorted(((c, float(recall[int(c)])) for c in present), key=lambda cr: -cr[1])
    pairs = [
        (CATEGORIES[g], CATEGORIES[p], int(counts[g, p]))
        for g in range(N_CLASSES)
        for p in range(N_CLASSES)
        if g != p and counts[g, p] > 0
    ]
    pairs.sort(key=lambda t: (-t[2], int(t[0]), int(t[1])))
    weakest = min(ranking, key=lambda cr: cr[1])[0] if ranking else None
    strongest = ranking[0][0] if ranking else None
    return ErrorAnalysis(ranking, weakest, strongest, pairs[:k])


def render_table(reports: Sequence[EvalReport]) -> str:
    """Aligned text table: classifier, F1 for C0..C5, accuracy."""
    header = ["Classifier"] + [f"F1: C{i}" for i in range(N_CLASSES)] + ["Accuracy"]
    rows = [
        [r.model] + [f"{v:.2f}" for v in r.per_class_f1] + [f"{r.accuracy:.2f}"] for r in reports
    ]
    widths = [max(len(row[i]) for row in [header, *rows]) for i in range(len(header))]
    fmt = lambda row: "  ".join(  # noqa: E731
        cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths))
    )
    lines = [fmt(header), "-" * len(fmt(header))] + [fmt(r) for r in rows]
    return "\n".join(lines) + "\n"


def check_same_test_split(reports: Sequence[EvalReport]) -> None:
    ids = {r.test_split_id for r in reports}
    if len(ids) > 1:
        raise ConfigError(f"reports were computed on different test sets: {sorted(ids)}")
