"""Multi-label F1 scoring: pooled confusion counts, macro average, k-fold means."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping, Sequence

from .errors import DataError
from .model import BinaryVerdict, LabelRecord, ToxicityType
from .response_parser import NormalizedPrediction


class UnlabeledCompoundError(DataError):
    pass


class IncompleteMapError(DataError):
    pass


class TooFewCompoundsError(DataError):
    pass


def round_half_up(value: float, digits: int) -> float:
    """Decimal rounding with ties away from zero, as tables are printed."""
    q = Decimal(1).scaleb(-digits)
    return float(Decimal(repr(value)).quantize(q, rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def _labels_by_id(labels: Sequence[LabelRecord]) -> dict[str, LabelRecord]:
    return {r.compound_id: r for r in labels}


def confusion(
    predictions: Sequence[NormalizedPrediction],
    labels: Sequence[LabelRecord],
    toxicity_type: ToxicityType,
) -> ConfusionCounts:
    """Count one type's outcomes over all predictions; Toxic is the positive class."""
    by_id = _labels_by_id(labels)
    unknown = sorted({p.compound_id for p in predictions} - set(by_id))
    if unknown:
        raise UnlabeledCompoundError(f"predictions for unlabeled compounds: {unknown}")
    tp = fp = fn = tn = 0
    for pred in predictions:
        truth = by_id[pred.compound_id].labels[toxicity_type]
        call = pred.answers[toxicity_type]
        if call is BinaryVerdict.TOXIC:
            if truth is BinaryVerdict.TOXIC:
                tp += 1
            else:
                fp += 1
        else:
            if truth is BinaryVerdict.TOXIC:
                fn += 1
            else:
                tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


def f1(counts: ConfusionCounts) -> float:
    """F1 = 2tp / (2tp + fp + fn); the empty-positive case scores 0.0."""
    denom = 2 * counts.tp + counts.fp + counts.fn
    if denom == 0:
        return 0.0
    return 2 * counts.tp / denom


def macro_average(per_type: Mapping[ToxicityType, float]) -> float:
    """Unweighted mean over all six toxicity types; the map must be total."""
    missing = [t.display_name for t in ToxicityType if t not in per_type]
    if missing:
        raise IncompleteMapError(f"per-type map missing {missing}")
    return sum(per_type[t] for t in ToxicityType) / len(ToxicityType)


def assign_folds(
    compound_ids: Sequence[str], k: int, seed: int
) -> dict[str, int]:
    """Stable fold assignment: hash-sort the ids, then deal them round-robin."""
    def sort_key(cid: str) -> tuple[str, str]:
        digest = hashlib.sha256(f"{seed}:{cid}".encode("utf-8")).hexdigest()
        return (digest, cid)

    ordered = sorted(set(compound_ids), key=sort_key)
    return {cid: i % k for i, cid in enumerate(ordered)}


def kfold_f1(
    predictions: Sequence[NormalizedPrediction],
    labels: Sequence[LabelRecord],
    k: int = 5,
    seed: int = 0,
) -> tuple[dict[ToxicityType, float], list[dict[ToxicityType, float]]]:
    """Per-type F1 averaged over k disjoint folds.

    Returns (mean per type, per-fold maps). Fold membership depends only
    on (compound_id, seed, k).
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    ids = [p.compound_id for p in predictions]
    if len(set(ids)) < k:
        raise TooFewCompoundsError(
            f"need at least {k} distinct compounds for {k}-fold scoring, got {len(set(ids))}"
        )
    folds = assign_folds(ids, k, seed)
    per_fold: list[dict[ToxicityType, float]] = []
    for fold in range(k):
        subset = [p for p in predictions if folds[p.compound_id] == fold]
        scores = {t: f1(confusion(subset, labels, t)) for t in ToxicityType}
        per_fold.append(scores)
    means = {
        t: sum(fold_scores[t] for fold_scores in per_fold) / k for t in ToxicityType
    }
    return means, per_fold


def gap_percent(avg_iupac: float, avg_smiles: float) -> float:
    """Relative improvement of IUPAC over SMILES input, in percent (2 dp)."""
    if avg_smiles <= 0:
        raise ZeroDivisionError("avg_smiles must be positive")
    return round_half_up(100.0 * (avg_iupac - avg_smiles) / avg_smiles, 2)


@dataclass(frozen=True)
class EvalReport:
    per_type_f1: Mapping[ToxicityType, float]
    macro_f1: float
    n_compounds: int
    n_parse_failures: int
    per_fold_f1: tuple[Mapping[ToxicityType, float], ...] | None = None
    kfold_mean_f1: Mapping[ToxicityType, float] | None = None

    def __post_init__(self) -> None:
        expected = macro_average(self.per_type_f1)
        if abs(self.macro_f1 - expected) > 1e-12:
            raise ValueError("macro_f1 is not the mean of per_type_f1")
        if self.n_compounds < 0 or self.n_parse_failures < 0:
            raise ValueError("counts must be non-negative")


def build_report(
    predictions: Sequence[NormalizedPrediction],
    labels: Sequence[LabelRecord],
    n_parse_failures: int = 0,
    kfold: tuple[int, int] | None = None,
) -> EvalReport:
    """Score a prediction set; parse failures are counted, never scored.

    `kfold` is an optional (k, seed) pair that adds fold-averaged scores
    alongside the pooled ones.
    """
    per_type = {t: f1(confusion(predictions, labels, t)) for t in ToxicityType}
    per_fold = None
    means = None
    if kfold is not None:
        k, seed = kfold
        means, fold_maps = kfold_f1(predictions, labels, k=k, seed=seed)
        per_fold = tuple(fold_maps)
    return EvalReport(
        per_type_f1=per_type,
        macro_f1=macro_average(per_type),
        n_compounds=len(predictions),
        n_parse_failures=n_parse_failures,
        per_fold_f1=per_fold,
        kfold_mean_f1=means,
    )
