"""Metrics and statistical comparisons.

Binary F1 over thresholded scores, micro-averaged F1 over sense labels,
per-wordform ROC-AUC for relative metaphoricity orderings, a two-tailed
Monte Carlo permutation test for paired system comparison, a same-sense
consistency diagnostic, and Cohen's kappa for annotator agreement.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParseError
from .lexicon import Lexicon, Sense
from .rng import RngStream

__all__ = [
    "ScoredSense", "f1_binary", "micro_f1", "relative_roc_auc",
    "PermutationResult", "permutation_test", "consistency_analysis",
    "cohen_kappa", "load_scored_senses", "write_scored_senses",
]


@dataclass(frozen=True)
class ScoredSense:
    """A sense with a model score and its gold metaphoricity label."""

    sense: Sense
    score: float
    gold: int

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise DataError(f"score {self.score} outside [0, 1] for "
                            f"{self.sense.wordform!r}")
        if self.gold not in (0, 1):
            raise DataError(f"gold label must be 0 or 1, got {self.gold!r}")


def _check_aligned(*seqs, names: str):
    lengths = {len(s) for s in seqs}
    if len(lengths) != 1:
        raise DataError(f"{names} must be aligned, got lengths "
                        f"{[len(s) for s in seqs]}")
    if len(seqs[0]) == 0:
        raise DataError(f"{names} must be nonempty")


def f1_binary(scores, golds, threshold: float = 0.5) -> float:
    """F1 of the positive class under score >= threshold; 0 when the
    precision/recall denominators are both empty."""
    _check_aligned(scores, golds, names="scores and golds")
    tp = fp = fn = 0
    for score, gold in zip(scores, golds):
        pred = 1 if score >= threshold else 0
        if pred == 1 and gold == 1:
            tp += 1
        elif pred == 1:
            fp += 1
        elif gold == 1:
            fn += 1
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


def micro_f1(preds, golds) -> float:
    """Micro-averaged F1 over the label classes.

    With exactly one prediction and one gold per item, micro precision and
    recall both equal accuracy, so this equals accuracy; the confusion sums
    are computed anyway so the definition is explicit.
    """
    _check_aligned(preds, golds, names="predictions and golds")
    classes = set(preds) | set(golds)
    tp_sum = fp_sum = fn_sum = 0
    for c in classes:
        tp = sum(1 for p, g in zip(preds, golds) if p == c and g == c)
        fp = sum(1 for p, g in zip(preds, golds) if p == c and g != c)
        fn = sum(1 for p, g in zip(preds, golds) if p != c and g == c)
        tp_sum += tp
        fp_sum += fp
        fn_sum += fn
    precision = tp_sum / (tp_sum + fp_sum) if tp_sum + fp_sum else 0.0
    recall = tp_sum / (tp_sum + fn_sum) if tp_sum + fn_sum else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def relative_roc_auc(items: list[ScoredSense], lexicon: Lexicon | None = None):
    """Per-wordform ranking quality of metaphorical over literal senses.

    Groups the items by wordform; each wordform's AUC is the fraction of
    (metaphorical, literal) sense pairs ordered correctly, ties counting
    half.  Wordforms without both classes are excluded and itemized.
    Returns (mean AUC over included wordforms, {wordform: AUC},
    [(wordform, reason)]).
    """
    if not items:
        raise DataError("no scored senses to evaluate")
    if lexicon is not None:
        for item in items:
            lexicon.validate_sense(item.sense)
    groups: dict[str, list[ScoredSense]] = defaultdict(list)
    for item in items:
        groups[item.sense.wordform.lower()].append(item)
    per_wordform: dict[str, float] = {}
    excluded: list[tuple[str, str]] = []
    for wordform in sorted(groups):
        positives = [i.score for i in groups[wordform] if i.gold == 1]
        negatives = [i.score for i in groups[wordform] if i.gold == 0]
        if not positives or not negatives:
            missing = "metaphorical" if not positives else "literal"
            excluded.append((wordform, f"no {missing} sense"))
            continue
        credit = 0.0
        for p in positives:
            for n in negatives:
                if p > n:
                    credit += 1.0
                elif p == n:
                    credit += 0.5
        per_wordform[wordform] = credit / (len(positives) * len(negatives))
    if not per_wordform:
        raise DataError("every wordform lacks one of the two classes; "
                        "ranking quality is undefined")
    mean = float(np.mean(list(per_wordform.values())))
    return mean, per_wordform, excluded


@dataclass(frozen=True)
class PermutationResult:
    p_value: float
    delta_observed: float
    rounds: int
    significant_05: bool
    significant_01: bool


def permutation_test(scores_a, scores_b, golds, metric, r: int = 1000,
                     seed: int = 0) -> PermutationResult:
    """Two-tailed paired comparison of two systems under ``metric``.

    Each round swaps every item's A/B assignment independently with
    probability one half; the p-value is add-one smoothed:
    (1 + #{|delta_perm| >= |delta_obs|}) / (r + 1).
    """
    _check_aligned(scores_a, scores_b, golds, names="scores and golds")
    if r < 1:
        raise DataError("permutation test needs at least one round")
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    golds = list(golds)
    delta_obs = metric(a, golds) - metric(b, golds)
    gen = RngStream(seed).split("permutation").gen
    extreme = 0
    for _ in range(r):
        swap = gen.random(len(a)) < 0.5
        perm_a = np.where(swap, b, a)
        perm_b = np.where(swap, a, b)
        delta = metric(perm_a, golds) - metric(perm_b, golds)
        if abs(delta) >= abs(delta_obs):
            extreme += 1
    p = (1 + extreme) / (r + 1)
    return PermutationResult(p_value=p, delta_observed=float(delta_obs),
                             rounds=r, significant_05=p <= 0.05,
                             significant_01=p <= 0.01)


def consistency_analysis(scorer, wsd_corpus, threshold: float = 0.5,
                         min_count: int = 2):
    """How often a token scorer contradicts itself across occurrences of
    one sense.

    ``scorer`` maps a Token to a probability.  Only senses with at least
    ``min_count`` tagged occurrences count; a sense is inconsistent iff its
    thresholded predictions include both classes.  Returns
    (inconsistency rate, per-sense detail rows).
    """
    if not wsd_corpus:
        raise DataError("empty sense-tagged corpus")
    by_sense: dict[Sense, list[int]] = defaultdict(list)
    for example in wsd_corpus:
        pred = 1 if scorer(example.token) >= threshold else 0
        by_sense[example.gold].append(pred)
    detail = []
    inconsistent = 0
    qualifying = 0
    for sense in sorted(by_sense, key=lambda s: (s.wordform, s.definition_id)):
        preds = by_sense[sense]
        if len(preds) < min_count:
            continue
        qualifying += 1
        split = 0 < sum(preds) < len(preds)
        inconsistent += split
        detail.append({
            "wordform": sense.wordform,
            "definition": sense.definition_id,
            "occurrences": len(preds),
            "metaphorical": sum(preds),
            "inconsistent": bool(split),
        })
    if qualifying == 0:
        raise DataError(f"no sense has {min_count} or more occurrences")
    return inconsistent / qualifying, detail


def cohen_kappa(labels_a, labels_b) -> float:
    """Chance-corrected agreement between two label sequences."""
    _check_aligned(labels_a, labels_b, names="label sequences")
    n = len(labels_a)
    observed = sum(1 for a, b in zip(labels_a, labels_b) if a == b) / n
    count_a = Counter(labels_a)
    count_b = Counter(labels_b)
    expected = sum(count_a[c] * count_b.get(c, 0) for c in count_a) / (n * n)
    if expected == 1.0:
        return 1.0
    return (observed - expected) / (1.0 - expected)


# -- scored-senses JSONL --------------------------------------------------------

def load_scored_senses(path) -> list[ScoredSense]:
    """Read {"wordform", "definition", "score", "gold"} JSON lines."""
    items = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, line_no, f"invalid JSON: {exc.msg}")
            for key in ("wordform", "definition", "score", "gold"):
                if key not in raw:
                    raise ParseError(path, line_no, f"missing field {key!r}")
            try:
                items.append(ScoredSense(
                    sense=Sense(str(raw["wordform"]).lower(),
                                str(raw["definition"])),
                    score=float(raw["score"]),
                    gold=raw["gold"],
                ))
            except DataError as exc:
                raise ParseError(path, line_no, str(exc))
    if not items:
        raise DataError(f"{path}: no scored senses found")
    return items


def write_scored_senses(items: list[ScoredSense], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps({
                "wordform": item.sense.wordform,
                "definition": item.sense.definition_id,
                "score": item.score,
                "gold": item.gold,
            }, sort_keys=True) + "\n")
