"""Sense-tagged and metaphor-tagged corpora: loading, filtering, splitting.

Corpus files are JSONL.  Both corpora address tokens the same way: a
tokenised sentence plus the index of the target wordform.  Adapters that
produce these files from upstream corpus releases live outside the core.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ConfigError, ParseError
from .lexicon import Lexicon, Sense
from .rng import RngStream

__all__ = [
    "Token",
    "WsdExample",
    "SmdExample",
    "load_wsd_corpus",
    "load_smd_corpus",
    "filter_trivial_wsd",
    "filter_smd",
    "split",
]


@dataclass(frozen=True)
class Token:
    """One occurrence of a wordform: a sentence and a position in it."""

    corpus_id: str
    doc_id: str
    sent_id: str
    sentence: tuple[str, ...]
    index: int

    @property
    def wordform(self) -> str:
        return self.sentence[self.index].lower()


@dataclass(frozen=True)
class WsdExample:
    token: Token
    gold: Sense


@dataclass(frozen=True)
class SmdExample:
    token: Token
    label: int
    novelty: float | None = None


def _parse_token(raw: dict, path, line_no) -> Token:
    for key in ("corpus", "doc", "sent", "tokens", "index"):
        if key not in raw:
            raise ParseError(path, line_no, f"missing field {key!r}")
    sentence = tuple(str(t) for t in raw["tokens"])
    index = raw["index"]
    if not isinstance(index, int) or not 0 <= index < len(sentence):
        raise ParseError(
            path, line_no, f"index {index!r} out of range for sentence of {len(sentence)} tokens"
        )
    return Token(
        corpus_id=str(raw["corpus"]),
        doc_id=str(raw["doc"]),
        sent_id=str(raw["sent"]),
        sentence=sentence,
        index=index,
    )


def _iter_jsonl(path):
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield line_no, json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, line_no, f"invalid JSON: {exc}") from exc


def load_wsd_corpus(path, lexicon: Lexicon | None = None) -> list[WsdExample]:
    """Load sense-tagged examples.

    The gold wordform is the lowercased target token, so the sense invariant
    that can be checked at load time is lexicon membership: when a lexicon is
    supplied, every gold sense must be among its wordform's candidates.
    """
    examples = []
    for line_no, raw in _iter_jsonl(path):
        token = _parse_token(raw, path, line_no)
        if "gold_definition" not in raw:
            raise ParseError(path, line_no, "missing field 'gold_definition'")
        gold = Sense(token.wordform, str(raw["gold_definition"]))
        if lexicon is not None:
            candidates = lexicon.wordform_index.get(gold.wordform, ())
            if gold.definition_id not in candidates:
                raise ParseError(
                    path,
                    line_no,
                    f"gold sense ({gold.wordform!r}, {gold.definition_id!r})"
                    " is not a candidate sense in the lexicon",
                )
        examples.append(WsdExample(token=token, gold=gold))
    return examples


def load_smd_corpus(path) -> list[SmdExample]:
    """Load metaphor-tagged examples with optional novelty scores."""
    examples = []
    for line_no, raw in _iter_jsonl(path):
        token = _parse_token(raw, path, line_no)
        label = raw.get("label")
        if label not in (0, 1):
            raise ParseError(path, line_no, f"label must be 0 or 1, got {label!r}")
        novelty = raw.get("novelty")
        if novelty is not None:
            novelty = float(novelty)
            if not -1.0 <= novelty <= 1.0:
                raise ParseError(path, line_no, f"novelty {novelty} outside [-1, 1]")
        examples.append(SmdExample(token=token, label=int(label), novelty=novelty))
    return examples


def filter_trivial_wsd(examples: Sequence[WsdExample], lexicon: Lexicon) -> list[WsdExample]:
    """Drop examples whose wordform has fewer than two candidate definitions."""
    kept = []
    for example in examples:
        candidates = lexicon.wordform_index.get(example.token.wordform, ())
        if len(candidates) >= 2:
            kept.append(example)
    return kept


def filter_smd(
    examples: Sequence[SmdExample],
    lexicon: Lexicon,
    conventional_only: bool = False,
    novelty_threshold: float = 0.2,
) -> list[SmdExample]:
    """Drop examples outside the lexicon; optionally drop novel metaphors.

    The conventional filter only touches metaphor-labeled examples that carry
    a novelty score above the threshold; literal examples always pass.
    """
    if not -1.0 <= novelty_threshold <= 1.0:
        raise ConfigError(f"novelty_threshold {novelty_threshold} outside [-1, 1]")
    kept = []
    for example in examples:
        if example.token.wordform not in lexicon.wordform_index:
            continue
        if (
            conventional_only
            and example.label == 1
            and example.novelty is not None
            and example.novelty > novelty_threshold
        ):
            continue
        kept.append(example)
    return kept


def split(examples: Sequence, ratios: tuple[float, float, float], seed: int):
    """Deterministic (train, dev, test) partition.

    Dev and test receive floor(n * ratio) examples each; the remainder goes
    to train.  The shuffle depends only on input order, ratios, and seed.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios {ratios} do not sum to 1")
    if any(r < -1e-9 for r in ratios):
        raise ConfigError(f"split ratios {ratios} must be nonnegative")
    # drift tolerance: 1.0 - dev - test can land a hair below zero
    ratios = tuple(max(0.0, r) for r in ratios)
    n = len(examples)
    n_dev = math.floor(n * ratios[1])
    n_test = math.floor(n * ratios[2])
    n_train = n - n_dev - n_test
    order = RngStream(seed).split("datasplit").gen.permutation(n)
    train = [examples[i] for i in order[:n_train]]
    dev = [examples[i] for i in order[n_train : n_train + n_dev]]
    test = [examples[i] for i in order[n_train + n_dev :]]
    return train, dev, test


def wsd_example_to_json(example: WsdExample) -> dict:
    return {
        "corpus": example.token.corpus_id,
        "doc": example.token.doc_id,
        "sent": example.token.sent_id,
        "tokens": list(example.token.sentence),
        "index": example.token.index,
        "gold_definition": example.gold.definition_id,
    }


def smd_example_to_json(example: SmdExample) -> dict:
    return {
        "corpus": example.token.corpus_id,
        "doc": example.token.doc_id,
        "sent": example.token.sent_id,
        "tokens": list(example.token.sentence),
        "index": example.token.index,
        "label": example.label,
        "novelty": example.novelty,
    }


def write_corpus(examples: Sequence, path) -> None:
    """Serialize examples back to the JSONL interchange format."""
    with open(path, "w", encoding="utf-8") as handle:
        for example in examples:
            if isinstance(example, WsdExample):
                raw = wsd_example_to_json(example)
            else:
                raw = smd_example_to_json(example)
            handle.write(json.dumps(raw, sort_keys=True, ensure_ascii=False))
            handle.write("\n")
