"""Store assembly: one pass over corpora, lexicon, and sense resource.

Produces a complete MLEX store plus an alignment report. TYPE vectors
cover every target wordform seen in the corpora, SYNSET vectors every
lexicon definition the resource covers, TOKEN and SENT vectors every
corpus occurrence the tokenizer can align. Everything that cannot be
represented lands in the report rather than failing the run.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .encoder import Encoder, first_subtoken
from .errors import ConfigError, DataError
from .formats import (
    read_corpus_tokens,
    read_lexicon_definitions,
    read_resource_vectors,
    sent_key,
    token_key,
    write_mlex,
    write_report,
)


@dataclass(frozen=True)
class ExtractionConfig:
    out_path: str
    lexicon_path: str
    corpus_paths: tuple[str, ...]
    encoder: str | None = None
    k: int | None = None
    resource_path: str | None = None
    report_path: str | None = None
    batch_size: int = 8
    device: str = "cpu"
    normalize_resource: bool = False
    toy: bool = False

    def __post_init__(self):
        if not self.corpus_paths:
            raise ConfigError("at least one corpus file is required")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")
        if self.toy:
            if self.k is None or self.k < 1:
                raise ConfigError("toy mode needs an explicit positive k")
        elif self.encoder is None:
            raise ConfigError("either an encoder identifier or --toy is required")
        if self.k is not None and self.k < 1:
            raise ConfigError(f"k must be positive, got {self.k}")


@dataclass
class ExtractionResult:
    store_path: str
    report_path: str
    dimension: int
    counts: dict[str, int] = field(default_factory=dict)
    dropped: int = 0


def _toy_vector(k: int, namespace: str, key: str) -> np.ndarray:
    # one independent generator per key, seeded by content hash, so the
    # same key always gets the same vector on any machine
    digest = hashlib.sha256(f"{namespace}:{key}".encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "big")
    return np.random.default_rng(seed).standard_normal(k)


def _collect_sentences(records: list[dict]) -> dict[str, dict]:
    sentences: dict[str, dict] = {}
    for record in records:
        skey = sent_key(record["corpus"], record["doc"], record["sent"])
        known = sentences.get(skey)
        if known is None:
            sentences[skey] = record
        elif known["tokens"] != record["tokens"]:
            raise DataError(
                f"sentence {skey} appears with two different token lists")
    return sentences


def _synset_space(config: ExtractionConfig, definitions: list[str], k: int,
                  report: list[dict]) -> dict[str, np.ndarray]:
    if config.resource_path is None:
        return {}
    per_sense = read_resource_vectors(config.resource_path)
    covered = []
    means = []
    for definition_id in definitions:
        vectors = per_sense.get(definition_id)
        if not vectors:
            report.append({"key": f"SYNSET:{definition_id}",
                           "reason": "no resource vectors"})
            continue
        stacked = np.stack(vectors)
        if config.normalize_resource:
            stacked = stacked / np.linalg.norm(stacked, axis=1, keepdims=True)
        covered.append(definition_id)
        means.append(stacked.mean(axis=0))
    if not covered:
        raise DataError("resource covers none of the lexicon definitions")
    matrix = np.stack(means)
    if matrix.shape[1] != k:
        if matrix.shape[1] < k:
            raise ConfigError(
                f"resource vectors are {matrix.shape[1]}-wide, narrower than "
                f"the target dimension {k}; projection cannot widen them")
        if matrix.shape[0] < k:
            raise ConfigError(
                f"projection to {k} dimensions needs at least {k} covered "
                f"definitions, got {matrix.shape[0]}")
        from sklearn.decomposition import TruncatedSVD
        matrix = TruncatedSVD(n_components=k, random_state=0).fit_transform(matrix)
    return {d: matrix[i] for i, d in enumerate(covered)}


def extract(config: ExtractionConfig) -> ExtractionResult:
    definitions = read_lexicon_definitions(config.lexicon_path)
    records: list[dict] = []
    for path in config.corpus_paths:
        records.extend(read_corpus_tokens(path))
    sentences = _collect_sentences(records)
    wordforms = sorted({r["tokens"][r["index"]].lower() for r in records})
    report_path = config.report_path or f"{config.out_path}.report.jsonl"
    report: list[dict] = []

    if config.toy:
        k = config.k
        spaces = {
            "TYPE": {w: _toy_vector(k, "TYPE", w) for w in wordforms},
            "SYNSET": {d: _toy_vector(k, "SYNSET", d) for d in definitions},
            "SENT": {s: _toy_vector(k, "SENT", s) for s in sentences},
            "TOKEN": {},
        }
        for record in records:
            tkey = token_key(record["corpus"], record["doc"], record["sent"],
                             record["index"])
            spaces["TOKEN"][tkey] = _toy_vector(k, "TOKEN", tkey)
    else:
        encoder = Encoder(config.encoder, config.device)
        k = config.k or encoder.hidden_size
        if k != encoder.hidden_size:
            raise ConfigError(
                f"target dimension {k} does not match the encoder hidden "
                f"size {encoder.hidden_size}")
        ordered = list(sentences)
        encodings = encoder.encode([sentences[s]["tokens"] for s in ordered],
                                   config.batch_size)
        by_sentence = dict(zip(ordered, encodings))
        spaces = {
            "SENT": {s: enc.features[0] for s, enc in by_sentence.items()},
            "TOKEN": {},
        }
        reported = set()
        for record in records:
            skey = sent_key(record["corpus"], record["doc"], record["sent"])
            tkey = token_key(record["corpus"], record["doc"], record["sent"],
                             record["index"])
            if tkey in spaces["TOKEN"] or tkey in reported:
                continue
            enc = by_sentence[skey]
            pos, reason = first_subtoken(enc.word_ids, record["index"])
            if pos is None:
                reported.add(tkey)
                report.append({"key": tkey, "reason": reason})
            else:
                spaces["TOKEN"][tkey] = enc.features[pos]

        type_encodings = encoder.encode([[w] for w in wordforms],
                                        config.batch_size)
        spaces["TYPE"] = {}
        for wordform, enc in zip(wordforms, type_encodings):
            pos, reason = first_subtoken(enc.word_ids, 0)
            if pos is None:
                report.append({"key": f"TYPE:{wordform}", "reason": reason})
            else:
                spaces["TYPE"][wordform] = enc.features[pos]

        spaces["SYNSET"] = _synset_space(config, definitions, k, report)

    write_mlex(config.out_path, k, spaces)
    write_report(report, report_path)
    return ExtractionResult(
        store_path=str(config.out_path),
        report_path=str(report_path),
        dimension=k,
        counts={ns: len(space) for ns, space in spaces.items()},
        dropped=len(report),
    )
