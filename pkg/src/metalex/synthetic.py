"""Self-contained synthetic worlds for tests and benchmarks.

A synthetic world is a lexicon of invented wordforms, an embedding store
with random TYPE/SYNSET vectors, and corpora whose labels come from a
planted scorer: a hidden random MLP reads each sense's concatenated
TYPE+SYNSET vector, and senses scoring above the median are the
metaphorical ones.  Token vectors are their evoked sense's SYNSET vector
plus isotropic noise, sense-tagged with the nearest candidate, so both the
disambiguation and metaphoricity signals are recoverable by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

import json
import os

from .corpora import SmdExample, Token, WsdExample, split, write_corpus
from .embedstore import EmbeddingStore, sent_key, token_key, write_store
from .engine import MlpConfig, Tape, init_params, mlp_apply
from .lexicon import (DefinitionRecord, Lexicon, Sense, candidate_senses,
                      lexicon_from_records, serialize_lexicon)
from .rng import RngStream

__all__ = ["SyntheticWorld", "make_world", "write_world"]


@dataclass
class SyntheticWorld:
    lexicon: Lexicon
    store: EmbeddingStore
    smd: list[SmdExample]
    wsd: list[WsdExample]
    sense_labels: dict[Sense, int] = field(repr=False)
    seed: int = 0


def _make_lexicon(stream: RngStream, n_wordforms: int, min_senses: int,
                  max_senses: int) -> Lexicon:
    gen = stream.gen
    records = []
    counter = 0
    for i in range(n_wordforms):
        wordform = f"w{i:02d}"
        n_senses = int(gen.integers(min_senses, max_senses + 1))
        for _ in range(n_senses):
            definition_id = f"d{counter:04d}"
            hypernyms = ()
            if counter > 0 and gen.random() < 0.3:
                hypernyms = (f"d{int(gen.integers(counter)):04d}",)
            records.append(DefinitionRecord(
                definition_id=definition_id,
                gloss=f"sense {counter} of {wordform}",
                pos="v",
                lemmas=(wordform,),
                hypernyms=hypernyms,
            ))
            counter += 1
    return lexicon_from_records(records)


def _planted_labels(lexicon: Lexicon, store: EmbeddingStore, k: int,
                    stream: RngStream) -> dict[Sense, int]:
    """Label each sense with a hidden random two-layer network, splitting
    at the median score so the classes are balanced."""
    cfg = MlpConfig(in_size=2 * k, out_size=1, layers=2, hidden=16, dropout=0.0)
    hidden_net = init_params(cfg, stream.split("planted-net"), "planted")
    senses = lexicon.sense_enumeration()
    pairs = np.stack([
        np.concatenate([store.get("TYPE", s.wordform),
                        store.get("SYNSET", s.definition_id)])
        for s in senses
    ])
    tape = Tape()
    scores = mlp_apply(tape, hidden_net, tape.constant(pairs)).data[:, 0]
    cutoff = float(np.median(scores))
    return {s: int(scores[i] > cutoff) for i, s in enumerate(senses)}


def _make_token(corpus_id: str, wordform: str, serial: int) -> Token:
    return Token(
        corpus_id=corpus_id,
        doc_id=f"doc{serial // 100:03d}",
        sent_id=f"s{serial:05d}",
        sentence=("the", wordform, "here"),
        index=1,
    )


def make_world(seed: int, *, k: int = 8, n_wordforms: int = 40,
               min_senses: int = 2, max_senses: int = 5, n_smd: int = 2000,
               n_wsd: int = 2000, noise: float = 0.1) -> SyntheticWorld:
    """Build a full synthetic world; deterministic per seed."""
    root = RngStream(seed)
    lexicon = _make_lexicon(root.split("lexicon"), n_wordforms, min_senses,
                            max_senses)
    vec_gen = root.split("vectors").gen
    store = EmbeddingStore(k)
    wordforms = sorted(lexicon.wordform_index)
    for wordform in wordforms:
        store.put("TYPE", wordform, vec_gen.standard_normal(k))
    for definition_id in lexicon.definition_order:
        store.put("SYNSET", definition_id, vec_gen.standard_normal(k))

    sense_labels = _planted_labels(lexicon, store, k, root.split("planted"))

    def emit_examples(corpus_id: str, count: int, stream: RngStream):
        gen = stream.gen
        examples = []
        for serial in range(count):
            wordform = wordforms[int(gen.integers(len(wordforms)))]
            cands = candidate_senses(lexicon, wordform)
            evoked = cands[int(gen.integers(len(cands)))]
            vec = (store.get("SYNSET", evoked.definition_id)
                   + noise * gen.standard_normal(k))
            token = _make_token(corpus_id, wordform, serial)
            store.put("TOKEN", token_key(token), vec)
            store.put("SENT", sent_key(token), gen.standard_normal(k))
            examples.append((token, evoked, vec))
        return examples

    smd = []
    for token, evoked, _ in emit_examples("smd-syn", n_smd, root.split("smd")):
        smd.append(SmdExample(token=token, label=sense_labels[evoked],
                              novelty=None))

    wsd = []
    for token, _, vec in emit_examples("wsd-syn", n_wsd, root.split("wsd")):
        cands = candidate_senses(lexicon, token.wordform)
        distances = [np.linalg.norm(vec - store.get("SYNSET", s.definition_id))
                     for s in cands]
        gold = cands[int(np.argmin(distances))]
        wsd.append(WsdExample(token=token, gold=gold))

    return SyntheticWorld(lexicon=lexicon, store=store, smd=smd, wsd=wsd,
                          sense_labels=sense_labels, seed=seed)


def write_world(world: SyntheticWorld, out_dir,
                ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)) -> dict:
    """Dump a world to disk in the exchange formats; returns path map.

    Splits reuse the world's own seed, so the same world always lands in
    the same files.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "lexicon": os.path.join(out_dir, "lexicon.jsonl"),
        "store": os.path.join(out_dir, "store.mlex"),
        "senses": os.path.join(out_dir, "senses.jsonl"),
    }
    with open(paths["lexicon"], "w", encoding="utf-8") as fh:
        fh.write(serialize_lexicon(world.lexicon))
    write_store(world.store, paths["store"])
    with open(paths["senses"], "w", encoding="utf-8") as fh:
        for sense in world.lexicon.sense_enumeration():
            fh.write(json.dumps({
                "wordform": sense.wordform,
                "definition": sense.definition_id,
                "gold": world.sense_labels[sense],
            }, sort_keys=True) + "\n")
    for prefix, examples in (("smd", world.smd), ("wsd", world.wsd)):
        for name, part in zip(("train", "dev", "test"),
                              split(examples, ratios, seed=world.seed)):
            key = f"{prefix}_{name}"
            paths[key] = os.path.join(out_dir, f"{key}.jsonl")
            write_corpus(part, paths[key])
    return paths
