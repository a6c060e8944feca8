import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metalex.corpora import (SmdExample, Token, WsdExample, filter_smd,
                             filter_trivial_wsd, load_smd_corpus,
                             load_wsd_corpus, split, write_corpus)
from metalex.errors import ConfigError, ParseError


def token_row(wordform="bank", index=1, **extra):
    row = {"corpus": "c", "doc": "doc1", "sent": "s1",
           "tokens": ["the", wordform, "rose"], "index": index}
    row.update(extra)
    return row


def write_jsonl(tmp_path, name, rows):
    path = tmp_path / name
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    return path


def test_wordform_is_lowercased_target_token():
    token = Token("c", "d", "s", ("The", "Bank", "rose"), 1)
    assert token.wordform == "bank"


def test_load_wsd_corpus(tmp_path, tiny_lexicon):
    path = write_jsonl(tmp_path, "wsd.jsonl",
                       [token_row(gold_definition="d1")])
    examples = load_wsd_corpus(path, tiny_lexicon)
    assert len(examples) == 1
    assert examples[0].gold.wordform == "bank"
    assert examples[0].gold.definition_id == "d1"


def test_wsd_gold_must_be_a_candidate(tmp_path, tiny_lexicon):
    # d3 belongs to 'count', not 'bank'
    path = write_jsonl(tmp_path, "wsd.jsonl",
                       [token_row(gold_definition="d3")])
    with pytest.raises(ParseError) as err:
        load_wsd_corpus(path, tiny_lexicon)
    assert "candidate" in str(err.value)
    # without a lexicon the same file parses
    assert len(load_wsd_corpus(path)) == 1


def test_token_index_bounds_checked(tmp_path):
    path = write_jsonl(tmp_path, "wsd.jsonl",
                       [token_row(index=3, gold_definition="d1")])
    with pytest.raises(ParseError):
        load_wsd_corpus(path)


def test_load_smd_corpus_labels_and_novelty(tmp_path):
    rows = [token_row(label=1, novelty=0.7), token_row(label=0)]
    examples = load_smd_corpus(write_jsonl(tmp_path, "smd.jsonl", rows))
    assert [e.label for e in examples] == [1, 0]
    assert examples[0].novelty == 0.7
    assert examples[1].novelty is None


def test_smd_label_validation(tmp_path):
    path = write_jsonl(tmp_path, "smd.jsonl", [token_row(label=2)])
    with pytest.raises(ParseError):
        load_smd_corpus(path)
    path = write_jsonl(tmp_path, "smd2.jsonl", [token_row()])
    with pytest.raises(ParseError):
        load_smd_corpus(path)


def test_smd_novelty_range(tmp_path):
    path = write_jsonl(tmp_path, "smd.jsonl", [token_row(label=1, novelty=1.5)])
    with pytest.raises(ParseError):
        load_smd_corpus(path)


def test_filter_trivial_wsd(tiny_lexicon):
    from metalex.lexicon import Sense
    multi = WsdExample(Token("c", "d", "s", ("a", "bank", "b"), 1),
                       Sense("bank", "d0"))
    single = WsdExample(Token("c", "d", "s", ("a", "run", "b"), 1),
                        Sense("run", "d5"))
    assert filter_trivial_wsd([multi, single], tiny_lexicon) == [multi]


def smd(wordform, label, novelty=None):
    return SmdExample(Token("c", "d", "s", ("a", wordform, "b"), 1),
                      label, novelty)


def test_filter_smd_drops_unknown_wordforms(tiny_lexicon):
    kept = filter_smd([smd("bank", 1), smd("xylophone", 0)], tiny_lexicon)
    assert [e.token.wordform for e in kept] == ["bank"]


def test_filter_smd_conventional_only(tiny_lexicon):
    examples = [
        smd("bank", 1, novelty=0.5),   # novel metaphor: dropped
        smd("bank", 1, novelty=0.1),   # conventional metaphor: kept
        smd("bank", 1),                # unscored metaphor: kept
        smd("bank", 0, novelty=0.9),   # literal: always kept
    ]
    kept = filter_smd(examples, tiny_lexicon, conventional_only=True,
                      novelty_threshold=0.2)
    assert kept == examples[1:]
    assert filter_smd(examples, tiny_lexicon) == examples  # off by default


def test_filter_smd_threshold_validation(tiny_lexicon):
    with pytest.raises(ConfigError):
        filter_smd([], tiny_lexicon, novelty_threshold=2.0)


def test_split_sizes_and_disjointness():
    examples = list(range(103))
    train, dev, test = split(examples, (0.8, 0.1, 0.1), seed=5)
    assert len(dev) == math.floor(103 * 0.1)
    assert len(test) == math.floor(103 * 0.1)
    assert len(train) == 103 - len(dev) - len(test)
    assert sorted(train + dev + test) == examples


def test_split_is_deterministic_and_seed_sensitive():
    examples = list(range(50))
    first = split(examples, (0.6, 0.2, 0.2), seed=1)
    second = split(examples, (0.6, 0.2, 0.2), seed=1)
    third = split(examples, (0.6, 0.2, 0.2), seed=2)
    assert first == second
    assert first != third


def test_split_ratio_validation():
    with pytest.raises(ConfigError):
        split([1, 2], (0.5, 0.2, 0.2), seed=0)
    with pytest.raises(ConfigError):
        split([1, 2], (1.2, -0.1, -0.1), seed=0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 200),
       st.tuples(st.integers(0, 10), st.integers(0, 10), st.integers(0, 10))
       .filter(lambda t: sum(t) > 0),
       st.integers(0, 2 ** 31 - 1))
def test_split_arithmetic_properties(n, weights, seed):
    total = sum(weights)
    ratios = tuple(w / total for w in weights)
    # guard against float drift in the ratio normalization
    ratios = (1.0 - ratios[1] - ratios[2], ratios[1], ratios[2])
    examples = list(range(n))
    train, dev, test = split(examples, ratios, seed=seed)
    assert len(dev) == math.floor(n * ratios[1])
    assert len(test) == math.floor(n * ratios[2])
    assert len(train) + len(dev) + len(test) == n
    assert sorted(train + dev + test) == examples


def test_write_corpus_round_trip(tmp_path, tiny_lexicon):
    from metalex.lexicon import Sense
    wsd = [WsdExample(Token("c", "d", "s1", ("a", "bank", "b"), 1),
                      Sense("bank", "d0")),
           WsdExample(Token("c", "d", "s2", ("count", "me"), 0),
                      Sense("count", "d3"))]
    smd_examples = [smd("bank", 1, novelty=0.3), smd("run", 0)]
    wsd_path = tmp_path / "wsd.jsonl"
    smd_path = tmp_path / "smd.jsonl"
    write_corpus(wsd, wsd_path)
    write_corpus(smd_examples, smd_path)
    assert load_wsd_corpus(wsd_path, tiny_lexicon) == wsd
    assert load_smd_corpus(smd_path) == smd_examples