import json
import os

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")
os.environ.setdefault("HF_HUB_DISABLE_PROGRESS_BARS", "1")
os.environ.setdefault("TRANSFORMERS_VERBOSITY", "error")

import numpy as np
import pytest

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "a", "on", "is", "and", "he", "she", "his", "like",
    "cat", "sat", "mat", "dog", "fox", "run", "##ning", "jump", "##ed",
    "water", "bank", "river", "tree", "leaf", "wind", "blow", "fire",
    "burn", "##s", "cold", "heart", "stone", "time", "flow", "deep",
    "light", "high", "alone", "fell", "fast",
]

# 20 sentences; 18 align cleanly, one target is erased by the encoder's
# text normalization (zero-width space), one sits beyond the length limit
SENTENCES = [
    (["the", "cat", "sat", "on", "the", "mat"], 1),
    (["a", "dog", "ran", "fast"], 1),
    (["the", "fox", "is", "running"], 3),
    (["water", "flows", "deep"], 0),
    (["the", "bank", "of", "the", "river"], 1),
    (["fire", "burns", "bright"], 0),
    (["wind", "blows", "cold"], 0),
    (["his", "heart", "is", "stone"], 3),
    (["time", "flows", "like", "water"], 0),
    (["the", "leaf", "fell"], 1),
    (["she", "jumped", "high"], 1),
    (["the", "tree", "burns"], 1),
    (["light", "fades"], 0),
    (["he", "sat", "alone"], 1),
    (["the", "river", "runs"], 1),
    (["deep", "water", "is", "cold"], 1),
    (["​", "bank"], 0),
    (["the"] * 40, 35),
    (["the", "dog", "barks"], 2),
    (["stone", "and", "fire"], 0),
]

WORDFORMS = sorted({tokens[i].lower() for tokens, i in SENTENCES})

DEFINITIONS = [f"d{i:02d}" for i in range(24)]
UNCOVERED = {"d07", "d13"}  # left out of the resource on purpose
RESOURCE_WIDTH = 40


@pytest.fixture(scope="session")
def encoder_dir(tmp_path_factory):
    """A randomly initialized 4-layer encoder small enough to run in tests."""
    import torch
    from transformers import BertConfig, BertModel, BertTokenizerFast

    path = tmp_path_factory.mktemp("encoder")
    (path / "vocab.txt").write_text("\n".join(VOCAB) + "\n")
    tokenizer = BertTokenizerFast.from_pretrained(str(path))
    torch.manual_seed(0)
    config = BertConfig(vocab_size=len(VOCAB), hidden_size=16,
                        num_hidden_layers=4, num_attention_heads=2,
                        intermediate_size=32, max_position_embeddings=32)
    model = BertModel(config)
    model.eval()
    model.save_pretrained(str(path))
    tokenizer.save_pretrained(str(path))
    return str(path)


def _write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row) + "\n")


@pytest.fixture(scope="session")
def world_dir(tmp_path_factory):
    """Lexicon, resource, and two corpus files over the 20 sentences."""
    path = tmp_path_factory.mktemp("world")

    lexicon_rows = []
    for i, definition_id in enumerate(DEFINITIONS):
        lexicon_rows.append({
            "id": definition_id,
            "gloss": f"meaning number {i}",
            "pos": "n",
            "lemmas": [WORDFORMS[i % len(WORDFORMS)]],
            "hypernyms": ["d00"] if i % 5 == 0 and i else [],
        })
    _write_jsonl(path / "lexicon.jsonl", lexicon_rows)

    gen = np.random.default_rng(7)
    resource_rows = []
    for i, definition_id in enumerate(DEFINITIONS):
        if definition_id in UNCOVERED:
            continue
        for _ in range(1 + i % 3):
            resource_rows.append({
                "definition": definition_id,
                "vector": gen.standard_normal(RESOURCE_WIDTH).tolist(),
            })
    _write_jsonl(path / "resource.jsonl", resource_rows)

    wsd_rows, smd_rows = [], []
    for serial, (tokens, index) in enumerate(SENTENCES):
        record = {"corpus": "toy", "doc": f"doc{serial // 10}",
                  "sent": f"s{serial:02d}", "tokens": tokens, "index": index}
        if serial % 2 == 0:
            wsd_rows.append({**record, "gold_definition": DEFINITIONS[serial]})
        else:
            smd_rows.append({**record, "label": serial % 4 // 2})
    _write_jsonl(path / "wsd.jsonl", wsd_rows)
    _write_jsonl(path / "smd.jsonl", smd_rows)
    return str(path)
