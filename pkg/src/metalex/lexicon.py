"""Sense inventory: definitions, the wordform index, and hypernym structure.

A lexicon is loaded once from JSONL and is immutable afterwards, so it is
safe to share across workers.  Wordforms are matched against lemmas by exact
string equality after lowercasing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import DataError, ParseError

__all__ = [
    "DefinitionRecord",
    "Lexicon",
    "Sense",
    "load_lexicon",
    "candidate_senses",
    "hypernym_adjacency",
]


@dataclass(frozen=True)
class Sense:
    """A word sense: one wordform paired with one definition id."""

    wordform: str
    definition_id: str


@dataclass(frozen=True)
class DefinitionRecord:
    definition_id: str
    gloss: str
    pos: str
    lemmas: tuple[str, ...]
    hypernyms: tuple[str, ...]


@dataclass(frozen=True)
class Lexicon:
    """Immutable sense inventory with a wordform -> definition-ids index.

    ``definition_order`` fixes a deterministic enumeration of definitions
    (lexicographic by id) used for every matrix whose rows or columns range
    over definitions.  ``wordform_index`` lists candidate definitions per
    lowercased wordform, also sorted by definition id.
    """

    definitions: dict[str, DefinitionRecord]
    wordform_index: dict[str, tuple[str, ...]]
    definition_order: tuple[str, ...]
    definition_pos: dict[str, int] = field(repr=False)

    def sense_enumeration(self) -> list[Sense]:
        """All senses in the fixed order: by wordform, then definition id."""
        out = []
        for wordform in sorted(self.wordform_index):
            for definition_id in self.wordform_index[wordform]:
                out.append(Sense(wordform, definition_id))
        return out

    def validate_sense(self, sense: Sense) -> None:
        candidates = self.wordform_index.get(sense.wordform.lower(), ())
        if sense.definition_id not in candidates:
            raise DataError(
                f"sense ({sense.wordform!r}, {sense.definition_id!r}) is not in the lexicon"
            )


_REQUIRED_FIELDS = ("id", "gloss", "pos", "lemmas", "hypernyms")


def load_lexicon(path) -> Lexicon:
    """Load a lexicon from JSONL, one definition record per line.

    Raises ParseError on malformed lines, DataError on duplicate ids or
    hypernym references that do not resolve within the file.
    """
    definitions: dict[str, DefinitionRecord] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, line_no, f"invalid JSON: {exc}") from exc
            for key in _REQUIRED_FIELDS:
                if key not in raw:
                    raise ParseError(path, line_no, f"missing field {key!r}")
            if not raw["lemmas"]:
                raise ParseError(path, line_no, "lemmas must be nonempty")
            definition_id = str(raw["id"])
            if definition_id in definitions:
                raise ParseError(path, line_no, f"duplicate definition id {definition_id!r}")
            definitions[definition_id] = DefinitionRecord(
                definition_id=definition_id,
                gloss=str(raw["gloss"]),
                pos=str(raw["pos"]),
                lemmas=tuple(str(l) for l in raw["lemmas"]),
                hypernyms=tuple(str(h) for h in raw["hypernyms"]),
            )

    return lexicon_from_records(definitions.values())


def lexicon_from_records(records: Iterable[DefinitionRecord]) -> Lexicon:
    """Assemble and validate a lexicon from in-memory definition records."""
    definitions: dict[str, DefinitionRecord] = {}
    for record in records:
        if record.definition_id in definitions:
            raise DataError(f"duplicate definition id {record.definition_id!r}")
        definitions[record.definition_id] = record

    for record in definitions.values():
        for hyper in record.hypernyms:
            if hyper not in definitions:
                raise DataError(
                    f"definition {record.definition_id!r} cites unknown hypernym {hyper!r}"
                )
        if not record.lemmas:
            raise DataError(f"definition {record.definition_id!r} has no lemmas")

    index: dict[str, set[str]] = {}
    for record in definitions.values():
        for lemma in record.lemmas:
            index.setdefault(lemma.lower(), set()).add(record.definition_id)
    wordform_index = {w: tuple(sorted(ids)) for w, ids in index.items()}

    definition_order = tuple(sorted(definitions))
    definition_pos = {d: i for i, d in enumerate(definition_order)}
    return Lexicon(
        definitions=definitions,
        wordform_index=wordform_index,
        definition_order=definition_order,
        definition_pos=definition_pos,
    )


def candidate_senses(lexicon: Lexicon, wordform: str) -> list[Sense]:
    """Candidate senses of a wordform, in index order; [] if unindexed."""
    w = wordform.lower()
    return [Sense(w, d) for d in lexicon.wordform_index.get(w, ())]


def hypernym_adjacency(lexicon: Lexicon) -> tuple[np.ndarray, tuple[str, ...]]:
    """0/1 matrix A with A[i, j] = 1 iff definition j is a hypernym of i.

    Rows and columns follow ``lexicon.definition_order``, which is returned
    alongside the matrix.
    """
    order = lexicon.definition_order
    pos = lexicon.definition_pos
    matrix = np.zeros((len(order), len(order)), dtype=np.float64)
    for definition_id in order:
        i = pos[definition_id]
        for hyper in lexicon.definitions[definition_id].hypernyms:
            matrix[i, pos[hyper]] = 1.0
    return matrix, order


def serialize_lexicon(lexicon: Lexicon) -> str:
    """Canonical JSONL rendering (definition order, sorted keys)."""
    lines = []
    for definition_id in lexicon.definition_order:
        record = lexicon.definitions[definition_id]
        lines.append(
            json.dumps(
                {
                    "id": record.definition_id,
                    "gloss": record.gloss,
                    "pos": record.pos,
                    "lemmas": list(record.lemmas),
                    "hypernyms": list(record.hypernyms),
                },
                sort_keys=True,
                ensure_ascii=False,
            )
        )
    return "\n".join(lines) + "\n"


def write_lexicon(records: Iterable[dict], path) -> None:
    """Write raw record dicts as lexicon JSONL (adapter helper)."""
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True, ensure_ascii=False))
            handle.write("\n")
