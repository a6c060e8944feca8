"""Scoring architectures over frozen embedding vectors.

Five networks: a sense metaphoricity scorer (wordform+definition pair in,
probability out), two word-sense disambiguators (a softmax baseline and a
frozen-synset-matrix variant with hypernym propagation), a token
metaphoricity baseline, and a two-branch token scorer with a bare affine
head.  The combined scorer marginalizes sense metaphoricity over the
disambiguator's distribution, restricted to the wordform's candidates.

Each architecture has an eval-mode scoring function returning floats and a
graph builder that emits the same computation onto a caller-supplied tape
for training.  Graph builders work on whole batches: candidates of all
examples are flattened into one pair list, combined per example with
segment-sum matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpora import Token, WsdExample
from .embedstore import EmbeddingStore, token_key, sent_key
from .engine import MlpConfig, MlpParams, Param, Tape, init_params, mlp_apply
from .errors import DataError, DimensionMismatchError, FormatError
from .lexicon import Lexicon, Sense, candidate_senses, hypernym_adjacency
from .rng import RngStream

__all__ = [
    "MpdModel", "WsdBaselineModel", "EwiserModel", "SmdBaselineModel",
    "MelbertModel", "CombinedModel",
    "build_mpd", "build_wsd_baseline", "build_ewiser", "build_smd_baseline",
    "build_melbert",
    "mpd_score", "mpd_scores_batch", "wsd_scores", "smd_score",
    "combined_smd_score", "melbert_average", "baseline_predictors",
    "scoreable_candidates", "PairBatch", "WsdBatch",
    "build_pair_batch", "build_wsd_batch",
    "mpd_pair_graph", "wsd_pair_graph", "combined_graph", "smd_graph",
    "melbert_graph", "model_config", "model_from_checkpoint", "model_kind",
]


# -- model containers ----------------------------------------------------

@dataclass(eq=False)
class MpdModel:
    """Sense scorer: concat(TYPE, SYNSET) of width 2k -> probability."""

    mlp: MlpParams
    k: int

    def parameters(self) -> list[Param]:
        return self.mlp.parameters()


@dataclass(eq=False)
class WsdBaselineModel:
    """Token scorer with one output column per sense in the lexicon's
    fixed enumeration; candidate restriction happens via masked softmax."""

    mlp: MlpParams
    k: int
    senses: tuple[Sense, ...]
    sense_pos: dict[Sense, int] = field(repr=False)

    def parameters(self) -> list[Param]:
        return self.mlp.parameters()


@dataclass(eq=False)
class EwiserModel:
    """Disambiguator through a frozen synset-embedding matrix.

    ``synset_matrix`` is (k, n_definitions) with columns in the lexicon's
    definition order; ``adjacency``[i, j] = 1 iff j is a hypernym of i.
    Both stay frozen.  A definition's score is its own dot product plus
    those of its hypernyms; candidate sigmoids are renormalized to sum 1.
    """

    mlp: MlpParams
    k: int
    synset_matrix: np.ndarray = field(repr=False)
    adjacency: np.ndarray = field(repr=False)
    definition_pos: dict[str, int] = field(repr=False)
    missing_synsets: tuple[str, ...] = ()

    def parameters(self) -> list[Param]:
        return self.mlp.parameters()


@dataclass(eq=False)
class SmdBaselineModel:
    """Token metaphoricity: probability from the token vector alone."""

    mlp: MlpParams
    k: int

    def parameters(self) -> list[Param]:
        return self.mlp.parameters()


@dataclass(eq=False)
class MelbertModel:
    """Two-branch token scorer: one branch contrasts the token with its
    sentence, the other with its wordform; a single affine layer (no
    dropout, no ReLU) maps the concatenated branch outputs to a logit."""

    spv_mlp: MlpParams
    mip_mlp: MlpParams
    out_weight: Param
    out_bias: Param
    k: int

    def parameters(self) -> list[Param]:
        return (self.spv_mlp.parameters() + self.mip_mlp.parameters()
                + [self.out_weight, self.out_bias])


@dataclass(eq=False)
class CombinedModel:
    """Sense scorer plus disambiguator, trained jointly and scored by
    marginalizing over the wordform's candidate senses."""

    mpd: MpdModel
    wsd: WsdBaselineModel | EwiserModel

    @property
    def k(self) -> int:
        return self.mpd.k

    def parameters(self) -> list[Param]:
        return self.mpd.parameters() + self.wsd.parameters()


# -- builders --------------------------------------------------------------

def build_mpd(k: int, layers: int, hidden: int, dropout: float,
              stream: RngStream | None = None) -> MpdModel:
    cfg = MlpConfig(in_size=2 * k, out_size=1, layers=layers, hidden=hidden,
                    dropout=dropout)
    return MpdModel(mlp=init_params(cfg, stream, "mpd"), k=k)


def build_wsd_baseline(k: int, layers: int, hidden: int, dropout: float,
                       lexicon: Lexicon,
                       stream: RngStream | None = None) -> WsdBaselineModel:
    senses = tuple(lexicon.sense_enumeration())
    if not senses:
        raise DataError("lexicon has no senses to enumerate")
    cfg = MlpConfig(in_size=k, out_size=len(senses), layers=layers,
                    hidden=hidden, dropout=dropout)
    return WsdBaselineModel(
        mlp=init_params(cfg, stream, "wsd"),
        k=k,
        senses=senses,
        sense_pos={s: i for i, s in enumerate(senses)},
    )


def build_ewiser(k: int, layers: int, hidden: int, dropout: float,
                 lexicon: Lexicon, store: EmbeddingStore,
                 stream: RngStream | None = None) -> EwiserModel:
    if store.dimension != k:
        raise DimensionMismatchError(
            f"store dimension {store.dimension} does not match model k={k}")
    adjacency, order = hypernym_adjacency(lexicon)
    synset_matrix = np.zeros((k, len(order)))
    missing = []
    for j, definition_id in enumerate(order):
        if store.has("SYNSET", definition_id):
            synset_matrix[:, j] = store.get("SYNSET", definition_id)
        else:
            missing.append(definition_id)
    cfg = MlpConfig(in_size=k, out_size=k, layers=layers, hidden=hidden,
                    dropout=dropout)
    return EwiserModel(
        mlp=init_params(cfg, stream, "wsd"),
        k=k,
        synset_matrix=synset_matrix,
        adjacency=adjacency,
        definition_pos={d: i for i, d in enumerate(order)},
        missing_synsets=tuple(missing),
    )


def build_smd_baseline(k: int, layers: int, hidden: int, dropout: float,
                       stream: RngStream | None = None) -> SmdBaselineModel:
    cfg = MlpConfig(in_size=k, out_size=1, layers=layers, hidden=hidden,
                    dropout=dropout)
    return SmdBaselineModel(mlp=init_params(cfg, stream, "smd"), k=k)


def build_melbert(k: int, spv_layers: int, spv_hidden: int, mip_layers: int,
                  mip_hidden: int, dropout: float,
                  stream: RngStream | None = None) -> MelbertModel:
    spv_cfg = MlpConfig(in_size=2 * k, out_size=k, layers=spv_layers,
                        hidden=spv_hidden, dropout=dropout)
    mip_cfg = MlpConfig(in_size=2 * k, out_size=k, layers=mip_layers,
                        hidden=mip_hidden, dropout=dropout)
    bound = np.sqrt(6.0 / (2 * k + 1))
    if stream is None:
        head = np.zeros((2 * k, 1))
    else:
        head = stream.split("melbert.out").gen.uniform(-bound, bound, (2 * k, 1))
    return MelbertModel(
        spv_mlp=init_params(spv_cfg, stream, "melbert.spv"),
        mip_mlp=init_params(mip_cfg, stream, "melbert.mip"),
        out_weight=Param("melbert.out.weight", head),
        out_bias=Param("melbert.out.bias", np.zeros((1, 1))),
        k=k,
    )


# -- embedding lookups ------------------------------------------------------

def _check_dimension(model_k: int, store: EmbeddingStore) -> None:
    if store.dimension != model_k:
        raise DimensionMismatchError(
            f"store dimension {store.dimension} does not match model k={model_k}")


def scoreable_candidates(lexicon: Lexicon, store: EmbeddingStore,
                         wordform: str) -> list[Sense]:
    """Candidate senses the combined model can actually score: requires a
    TYPE vector for the wordform and a SYNSET vector per definition."""
    wordform = wordform.lower()
    if not store.has("TYPE", wordform):
        return []
    return [s for s in candidate_senses(lexicon, wordform)
            if store.has("SYNSET", s.definition_id)]


def _pair_vector(store: EmbeddingStore, sense: Sense) -> np.ndarray:
    return np.concatenate([
        store.get("TYPE", sense.wordform.lower()),
        store.get("SYNSET", sense.definition_id),
    ])


# -- graph builders ---------------------------------------------------------

def mpd_pair_graph(tape: Tape, model: MpdModel, pair_matrix: np.ndarray):
    """(P, 2k) rows of concat(TYPE, SYNSET) -> (P, 1) probabilities."""
    return tape.sigmoid(mlp_apply(tape, model.mlp, tape.constant(pair_matrix)))


def wsd_dist_graph(tape: Tape, model: WsdBaselineModel,
                   token_matrix: np.ndarray, mask: np.ndarray):
    """(B, k) token vectors -> (B, n_senses) candidate-masked distribution."""
    logits = mlp_apply(tape, model.mlp, tape.constant(token_matrix))
    return tape.masked_softmax(logits, mask)


def _segment_matrix(pair_example: np.ndarray, n_examples: int) -> np.ndarray:
    seg = np.zeros((n_examples, len(pair_example)))
    seg[pair_example, np.arange(len(pair_example))] = 1.0
    return seg


def wsd_pair_graph(tape: Tape, model, token_matrix: np.ndarray,
                   pair_example: np.ndarray, pair_cols: np.ndarray,
                   seg_matrix: np.ndarray):
    """Per-pair candidate probabilities, flattened over the batch.

    ``pair_cols`` indexes the model's output columns: sense positions for
    the baseline, definition positions for the frozen-synset variant.
    Returns a (P, 1) node; each example's pairs sum to 1.
    """
    n_examples = token_matrix.shape[0]
    if isinstance(model, WsdBaselineModel):
        mask = np.zeros((n_examples, len(model.senses)), dtype=bool)
        mask[pair_example, pair_cols] = True
        dist = wsd_dist_graph(tape, model, token_matrix, mask)
        return tape.gather(dist, pair_example, pair_cols)
    if isinstance(model, EwiserModel):
        h = mlp_apply(tape, model.mlp, tape.constant(token_matrix))
        z = tape.matmul_frozen(h, model.synset_matrix)
        scores = tape.add(tape.matmul_frozen(z, model.adjacency.T), z)
        sig = tape.sigmoid(tape.gather(scores, pair_example, pair_cols))
        denom = tape.frozen_matmul(seg_matrix, sig)
        per_pair = tape.gather(denom, pair_example, np.zeros_like(pair_example))
        return tape.div(sig, per_pair)
    raise DataError(f"unsupported disambiguator type {type(model).__name__}")


def combined_graph(tape: Tape, mpd: MpdModel, wsd, batch: "PairBatch"):
    """Marginalized metaphoricity per example: (B, 1) probabilities."""
    q = wsd_pair_graph(tape, wsd, batch.token_matrix, batch.pair_example,
                       batch.pair_cols, batch.seg_matrix)
    m = mpd_pair_graph(tape, mpd, batch.pair_matrix)
    return tape.frozen_matmul(batch.seg_matrix, tape.mul(q, m))


def smd_graph(tape: Tape, model: SmdBaselineModel, token_matrix: np.ndarray):
    return tape.sigmoid(mlp_apply(tape, model.mlp, tape.constant(token_matrix)))


def melbert_graph(tape: Tape, model: MelbertModel, token_matrix: np.ndarray,
                  sent_matrix: np.ndarray, type_matrix: np.ndarray):
    h_tok = tape.constant(token_matrix)
    h_spv = mlp_apply(tape, model.spv_mlp,
                      tape.concat(h_tok, tape.constant(sent_matrix)))
    h_mip = mlp_apply(tape, model.mip_mlp,
                      tape.concat(h_tok, tape.constant(type_matrix)))
    both = tape.concat(h_mip, h_spv)
    logit = tape.affine(both, tape.param(model.out_weight),
                        tape.param(model.out_bias))
    return tape.sigmoid(logit)


# -- batch assembly ---------------------------------------------------------

@dataclass
class PairBatch:
    """Flattened (example, candidate sense) pairs for the combined model."""

    tokens: list[Token]
    senses: list[Sense]
    token_matrix: np.ndarray
    pair_matrix: np.ndarray
    pair_example: np.ndarray
    pair_cols: np.ndarray
    seg_matrix: np.ndarray

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass
class WsdBatch:
    """Disambiguation batch: every candidate of every example, flattened,
    with the position of the gold pair per example."""

    examples: list[WsdExample]
    token_matrix: np.ndarray
    pair_example: np.ndarray
    pair_cols: np.ndarray
    seg_matrix: np.ndarray
    gold_pair_rows: np.ndarray

    def __len__(self) -> int:
        return len(self.examples)


def _model_cols(model, senses: list[Sense]) -> np.ndarray:
    if isinstance(model, WsdBaselineModel):
        try:
            return np.array([model.sense_pos[s] for s in senses], dtype=np.intp)
        except KeyError as exc:
            raise DataError(f"sense {exc.args[0]} not in the model's enumeration")
    return np.array([model.definition_pos[s.definition_id] for s in senses],
                    dtype=np.intp)


def build_pair_batch(store: EmbeddingStore, lexicon: Lexicon, wsd_model,
                     tokens: list[Token]):
    """Assemble the combined model's inputs for a batch of tokens.

    Returns (batch or None, skipped) where skipped lists (position, reason)
    for tokens without the embeddings the model needs.
    """
    _check_dimension(wsd_model.k, store)
    kept_tokens, skipped = [], []
    flat_senses: list[Sense] = []
    pair_example: list[int] = []
    for pos, token in enumerate(tokens):
        if not store.has("TOKEN", token_key(token)):
            skipped.append((pos, "missing TOKEN embedding"))
            continue
        cands = scoreable_candidates(lexicon, store, token.wordform)
        if not cands:
            skipped.append((pos, "no scoreable candidate senses"))
            continue
        idx = len(kept_tokens)
        kept_tokens.append(token)
        flat_senses.extend(cands)
        pair_example.extend([idx] * len(cands))
    if not kept_tokens:
        return None, skipped
    token_matrix = store.matrix("TOKEN", [token_key(t) for t in kept_tokens])
    pair_matrix = np.stack([_pair_vector(store, s) for s in flat_senses])
    pair_example_arr = np.array(pair_example, dtype=np.intp)
    batch = PairBatch(
        tokens=kept_tokens,
        senses=flat_senses,
        token_matrix=token_matrix,
        pair_matrix=pair_matrix,
        pair_example=pair_example_arr,
        pair_cols=_model_cols(wsd_model, flat_senses),
        seg_matrix=_segment_matrix(pair_example_arr, len(kept_tokens)),
    )
    return batch, skipped


def build_wsd_batch(store: EmbeddingStore, lexicon: Lexicon, wsd_model,
                    examples: list[WsdExample]):
    """Assemble a disambiguation batch over full candidate sets."""
    _check_dimension(wsd_model.k, store)
    kept, skipped = [], []
    flat_senses: list[Sense] = []
    pair_example: list[int] = []
    gold_rows: list[int] = []
    for pos, example in enumerate(examples):
        if not store.has("TOKEN", token_key(example.token)):
            skipped.append((pos, "missing TOKEN embedding"))
            continue
        cands = candidate_senses(lexicon, example.token.wordform)
        if example.gold not in cands:
            raise DataError(
                f"gold sense ({example.gold.wordform!r}, "
                f"{example.gold.definition_id!r}) is not a candidate of its wordform")
        idx = len(kept)
        gold_rows.append(len(flat_senses) + cands.index(example.gold))
        kept.append(example)
        flat_senses.extend(cands)
        pair_example.extend([idx] * len(cands))
    if not kept:
        return None, skipped
    token_matrix = store.matrix("TOKEN", [token_key(e.token) for e in kept])
    pair_example_arr = np.array(pair_example, dtype=np.intp)
    batch = WsdBatch(
        examples=kept,
        token_matrix=token_matrix,
        pair_example=pair_example_arr,
        pair_cols=_model_cols(wsd_model, flat_senses),
        seg_matrix=_segment_matrix(pair_example_arr, len(kept)),
        gold_pair_rows=np.array(gold_rows, dtype=np.intp),
    )
    return batch, skipped


# -- eval-mode scoring -------------------------------------------------------

def mpd_score(model: MpdModel, store: EmbeddingStore, sense: Sense) -> float:
    """Metaphoricity probability of one sense (eval mode)."""
    return float(mpd_scores_batch(model, store, [sense])[0])


def mpd_scores_batch(model: MpdModel, store: EmbeddingStore,
                     senses: list[Sense]) -> np.ndarray:
    _check_dimension(model.k, store)
    pairs = np.stack([_pair_vector(store, s) for s in senses])
    tape = Tape()
    return mpd_pair_graph(tape, model, pairs).data[:, 0].copy()


def wsd_scores(model, store: EmbeddingStore, token: Token,
               candidates: list[Sense]) -> np.ndarray:
    """Distribution over the given candidate senses for one token."""
    _check_dimension(model.k, store)
    if not candidates:
        raise DataError(f"no candidate senses supplied for {token.wordform!r}")
    token_matrix = store.get("TOKEN", token_key(token)).reshape(1, -1)
    pair_example = np.zeros(len(candidates), dtype=np.intp)
    seg = _segment_matrix(pair_example, 1)
    tape = Tape()
    q = wsd_pair_graph(tape, model, token_matrix, pair_example,
                       _model_cols(model, candidates), seg)
    return q.data[:, 0].copy()


def smd_score(model, store: EmbeddingStore, token: Token) -> float:
    """Token metaphoricity probability (eval mode) for either token scorer."""
    _check_dimension(model.k, store)
    token_matrix = store.get("TOKEN", token_key(token)).reshape(1, -1)
    tape = Tape()
    if isinstance(model, SmdBaselineModel):
        out = smd_graph(tape, model, token_matrix)
    elif isinstance(model, MelbertModel):
        sent = store.get("SENT", sent_key(token)).reshape(1, -1)
        typ = store.get("TYPE", token.wordform).reshape(1, -1)
        out = melbert_graph(tape, model, token_matrix, sent, typ)
    else:
        raise DataError(f"unsupported token scorer type {type(model).__name__}")
    return float(out.data[0, 0])


def combined_smd_score(mpd: MpdModel, wsd_model, store: EmbeddingStore,
                       lexicon: Lexicon, token: Token) -> float:
    """Marginalized token metaphoricity over the wordform's candidates."""
    batch, skipped = build_pair_batch(store, lexicon, wsd_model, [token])
    if batch is None:
        raise DataError(
            f"token {token_key(token)} ({token.wordform!r}): {skipped[0][1]}")
    tape = Tape()
    return float(combined_graph(tape, mpd, wsd_model, batch).data[0, 0])


def melbert_average(smd_model, store: EmbeddingStore,
                    wsd_corpus: list[WsdExample], lexicon: Lexicon,
                    sense: Sense, rng: RngStream) -> float:
    """Mean token-scorer prediction over the sense's tagged occurrences;
    a single uniform draw from ``rng`` when it never occurs."""
    occurrences = [ex.token for ex in wsd_corpus if ex.gold == sense]
    if not occurrences:
        return float(rng.gen.random())
    scores = [smd_score(smd_model, store, token) for token in occurrences]
    return float(np.mean(scores))


def baseline_predictors(kind: str, train_labels=None, rng: RngStream | None = None):
    """Trivial reference predictors.

    random: independent uniform draw per query.  majority: the constant
    majority class of the training labels, ties going to literal (0).
    """
    if kind == "random":
        if rng is None:
            raise DataError("random baseline requires a seeded rng")
        return lambda query=None: float(rng.gen.random())
    if kind == "majority":
        if not train_labels:
            raise DataError("majority baseline requires nonempty training labels")
        positive = sum(1 for label in train_labels if label == 1)
        value = 1.0 if positive > len(train_labels) - positive else 0.0
        return lambda query=None: value
    raise DataError(f"unknown baseline kind {kind!r}")


# -- checkpoint plumbing ------------------------------------------------------

def model_kind(model) -> str:
    return {
        MpdModel: "mpd",
        WsdBaselineModel: "wsd_baseline",
        EwiserModel: "ewiser",
        SmdBaselineModel: "smd_baseline",
        MelbertModel: "melbert",
        CombinedModel: "combined",
    }[type(model)]


def _mlp_shape(mlp: MlpParams) -> dict:
    return {"layers": mlp.config.layers, "hidden": mlp.config.hidden,
            "dropout": mlp.config.dropout}


def model_config(model) -> dict:
    """Structural description sufficient to rebuild the parameter shapes."""
    kind = model_kind(model)
    if kind == "combined":
        return {"kind": kind, "k": model.k,
                "mpd": model_config(model.mpd), "wsd": model_config(model.wsd)}
    cfg = {"kind": kind, "k": model.k}
    if kind == "melbert":
        cfg["spv"] = _mlp_shape(model.spv_mlp)
        cfg["mip"] = _mlp_shape(model.mip_mlp)
    else:
        cfg.update(_mlp_shape(model.mlp))
    if kind == "wsd_baseline":
        cfg["n_senses"] = len(model.senses)
    if kind == "ewiser":
        cfg["n_definitions"] = model.synset_matrix.shape[1]
    return cfg


def _rebuild(cfg: dict, lexicon: Lexicon | None, store: EmbeddingStore | None):
    kind = cfg["kind"]
    k = cfg["k"]
    if kind == "combined":
        return CombinedModel(mpd=_rebuild(cfg["mpd"], lexicon, store),
                             wsd=_rebuild(cfg["wsd"], lexicon, store))
    if kind == "mpd":
        return build_mpd(k, cfg["layers"], cfg["hidden"], cfg["dropout"])
    if kind == "smd_baseline":
        return build_smd_baseline(k, cfg["layers"], cfg["hidden"], cfg["dropout"])
    if kind == "melbert":
        return build_melbert(k, cfg["spv"]["layers"], cfg["spv"]["hidden"],
                             cfg["mip"]["layers"], cfg["mip"]["hidden"],
                             cfg["spv"]["dropout"])
    if kind == "wsd_baseline":
        if lexicon is None:
            raise DataError("rebuilding a disambiguator requires the lexicon")
        model = build_wsd_baseline(k, cfg["layers"], cfg["hidden"],
                                   cfg["dropout"], lexicon)
        if len(model.senses) != cfg["n_senses"]:
            raise DataError(
                f"lexicon enumerates {len(model.senses)} senses but the "
                f"checkpoint was trained over {cfg['n_senses']}")
        return model
    if kind == "ewiser":
        if lexicon is None or store is None:
            raise DataError("rebuilding this disambiguator requires lexicon and store")
        model = build_ewiser(k, cfg["layers"], cfg["hidden"], cfg["dropout"],
                             lexicon, store)
        if model.synset_matrix.shape[1] != cfg["n_definitions"]:
            raise DataError(
                f"lexicon has {model.synset_matrix.shape[1]} definitions but "
                f"the checkpoint was trained over {cfg['n_definitions']}")
        return model
    raise FormatError(f"unknown model kind {kind!r} in checkpoint")


def model_from_checkpoint(checkpoint, lexicon: Lexicon | None = None,
                          store: EmbeddingStore | None = None):
    """Rebuild a model and load its saved parameter values."""
    cfg = checkpoint.config["model"]
    if cfg["kind"] != checkpoint.model_kind:
        raise FormatError(
            f"checkpoint kind {checkpoint.model_kind!r} does not match its "
            f"config {cfg['kind']!r}")
    model = _rebuild(cfg, lexicon, store)
    params = model.parameters()
    saved = checkpoint.params
    names = sorted(p.name for p in params)
    if names != sorted(saved):
        raise FormatError("checkpoint parameter names do not match the model")
    for p in params:
        arr = saved[p.name]
        if arr.shape != p.value.shape:
            raise DimensionMismatchError(
                f"parameter {p.name}: checkpoint shape {arr.shape} vs model "
                f"shape {p.value.shape}")
        p.value = arr.copy()
    return model
