"""Losses, the two-phase training loop, and hyperparameter search.

The joint objective mixes token-metaphoricity cross-entropy (through the
marginalized combined scorer) with disambiguation cross-entropy, weighted
by ``smd_weight``.  Training runs in two phases: when the dev loss stops
improving, the disambiguator is frozen, the mix weight snaps to 1, the
learning rate is divided, and the best parameters so far are restored; the
second stall restores the best again and stops.  Everything is driven by
named rng streams so a run is bitwise reproducible from its seed.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .corpora import SmdExample, WsdExample
from .embedstore import EmbeddingStore, sent_key, token_key
from .engine import AdamWState, Checkpoint, Param, Tape, adamw_step, backward
from .errors import ConfigError, DataError
from .evaluation import f1_binary, micro_f1
from .lexicon import Lexicon, candidate_senses
from .models import (CombinedModel, MelbertModel, MpdModel, build_ewiser,
                     build_melbert, build_mpd, build_pair_batch,
                     build_smd_baseline, build_wsd_baseline, build_wsd_batch,
                     combined_graph, melbert_graph, model_config, model_kind,
                     smd_graph, wsd_pair_graph)
from .rng import RngStream

__all__ = [
    "TrainConfig", "TrainReport", "SelectionResult",
    "loss_smd", "loss_wsd", "loss_joint",
    "train", "hyperparam_search", "select_model", "DEFAULT_SPACE",
]

_EVAL_CHUNK = 256

TRAIN_KINDS = ("combined", "smd_baseline", "melbert", "wsd_baseline", "ewiser")


@dataclass(frozen=True)
class TrainConfig:
    """One training run's knobs.

    ``wsd_layers``/``wsd_hidden`` size the disambiguator network; they also
    size the lone network of single-network models (the token-metaphoricity
    baseline, and the SPV branch of the two-branch scorer).
    ``mpd_layers``/``mpd_hidden`` size the sense scorer (MIP branch for the
    two-branch scorer).  ``smd_weight`` mixes the two losses; weight 1
    trains on token metaphoricity alone, weight 0 on disambiguation alone.
    ``max_steps`` is a hard budget; None trains to the second stall.
    """

    smd_weight: float = 0.4
    dropout: float = 0.2
    wsd_layers: int = 3
    mpd_layers: int = 4
    wsd_hidden: int = 500
    mpd_hidden: int = 300
    lr: float = 1e-4
    lr_divisor: float = 1.0
    batch_size: int = 128
    check_interval: int = 50
    patience: int = 5
    seed: int = 0
    max_steps: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.smd_weight <= 1.0:
            raise ConfigError(f"smd_weight {self.smd_weight} outside [0, 1]")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout {self.dropout} outside [0, 1)")
        if self.lr_divisor < 1.0:
            raise ConfigError(f"lr_divisor {self.lr_divisor} must be >= 1")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        for name in ("wsd_layers", "mpd_layers", "batch_size",
                     "check_interval", "patience"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError("max_steps must be positive when set")


@dataclass
class TrainReport:
    kind: str
    config: TrainConfig
    dev_losses: list[tuple[int, float]] = field(default_factory=list)
    phase_transition_step: int | None = None
    best_steps: dict[str, int] = field(default_factory=dict)
    best_dev_losses: dict[str, float] = field(default_factory=dict)
    final_step: int = 0
    budget_exhausted: bool = False
    skipped_train: dict[str, int] = field(default_factory=dict)
    skipped_dev: dict[str, int] = field(default_factory=dict)
    smd_dev_f1: float | None = None
    wsd_dev_micro_f1: float | None = None
    seed: int = 0

    def to_json(self) -> dict:
        out = asdict(self)
        out["config"] = asdict(self.config)
        out["dev_losses"] = [[s, l] for s, l in self.dev_losses]
        return out


# -- loss forwards -----------------------------------------------------------

def _count_skips(counter: dict, skipped: list) -> None:
    for _, reason in skipped:
        counter[reason] = counter.get(reason, 0) + 1


def _smd_forward(model, store, lexicon, examples, *, train_mode, rng,
                 reduction):
    """Token-metaphoricity loss graph for any of the three scorer shapes.

    Returns (tape, loss node, n kept, skipped) or (None, None, 0, skipped)
    when no example in the chunk has the embeddings it needs.
    """
    if isinstance(model, CombinedModel):
        batch, skipped = build_pair_batch(store, lexicon, model.wsd,
                                          [e.token for e in examples])
        if batch is None:
            return None, None, 0, skipped
        dropped = {pos for pos, _ in skipped}
        labels = [e.label for pos, e in enumerate(examples) if pos not in dropped]
        tape = Tape(rng=rng, train_mode=train_mode)
        probs = combined_graph(tape, model.mpd, model.wsd, batch)
    else:
        kept, skipped, rows, sents, types = [], [], [], [], []
        needs_context = isinstance(model, MelbertModel)
        for pos, example in enumerate(examples):
            token = example.token
            if not store.has("TOKEN", token_key(token)):
                skipped.append((pos, "missing TOKEN embedding"))
                continue
            if needs_context:
                if not store.has("SENT", sent_key(token)):
                    skipped.append((pos, "missing SENT embedding"))
                    continue
                if not store.has("TYPE", token.wordform):
                    skipped.append((pos, "missing TYPE embedding"))
                    continue
                sents.append(store.get("SENT", sent_key(token)))
                types.append(store.get("TYPE", token.wordform))
            rows.append(store.get("TOKEN", token_key(token)))
            kept.append(example)
        if not kept:
            return None, None, 0, skipped
        labels = [e.label for e in kept]
        tape = Tape(rng=rng, train_mode=train_mode)
        token_matrix = np.stack(rows)
        if needs_context:
            probs = melbert_graph(tape, model, token_matrix,
                                  np.stack(sents), np.stack(types))
        else:
            probs = smd_graph(tape, model, token_matrix)
    loss = tape.bce_mean(probs, labels, reduction=reduction)
    return tape, loss, len(labels), skipped


def _wsd_forward(wsd_model, store, lexicon, examples, *, train_mode, rng,
                 reduction):
    """Disambiguation loss graph: mean negative log gold probability."""
    batch, skipped = build_wsd_batch(store, lexicon, wsd_model, examples)
    if batch is None:
        return None, None, 0, skipped
    tape = Tape(rng=rng, train_mode=train_mode)
    q = wsd_pair_graph(tape, wsd_model, batch.token_matrix,
                       batch.pair_example, batch.pair_cols, batch.seg_matrix)
    gold = tape.gather(q, batch.gold_pair_rows,
                       np.zeros_like(batch.gold_pair_rows))
    loss = tape.cce_mean(gold, np.zeros(len(batch), dtype=np.intp),
                         reduction=reduction)
    return tape, loss, len(batch), skipped


def loss_smd(mpd: MpdModel, wsd_model, store: EmbeddingStore,
             lexicon: Lexicon, examples: list[SmdExample], *,
             train_mode: bool = False, rng=None):
    """Marginalized-scorer cross-entropy on a batch; returns
    (loss, gradients by Param, skipped)."""
    if not examples:
        raise DataError("empty SMD batch")
    model = CombinedModel(mpd=mpd, wsd=wsd_model)
    tape, loss, kept, skipped = _smd_forward(
        model, store, lexicon, examples, train_mode=train_mode, rng=rng,
        reduction="mean")
    if tape is None:
        raise DataError("no scoreable example in SMD batch")
    grads = backward(tape)
    return float(loss.data[0, 0]), grads, skipped


def loss_wsd(wsd_model, store: EmbeddingStore, lexicon: Lexicon,
             examples: list[WsdExample], *, train_mode: bool = False,
             rng=None):
    """Disambiguation cross-entropy on a batch; returns
    (loss, gradients by Param, skipped)."""
    if not examples:
        raise DataError("empty WSD batch")
    tape, loss, kept, skipped = _wsd_forward(
        wsd_model, store, lexicon, examples, train_mode=train_mode, rng=rng,
        reduction="mean")
    if tape is None:
        raise DataError("no scoreable example in WSD batch")
    grads = backward(tape)
    return float(loss.data[0, 0]), grads, skipped


def loss_joint(smd_weight: float, l_smd: float, l_wsd: float) -> float:
    if not 0.0 <= smd_weight <= 1.0:
        raise ConfigError(f"smd_weight {smd_weight} outside [0, 1]")
    return smd_weight * l_smd + (1.0 - smd_weight) * l_wsd


def _mix_grads(weight_a: float, grads_a: dict, weight_b: float,
               grads_b: dict) -> dict:
    mixed: dict[Param, np.ndarray] = {}
    for p, g in grads_a.items():
        mixed[p] = weight_a * g
    for p, g in grads_b.items():
        if p in mixed:
            mixed[p] = mixed[p] + weight_b * g
        else:
            mixed[p] = weight_b * g
    return mixed


# -- data cycling -------------------------------------------------------------

class _Cycler:
    """Independent shuffled epochs over one example list."""

    def __init__(self, examples, stream: RngStream):
        self.examples = list(examples)
        self.stream = stream
        self.order = np.empty(0, dtype=np.intp)
        self.pos = 0

    def next_batch(self, n: int) -> list:
        out = []
        while len(out) < n:
            if self.pos >= len(self.order):
                self.order = self.stream.gen.permutation(len(self.examples))
                self.pos = 0
            out.append(self.examples[self.order[self.pos]])
            self.pos += 1
        return out


# -- the trainer ----------------------------------------------------------------

def _build_model(config: TrainConfig, kind: str, wsd_kind: str,
                 store: EmbeddingStore, lexicon: Lexicon, init: RngStream):
    k = store.dimension
    if kind == "combined":
        mpd = build_mpd(k, config.mpd_layers, config.mpd_hidden,
                        config.dropout, init)
        if wsd_kind == "baseline":
            wsd = build_wsd_baseline(k, config.wsd_layers, config.wsd_hidden,
                                     config.dropout, lexicon, init)
        elif wsd_kind == "ewiser":
            wsd = build_ewiser(k, config.wsd_layers, config.wsd_hidden,
                               config.dropout, lexicon, store, init)
        else:
            raise ConfigError(f"unknown wsd_kind {wsd_kind!r}")
        return CombinedModel(mpd=mpd, wsd=wsd)
    if kind == "smd_baseline":
        return build_smd_baseline(k, config.wsd_layers, config.wsd_hidden,
                                  config.dropout, init)
    if kind == "melbert":
        return build_melbert(k, config.wsd_layers, config.wsd_hidden,
                             config.mpd_layers, config.mpd_hidden,
                             config.dropout, init)
    if kind == "wsd_baseline":
        return build_wsd_baseline(k, config.wsd_layers, config.wsd_hidden,
                                  config.dropout, lexicon, init)
    if kind == "ewiser":
        return build_ewiser(k, config.wsd_layers, config.wsd_hidden,
                            config.dropout, lexicon, store, init)
    raise ConfigError(f"unknown training kind {kind!r}")


def _chunks(seq, size):
    for i in range(0, len(seq), size):
        yield seq[i:i + size]


def _dev_loss(model, store, lexicon, smd_dev, wsd_dev, smd_weight,
              skip_counter) -> float:
    """Deterministic full-dev loss: eval mode, fixed chunking, no rng."""
    total = 0.0
    if smd_weight > 0.0:
        loss_sum, count = 0.0, 0
        for chunk in _chunks(smd_dev, _EVAL_CHUNK):
            tape, loss, kept, skipped = _smd_forward(
                model, store, lexicon, chunk, train_mode=False, rng=None,
                reduction="sum")
            _count_skips(skip_counter, skipped)
            if tape is not None:
                loss_sum += float(loss.data[0, 0])
                count += kept
        if count == 0:
            raise DataError("no scoreable example in the SMD dev set")
        total += smd_weight * (loss_sum / count)
    if smd_weight < 1.0:
        wsd_model = model.wsd if isinstance(model, CombinedModel) else model
        loss_sum, count = 0.0, 0
        for chunk in _chunks(wsd_dev, _EVAL_CHUNK):
            tape, loss, kept, skipped = _wsd_forward(
                wsd_model, store, lexicon, chunk, train_mode=False, rng=None,
                reduction="sum")
            _count_skips(skip_counter, skipped)
            if tape is not None:
                loss_sum += float(loss.data[0, 0])
                count += kept
        if count == 0:
            raise DataError("no scoreable example in the WSD dev set")
        total += (1.0 - smd_weight) * (loss_sum / count)
    return total


def _snapshot(model, opt: AdamWState):
    return ({p.name: p.value.copy() for p in model.parameters()}, opt.clone())


def _restore(model, snapshot) -> AdamWState:
    values, opt = snapshot
    for p in model.parameters():
        p.value = values[p.name].copy()
    return opt.clone()


def _uses_smd(kind: str) -> bool:
    return kind in ("combined", "smd_baseline", "melbert")


def _uses_wsd(kind: str) -> bool:
    return kind in ("combined", "wsd_baseline", "ewiser")


def _smd_scores_eval(model, store, lexicon, examples):
    """Eval-mode metaphoricity scores with golds, skipping unscoreable rows."""
    scores, golds = [], []
    for chunk in _chunks(examples, _EVAL_CHUNK):
        if isinstance(model, CombinedModel):
            batch, skipped = build_pair_batch(store, lexicon, model.wsd,
                                              [e.token for e in chunk])
            if batch is None:
                continue
            dropped = {pos for pos, _ in skipped}
            kept = [e for pos, e in enumerate(chunk) if pos not in dropped]
            tape = Tape()
            probs = combined_graph(tape, model.mpd, model.wsd, batch)
        else:
            kept, rows, sents, types = [], [], [], []
            needs_context = isinstance(model, MelbertModel)
            for example in chunk:
                token = example.token
                if not store.has("TOKEN", token_key(token)):
                    continue
                if needs_context:
                    if not (store.has("SENT", sent_key(token))
                            and store.has("TYPE", token.wordform)):
                        continue
                    sents.append(store.get("SENT", sent_key(token)))
                    types.append(store.get("TYPE", token.wordform))
                rows.append(store.get("TOKEN", token_key(token)))
                kept.append(example)
            if not kept:
                continue
            tape = Tape()
            if needs_context:
                probs = melbert_graph(tape, model, np.stack(rows),
                                      np.stack(sents), np.stack(types))
            else:
                probs = smd_graph(tape, model, np.stack(rows))
        scores.extend(float(v) for v in probs.data[:, 0])
        golds.extend(e.label for e in kept)
    return scores, golds


def _wsd_dev_micro_f1(wsd_model, store, lexicon, examples):
    preds, golds = [], []
    for example in examples:
        if not store.has("TOKEN", token_key(example.token)):
            continue
        cands = candidate_senses(lexicon, example.token.wordform)
        batch, _ = build_wsd_batch(store, lexicon, wsd_model, [example])
        if batch is None:
            continue
        tape = Tape()
        q = wsd_pair_graph(tape, wsd_model, batch.token_matrix,
                           batch.pair_example, batch.pair_cols,
                           batch.seg_matrix)
        preds.append(cands[int(np.argmax(q.data[:, 0]))])
        golds.append(example.gold)
    if not preds:
        return None
    return micro_f1(preds, golds)


def train(config: TrainConfig, smd_splits, wsd_splits, store: EmbeddingStore,
          lexicon: Lexicon, kind: str = "combined",
          wsd_kind: str = "baseline"):
    """Run the two-phase protocol; returns (Checkpoint, TrainReport).

    ``smd_splits``/``wsd_splits`` are (train, dev, test) example lists; the
    test lists are untouched here.  ``kind`` picks the architecture;
    ``wsd_kind`` picks the disambiguator inside the combined model.
    """
    if kind not in TRAIN_KINDS:
        raise ConfigError(f"unknown training kind {kind!r}")
    smd_train, smd_dev = list(smd_splits[0]), list(smd_splits[1])
    wsd_train, wsd_dev = list(wsd_splits[0]), list(wsd_splits[1])
    if _uses_smd(kind) and (not smd_train or not smd_dev):
        raise DataError("SMD train and dev sets must be nonempty for this kind")
    if _uses_wsd(kind) and (not wsd_train or not wsd_dev):
        raise DataError("WSD train and dev sets must be nonempty for this kind")

    root = RngStream(config.seed)
    model = _build_model(config, kind, wsd_kind, store, lexicon,
                         root.split("init"))
    dropout_gen = root.split("dropout").gen
    smd_cycler = _Cycler(smd_train, root.split("shuffle-smd"))
    wsd_cycler = _Cycler(wsd_train, root.split("shuffle-wsd"))

    report = TrainReport(kind=kind, config=config, seed=config.seed)
    opt = AdamWState(lr=config.lr)
    trainable = model.parameters()
    combined = isinstance(model, CombinedModel)
    smd_weight = config.smd_weight if combined else (1.0 if _uses_smd(kind) else 0.0)

    phase = 1
    best_loss = np.inf
    best_snapshot = _snapshot(model, opt)
    best_step = 0
    stalls = 0
    step = 0

    def run_check() -> float:
        loss = _dev_loss(model, store, lexicon, smd_dev, wsd_dev,
                         smd_weight, report.skipped_dev)
        report.dev_losses.append((step, loss))
        return loss

    while True:
        if config.max_steps is not None and step >= config.max_steps:
            report.budget_exhausted = True
            break
        step += 1

        grads: dict[Param, np.ndarray] = {}
        if smd_weight > 0.0:
            batch = smd_cycler.next_batch(config.batch_size)
            tape, loss, kept, skipped = _smd_forward(
                model, store, lexicon, batch, train_mode=True,
                rng=dropout_gen, reduction="mean")
            _count_skips(report.skipped_train, skipped)
            if tape is not None:
                grads = _mix_grads(smd_weight, backward(tape), 0.0, {})
        if smd_weight < 1.0:
            batch = wsd_cycler.next_batch(config.batch_size)
            wsd_model = model.wsd if combined else model
            tape, loss, kept, skipped = _wsd_forward(
                wsd_model, store, lexicon, batch, train_mode=True,
                rng=dropout_gen, reduction="mean")
            _count_skips(report.skipped_train, skipped)
            if tape is not None:
                grads = _mix_grads(1.0, grads, 1.0 - smd_weight, backward(tape))
        adamw_step(trainable, grads, opt)

        if step % config.check_interval != 0:
            continue
        dev = run_check()
        if dev < best_loss - 1e-9:
            best_loss = dev
            best_snapshot = _snapshot(model, opt)
            best_step = step
            stalls = 0
            continue
        stalls += 1
        if stalls < config.patience:
            continue

        phase_name = f"phase{phase}"
        report.best_steps[phase_name] = best_step
        report.best_dev_losses[phase_name] = float(best_loss)
        opt = _restore(model, best_snapshot)
        if phase == 2:
            break
        # first stall: freeze the disambiguator, finetune the sense scorer
        report.phase_transition_step = step
        phase = 2
        if combined:
            trainable = model.mpd.parameters()
            smd_weight = 1.0
        opt.lr = opt.lr / config.lr_divisor
        best_loss = np.inf
        best_snapshot = _snapshot(model, opt)
        best_step = step
        stalls = 0

    if report.budget_exhausted:
        phase_name = f"phase{phase}"
        if np.isfinite(best_loss):
            report.best_steps[phase_name] = best_step
            report.best_dev_losses[phase_name] = float(best_loss)
            opt = _restore(model, best_snapshot)
    report.final_step = step

    if _uses_smd(kind):
        scores, golds = _smd_scores_eval(model, store, lexicon, smd_dev)
        if scores:
            report.smd_dev_f1 = f1_binary(scores, golds)
    if _uses_wsd(kind):
        wsd_model = model.wsd if combined else model
        report.wsd_dev_micro_f1 = _wsd_dev_micro_f1(wsd_model, store, lexicon,
                                                    wsd_dev)

    checkpoint = Checkpoint(
        model_kind=model_kind(model),
        config={"model": model_config(model), "train": asdict(config),
                "kind": kind, "wsd_kind": wsd_kind if combined else None},
        step=step,
        phase=phase,
        params={p.name: p.value.copy() for p in model.parameters()},
        opt=opt.clone(),
        rng_states={"root_seed": config.seed},
    )
    return checkpoint, report


# -- hyperparameter search ------------------------------------------------------

DEFAULT_SPACE = {
    "layers": (1, 2, 3, 4),
    "hidden": (100, 300, 500),
    "dropout": (0.1, 0.2, 0.3, 0.4),
    "lr": (0.005, 0.001, 0.0005, 0.0001),
    "lr_divisor": (1, 10),
    "smd_weight": (0.0, 0.2, 0.4, 0.6, 0.8, 1.0),
}


def sample_configs(space: dict | None, per_alpha_samples: int, seed: int,
                   max_steps: int | None = None,
                   check_interval: int | None = None) -> list[TrainConfig]:
    """Deterministic draw of the search's run configurations.

    Layer and hidden sizes are drawn independently for the two networks;
    dropout, learning rate, and divisor are drawn once per run.
    ``max_steps`` and ``check_interval`` cap every run (smoke budgets).
    """
    space = dict(DEFAULT_SPACE if space is None else space)
    for key, options in space.items():
        if not options:
            raise ConfigError(f"empty search space for {key!r}")
    if per_alpha_samples < 1:
        raise ConfigError("per_alpha_samples must be positive")
    stream = RngStream(seed).split("search")
    gen = stream.gen

    def draw(key):
        options = space[key]
        return options[int(gen.integers(len(options)))]

    extra = {} if check_interval is None else {"check_interval": check_interval}
    configs = []
    for weight in space["smd_weight"]:
        for _ in range(per_alpha_samples):
            run_seed = int(gen.integers(2 ** 31))
            configs.append(TrainConfig(
                smd_weight=weight,
                dropout=draw("dropout"),
                wsd_layers=draw("layers"),
                mpd_layers=draw("layers"),
                wsd_hidden=draw("hidden"),
                mpd_hidden=draw("hidden"),
                lr=draw("lr"),
                lr_divisor=float(draw("lr_divisor")),
                seed=run_seed,
                max_steps=max_steps,
                **extra,
            ))
    return configs


def hyperparam_search(smd_splits, wsd_splits, store: EmbeddingStore,
                      lexicon: Lexicon, *, space: dict | None = None,
                      per_alpha_samples: int = 20, seed: int = 0,
                      kind: str = "combined", wsd_kind: str = "baseline",
                      max_steps: int | None = None,
                      check_interval: int | None = None,
                      limit_runs: int | None = None):
    """Train one model per sampled configuration; returns
    [(config, TrainReport)] in sample order."""
    configs = sample_configs(space, per_alpha_samples, seed, max_steps,
                             check_interval)
    if limit_runs is not None:
        configs = configs[:limit_runs]
    results = []
    for config in configs:
        _, report = train(config, smd_splits, wsd_splits, store, lexicon,
                          kind=kind, wsd_kind=wsd_kind)
        results.append((config, report))
    return results


@dataclass(frozen=True)
class SelectionResult:
    index: int
    config: TrainConfig
    report: TrainReport
    tie: bool


_CRITERIA = ("smd_dev_f1", "wsd_dev_micro_f1", "mean_smd_wsd")


def _criterion_value(report: TrainReport, criterion: str) -> float:
    if criterion == "smd_dev_f1":
        value = report.smd_dev_f1
    elif criterion == "wsd_dev_micro_f1":
        value = report.wsd_dev_micro_f1
    elif criterion == "mean_smd_wsd":
        if report.smd_dev_f1 is None or report.wsd_dev_micro_f1 is None:
            value = None
        else:
            value = (report.smd_dev_f1 + report.wsd_dev_micro_f1) / 2.0
    else:
        raise ConfigError(f"unknown criterion {criterion!r}; "
                          f"expected one of {_CRITERIA}")
    if value is None:
        raise DataError(f"run is missing the metric for criterion {criterion!r}")
    return value


def select_model(runs, criterion: str = "mean_smd_wsd") -> SelectionResult:
    """Argmax over runs; exact ties go to the earliest index, flagged."""
    if not runs:
        raise DataError("select_model needs at least one run")
    values = [_criterion_value(report, criterion) for _, report in runs]
    best = int(np.argmax(values))
    tie = values.count(values[best]) > 1
    config, report = runs[best]
    return SelectionResult(index=best, config=config, report=report, tie=tie)
