"""Command-line entry point.

One executable with subcommands: ``ingest`` (validate, filter, and split
corpora), ``train``, ``search``, ``evaluate`` (mpd, smd, wsd, consistency,
kappa), ``predict`` (mpd, smd, wsd, melbert-average), and ``report``
(significance comparison of two prediction files).

Every run writes a manifest next to its primary output recording the
resolved configuration, sha256 digests of the inputs, the seed, and the
output paths.  Config precedence is flag > config file > built-in default.
Exit codes: 0 success, 1 usage error, 2 data/format error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict, fields

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from . import __version__
from .corpora import (filter_smd, filter_trivial_wsd, load_smd_corpus,
                      load_wsd_corpus, split, write_corpus)
from .embedstore import open_store, token_key
from .engine import load_checkpoint, save_checkpoint
from .errors import (ConfigError, DataError, MetalexError, UsageError)
from .evaluation import (ScoredSense, cohen_kappa, consistency_analysis,
                         f1_binary, load_scored_senses, micro_f1,
                         permutation_test, relative_roc_auc,
                         write_scored_senses)
from .lexicon import Sense, candidate_senses, load_lexicon
from .models import (CombinedModel, MelbertModel, MpdModel, SmdBaselineModel,
                     combined_smd_score, melbert_average,
                     model_from_checkpoint, mpd_scores_batch, smd_score,
                     wsd_scores)
from .rng import RngStream
from .training import (DEFAULT_SPACE, TrainConfig, hyperparam_search,
                       select_model, train)

_GRID_HELP = """default search grid (a run draws layer and hidden sizes
independently for the two networks; one dropout/lr/divisor draw per run;
every smd_weight value is trained per-alpha-samples times):
  layers:      1, 2, 3, 4
  hidden:      100, 300, 500
  dropout:     0.1, 0.2, 0.3, 0.4
  lr:          0.005, 0.001, 0.0005, 0.0001
  lr_divisor:  1, 10
  smd_weight:  0.0, 0.2, 0.4, 0.6, 0.8, 1.0"""


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage problems; the contract says 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(subcommand: str, primary_output: str, *, config: dict,
                    inputs: list[str], seed: int | None,
                    outputs: list[str]) -> None:
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "input_digests": {str(p): _sha256(p) for p in inputs},
        "seed": seed,
        "tool_version": __version__,
        "outputs": [str(p) for p in outputs],
    }
    _write_json(manifest, str(primary_output) + ".manifest.json")


def _read_jsonl(path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{line_no}: invalid JSON: {exc.msg}")
    if not rows:
        raise DataError(f"{path}: empty file")
    return rows


def _write_jsonl(rows, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


# -- config resolution ---------------------------------------------------------

_CONFIG_KEYS = tuple(f.name for f in fields(TrainConfig))


def _resolve_train_config(args) -> TrainConfig:
    merged: dict = {}
    if args.config:
        with open(args.config, "rb") as fh:
            try:
                file_cfg = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise DataError(f"{args.config}: invalid TOML: {exc}")
        unknown = set(file_cfg) - set(_CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}; "
                              f"valid keys: {list(_CONFIG_KEYS)}")
        merged.update(file_cfg)
    for key in _CONFIG_KEYS:
        if key in ("seed",):
            continue
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    merged["seed"] = args.seed
    return TrainConfig(**merged)


def _add_train_config_flags(parser) -> None:
    parser.add_argument("--config", help="TOML file of training keys")
    parser.add_argument("--smd-weight", dest="smd_weight", type=float)
    parser.add_argument("--dropout", type=float)
    parser.add_argument("--wsd-layers", dest="wsd_layers", type=int)
    parser.add_argument("--mpd-layers", dest="mpd_layers", type=int)
    parser.add_argument("--wsd-hidden", dest="wsd_hidden", type=int)
    parser.add_argument("--mpd-hidden", dest="mpd_hidden", type=int)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--lr-divisor", dest="lr_divisor", type=float)
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--check-interval", dest="check_interval", type=int)
    parser.add_argument("--patience", type=int)
    parser.add_argument("--max-steps", dest="max_steps", type=int)


def _load_splits(args, prefix: str, lexicon=None):
    """(train, dev, []) from --<prefix>-train/--<prefix>-dev flags."""
    train_path = getattr(args, f"{prefix}_train")
    dev_path = getattr(args, f"{prefix}_dev")
    if train_path is None or dev_path is None:
        return ([], [], []), []
    if prefix == "smd":
        loader = load_smd_corpus
        train_set = loader(train_path)
        dev_set = loader(dev_path)
    else:
        train_set = load_wsd_corpus(train_path, lexicon)
        dev_set = load_wsd_corpus(dev_path, lexicon)
    return (train_set, dev_set, []), [train_path, dev_path]


# -- subcommands -----------------------------------------------------------------

def _cmd_ingest(args) -> int:
    lexicon = load_lexicon(args.lexicon)
    ratios = tuple(float(r) for r in args.ratios.split(","))
    if len(ratios) != 3:
        raise UsageError("--ratios takes three comma-separated numbers")
    inputs = [args.lexicon]
    outputs = []
    counts: dict = {}
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)

    if args.smd:
        raw = load_smd_corpus(args.smd)
        kept = filter_smd(raw, lexicon, conventional_only=args.conventional_only,
                          novelty_threshold=args.novelty_threshold)
        parts = split(kept, ratios, seed=args.seed)
        counts["smd"] = {"loaded": len(raw), "kept": len(kept),
                         "train": len(parts[0]), "dev": len(parts[1]),
                         "test": len(parts[2])}
        for name, part in zip(("train", "dev", "test"), parts):
            path = os.path.join(out_dir, f"smd_{name}.jsonl")
            write_corpus(part, path)
            outputs.append(path)
        inputs.append(args.smd)
    if args.wsd:
        raw = load_wsd_corpus(args.wsd, lexicon)
        kept = filter_trivial_wsd(raw, lexicon)
        parts = split(kept, ratios, seed=args.seed)
        counts["wsd"] = {"loaded": len(raw), "kept": len(kept),
                         "train": len(parts[0]), "dev": len(parts[1]),
                         "test": len(parts[2])}
        for name, part in zip(("train", "dev", "test"), parts):
            path = os.path.join(out_dir, f"wsd_{name}.jsonl")
            write_corpus(part, path)
            outputs.append(path)
        inputs.append(args.wsd)
    if not outputs:
        raise UsageError("ingest needs at least one of --smd / --wsd")

    summary_path = os.path.join(out_dir, "ingest.json")
    _write_json({"counts": counts, "ratios": list(ratios)}, summary_path)
    outputs.append(summary_path)
    _write_manifest("ingest", summary_path,
                    config={"ratios": list(ratios),
                            "conventional_only": args.conventional_only,
                            "novelty_threshold": args.novelty_threshold},
                    inputs=inputs, seed=args.seed, outputs=outputs)
    print(json.dumps(counts, sort_keys=True))
    return 0


def _cmd_train(args) -> int:
    config = _resolve_train_config(args)
    lexicon = load_lexicon(args.lexicon)
    store = open_store(args.store)
    smd_splits, smd_inputs = _load_splits(args, "smd")
    wsd_splits, wsd_inputs = _load_splits(args, "wsd", lexicon)
    checkpoint, report = train(config, smd_splits, wsd_splits, store, lexicon,
                               kind=args.kind, wsd_kind=args.wsd_kind)
    save_checkpoint(checkpoint, args.out)
    report_path = str(args.out) + ".report.json"
    _write_json(report.to_json(), report_path)
    _write_manifest("train", args.out,
                    config={"train": asdict(config), "kind": args.kind,
                            "wsd_kind": args.wsd_kind},
                    inputs=[args.lexicon, args.store] + smd_inputs + wsd_inputs,
                    seed=args.seed, outputs=[args.out, report_path])
    summary = {"final_step": report.final_step,
               "phase_transition_step": report.phase_transition_step,
               "smd_dev_f1": report.smd_dev_f1,
               "wsd_dev_micro_f1": report.wsd_dev_micro_f1}
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_search(args) -> int:
    lexicon = load_lexicon(args.lexicon)
    store = open_store(args.store)
    smd_splits, smd_inputs = _load_splits(args, "smd")
    wsd_splits, wsd_inputs = _load_splits(args, "wsd", lexicon)
    space = None
    if args.space:
        with open(args.space, "rb") as fh:
            space = {k: tuple(v) for k, v in tomllib.load(fh).items()}
    runs = hyperparam_search(
        smd_splits, wsd_splits, store, lexicon, space=space,
        per_alpha_samples=args.per_alpha_samples, seed=args.seed,
        kind=args.kind, wsd_kind=args.wsd_kind, max_steps=args.max_steps,
        check_interval=args.check_interval, limit_runs=args.limit_runs)
    selection = select_model(runs, criterion=args.criterion)
    payload = {
        "runs": [{"config": asdict(cfg), "report": rep.to_json()}
                 for cfg, rep in runs],
        "selection": {"index": selection.index, "tie": selection.tie,
                      "criterion": args.criterion},
    }
    _write_json(payload, args.out)
    _write_manifest("search", args.out,
                    config={"space": {k: list(v) for k, v in
                                      (space or DEFAULT_SPACE).items()},
                            "per_alpha_samples": args.per_alpha_samples,
                            "kind": args.kind, "wsd_kind": args.wsd_kind,
                            "criterion": args.criterion,
                            "max_steps": args.max_steps,
                            "check_interval": args.check_interval,
                            "limit_runs": args.limit_runs},
                    inputs=[args.lexicon, args.store] + smd_inputs + wsd_inputs,
                    seed=args.seed, outputs=[args.out])
    print(json.dumps(payload["selection"], sort_keys=True))
    return 0


def _load_model(args, need_lexicon=False, need_store=True):
    checkpoint = load_checkpoint(args.checkpoint)
    lexicon = load_lexicon(args.lexicon) if getattr(args, "lexicon", None) else None
    store = open_store(args.store) if getattr(args, "store", None) else None
    if need_lexicon and lexicon is None:
        raise UsageError("this command requires --lexicon")
    if need_store and store is None:
        raise UsageError("this command requires --store")
    model = model_from_checkpoint(checkpoint, lexicon=lexicon, store=store)
    return model, checkpoint, lexicon, store


def _cmd_evaluate(args) -> int:
    task = args.task
    if task == "mpd":
        items = load_scored_senses(args.pred)
        lexicon = load_lexicon(args.lexicon) if args.lexicon else None
        mean_auc, per_wordform, excluded = relative_roc_auc(items, lexicon)
        scores = [i.score for i in items]
        golds = [i.gold for i in items]
        payload = {
            "metric": "mpd",
            "roc_auc_mean": mean_auc,
            "roc_auc_per_wordform": per_wordform,
            "excluded_wordforms": [list(e) for e in excluded],
            "f1": f1_binary(scores, golds, threshold=args.threshold),
            "threshold": args.threshold,
            "items": len(items),
            "included_wordforms": len(per_wordform),
        }
        inputs = [args.pred] + ([args.lexicon] if args.lexicon else [])
    elif task == "smd":
        rows = _read_jsonl(args.pred)
        scores = [float(r["score"]) for r in rows]
        golds = [int(r["gold"]) for r in rows]
        payload = {
            "metric": "smd",
            "f1": f1_binary(scores, golds, threshold=args.threshold),
            "threshold": args.threshold,
            "items": len(rows),
        }
        inputs = [args.pred]
    elif task == "wsd":
        rows = _read_jsonl(args.pred)
        preds = [str(r["pred"]) for r in rows]
        golds = [str(r["gold"]) for r in rows]
        payload = {
            "metric": "wsd",
            "micro_f1": micro_f1(preds, golds),
            "items": len(rows),
        }
        inputs = [args.pred]
    elif task == "consistency":
        model, checkpoint, lexicon, store = _load_model(
            args, need_lexicon=True, need_store=True)
        corpus = load_wsd_corpus(args.corpus, lexicon)
        usable, dropped = [], 0
        for example in corpus:
            if store.has("TOKEN", token_key(example.token)):
                usable.append(example)
            else:
                dropped += 1
        scorer = _token_scorer(model, store, lexicon)
        rate, detail = consistency_analysis(
            scorer, usable, threshold=args.threshold,
            min_count=args.min_count)
        payload = {
            "metric": "consistency",
            "inconsistency_rate": rate,
            "qualifying_senses": len(detail),
            "min_count": args.min_count,
            "threshold": args.threshold,
            "dropped_without_embeddings": dropped,
            "senses": detail,
        }
        inputs = [args.checkpoint, args.corpus, args.lexicon, args.store]
    elif task == "kappa":
        labels_a = [r["label"] for r in _read_jsonl(args.a)]
        labels_b = [r["label"] for r in _read_jsonl(args.b)]
        payload = {
            "metric": "kappa",
            "kappa": cohen_kappa(labels_a, labels_b),
            "items": len(labels_a),
        }
        inputs = [args.a, args.b]
    else:
        raise UsageError(f"unknown evaluate task {task!r}")
    _write_json(payload, args.out)
    _write_manifest(f"evaluate {task}", args.out, config=_task_config(args),
                    inputs=inputs, seed=None, outputs=[args.out])
    print(json.dumps({k: v for k, v in payload.items()
                      if not isinstance(v, (list, dict))}, sort_keys=True))
    return 0


def _task_config(args) -> dict:
    skip = {"func", "command", "task", "out", "pred", "a", "b", "checkpoint",
            "corpus", "lexicon", "store", "senses", "wsd_corpus"}
    return {k: v for k, v in vars(args).items()
            if k not in skip and not callable(v)}


def _token_scorer(model, store, lexicon):
    if isinstance(model, CombinedModel):
        return lambda token: combined_smd_score(model.mpd, model.wsd, store,
                                                lexicon, token)
    if isinstance(model, (SmdBaselineModel, MelbertModel)):
        return lambda token: smd_score(model, store, token)
    raise DataError(f"checkpoint kind cannot score tokens: "
                    f"{type(model).__name__}")


def _cmd_predict(args) -> int:
    task = args.task
    if task == "mpd":
        model, checkpoint, lexicon, store = _load_model(args, need_store=True)
        if isinstance(model, CombinedModel):
            sense_scorer = model.mpd
        elif isinstance(model, MpdModel):
            sense_scorer = model
        else:
            raise DataError("predict mpd needs a checkpoint holding the "
                            "sense scorer (kind mpd or combined)")
        rows = _read_jsonl(args.senses)
        senses, golds = [], []
        for row in rows:
            senses.append(Sense(str(row["wordform"]).lower(),
                                str(row["definition"])))
            gold = int(row.get("gold", 0))
            if gold not in (0, 1):
                raise DataError(f"gold label must be 0 or 1, got {gold}")
            golds.append(gold)
        scores = mpd_scores_batch(sense_scorer, store, senses)
        items = [ScoredSense(sense=s, score=float(v), gold=g)
                 for s, v, g in zip(senses, scores, golds)]
        write_scored_senses(items, args.out)
        inputs = [args.checkpoint, args.store, args.senses]
        summary = {"scored": len(items)}
    elif task == "smd":
        model, checkpoint, lexicon, store = _load_model(
            args, need_lexicon=True, need_store=True)
        corpus = load_smd_corpus(args.corpus)
        scorer = _token_scorer(model, store, lexicon)
        rows, skipped = [], []
        for example in corpus:
            key = token_key(example.token)
            try:
                score = scorer(example.token)
            except (DataError, MetalexError) as exc:
                skipped.append({"key": key, "reason": str(exc)})
                continue
            rows.append({"key": key, "wordform": example.token.wordform,
                         "score": score, "gold": example.label})
        if not rows:
            raise DataError("no token in the corpus could be scored")
        _write_jsonl(rows, args.out)
        if skipped:
            _write_jsonl(skipped, str(args.out) + ".skipped.jsonl")
        inputs = [args.checkpoint, args.store, args.lexicon, args.corpus]
        summary = {"scored": len(rows), "skipped": len(skipped)}
    elif task == "wsd":
        model, checkpoint, lexicon, store = _load_model(
            args, need_lexicon=True, need_store=True)
        wsd_model = model.wsd if isinstance(model, CombinedModel) else model
        corpus = load_wsd_corpus(args.corpus, lexicon)
        rows, skipped = [], []
        for example in corpus:
            key = token_key(example.token)
            if not store.has("TOKEN", key):
                skipped.append({"key": key, "reason": "missing TOKEN embedding"})
                continue
            cands = candidate_senses(lexicon, example.token.wordform)
            dist = wsd_scores(wsd_model, store, example.token, cands)
            best = cands[int(dist.argmax())]
            rows.append({"key": key, "wordform": example.token.wordform,
                         "pred": best.definition_id,
                         "gold": example.gold.definition_id})
        if not rows:
            raise DataError("no token in the corpus could be disambiguated")
        _write_jsonl(rows, args.out)
        if skipped:
            _write_jsonl(skipped, str(args.out) + ".skipped.jsonl")
        inputs = [args.checkpoint, args.store, args.lexicon, args.corpus]
        summary = {"scored": len(rows), "skipped": len(skipped)}
    elif task == "melbert-average":
        model, checkpoint, lexicon, store = _load_model(
            args, need_lexicon=True, need_store=True)
        if isinstance(model, CombinedModel):
            raise DataError("melbert-average needs a token scorer checkpoint")
        corpus = load_wsd_corpus(args.wsd_corpus, lexicon)
        usable = [e for e in corpus if store.has("TOKEN", token_key(e.token))]
        rows = _read_jsonl(args.senses)
        rng = RngStream(args.seed).split("melbert-average-fallback")
        items = []
        for row in rows:
            sense = Sense(str(row["wordform"]).lower(), str(row["definition"]))
            score = melbert_average(model, store, usable, lexicon, sense, rng)
            items.append(ScoredSense(sense=sense, score=score,
                                     gold=int(row.get("gold", 0))))
        write_scored_senses(items, args.out)
        inputs = [args.checkpoint, args.store, args.lexicon, args.wsd_corpus,
                  args.senses]
        summary = {"scored": len(items),
                   "tagged_occurrences": len(usable)}
    else:
        raise UsageError(f"unknown predict task {task!r}")
    _write_manifest(f"predict {task}", args.out, config=_task_config(args),
                    inputs=inputs, seed=getattr(args, "seed", None),
                    outputs=[args.out])
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_report(args) -> int:
    rows_a = _read_jsonl(args.a)
    rows_b = _read_jsonl(args.b)
    if len(rows_a) != len(rows_b):
        raise DataError(f"prediction files differ in length: "
                        f"{len(rows_a)} vs {len(rows_b)}")
    if args.metric == "micro-f1":
        # micro-F1 over one-of predictions equals accuracy, so permuting
        # per-item correctness indicators permutes the systems exactly
        preds_a = [str(r["pred"]) for r in rows_a]
        preds_b = [str(r["pred"]) for r in rows_b]
        golds = [str(r["gold"]) for r in rows_a]
        golds_b = [str(r["gold"]) for r in rows_b]
        side_a = [1.0 if p == g else 0.0 for p, g in zip(preds_a, golds)]
        side_b = [1.0 if p == g else 0.0 for p, g in zip(preds_b, golds)]
        metric = lambda scores, _: float(scores.mean())
        value_a = micro_f1(preds_a, golds)
        value_b = micro_f1(preds_b, golds)
    else:
        side_a = [float(r["score"]) for r in rows_a]
        side_b = [float(r["score"]) for r in rows_b]
        golds = [int(r["gold"]) for r in rows_a]
        golds_b = [int(r["gold"]) for r in rows_b]
        metric = lambda scores, g: f1_binary(scores, g,
                                             threshold=args.threshold)
        value_a = metric(np.asarray(side_a), golds)
        value_b = metric(np.asarray(side_b), golds)
    if golds != golds_b:
        raise DataError("the two prediction files disagree on gold labels; "
                        "items must be aligned")
    result = permutation_test(side_a, side_b, golds, metric, r=args.rounds,
                              seed=args.seed)
    payload = {
        "metric": args.metric,
        "value_a": value_a,
        "value_b": value_b,
        "delta_observed": result.delta_observed,
        "p_value": result.p_value,
        "rounds": result.rounds,
        "significant_05": result.significant_05,
        "significant_01": result.significant_01,
    }
    _write_json(payload, args.out)
    _write_manifest("report", args.out, config=_task_config(args),
                    inputs=[args.a, args.b], seed=args.seed,
                    outputs=[args.out])
    print(json.dumps(payload, sort_keys=True))
    return 0


# -- parser assembly --------------------------------------------------------------

def _build_parser() -> _Parser:
    parser = _Parser(prog="metalex",
                     description="Metaphorical polysemy detection toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate, filter, and split corpora")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--smd")
    p.add_argument("--wsd")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--ratios", default="0.8,0.1,0.1")
    p.add_argument("--conventional-only", action="store_true")
    p.add_argument("--novelty-threshold", type=float, default=0.2)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("train", help="train one model")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--smd-train", dest="smd_train")
    p.add_argument("--smd-dev", dest="smd_dev")
    p.add_argument("--wsd-train", dest="wsd_train")
    p.add_argument("--wsd-dev", dest="wsd_dev")
    p.add_argument("--kind", default="combined",
                   choices=("combined", "smd_baseline", "melbert",
                            "wsd_baseline", "ewiser"))
    p.add_argument("--wsd-kind", dest="wsd_kind", default="baseline",
                   choices=("baseline", "ewiser"))
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_train_config_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("search", help="hyperparameter random search",
                       epilog=_GRID_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--smd-train", dest="smd_train")
    p.add_argument("--smd-dev", dest="smd_dev")
    p.add_argument("--wsd-train", dest="wsd_train")
    p.add_argument("--wsd-dev", dest="wsd_dev")
    p.add_argument("--kind", default="combined",
                   choices=("combined", "smd_baseline", "melbert",
                            "wsd_baseline", "ewiser"))
    p.add_argument("--wsd-kind", dest="wsd_kind", default="baseline",
                   choices=("baseline", "ewiser"))
    p.add_argument("--per-alpha-samples", dest="per_alpha_samples", type=int,
                   default=20)
    p.add_argument("--criterion", default="mean_smd_wsd",
                   choices=("smd_dev_f1", "wsd_dev_micro_f1", "mean_smd_wsd"))
    p.add_argument("--space", help="TOML file overriding the search grid")
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--check-interval", dest="check_interval", type=int)
    p.add_argument("--limit-runs", dest="limit_runs", type=int)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("evaluate", help="compute metrics")
    ev = p.add_subparsers(dest="task", required=True)

    q = ev.add_parser("mpd", help="sense-level F1 and per-wordform ROC-AUC")
    q.add_argument("--pred", required=True, help="scored-senses JSONL")
    q.add_argument("--lexicon")
    q.add_argument("--threshold", type=float, default=0.5)
    q.add_argument("--out", required=True)
    q.set_defaults(func=_cmd_evaluate)

    q = ev.add_parser("smd", help="token-level F1")
    q.add_argument("--pred", required=True)
    q.add_argument("--threshold", type=float, default=0.5)
    q.add_argument("--out", required=True)
    q.set_defaults(func=_cmd_evaluate)

    q = ev.add_parser("wsd", help="micro-averaged F1 over sense predictions")
    q.add_argument("--pred", required=True)
    q.add_argument("--out", required=True)
    q.set_defaults(func=_cmd_evaluate)

    q = ev.add_parser("consistency",
                      help="same-sense contradiction rate of a token scorer")
    q.add_argument("--checkpoint", required=True)
    q.add_argument("--store", required=True)
    q.add_argument("--lexicon", required=True)
    q.add_argument("--corpus", required=True, help="sense-tagged JSONL")
    q.add_argument("--threshold", type=float, default=0.5)
    q.add_argument("--min-count", dest="min_count", type=int, default=2)
    q.add_argument("--out", required=True)
    q.set_defaults(func=_cmd_evaluate)

    q = ev.add_parser("kappa", help="annotator agreement")
    q.add_argument("--a", required=True, help="JSONL of {'label': ...}")
    q.add_argument("--b", required=True)
    q.add_argument("--out", required=True)
    q.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("predict", help="score items with a checkpoint")
    pr = p.add_subparsers(dest="task", required=True)

    q = pr.add_parser("mpd", help="score senses with the sense scorer")
    q.add_argument("--checkpoint", required=True)
    q.add_argument("--store", required=True)
    q.add_argument("--lexicon")
    q.add_argument("--senses", required=True,
                   help="JSONL of {'wordform', 'definition'[, 'gold']}")
    q.add_argument("--out", required=True)
    q.set_defaults(func=_cmd_predict)

    q = pr.add_parser("smd", help="score tokens for metaphoricity")
    q.add_argument("--checkpoint", required=True)
    q.add_argument("--store", required=True)
    q.add_argument("--lexicon", required=True)
    q.add_argument("--corpus", required=True)
    q.add_argument("--out", required=True)
    q.set_defaults(func=_cmd_predict)

    q = pr.add_parser("wsd", help="predict senses for tagged tokens")
    q.add_argument("--checkpoint", required=True)
    q.add_argument("--store", required=True)
    q.add_argument("--lexicon", required=True)
    q.add_argument("--corpus", required=True)
    q.add_argument("--out", required=True)
    q.set_defaults(func=_cmd_predict)

    q = pr.add_parser("melbert-average",
                      help="mean token score per sense, random fallback")
    q.add_argument("--checkpoint", required=True)
    q.add_argument("--store", required=True)
    q.add_argument("--lexicon", required=True)
    q.add_argument("--wsd-corpus", dest="wsd_corpus", required=True)
    q.add_argument("--senses", required=True)
    q.add_argument("--seed", type=int, required=True)
    q.add_argument("--out", required=True)
    q.set_defaults(func=_cmd_predict)

    p = sub.add_parser("report",
                       help="permutation-test comparison of two prediction files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--metric", default="f1", choices=("f1", "micro-f1"))
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--rounds", type=int, default=1000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def dispatch(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MetalexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
