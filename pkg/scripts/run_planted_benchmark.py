#!/usr/bin/env python3
"""Train on a planted-signal world and measure signal recovery.

Builds a synthetic world in memory, trains the sense-marginalizing model on
its corpora, then reports how well the trained networks recover what was
planted: token-level F1 on the metaphoricity training set and per-wordform
ROC-AUC of the sense scorer against the hidden sense labels.  The sense
labels are never shown to the model, so the AUC measures how much sense
supervision leaks through the marginalization alone.
"""

import argparse
import json
import time

from metalex.evaluation import ScoredSense, f1_binary, relative_roc_auc
from metalex.models import (combined_smd_score, model_from_checkpoint,
                            mpd_scores_batch)
from metalex.synthetic import make_world
from metalex.training import TrainConfig, train


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, required=True)
    parser.add_argument("--k", type=int, default=8)
    parser.add_argument("--wordforms", type=int, default=40)
    parser.add_argument("--examples", type=int, default=2000)
    parser.add_argument("--steps", type=int, default=2000)
    parser.add_argument("--smd-weight", type=float, default=0.8)
    parser.add_argument("--lr", type=float, default=0.005)
    parser.add_argument("--hidden", type=int, default=64)
    parser.add_argument("--out", help="write the summary JSON here too")
    args = parser.parse_args()

    started = time.perf_counter()
    world = make_world(args.seed, k=args.k, n_wordforms=args.wordforms,
                       n_smd=args.examples, n_wsd=args.examples)
    n_dev = max(1, args.examples // 10)
    smd_splits = (world.smd[n_dev:], world.smd[:n_dev], [])
    wsd_splits = (world.wsd[n_dev:], world.wsd[:n_dev], [])

    config = TrainConfig(
        smd_weight=args.smd_weight, dropout=0.1, wsd_layers=2, mpd_layers=2,
        wsd_hidden=args.hidden, mpd_hidden=args.hidden, lr=args.lr,
        lr_divisor=10.0, seed=args.seed, max_steps=args.steps)
    checkpoint, report = train(config, smd_splits, wsd_splits, world.store,
                               world.lexicon)
    model = model_from_checkpoint(checkpoint, lexicon=world.lexicon,
                                  store=world.store)

    train_scores = [combined_smd_score(model.mpd, model.wsd, world.store,
                                       world.lexicon, ex.token)
                    for ex in smd_splits[0]]
    train_f1 = f1_binary(train_scores, [ex.label for ex in smd_splits[0]])

    senses = world.lexicon.sense_enumeration()
    sense_scores = mpd_scores_batch(model.mpd, world.store, senses)
    items = [ScoredSense(sense=s, score=float(v), gold=world.sense_labels[s])
             for s, v in zip(senses, sense_scores)]
    auc, _, excluded = relative_roc_auc(items, world.lexicon)

    summary = {
        "steps": report.final_step,
        "phase_transition_step": report.phase_transition_step,
        "smd_train_f1": train_f1,
        "smd_dev_f1": report.smd_dev_f1,
        "wsd_dev_micro_f1": report.wsd_dev_micro_f1,
        "mpd_roc_auc": auc,
        "single_class_wordforms": len(excluded),
        "elapsed_seconds": round(time.perf_counter() - started, 2),
    }
    text = json.dumps(summary, indent=2, sort_keys=True)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


if __name__ == "__main__":
    main()
