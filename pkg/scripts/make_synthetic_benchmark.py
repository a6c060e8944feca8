#!/usr/bin/env python3
"""Generate a planted-signal benchmark directory.

Writes a lexicon, an embedding store, train/dev/test corpus splits, and the
gold sense labels file into --out-dir, all derived deterministically from
--seed.  The files use the package's exchange formats, so the metalex CLI
can train and evaluate on them directly.
"""

import argparse
import json

from metalex.synthetic import make_world, write_world


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, required=True)
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--k", type=int, default=8)
    parser.add_argument("--wordforms", type=int, default=40)
    parser.add_argument("--smd", type=int, default=2000)
    parser.add_argument("--wsd", type=int, default=2000)
    parser.add_argument("--noise", type=float, default=0.1)
    args = parser.parse_args()

    world = make_world(args.seed, k=args.k, n_wordforms=args.wordforms,
                       n_smd=args.smd, n_wsd=args.wsd, noise=args.noise)
    paths = write_world(world, args.out_dir)
    n_meta = sum(world.sense_labels.values())
    print(json.dumps({
        "senses": len(world.sense_labels),
        "metaphorical": n_meta,
        "paths": paths,
    }, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
