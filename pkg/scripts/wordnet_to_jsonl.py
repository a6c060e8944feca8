#!/usr/bin/env python3
"""Export WordNet to the lexicon JSONL exchange format.

Needs nltk with the wordnet corpus downloaded (`nltk.download("wordnet")`).
Each synset becomes one definition record: its gloss, part of speech,
lemma names, and hypernym synset ids.  Restrict to one part of speech with
--pos (the metaphoricity corpora used with this package are verb-centric).
"""

import argparse
import json
import sys


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--pos", choices=("n", "v", "a", "r"),
                        help="keep only this part of speech")
    args = parser.parse_args()

    try:
        from nltk.corpus import wordnet
        wordnet.ensure_loaded()
    except (ImportError, LookupError) as exc:
        print(f"wordnet unavailable: {exc}", file=sys.stderr)
        print("install nltk and run nltk.download('wordnet') first",
              file=sys.stderr)
        return 1

    count = 0
    with open(args.out, "w", encoding="utf-8") as fh:
        for synset in wordnet.all_synsets(pos=args.pos):
            # satellite adjectives share the 'a' query pos but report 's'
            record = {
                "id": synset.name(),
                "gloss": synset.definition(),
                "pos": synset.pos(),
                "lemmas": [l.name().replace("_", " ").lower()
                           for l in synset.lemmas()],
                "hypernyms": [h.name() for h in synset.hypernyms()],
            }
            fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False))
            fh.write("\n")
            count += 1
    print(f"wrote {count} definitions to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
