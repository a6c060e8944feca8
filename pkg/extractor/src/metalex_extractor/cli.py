"""Command line front end.

Exit codes: 0 success, 1 usage or configuration problem, 2 unreadable or
malformed data.
"""

import argparse
import json
import sys

from .errors import ConfigError, DataError, ExtractorError
from .extract import ExtractionConfig, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metalex-extract",
        description="Populate an MLEX embedding store from a pretrained "
                    "encoder (or deterministic toy vectors) plus an "
                    "optional sense-vector resource.")
    parser.add_argument("--out", required=True, help="store file to write")
    parser.add_argument("--lexicon", required=True, help="lexicon JSONL")
    parser.add_argument("--corpus", action="append", required=True,
                        help="corpus JSONL; repeat for several files")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--encoder",
                        help="model name or directory for AutoModel")
    source.add_argument("--toy", action="store_true",
                        help="hash-seeded vectors instead of an encoder")
    parser.add_argument("--k", type=int,
                        help="vector width; required with --toy, must match "
                             "the encoder hidden size otherwise")
    parser.add_argument("--resource",
                        help="sense-vector JSONL for the SYNSET namespace")
    parser.add_argument("--report",
                        help="alignment report path (default <out>.report.jsonl)")
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--normalize-resource", action="store_true",
                        help="L2-normalize resource vectors before averaging")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = ExtractionConfig(
            out_path=args.out,
            lexicon_path=args.lexicon,
            corpus_paths=tuple(args.corpus),
            encoder=args.encoder,
            k=args.k,
            resource_path=args.resource,
            report_path=args.report,
            batch_size=args.batch_size,
            device=args.device,
            normalize_resource=args.normalize_resource,
            toy=args.toy,
        )
        result = extract(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ExtractorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({
        "store": result.store_path,
        "report": result.report_path,
        "dimension": result.dimension,
        "counts": result.counts,
        "dropped": result.dropped,
    }, sort_keys=True, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
