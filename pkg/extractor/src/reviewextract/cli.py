"""Command-line entry points: `extract` raw reviews, `embed` phrases."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .encode import HASH_ENCODER_ID, ModelLoadError, make_encoder, write_embedding_file
from .extract import extract_review

log = logging.getLogger("reviewextract")


def read_reviews(path: Path) -> dict[str, str]:
    reviews: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: invalid JSON: {exc.msg}") from exc
            reviews[str(obj["review_id"])] = str(obj["text"])
    return reviews


def tuple_file_phrases(path: Path) -> list[str]:
    """Every relation phrase, relation lemma and SVCOP descriptor in the file."""
    phrases: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            raw = raw.strip()
            if not raw:
                continue
            obj = json.loads(raw)
            phrases.append(obj["relation_text"])
            if obj.get("relation_lemma"):
                phrases.append(obj["relation_lemma"])
            if obj["kind"] == "SVCOP":
                phrases.append(obj["object_text"])
    return phrases


def cmd_extract(args: argparse.Namespace) -> int:
    reviews = read_reviews(Path(args.reviews))
    records = []
    failures = 0
    for review_id in sorted(reviews):
        try:
            records.extend(extract_review(review_id, reviews[review_id]))
        except Exception:
            failures += 1
            log.exception("extract: skipping review %r", review_id)
    with open(args.out, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_record(), ensure_ascii=False, sort_keys=True))
            fh.write("\n")
    log.info("extract: %d records from %d reviews (%d skipped reviews)",
             len(records), len(reviews), failures)
    return 0


def cmd_embed(args: argparse.Namespace) -> int:
    if args.phrases:
        phrases = [line for line in Path(args.phrases).read_text(encoding="utf-8").splitlines()]
    else:
        phrases = tuple_file_phrases(Path(args.tuples))
    encoder = make_encoder(args.model)
    count = write_embedding_file(phrases, encoder, args.out)
    log.info("embed: %d distinct phrases at dim %d with %s",
             count, encoder.dim, encoder.name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reviewextract",
        description="Relationship tuples and phrase embeddings from raw reviews")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="raw review text to a tuple file")
    p.add_argument("--reviews", required=True, help="line-delimited (review_id, text) file")
    p.add_argument("--out", required=True, help="tuple file to write")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("embed", help="phrases to an embedding file")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--phrases", help="file of phrases, one per line")
    source.add_argument("--tuples", help="tuple file to collect phrases from")
    p.add_argument("--model", default=HASH_ENCODER_ID,
                   help="encoder id (default deterministic hash projection)")
    p.add_argument("--out", required=True, help="embedding file to write")
    p.set_defaults(func=cmd_embed)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    try:
        return args.func(args)
    except ModelLoadError as exc:
        log.error("%s", exc)
        return 2
    except UnicodeDecodeError as exc:
        log.error("encoding error: %s", exc)
        return 1
    except (ValueError, KeyError, FileNotFoundError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
