#!/usr/bin/env python3
"""Validate a JSON document, or every line of a JSONL file, against a JSON Schema."""

import argparse
import json
import sys

import jsonschema


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("schema")
    parser.add_argument("document")
    parser.add_argument("--lines", action="store_true", help="treat the document as JSONL")
    args = parser.parse_args()

    with open(args.schema) as f:
        schema = json.load(f)
    validator = jsonschema.Draft202012Validator(schema)

    with open(args.document) as f:
        docs = [json.loads(line) for line in f if line.strip()] if args.lines else [json.load(f)]

    failures = 0
    for index, doc in enumerate(docs, start=1):
        for error in validator.iter_errors(doc):
            where = "/".join(str(p) for p in error.absolute_path) or "<root>"
            print(f"{args.document}:{index}: {where}: {error.message}", file=sys.stderr)
            failures += 1
    print(f"{len(docs)} document(s), {failures} error(s)")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
