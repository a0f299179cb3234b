"""Shared plumbing for the figure scripts: strict CSV loading and argument
parsing.  The scripts are purely presentational over the CLI's CSV outputs
and never recompute model quantities."""

from __future__ import annotations

import argparse
import csv
import sys

import matplotlib

matplotlib.use("Agg")


class SchemaError(ValueError):
    """Input CSV is missing required columns (or is empty)."""


def load_columns(path, required, optional=()):
    """Read a CSV into {column: list[str]}, failing fast on schema drift."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise SchemaError(f"{path}: empty file, expected columns {list(required)}")
            missing = [c for c in required if c not in header]
            if missing:
                raise SchemaError(f"{path}: missing columns {missing} (found {header})")
            rows = [row for row in reader if row]
    except OSError as exc:
        raise SchemaError(f"{path}: {exc}") from None
    data = {c: [] for c in header}
    for row in rows:
        for name, value in zip(header, row):
            data[name].append(value)
    return {c: data[c] for c in (*required, *optional) if c in data}


def floats(values):
    return [float(v) for v in values]


def make_parser(description):
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument("--in", dest="infile", required=True, help="input CSV")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--title", default=None)
    return parser


def run(main_fn):
    """Script entry wrapper: SchemaError prints and exits nonzero."""
    try:
        main_fn()
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(2)
