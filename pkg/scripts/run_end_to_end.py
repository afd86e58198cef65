#!/usr/bin/env python3
"""Generate a corpus, train both detectors, and evaluate them.

Drives the same code paths as the installed ``sixthsense`` command;
everything lands under --out.
"""

import argparse
import sys
from pathlib import Path

from sixthsense.cli import main as cli


def run(argv):
    code = cli(argv)
    if code != 0:
        print(f"step failed with exit code {code}: {argv}", file=sys.stderr)
        sys.exit(code)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="e2e_out", help="working directory")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    out = Path(args.out)
    corpus = out / "corpus"
    seed = str(args.seed)

    run(["simulate", "--out", str(corpus), "--seed", seed])
    manifest = str(corpus / "manifest.csv")

    for detector in ("markov", "bayes"):
        model = out / f"{detector}.json"
        report = out / f"report_{detector}"
        print(f"--- {detector} ---")
        run(
            [
                "train",
                "--manifest",
                manifest,
                "--detector",
                detector,
                "--out",
                str(model),
                "--seed",
                seed,
            ]
        )
        run(
            [
                "eval",
                "--model",
                str(model),
                "--manifest",
                manifest,
                "--split",
                str(model) + ".split.json",
                "--out",
                str(report),
            ]
        )
        print(f"reports in {report}")


if __name__ == "__main__":
    main()
