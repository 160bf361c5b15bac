#!/usr/bin/env python3
"""Run the whole analysis chain against one dataset manifest.

Scores every frame, sweeps the dynamics window, correlates scores against
PSPI per subject, summarizes by label group, and trains/validates the pain
classifier — each step into its own subdirectory of the output directory.
"""

import argparse
import sys

from ted.cli import main as ted


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("manifest", help="dataset manifest JSON")
    parser.add_argument("out", help="output directory")
    parser.add_argument("--w", type=int, default=10)
    parser.add_argument("--profile", default="pain")
    parser.add_argument("--au-source", choices=["manual", "predicted"], default="manual")
    parser.add_argument("--scale", choices=["VAS", "OPI"], default="VAS")
    parser.add_argument(
        "--no-log",
        action="store_true",
        help="summarize raw scores instead of natural-log scores",
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args(argv)

    common = [
        "--manifest", args.manifest,
        "--w", str(args.w),
        "--profile", args.profile,
        "--au-source", args.au_source,
        "--jobs", str(args.jobs),
    ]
    steps = [
        ("score", []),
        ("sweep", []),
        ("evaluate", []),
        (
            "summarize",
            ["--scale", args.scale, "--plot-data", "plot.csv"]
            + (["--no-log"] if args.no_log else []),
        ),
        ("interpret", ["--seed", str(args.seed)]),
    ]
    for command, extra in steps:
        print(f"== {command} ==")
        code = ted([command, *common, "--out", f"{args.out}/{command}", *extra])
        if code != 0:
            print(f"{command} failed with exit code {code}", file=sys.stderr)
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
