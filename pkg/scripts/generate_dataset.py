#!/usr/bin/env python3
"""Generate a synthetic dataset on disk (feature CSVs, PSPI, manifest).

Two presets are available: `correlated` plants a burst-driven pain signal
that the scoring pipeline should recover (good for window sweeps), while
`separable` plants frame labels a classifier can learn (good for the
interpretation pipeline).
"""

import argparse
import sys

from ted.synthetic import make_correlated_dataset, make_separable_dataset, write_dataset


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", help="output directory")
    parser.add_argument(
        "--preset", choices=["correlated", "separable"], default="correlated"
    )
    parser.add_argument("--subjects", type=int, default=None)
    parser.add_argument("--sequences", type=int, default=None)
    parser.add_argument("--frames", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)

    make = (
        make_correlated_dataset if args.preset == "correlated" else make_separable_dataset
    )
    overrides = {
        key: value
        for key, value in (
            ("n_subjects", args.subjects),
            ("n_sequences", args.sequences),
            ("n_frames", args.frames),
            ("seed", args.seed),
        )
        if value is not None
    }
    records = make(**overrides)
    manifest = write_dataset(records, args.out)
    frames = sum(len(r.frames) for r in records)
    print(f"wrote {len(records)} sequences ({frames} frames) -> {manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
