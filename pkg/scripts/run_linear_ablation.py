#!/usr/bin/env python3
"""Reproduce the linear-system ablation: 2x2 grid of batch/rate variants.

Writes per-arm stability and regret CSVs (mean, SE, 95% band across seeds)
plus a manifest. Figures can then be rendered with the figplot package.
"""

import sys

from dbar.cli import main

if __name__ == "__main__":
    seeds = sys.argv[1] if len(sys.argv) > 1 else "1..10"
    outdir = sys.argv[2] if len(sys.argv) > 2 else "results/linear-ablation"
    sys.exit(
        main(
            [
                "ablation",
                "--preset", "example1-sinusoidal",
                "--seeds", seeds,
                "--outdir", outdir,
            ]
        )
    )
