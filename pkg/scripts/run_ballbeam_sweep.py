#!/usr/bin/env python3
"""Ball-beam sweep under one of the polynomial decay envelopes.

Usage: run_ballbeam_sweep.py [beta1|beta2|beta3|beta4] [seed-spec] [outdir]

Regret CSVs are emitted only when the envelope admits an eligible oracle
controller; under beta1/beta2 none qualifies and the run reports that.
"""

import sys

from dbar.cli import main

if __name__ == "__main__":
    variant = sys.argv[1] if len(sys.argv) > 1 else "beta1"
    seeds = sys.argv[2] if len(sys.argv) > 2 else "1..10"
    outdir = sys.argv[3] if len(sys.argv) > 3 else f"results/ballbeam-{variant}"
    sys.exit(
        main(
            [
                "sweep",
                "--preset", f"example2-{variant}",
                "--seeds", seeds,
                "--outdir", outdir,
            ]
        )
    )
