"""Image segmentation sweep: error and accuracy against the Nystrom column count.

Expects the UCI image segmentation data as one CSV with the class name in
column 0 (the UCI file ships 5 header lines). Samples are scaled to unit
l2 norm; kernel (<x, y>)^2, r = 2, l = 5.

    python3 scripts/segmentation_sweep.py segmentation.csv --trials 100 --out seg.csv
"""
import argparse
import sys
from pathlib import Path

from onepass_kkm.cli import main as cli_main


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("path", type=Path)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--skip-rows", type=int, default=5)
    p.add_argument("--samples", default="10,20,30,40,50")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("segmentation_sweep.csv"))
    a = p.parse_args()
    argv = ["compare", "--data", str(a.path), "--label-col", "0", "--skip-rows", str(a.skip_rows),
            "--normalize", "--kernel", "poly:2", "--rank", "2", "--oversample", "5",
            "--method", "one-pass,nystrom,exact,full-kkm", "--samples", a.samples,
            "--trials", str(a.trials), "--threads", str(a.threads), "--seed", str(a.seed), "--out", str(a.out)]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
