"""Clustering-gap bound over methods and ranks on small random instances.

For each (method, rank) runs the bound-check command and reports the
number of violations and the largest ratio of gap to bound.

    python3 scripts/bound_sweep.py --trials 200
"""
import argparse
import contextlib
import csv
import io

from onepass_kkm.cli import main as cli_main


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args()
    print(f"{'method':<10}{'r':>3}{'bound fails':>13}{'trace fails':>13}{'max gap/2|E|*':>16}")
    for method, extra in [("one-pass", []), ("gaussian", []), ("nystrom", ["--samples", "5"]), ("exact", [])]:
        for r in (1, 2, 3):
            buf = io.StringIO()
            with contextlib.redirect_stdout(buf):
                cli_main(["bound-check", "--method", method, "--rank", str(r), "--n", str(a.n),
                          "--trials", str(a.trials), "--seed", str(a.seed), "--oversample", "3", *extra])
            rows = list(csv.DictReader(line for line in io.StringIO(buf.getvalue()) if not line.startswith("#")))
            fails_bound = sum(row["bound_pass"] == "FAIL" for row in rows)
            fails_trace = sum(row["trace_bound_pass"] == "FAIL" for row in rows)
            ratio = max(float(row["gap"]) / float(row["twice_trace_norm"])
                        for row in rows if float(row["twice_trace_norm"]) > 0)
            trace = str(fails_trace) if method == "exact" else "-"
            print(f"{method:<10}{r:>3}{fails_bound:>13}{trace:>13}{ratio:>16.3f}")


if __name__ == "__main__":
    main()
