import csv
import io
import json

import numpy as np
import pytest

from onepass_kkm import cli
from onepass_kkm.data import generate_rings, write_csv

CLUSTER_KEYS = {"method", "kernel", "dataset", "n", "clusters", "r", "l", "m", "seed", "approx_error",
                "accuracy", "objective", "wall_time_ms", "peak_block_memory_bytes"}


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestCluster:
    def test_json_schema(self, capsys):
        code, out, _ = run(capsys, "cluster", "--generate", "rings:400", "--rank", "2", "--oversample", "10",
                           "--seed", "7", "--threads", "1")
        assert code == 0
        rec = json.loads(out)
        assert set(rec) == CLUSTER_KEYS
        assert rec["method"] == "one-pass" and rec["l"] == 10 and rec["m"] is None
        assert 0.3 <= rec["approx_error"] <= 0.5
        assert rec["peak_block_memory_bytes"] > 0

    @pytest.mark.parametrize("method,extra", [("one-pass", []), ("gaussian", []), ("nystrom", ["--samples", "30"]),
                                              ("exact", []), ("full-kkm", []), ("raw-kmeans", [])])
    def test_repeat_runs_identical_except_timing(self, capsys, tmp_path, method, extra):
        texts = []
        for threads in ("1", "3"):
            out_path = tmp_path / f"{method}{threads}.json"
            code, _, _ = run(capsys, "cluster", "--generate", "rings:300", "--method", method, "--seed", "5",
                             "--block-width", "64", "--threads", threads, "--out", str(out_path), *extra)
            assert code == 0
            rec = json.loads(out_path.read_text())
            assert set(rec) == CLUSTER_KEYS
            rec.pop("wall_time_ms")
            if threads == "3":
                rec.pop("peak_block_memory_bytes")  # counts concurrently live blocks
            texts.append(rec)
        first = dict(texts[0])
        first.pop("peak_block_memory_bytes")
        assert json.dumps(first, sort_keys=True).encode() == json.dumps(texts[1], sort_keys=True).encode()

    def test_sketch_larger_than_n(self, capsys):
        code, _, err = run(capsys, "cluster", "--generate", "rings:4", "--kernel", "poly:2", "--rank", "4")
        assert code == 1 and "exceeds n" in err

    def test_bad_flag(self, capsys):
        with pytest.raises(SystemExit) as info:
            cli.main(["cluster", "--generate", "rings:40", "--kernel", "cubic"])
        assert info.value.code == 1

    def test_nystrom_needs_samples(self, capsys):
        code, _, _ = run(capsys, "cluster", "--generate", "rings:40", "--method", "nystrom")
        assert code == 1

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "cluster", "--data", str(tmp_path / "none.csv"))
        assert code == 2 and "data error" in err

    def test_malformed_file(self, capsys, tmp_path):
        (tmp_path / "bad.csv").write_text("1,2\n3,oops\n")
        code, _, err = run(capsys, "cluster", "--data", str(tmp_path / "bad.csv"))
        assert code == 2 and "row 2, column 1" in err

    def test_numerical_failure(self, capsys, monkeypatch):
        def fail(*a, **k):
            raise np.linalg.LinAlgError("singular")
        monkeypatch.setattr(cli, "linearize", fail)
        code, _, err = run(capsys, "cluster", "--generate", "rings:40")
        assert code == 3 and "numerical failure" in err

    def test_csv_input_with_labels(self, capsys, tmp_path):
        write_csv(tmp_path / "r.csv", generate_rings(200, seed=1))
        code, out, _ = run(capsys, "cluster", "--data", str(tmp_path / "r.csv"), "--label-col", "-1",
                           "--normalize", "--method", "exact")
        rec = json.loads(out)
        assert code == 0 and rec["clusters"] == 2 and rec["accuracy"] is not None


class TestCompare:
    def test_single_method_single_trial(self, capsys):
        code, out, _ = run(capsys, "compare", "--generate", "rings:200", "--method", "one-pass", "--trials", "1",
                           "--threads", "1")
        assert code == 0
        body, summary = out.split("method,samples,trials", 1)
        data = rows(body)
        assert len(data) == 1 and list(data[0]) == list(cli.COMPARE_COLUMNS)
        assert data[0]["samples"] == "12"

    def test_arity_and_summary_file(self, capsys, tmp_path):
        out_path = tmp_path / "sweep.csv"
        code, _, _ = run(capsys, "compare", "--generate", "rings:200", "--method", "one-pass,nystrom,exact",
                         "--samples", "10,20", "--trials", "4", "--out", str(out_path), "--threads", "2")
        assert code == 0
        data = rows(out_path.read_text())
        cells = {}
        for r in data:
            cells.setdefault((r["method"], r["samples"]), []).append(int(r["trial"]))
        assert set(cells) == {("one-pass", "12"), ("nystrom", "10"), ("nystrom", "20"), ("exact", "200")}
        assert all(sorted(v) == [0, 1, 2, 3] for v in cells.values())
        summary = rows((tmp_path / "sweep_summary.csv").read_text())
        assert len(summary) == 4 and all(r["trials"] == "4" for r in summary)

    def test_threads_do_not_change_values(self, capsys, tmp_path):
        texts = []
        for threads in ("1", "4"):
            p = tmp_path / f"t{threads}.csv"
            run(capsys, "compare", "--generate", "rings:200", "--method", "nystrom,one-pass", "--samples", "15",
                "--trials", "3", "--threads", threads, "--out", str(p))
            texts.append(p.read_bytes())
        assert texts[0] == texts[1]

    def test_unknown_method(self, capsys):
        code, _, _ = run(capsys, "compare", "--generate", "rings:40", "--method", "svd")
        assert code == 1


class TestBoundCheck:
    def test_one_pass_passes(self, capsys):
        code, out, _ = run(capsys, "bound-check", "--trials", "12", "--rank", "2")
        assert code == 0
        data = rows(out.split("#")[0])
        assert len(data) == 12 and all(r["bound_pass"] == "pass" and r["trace_bound_pass"] == "" for r in data)

    def test_exact_full_rank_gap_zero(self, capsys):
        code, out, _ = run(capsys, "bound-check", "--method", "exact", "--rank", "8", "--n", "8", "--trials", "5")
        assert code == 0
        for r in rows(out.split("#")[0]):
            assert abs(float(r["gap"])) < 1e-8 and r["trace_bound_pass"] == "pass"

    def test_violation_exit_code(self, capsys, monkeypatch):
        real = cli.bound_trial

        def broken(t, args):
            r = real(t, args)
            r["bound_pass"] = t != 1
            return r
        monkeypatch.setattr(cli, "bound_trial", broken)
        code, out, _ = run(capsys, "bound-check", "--trials", "3")
        assert code == 4 and "FAIL" in out

    def test_enumeration_bound(self, capsys):
        code, _, _ = run(capsys, "bound-check", "--n", "13")
        assert code == 1
