import json

import pytest

from errlens.cli import run


def write_corpus(tmp_path, rows):
    path = tmp_path / "corpus.jsonl"
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return str(path)


def write_darr(tmp_path, rows, name="darr.tsv"):
    path = tmp_path / name
    path.write_text("".join("\t".join(r) + "\n" for r in rows))
    return str(path)


IDENTITY_ROWS = [
    {"id": "1", "refs": ["alpha beta gamma delta"], "hyp": "alpha beta gamma delta",
     "system": "A"},
    {"id": "2", "refs": ["one two three four"], "hyp": "one two three four",
     "system": "A"},
]

CORRUPT_ROWS = [
    {"id": "1", "refs": ["a b c d e"], "hyp": "a b zzz d e", "system": "A"},
    {"id": "1", "refs": ["a b c d e"], "hyp": "a b c d e", "system": "B"},
    {"id": "2", "refs": ["p q r s t"], "hyp": "p zzz r zzz t", "system": "A"},
    {"id": "2", "refs": ["p q r s t"], "hyp": "p q r s t", "system": "B"},
]


class TestExitCodes:
    def test_help_exits_zero(self, capsys):
        assert run(["--help"]) == 0
        assert "score" in capsys.readouterr().out

    def test_unknown_subcommand_is_usage_error(self, capsys):
        assert run(["frobnicate"]) == 1

    def test_missing_required_flag_is_usage_error(self):
        assert run(["score"]) == 1

    def test_bad_weights_is_usage_error(self, tmp_path, capsys):
        corpus = write_corpus(tmp_path, IDENTITY_ROWS)
        assert run(["score", "--samples", corpus, "--weights", "oops"]) == 1
        assert "EXP:IMP" in capsys.readouterr().err

    def test_missing_file_is_data_error(self, tmp_path):
        assert run(["score", "--samples", str(tmp_path / "nope.jsonl")]) == 2

    def test_malformed_corpus_is_data_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("{not json\n")
        assert run(["score", "--samples", str(bad)]) == 2

    def test_unreachable_endpoint_is_backend_error(self, tmp_path, capsys):
        corpus = write_corpus(tmp_path, IDENTITY_ROWS)
        code = run([
            "score", "--samples", corpus, "--backend", "remote",
            "--endpoint", "http://127.0.0.1:1",
        ])
        assert code == 3

    def test_remote_without_endpoint_is_usage_error(self, tmp_path, monkeypatch, capsys):
        monkeypatch.delenv("ERRLENS_ENDPOINT", raising=False)
        corpus = write_corpus(tmp_path, IDENTITY_ROWS)
        assert run(["score", "--samples", corpus, "--backend", "remote"]) == 1
        assert "ERRLENS_ENDPOINT" in capsys.readouterr().err


class TestScore:
    def test_identity_corpus_scores_zero(self, tmp_path, capsys):
        corpus = write_corpus(tmp_path, IDENTITY_ROWS)
        assert run(["score", "--samples", corpus]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 2
        for line in lines:
            row = json.loads(line)
            assert row["final_score"] == 0.0
            assert "trace" not in row

    def test_out_file_loadable_as_scores(self, tmp_path):
        corpus = write_corpus(tmp_path, CORRUPT_ROWS)
        out = tmp_path / "scored.jsonl"
        assert run(["score", "--samples", corpus, "--out", str(out)]) == 0
        from errlens.dataio import load_scores

        scores = load_scores(out)
        assert scores[("B", "1")] == 0.0
        assert scores[("A", "1")] < 0.0

    def test_jobs_preserve_order_and_values(self, tmp_path):
        corpus = write_corpus(tmp_path, CORRUPT_ROWS)
        out1, out2 = tmp_path / "o1.jsonl", tmp_path / "o2.jsonl"
        assert run(["score", "--samples", corpus, "--out", str(out1)]) == 0
        assert run(["score", "--samples", corpus, "--jobs", "4", "--out", str(out2)]) == 0
        assert out1.read_text() == out2.read_text()

    def test_trace_flag_includes_trace(self, tmp_path, capsys):
        corpus = write_corpus(tmp_path, IDENTITY_ROWS[:1])
        assert run(["score", "--samples", corpus, "--trace"]) == 0
        row = json.loads(capsys.readouterr().out)
        assert row["trace"]["stop_reason"] == "early_stop"


class TestRefine:
    def test_prints_refined_text(self, capsys):
        assert run(["refine", "--ref", "a b c d e", "--hyp", "a b zzz d e"]) == 0
        assert capsys.readouterr().out == "a b c d e\n"

    def test_trace_json_is_well_formed(self, tmp_path):
        out = tmp_path / "trace.json"
        code = run([
            "refine", "--ref", "a b c d e", "--hyp", "a b zzz d e",
            "--trace", "--out", str(out),
        ])
        assert code == 0
        trace = json.loads(out.read_text())
        assert trace["final_text"] == "a b c d e"
        assert trace["iterations"][0]["chosen_edit"]["op"] == "substitute"

    def test_faithfulness_requires_src(self, capsys):
        assert run(["refine", "--hyp", "h", "--variant", "faithfulness"]) == 1
        assert "--src" in capsys.readouterr().err

    def test_default_variant_requires_ref(self, capsys):
        assert run(["refine", "--hyp", "h"]) == 1


class TestMetaEval:
    def scored_path(self, tmp_path, name="scored.jsonl"):
        corpus = write_corpus(tmp_path, CORRUPT_ROWS)
        out = tmp_path / name
        assert run(["score", "--samples", corpus, "--out", str(out)]) == 0
        return str(out)

    def darr_path(self, tmp_path):
        return write_darr(tmp_path, [["1", "B", "A"], ["2", "B", "A"]])

    def test_tau_for_clean_vs_corrupt(self, tmp_path, capsys):
        scores = self.scored_path(tmp_path)
        darr = self.darr_path(tmp_path)
        assert run(["meta-eval", "--judgments", darr, "--scores", scores]) == 0
        out = capsys.readouterr().out
        header, row = out.strip().splitlines()
        assert header.startswith("metric\t")
        assert "\t1.0\t2" in row  # humans and the metric agree on both pairs

    def test_json_output(self, tmp_path, capsys):
        scores = self.scored_path(tmp_path)
        darr = self.darr_path(tmp_path)
        assert run(["meta-eval", "--judgments", darr, "--scores", scores, "--json"]) == 0
        rows = json.loads(capsys.readouterr().out)
        assert rows[0]["statistic"] == 1.0

    def test_bootstrap_requires_seed_and_two_files(self, tmp_path, capsys):
        scores = self.scored_path(tmp_path)
        darr = self.darr_path(tmp_path)
        assert run(["meta-eval", "--judgments", darr, "--scores", scores,
                    "--bootstrap", "200"]) == 1
        assert run(["meta-eval", "--judgments", darr, "--scores", scores,
                    "--bootstrap", "200", "--seed", "7"]) == 1

    def test_bootstrap_deterministic_byte_identical(self, tmp_path):
        scores_a = self.scored_path(tmp_path, "a.jsonl")
        scores_b = self.scored_path(tmp_path, "b.jsonl")
        darr = self.darr_path(tmp_path)
        outs = []
        for name in ("r1.tsv", "r2.tsv"):
            out = tmp_path / name
            code = run([
                "meta-eval", "--judgments", darr,
                "--scores", scores_a, "--scores", scores_b,
                "--bootstrap", "500", "--seed", "11", "--out", str(out),
            ])
            assert code == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_topk_filter_requires_mqm(self, tmp_path):
        scores = self.scored_path(tmp_path)
        darr = self.darr_path(tmp_path)
        assert run(["meta-eval", "--judgments", darr, "--scores", scores,
                    "--topk", "1"]) == 1

    def test_topk_filter_can_empty_judgments(self, tmp_path, capsys):
        scores = self.scored_path(tmp_path)
        darr = self.darr_path(tmp_path)
        mqm = tmp_path / "mqm.tsv"
        mqm.write_text("A\t1\t-1.0\nB\t1\t-2.0\n")
        code = run(["meta-eval", "--judgments", darr, "--scores", scores,
                    "--mqm", str(mqm), "--topk", "1"])
        assert code == 2


class TestSweep:
    def test_sweep_emits_one_row_per_ratio(self, tmp_path, capsys):
        corpus = write_corpus(tmp_path, CORRUPT_ROWS)
        darr = write_darr(tmp_path, [["1", "B", "A"], ["2", "B", "A"]])
        code = run(["sweep", "--samples", corpus, "--judgments", darr,
                    "--sweep", "1.0,1.2,1.4"])
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "ratio\tkind\tstatistic\tn"
        assert len(lines) == 4
        for line in lines[1:]:
            assert line.split("\t")[2] == "1.0"

    def test_empty_sweep_is_usage_error(self, tmp_path):
        corpus = write_corpus(tmp_path, CORRUPT_ROWS)
        darr = write_darr(tmp_path, [["1", "B", "A"]])
        assert run(["sweep", "--samples", corpus, "--judgments", darr,
                    "--sweep", ","]) == 1


class TestServeCheck:
    def test_requires_endpoint(self, monkeypatch):
        monkeypatch.delenv("ERRLENS_ENDPOINT", raising=False)
        assert run(["serve-check"]) == 1

    def test_unreachable_endpoint_is_backend_error(self):
        assert run(["serve-check", "--endpoint", "http://127.0.0.1:1"]) == 3

    def test_env_var_fallback(self, monkeypatch):
        monkeypatch.setenv("ERRLENS_ENDPOINT", "http://127.0.0.1:1")
        assert run(["serve-check"]) == 3
