import csv
import json

import pytest

from stdec import (
    BenchResult,
    ConfigError,
    DecoderConfig,
    PolicySpec,
    Vocab,
    run_cell,
    run_matrix,
    speedup_report,
    write_results_csv,
    write_results_json,
    write_summary_md,
)

VOCAB = Vocab(size=32, mask_id=31)


def small_cfg(gen_length=16, block_size=8):
    return DecoderConfig(
        gen_length=gen_length, block_size=block_size, max_steps=gen_length
    )


def strip_wall(d):
    return {k: v for k, v in d.items() if k not in ("wall_seconds", "tps")}


class TestRunCell:
    def test_top1_uses_one_step_per_token(self):
        cfg = small_cfg()
        r = run_cell(PolicySpec("top_k", {"k": 1}), "stable-95", 3, cfg, VOCAB)
        assert r.error is None
        assert r.steps_used == 16
        assert r.nfe == r.steps_used
        assert r.tokens_per_step == 1.0
        assert r.forced_final is False

    def test_oracle_preset_clears_each_block_at_once(self):
        cfg = small_cfg()
        r = run_cell(PolicySpec("stdec"), "degenerate-oracle", 5, cfg, VOCAB)
        assert r.steps_used == cfg.gen_length // cfg.block_size
        assert r.score == 1.0
        assert r.fallback_rate == 0.0

    def test_labels(self):
        assert PolicySpec("stdec").resolved_label() == "stdec"
        assert PolicySpec("top_k", {"k": 2}).resolved_label() == "top_k[k=2]"
        assert PolicySpec("top_k", {"k": 2}, label="t2").resolved_label() == "t2"

    def test_failure_becomes_error_marker(self):
        r = run_cell(PolicySpec("top_k", {"k": 0}), "stable-95", 0, small_cfg(), VOCAB)
        assert r.error is not None
        assert r.steps_used is None

    def test_unknown_preset_becomes_error_marker(self):
        r = run_cell(PolicySpec("stdec"), "no-such", 0, small_cfg(), VOCAB)
        assert r.error is not None and "unknown preset" in r.error


class TestRunMatrix:
    def test_sorted_by_cell_key(self):
        cfg = small_cfg()
        results = run_matrix(
            [PolicySpec("top_k", {"k": 1}), PolicySpec("stdec")],
            ["stable-95"],
            [1, 0],
            cfg,
            VOCAB,
        )
        keys = [(r.policy, r.preset, r.seed) for r in results]
        assert keys == sorted(keys)
        assert len(results) == 4

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ConfigError, match="duplicate policy labels"):
            run_matrix(
                [PolicySpec("stdec"), PolicySpec("stdec")],
                ["stable-95"], [0], small_cfg(), VOCAB,
            )

    def test_empty_matrix_rejected(self):
        with pytest.raises(ConfigError, match="at least one"):
            run_matrix([], ["stable-95"], [0], small_cfg(), VOCAB)

    def test_parallel_equals_sequential(self):
        cfg = small_cfg()
        policies = [PolicySpec("stdec"), PolicySpec("top_k", {"k": 1})]
        seq = run_matrix(policies, ["stable-95"], [0, 1], cfg, VOCAB, workers=1)
        par = run_matrix(policies, ["stable-95"], [0, 1], cfg, VOCAB, workers=2)
        assert [strip_wall(r.to_dict()) for r in seq] == [
            strip_wall(r.to_dict()) for r in par
        ]

    def test_workers_env_read(self, monkeypatch):
        monkeypatch.setenv("STDEC_BENCH_WORKERS", "2")
        results = run_matrix(
            [PolicySpec("stdec")], ["stable-95"], [0], small_cfg(), VOCAB
        )
        assert results[0].error is None

    def test_workers_env_invalid(self, monkeypatch):
        monkeypatch.setenv("STDEC_BENCH_WORKERS", "many")
        with pytest.raises(ConfigError, match="STDEC_BENCH_WORKERS"):
            run_matrix([PolicySpec("stdec")], ["stable-95"], [0], small_cfg(), VOCAB)

    def test_deterministic_without_wall_fields(self):
        cfg = small_cfg()
        policies = [PolicySpec("stdec"), PolicySpec("fixed", {"tau": 0.9})]
        a = run_matrix(policies, ["unstable"], [0, 1], cfg, VOCAB)
        b = run_matrix(policies, ["unstable"], [0, 1], cfg, VOCAB)
        assert [strip_wall(r.to_dict()) for r in a] == [
            strip_wall(r.to_dict()) for r in b
        ]


class TestSpeedupReport:
    def run(self, policies, presets=("stable-95",), seeds=(0, 1)):
        return run_matrix(
            list(policies), list(presets), list(seeds), small_cfg(), VOCAB
        )

    def test_baseline_against_itself_is_one(self):
        results = self.run([PolicySpec("top_k", {"k": 1}, label="base")])
        report = speedup_report(results, "base")
        p = report["policies"]["base"]
        assert p["steps_speedup_geomean"] == pytest.approx(1.0)
        assert p["score_delta_mean"] == 0.0
        assert p["n_failed"] == 0

    def test_top2_halves_steps(self):
        results = self.run(
            [PolicySpec("top_k", {"k": 1}, label="base"), PolicySpec("top_k", {"k": 2})]
        )
        report = speedup_report(results, "base")
        p = report["policies"]["top_k[k=2]"]
        assert p["mean_steps"] == 8.0
        assert p["steps_speedup_geomean"] == pytest.approx(2.0)

    def test_missing_baseline(self):
        results = self.run([PolicySpec("stdec")])
        with pytest.raises(ConfigError, match="no results"):
            speedup_report(results, "fixed")

    def test_failed_baseline_cell(self):
        results = [
            BenchResult(policy="base", preset="stable-95", seed=0, error="boom"),
            BenchResult(
                policy="other", preset="stable-95", seed=0,
                steps_used=8, nfe=8, tokens_per_step=2.0, fallback_rate=0.0,
                forced_final=False, score=1.0, wall_seconds=0.1, tps=160.0,
            ),
        ]
        with pytest.raises(ConfigError, match="failed"):
            speedup_report(results, "base")

    def test_failed_cells_counted_not_fatal(self):
        results = self.run(
            [PolicySpec("top_k", {"k": 1}, label="base"),
             PolicySpec("top_k", {"k": 0}, label="broken")]
        )
        report = speedup_report(results, "base")
        broken = report["policies"]["broken"]
        assert broken["n_failed"] == broken["n_cells"] == 2
        assert broken["steps_speedup_geomean"] is None
        assert broken["mean_steps"] is None


class TestWriters:
    @pytest.fixture
    def results(self):
        return run_matrix(
            [PolicySpec("stdec"), PolicySpec("top_k", {"k": 1}, label="base")],
            ["stable-95"], [0], small_cfg(), VOCAB,
        )

    def test_csv_columns_and_floats(self, tmp_path, results):
        path = tmp_path / "results.csv"
        write_results_csv(results, path)
        with path.open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == list(
            ("policy", "preset", "seed", "steps_used", "nfe", "tokens_per_step",
             "fallback_rate", "forced_final", "score", "wall_seconds", "tps",
             "error")
        )
        assert len(rows) == 1 + len(results)
        by_label = {r[0]: r for r in rows[1:]}
        stdec_result = next(r for r in results if r.policy == "stdec")
        assert float(by_label["stdec"][5]) == stdec_result.tokens_per_step

    def test_json_payload(self, tmp_path, results):
        cfg = small_cfg()
        report = speedup_report(results, "base")
        path = tmp_path / "results.json"
        write_results_json(results, cfg, VOCAB, path, speedup=report)
        payload = json.loads(path.read_text())
        assert payload["config"] == cfg.to_dict()
        assert payload["vocab"] == {"size": 32, "mask_id": 31}
        assert payload["results"] == [r.to_dict() for r in results]
        assert payload["speedup"]["baseline"] == "base"

    def test_json_without_speedup(self, tmp_path, results):
        path = tmp_path / "results.json"
        write_results_json(results, small_cfg(), VOCAB, path)
        assert "speedup" not in json.loads(path.read_text())

    def test_summary_markdown(self, tmp_path, results):
        report = speedup_report(results, "base")
        path = tmp_path / "summary.md"
        write_summary_md(report, path)
        text = path.read_text()
        assert "| policy |" in text
        assert "| stdec |" in text
        assert "`base`" in text
