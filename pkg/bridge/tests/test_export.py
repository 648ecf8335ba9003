"""Unit tests for the export pipeline; nothing here touches the engine."""

import json
from pathlib import Path

import pytest
import torch

from stdec_bridge import (
    ExportSession,
    SessionError,
    export_prompt_file,
    export_trace,
    load_model,
    parse_model_id,
    tokenize_prompt,
)
from stdec_bridge.cli import main
from stdec_bridge.model import TOY_MASK_ID, TOY_VOCAB_SIZE


@pytest.fixture(scope="module")
def toy():
    return load_model("toy-7")


def load_lines(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return json.loads(lines[0]), [json.loads(line) for line in lines[1:]]


def small_session(model, **kwargs):
    geometry = {"gen_length": 16, "steps": 8, "block_size": 8}
    geometry.update(kwargs)
    return ExportSession.for_prompt(model, "toy-7", "1,2", **geometry)


class TestModelRegistry:
    def test_seed_parsing(self):
        assert parse_model_id("toy") == 0
        assert parse_model_id("toy-17") == 17

    @pytest.mark.parametrize("bad", ["gpt2", "toy-x", "TOY", "toy-", "llada-8b"])
    def test_unknown_ids(self, bad):
        with pytest.raises(SessionError, match="unknown model id"):
            parse_model_id(bad)

    def test_same_seed_same_weights(self):
        a, b = load_model("toy-3"), load_model("toy-3")
        for key, tensor in a.state_dict().items():
            assert torch.equal(tensor, b.state_dict()[key])

    def test_different_seed_different_weights(self):
        a, b = load_model("toy-1"), load_model("toy-2")
        assert not torch.equal(a.tok.weight, b.tok.weight)


class TestTokenizer:
    @pytest.mark.parametrize("line", ["1,2,3", "1 2 3", "1, 2,3", "  1,2 , 3  "])
    def test_integer_lines_verbatim(self, line):
        assert tokenize_prompt(line, TOY_VOCAB_SIZE, TOY_MASK_ID) == [1, 2, 3]

    @pytest.mark.parametrize("line", ["99", "-1", str(TOY_MASK_ID)])
    def test_ids_outside_model_vocab(self, line):
        with pytest.raises(SessionError, match="does not fit the model vocab"):
            tokenize_prompt(line, TOY_VOCAB_SIZE, TOY_MASK_ID)

    def test_word_lines_hash_deterministically(self):
        a = tokenize_prompt("the quick brown fox", TOY_VOCAB_SIZE, TOY_MASK_ID)
        b = tokenize_prompt("the quick brown fox", TOY_VOCAB_SIZE, TOY_MASK_ID)
        assert a == b
        assert len(a) == 4
        assert all(0 <= t < TOY_VOCAB_SIZE and t != TOY_MASK_ID for t in a)

    def test_hash_skips_mid_vocab_mask(self):
        # 200 words cover the 15-slot range; none may land on the mask id
        words = " ".join(f"w{i}" for i in range(200))
        ids = tokenize_prompt(words, 16, 5)
        assert all(0 <= t < 16 and t != 5 for t in ids)
        assert len(set(ids)) > 5


class TestSessionValidation:
    def test_geometry_rejected(self, toy):
        with pytest.raises(SessionError, match="steps must be >= 1"):
            small_session(toy, steps=0)
        with pytest.raises(SessionError, match="gen length must be >= 1"):
            small_session(toy, gen_length=0)
        with pytest.raises(SessionError, match="must divide gen length"):
            small_session(toy, block_size=5)

    @pytest.mark.parametrize(
        ("gen", "steps", "k"), [(16, 8, 2), (8, 50, 1), (64, 16, 4), (12, 5, 2)]
    )
    def test_commits_per_step(self, toy, gen, steps, k):
        session = small_session(toy, gen_length=gen, steps=steps, block_size=gen)
        assert session.commits_per_step == k


class TestCapture:
    def test_header_contents(self, toy, tmp_path):
        path = export_trace(small_session(toy), toy, tmp_path / "t.dtrace.jsonl")
        header, _ = load_lines(path)
        assert header == {
            "format_version": 1,
            "prompt": [1, 2],
            "gen_length": 16,
            "block_size": 8,
            "vocab_size": TOY_VOCAB_SIZE,
            "mask_id": TOY_MASK_ID,
            "policy": "top_k",
            "policy_params": {"k": 2},
            "config": {"gen_length": 16, "block_size": 8, "max_steps": 16},
            "denoiser": "bridge",
            "seed": 7,
            "preset": None,
            "overrides": {"model": "toy-7"},
        }

    def test_step_records(self, toy, tmp_path):
        path = export_trace(small_session(toy), toy, tmp_path / "t.dtrace.jsonl")
        _, steps = load_lines(path)
        assert [s["t"] for s in steps] == list(range(8))
        assert [s["block"] for s in steps] == [0] * 4 + [1] * 4
        masked = set(range(16))
        for step in steps:
            lo = step["block"] * 8
            positions = [p for p, _, _ in step["predictions"]]
            assert positions == sorted(masked & set(range(lo, lo + 8)))
            for _, tok, conf in step["predictions"]:
                assert 0 <= tok < TOY_VOCAB_SIZE and tok != TOY_MASK_ID
                assert 0.0 < conf <= 1.0
            assert not step["fallback_used"]
            # top-2 by confidence, ties to the lowest position
            ranked = sorted(step["predictions"], key=lambda r: (-r[2], r[0]))
            assert sorted(p for p, _, _ in ranked[:2]) == [p for p, _ in step["committed"]]
            pred_ids = {p: tok for p, tok, _ in step["predictions"]}
            for pos, tok in step["committed"]:
                assert pred_ids[pos] == tok
            masked -= {p for p, _ in step["committed"]}
        assert masked == set()

    def test_export_is_deterministic(self, tmp_path):
        paths = []
        for name in ("a", "b"):
            model = load_model("toy-7")
            session = small_session(model)
            paths.append(export_trace(session, model, tmp_path / f"{name}.dtrace.jsonl"))
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_model_seed_changes_output(self, tmp_path):
        outs = []
        for mid in ("toy-1", "toy-2"):
            model = load_model(mid)
            session = ExportSession.for_prompt(model, mid, "1,2",
                                               gen_length=16, steps=8, block_size=8)
            outs.append(export_trace(session, model, tmp_path / f"{mid}.dtrace.jsonl"))
        a_steps = load_lines(outs[0])[1]
        b_steps = load_lines(outs[1])[1]
        assert a_steps != b_steps

    def test_k_floors_at_one(self, toy, tmp_path):
        session = small_session(toy, gen_length=8, steps=50, block_size=8)
        path = export_trace(session, toy, tmp_path / "t.dtrace.jsonl")
        _, steps = load_lines(path)
        assert len(steps) == 8
        assert all(len(s["committed"]) == 1 for s in steps)

    def test_word_prompt_round_trips_into_header(self, toy, tmp_path):
        session = ExportSession.for_prompt(toy, "toy-7", "lorem ipsum dolor",
                                           gen_length=16, steps=8, block_size=8)
        header, _ = load_lines(export_trace(session, toy, tmp_path / "t.dtrace.jsonl"))
        assert header["prompt"] == tokenize_prompt("lorem ipsum dolor",
                                                   TOY_VOCAB_SIZE, TOY_MASK_ID)

    def test_overlong_sequence_fails_with_step_context(self, toy, tmp_path):
        session = small_session(toy, gen_length=512, steps=16, block_size=512)
        with pytest.raises(SessionError, match="step 0: capture failed"):
            export_trace(session, toy, tmp_path / "t.dtrace.jsonl")

    def test_session_rejects_ids_foreign_to_model(self, toy, tmp_path):
        session = ExportSession(model_id="toy-7", prompt_text="", prompt_ids=[70],
                                gen_length=16, steps=8, block_size=8)
        with pytest.raises(SessionError, match="does not fit the model vocab"):
            export_trace(session, toy, tmp_path / "t.dtrace.jsonl")


class TestCaptureHook:
    def test_custom_hook_drives_commit_order(self, toy, tmp_path):
        flat = lambda rows, mask_id: ([0] * rows.shape[0], [1.0] * rows.shape[0])
        session = small_session(toy, reduce=flat)
        _, steps = load_lines(export_trace(session, toy, tmp_path / "t.dtrace.jsonl"))
        # all-equal confidences: ties resolve to the lowest positions
        assert [p for p, _ in steps[0]["committed"]] == [0, 1]
        assert all(conf == 1.0 for _, _, conf in steps[0]["predictions"])

    def test_hook_returning_mask_id(self, toy, tmp_path):
        bad = lambda rows, mask_id: ([mask_id] * rows.shape[0], [0.5] * rows.shape[0])
        with pytest.raises(SessionError, match="not a real token"):
            export_trace(small_session(toy, reduce=bad), toy, tmp_path / "t.jsonl")

    def test_hook_returning_bad_confidence(self, toy, tmp_path):
        bad = lambda rows, mask_id: ([0] * rows.shape[0], [1.5] * rows.shape[0])
        with pytest.raises(SessionError, match=r"outside \[0, 1\]"):
            export_trace(small_session(toy, reduce=bad), toy, tmp_path / "t.jsonl")

    def test_hook_length_mismatch(self, toy, tmp_path):
        bad = lambda rows, mask_id: ([0], [0.5])
        with pytest.raises(SessionError, match="capture hook returned"):
            export_trace(small_session(toy, reduce=bad), toy, tmp_path / "t.jsonl")

    def test_hook_exception_carries_step_context(self, toy, tmp_path):
        def boom(rows, mask_id):
            raise ValueError("no logits today")

        with pytest.raises(SessionError, match="step 0: capture failed"):
            export_trace(small_session(toy, reduce=boom), toy, tmp_path / "t.jsonl")


class TestPromptFile:
    def test_one_trace_per_line(self, tmp_path):
        pf = tmp_path / "prompts.txt"
        pf.write_text("1,2\n\nthe quick fox\n", encoding="utf-8")
        written = export_prompt_file("toy-7", pf, tmp_path / "out",
                                     gen_length=16, steps=8, block_size=8)
        assert [p.name for p in written] == ["prompt_000.dtrace.jsonl",
                                             "prompt_001.dtrace.jsonl"]
        first, _ = load_lines(written[0])
        second, _ = load_lines(written[1])
        assert first["prompt"] == [1, 2]
        assert second["prompt"] == tokenize_prompt("the quick fox",
                                                   TOY_VOCAB_SIZE, TOY_MASK_ID)

    def test_missing_file(self, tmp_path):
        with pytest.raises(SessionError, match="cannot read prompt file"):
            export_prompt_file("toy", tmp_path / "nope.txt", tmp_path / "out")

    def test_blank_file(self, tmp_path):
        pf = tmp_path / "blank.txt"
        pf.write_text("\n  \n", encoding="utf-8")
        with pytest.raises(SessionError, match="holds no prompts"):
            export_prompt_file("toy", pf, tmp_path / "out")


class TestCli:
    def run(self, capsys, *argv):
        code = main(list(argv))
        out = capsys.readouterr()
        return code, out.out, out.err

    def test_export(self, capsys, tmp_path):
        pf = tmp_path / "p.txt"
        pf.write_text("1,2\n", encoding="utf-8")
        code, out, _ = self.run(
            capsys, "export", "--model", "toy-7", "--prompt-file", str(pf),
            "--gen-len", "16", "--steps", "8", "--block", "8",
            "--out", str(tmp_path / "out"),
        )
        assert code == 0
        assert "wrote" in out
        assert "exported 1 trace(s) from model toy-7" in out
        assert (tmp_path / "out" / "prompt_000.dtrace.jsonl").exists()

    def test_unknown_model(self, capsys, tmp_path):
        pf = tmp_path / "p.txt"
        pf.write_text("1,2\n", encoding="utf-8")
        code, _, err = self.run(capsys, "export", "--model", "gpt2",
                                "--prompt-file", str(pf), "--out", str(tmp_path))
        assert code == 2
        assert "unknown model id" in err

    def test_bad_geometry(self, capsys, tmp_path):
        pf = tmp_path / "p.txt"
        pf.write_text("1,2\n", encoding="utf-8")
        code, _, err = self.run(capsys, "export", "--prompt-file", str(pf),
                                "--gen-len", "16", "--block", "5",
                                "--out", str(tmp_path))
        assert code == 2
        assert "must divide gen length" in err

    def test_missing_prompt_file(self, capsys, tmp_path):
        code, _, err = self.run(capsys, "export",
                                "--prompt-file", str(tmp_path / "nope.txt"),
                                "--out", str(tmp_path))
        assert code == 2
        assert "cannot read prompt file" in err

    def test_usage_errors(self, capsys, tmp_path):
        assert self.run(capsys)[0] == 1
        assert self.run(capsys, "export")[0] == 1
        assert self.run(capsys, "frobnicate")[0] == 1
