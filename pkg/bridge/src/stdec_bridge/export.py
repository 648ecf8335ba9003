"""Trace export: run a model's unmasking loop and record every step.

The capture schedule is deliberately policy-free: each step predicts all
masked positions of the active block and unmasks the k most confident of
them, ties to the lowest position. That ordering matches the engine's own
top_k baseline, so the header declares policy "top_k" with the effective k
and the engine can replay the file onto the identical commit sequence.

Output is the engine's .dtrace.jsonl format, written directly; the bridge
talks to the engine only through files and its CLI, never imports.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import torch

from .errors import SessionError
from .model import ToyMaskedLM, load_model

FORMAT_VERSION = 1

# logits [n, vocab] -> (argmax ids, confidences) for the queried rows
ReduceFn = Callable[[torch.Tensor, int], tuple[list[int], list[float]]]

_INT_LINE = re.compile(r"^[\s,]*-?\d+(?:[\s,]+-?\d+)*[\s,]*$")


def argmax_confidence(logits: torch.Tensor, mask_id: int) -> tuple[list[int], list[float]]:
    """Default capture hook: post-softmax argmax id and its probability.

    The mask-id logit is suppressed before the softmax, so the distribution
    renormalizes over real tokens and the argmax can never be the mask id.
    """
    logits = logits.detach().to(torch.float32).clone()
    logits[:, mask_id] = float("-inf")
    probs = torch.softmax(logits, dim=-1)
    confs, ids = probs.max(dim=-1)
    return [int(i) for i in ids], [float(c) for c in confs]


def tokenize_prompt(line: str, vocab_size: int, mask_id: int) -> list[int]:
    """Token ids for one prompt line.

    Lines of comma/space separated integers are used verbatim and checked
    against the vocab; any other line is hashed word by word into stable
    ids that skip the mask id.
    """
    if _INT_LINE.match(line):
        ids = [int(tok) for tok in re.split(r"[\s,]+", line.strip()) if tok]
        for tok in ids:
            if not 0 <= tok < vocab_size or tok == mask_id:
                raise SessionError(
                    f"prompt token id {tok} does not fit the model vocab "
                    f"(size {vocab_size}, mask id {mask_id})"
                )
        return ids
    ids = []
    for word in line.split():
        digest = hashlib.sha256(word.encode("utf-8")).digest()
        h = int.from_bytes(digest[:8], "big") % (vocab_size - 1)
        ids.append(h + 1 if h >= mask_id else h)
    return ids


@dataclass
class ExportSession:
    """One prompt's export: model identity, tokenized prompt, run geometry.

    ``reduce`` is the per-step capture hook turning the queried logit rows
    into (id, confidence) pairs.
    """

    model_id: str
    prompt_text: str
    prompt_ids: list[int]
    gen_length: int = 64
    steps: int = 16
    block_size: int = 32
    reduce: ReduceFn = field(default=argmax_confidence)

    def __post_init__(self) -> None:
        if self.gen_length < 1:
            raise SessionError(f"gen length must be >= 1, got {self.gen_length}")
        if self.steps < 1:
            raise SessionError(f"steps must be >= 1, got {self.steps}")
        if self.block_size < 1 or self.gen_length % self.block_size != 0:
            raise SessionError(
                f"block size {self.block_size} must divide gen length {self.gen_length}"
            )

    @property
    def commits_per_step(self) -> int:
        """Tokens unmasked per step so the run lands near the step budget."""
        return max(1, self.gen_length // self.steps)

    @classmethod
    def for_prompt(cls, model: ToyMaskedLM, model_id: str, text: str, *,
                   gen_length: int = 64, steps: int = 16, block_size: int = 32,
                   reduce: ReduceFn = argmax_confidence) -> "ExportSession":
        return cls(
            model_id=model_id,
            prompt_text=text,
            prompt_ids=tokenize_prompt(text, model.vocab_size, model.mask_id),
            gen_length=gen_length,
            steps=steps,
            block_size=block_size,
            reduce=reduce,
        )


def _header(session: ExportSession, model: ToyMaskedLM) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "prompt": list(session.prompt_ids),
        "gen_length": session.gen_length,
        "block_size": session.block_size,
        "vocab_size": model.vocab_size,
        "mask_id": model.mask_id,
        "policy": "top_k",
        "policy_params": {"k": session.commits_per_step},
        "config": {
            "gen_length": session.gen_length,
            "block_size": session.block_size,
            "max_steps": session.gen_length,
        },
        "denoiser": "bridge",
        "seed": model.seed,
        "preset": None,
        "overrides": {"model": session.model_id},
    }


def _run_capture(session: ExportSession, model: ToyMaskedLM) -> list[dict]:
    L, B, k = session.gen_length, session.block_size, session.commits_per_step
    mask = model.mask_id
    for tok in session.prompt_ids:
        if not 0 <= tok < model.vocab_size or tok == mask:
            raise SessionError(
                f"prompt token id {tok} does not fit the model vocab "
                f"(size {model.vocab_size}, mask id {mask})"
            )
    p_len = len(session.prompt_ids)
    seq = torch.tensor(session.prompt_ids + [mask] * L, dtype=torch.long)
    masked = [True] * L
    steps: list[dict] = []
    t = 0
    while any(masked):
        block = next(b for b in range(L // B) if any(masked[b * B:(b + 1) * B]))
        qpos = [p for p in range(block * B, block * B + B) if masked[p]]
        try:
            with torch.no_grad():
                logits = model(seq)
            ids, confs = session.reduce(logits[[p_len + p for p in qpos]], mask)
        except Exception as exc:
            raise SessionError(f"step {t}: capture failed ({exc})") from exc
        if len(ids) != len(qpos) or len(confs) != len(qpos):
            raise SessionError(
                f"step {t}: capture hook returned {len(ids)} ids and "
                f"{len(confs)} confidences for {len(qpos)} positions"
            )
        for pos, tok, conf in zip(qpos, ids, confs):
            if not 0 <= tok < model.vocab_size or tok == mask:
                raise SessionError(
                    f"step {t}: captured id {tok} at position {pos} is not a real token"
                )
            if not 0.0 <= conf <= 1.0:
                raise SessionError(
                    f"step {t}: captured confidence {conf} at position {pos} "
                    f"outside [0, 1]"
                )
        order = sorted(range(len(qpos)), key=lambda j: (-confs[j], qpos[j]))
        chosen = sorted(order[: min(k, len(qpos))])
        committed = [[qpos[j], ids[j]] for j in chosen]
        steps.append({
            "t": t,
            "block": block,
            "predictions": [[p, i, c] for p, i, c in zip(qpos, ids, confs)],
            "committed": committed,
            "fallback_used": False,
        })
        for pos, tok in committed:
            seq[p_len + pos] = tok
            masked[pos] = False
        t += 1
    return steps


def export_trace(session: ExportSession, model: ToyMaskedLM,
                 out_path: str | Path) -> Path:
    """Run one session's capture loop and write its trace file."""
    out_path = Path(out_path)
    steps = _run_capture(session, model)
    lines = [json.dumps(_header(session, model), sort_keys=True)]
    lines.extend(json.dumps(step, sort_keys=True) for step in steps)
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return out_path


def export_prompt_file(model_id: str, prompt_path: str | Path,
                       out_dir: str | Path, *, gen_length: int = 64,
                       steps: int = 16, block_size: int = 32) -> list[Path]:
    """Export one trace per non-blank line of ``prompt_path`` into ``out_dir``."""
    model = load_model(model_id)
    try:
        text = Path(prompt_path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SessionError(f"cannot read prompt file {prompt_path}: {exc}") from exc
    prompts = [line for line in text.splitlines() if line.strip()]
    if not prompts:
        raise SessionError(f"prompt file {prompt_path} holds no prompts")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for i, line in enumerate(prompts):
        session = ExportSession.for_prompt(
            model, model_id, line,
            gen_length=gen_length, steps=steps, block_size=block_size,
        )
        written.append(export_trace(session, model, out_dir / f"prompt_{i:03d}.dtrace.jsonl"))
    return written
