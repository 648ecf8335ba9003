"""Decode trace format: line-delimited JSON, one header then one line per step.

Positions are generation-window coordinates. Floats are serialized with
Python's shortest round-trip repr, so reading a written trace reproduces
confidences and thresholds bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import DecoderConfig, Vocab
from .errors import ConfigError, TraceError

FORMAT_VERSION = 1

_HEADER_REQUIRED = (
    "format_version",
    "prompt",
    "gen_length",
    "block_size",
    "vocab_size",
    "mask_id",
    "policy",
    "config",
)
_STEP_REQUIRED = ("t", "block", "predictions", "committed", "fallback_used")


@dataclass
class TraceHeader:
    prompt: list[int]
    gen_length: int
    block_size: int
    vocab_size: int
    mask_id: int
    policy: str
    policy_params: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    denoiser: str = "unknown"
    seed: int | None = None
    preset: str | None = None
    overrides: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "prompt": list(self.prompt),
            "gen_length": self.gen_length,
            "block_size": self.block_size,
            "vocab_size": self.vocab_size,
            "mask_id": self.mask_id,
            "policy": self.policy,
            "policy_params": self.policy_params,
            "config": self.config,
            "denoiser": self.denoiser,
            "seed": self.seed,
            "preset": self.preset,
            "overrides": self.overrides,
        }


@dataclass
class TraceStep:
    t: int
    block: int
    predictions: list[tuple[int, int, float]]
    committed: list[tuple[int, int]]
    fallback_used: bool
    thresholds: list[tuple[int, float]] | None = None
    forced_final: bool = False

    def to_dict(self) -> dict:
        d = {
            "t": self.t,
            "block": self.block,
            "predictions": [[p, i, c] for p, i, c in self.predictions],
            "committed": [[p, i] for p, i in self.committed],
            "fallback_used": self.fallback_used,
        }
        if self.thresholds is not None:
            d["thresholds"] = [[p, v] for p, v in self.thresholds]
        if self.forced_final:
            d["forced_final"] = True
        return d


@dataclass
class DecodeTrace:
    header: TraceHeader
    steps: list[TraceStep]

    @property
    def steps_used(self) -> int:
        return len(self.steps)

    @property
    def fallback_rate(self) -> float:
        if not self.steps:
            return 0.0
        return sum(1 for s in self.steps if s.fallback_used) / len(self.steps)

    @property
    def forced_final(self) -> bool:
        return bool(self.steps) and self.steps[-1].forced_final

    def gen_tokens(self) -> np.ndarray:
        """Generated token ids reconstructed from the commit records."""
        out = np.full(self.header.gen_length, -1, dtype=np.int64)
        for step in self.steps:
            for pos, tok in step.committed:
                out[pos] = tok
        if np.any(out < 0):
            raise TraceError("trace does not decode the full generation window")
        return out

    def final_tokens(self) -> np.ndarray:
        """Prompt followed by the generated window."""
        return np.concatenate(
            [np.asarray(self.header.prompt, dtype=np.int64), self.gen_tokens()]
        )


def write_trace(trace: DecodeTrace, path: str | Path) -> None:
    """Write header + steps as one JSON object per line."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(trace.header.to_dict(), sort_keys=True))
        fh.write("\n")
        for step in trace.steps:
            fh.write(json.dumps(step.to_dict(), sort_keys=True))
            fh.write("\n")


def _parse_header(data: dict) -> TraceHeader:
    for key in _HEADER_REQUIRED:
        if key not in data:
            raise TraceError(f"header is missing required field {key!r}")
    return TraceHeader(
        prompt=[int(t) for t in data["prompt"]],
        gen_length=int(data["gen_length"]),
        block_size=int(data["block_size"]),
        vocab_size=int(data["vocab_size"]),
        mask_id=int(data["mask_id"]),
        policy=str(data["policy"]),
        policy_params=dict(data.get("policy_params", {})),
        config=dict(data["config"]),
        denoiser=str(data.get("denoiser", "unknown")),
        seed=data.get("seed"),
        preset=data.get("preset"),
        overrides=dict(data.get("overrides", {})),
        format_version=int(data["format_version"]),
    )


def _parse_step(data: dict, line_no: int) -> TraceStep:
    for key in _STEP_REQUIRED:
        if key not in data:
            raise TraceError(f"line {line_no}: step is missing required field {key!r}")
    try:
        predictions = [(int(p), int(i), float(c)) for p, i, c in data["predictions"]]
        committed = [(int(p), int(i)) for p, i in data["committed"]]
        thresholds = None
        if data.get("thresholds") is not None:
            thresholds = [(int(p), float(v)) for p, v in data["thresholds"]]
    except (TypeError, ValueError) as exc:
        raise TraceError(f"line {line_no}: malformed step record ({exc})") from exc
    return TraceStep(
        t=int(data["t"]),
        block=int(data["block"]),
        predictions=predictions,
        committed=committed,
        fallback_used=bool(data["fallback_used"]),
        thresholds=thresholds,
        forced_final=bool(data.get("forced_final", False)),
    )


def read_trace(path: str | Path, validate: bool = True) -> DecodeTrace:
    """Parse a trace file; by default also run full semantic validation."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    records = []
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            records.append((i + 1, json.loads(line)))
        except json.JSONDecodeError as exc:
            raise TraceError(f"line {i + 1}: not valid JSON ({exc.msg})") from exc
    if not records:
        raise TraceError("trace file is empty")
    header = _parse_header(records[0][1])
    steps = [_parse_step(data, line_no) for line_no, data in records[1:]]
    trace = DecodeTrace(header=header, steps=steps)
    if validate:
        validate_trace(trace)
    return trace


def validate_trace(trace: DecodeTrace) -> None:
    """Replay the trace and check every structural and semantic invariant.

    Raises TraceError (with the offending step index where applicable) on:
    unsupported format version, inconsistent header/config, malformed or
    out-of-range predictions, confidence outside [0, 1], mask-id
    predictions, commits of unpredicted or already-decoded positions,
    commits outside the active block, commit ids that contradict the
    prediction, commit sets inconsistent with recorded thresholds, a
    non-final forced step, and traces that end with masked positions left.
    """
    h = trace.header
    if h.format_version != FORMAT_VERSION:
        raise TraceError(
            f"unsupported format_version {h.format_version} (expected {FORMAT_VERSION})"
        )
    try:
        vocab = Vocab(size=h.vocab_size, mask_id=h.mask_id)
        cfg = DecoderConfig.from_dict(h.config)
    except ConfigError as exc:
        raise TraceError(f"invalid header: {exc}") from exc
    if cfg.gen_length != h.gen_length or cfg.block_size != h.block_size:
        raise TraceError("header gen_length/block_size disagree with config")
    for tok in h.prompt:
        if not vocab.valid_token(tok):
            raise TraceError(f"invalid prompt token id {tok}")

    L, B = h.gen_length, h.block_size
    num_blocks = L // B
    masked = np.ones(L, dtype=bool)
    block = 0

    for k, step in enumerate(trace.steps):
        t = step.t
        if t != k:
            raise TraceError(f"expected step index {k}, found {t}", step=t)
        if step.forced_final and k != len(trace.steps) - 1:
            raise TraceError("forced_final on a non-final step", step=t)
        if step.block != block:
            raise TraceError(
                f"recorded block {step.block}, replay expects {block}", step=t
            )

        blk_lo, blk_hi = block * B, block * B + B
        pred_map: dict[int, tuple[int, float]] = {}
        prev_pos = -1
        for pos, tok, conf in step.predictions:
            if not 0 <= pos < L:
                raise TraceError(f"prediction position {pos} outside window", step=t)
            if pos <= prev_pos:
                raise TraceError("prediction positions not strictly ascending", step=t)
            prev_pos = pos
            if not masked[pos]:
                raise TraceError(
                    f"prediction covers already-decoded position {pos}", step=t
                )
            if (
                not cfg.full_window_queries
                and not step.forced_final
                and not blk_lo <= pos < blk_hi
            ):
                raise TraceError(
                    f"prediction position {pos} outside active block "
                    f"[{blk_lo}, {blk_hi})",
                    step=t,
                )
            if not vocab.valid_token(tok):
                raise TraceError(f"predicted id {tok} invalid (position {pos})", step=t)
            if not 0.0 <= conf <= 1.0:
                raise TraceError(f"confidence {conf} outside [0, 1]", step=t)
            pred_map[pos] = (tok, conf)

        thr_map: dict[int, float] | None = None
        if step.thresholds is not None:
            thr_map = {}
            for pos, val in step.thresholds:
                if pos not in pred_map:
                    raise TraceError(
                        f"threshold recorded for unpredicted position {pos}", step=t
                    )
                if not np.isfinite(val):
                    raise TraceError(f"non-finite threshold at position {pos}", step=t)
                thr_map[pos] = val

        if not step.committed:
            raise TraceError("empty commit set", step=t)
        lo, hi = blk_lo, blk_hi
        committed_pos = set()
        for pos, tok in step.committed:
            if pos not in pred_map:
                raise TraceError(f"committed position {pos} was not predicted", step=t)
            if pos in committed_pos:
                raise TraceError(f"position {pos} committed twice in one step", step=t)
            if tok != pred_map[pos][0]:
                raise TraceError(
                    f"committed id {tok} differs from predicted id at {pos}", step=t
                )
            if not step.forced_final and not lo <= pos < hi:
                raise TraceError(
                    f"committed position {pos} outside active block [{lo}, {hi})",
                    step=t,
                )
            committed_pos.add(pos)

        if step.forced_final:
            remaining = set(int(p) for p in np.flatnonzero(masked))
            if committed_pos != remaining:
                raise TraceError(
                    "forced-final step must commit exactly the remaining positions",
                    step=t,
                )
        elif thr_map is not None:
            eligible = [p for p in pred_map if lo <= p < hi]
            missing = [p for p in eligible if p not in thr_map]
            if missing:
                raise TraceError(
                    f"no threshold recorded for eligible position {missing[0]}", step=t
                )
            cleared = [p for p in eligible if pred_map[p][1] >= thr_map[p]]
            if cleared:
                expected, expect_fallback = set(cleared), False
            else:
                best = max(eligible, key=lambda p: (pred_map[p][1], -p))
                expected, expect_fallback = {best}, True
            if committed_pos != expected:
                raise TraceError(
                    "committed set inconsistent with recorded thresholds", step=t
                )
            if step.fallback_used != expect_fallback:
                raise TraceError("fallback_used flag inconsistent", step=t)

        masked[list(committed_pos)] = False
        while block < num_blocks and not masked[block * B : (block + 1) * B].any():
            block += 1

    if masked.any():
        raise TraceError(
            f"trace ends with {int(masked.sum())} positions still masked"
        )
