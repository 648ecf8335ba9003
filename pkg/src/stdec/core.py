"""Shared contracts for block-wise masked-diffusion decoding.

Coordinate conventions used across the package:

* *Window* coordinates index the full token window ``prompt + generation``
  (length ``prompt_len + gen_length``).
* *Generation* coordinates index only the generation window (``0 .. L-1``).
  Predictions, commits, streaks and trace records all use generation
  coordinates; threshold maps live in window coordinates because smoothing
  sees the prompt.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

from .errors import ConfigError, DecodeError

KERNEL_KINDS = ("gaussian", "mean", "triangular")
BOUNDARY_POLICIES = ("replicate", "reflect")

# ThresholdMap.stage values, in pipeline order.
STAGE_INITIAL = "initial"
STAGE_SPATIAL = "spatial"
STAGE_SPATIO_TEMPORAL = "spatio_temporal"


@dataclass(frozen=True)
class Vocab:
    """Token id space with one reserved mask id."""

    size: int
    mask_id: int

    def __post_init__(self) -> None:
        if self.size < 2:
            raise ConfigError(f"vocab size must be >= 2, got {self.size}")
        if not 0 <= self.mask_id < self.size:
            raise ConfigError(
                f"mask_id {self.mask_id} outside vocab of size {self.size}"
            )

    def valid_token(self, token_id: int) -> bool:
        """True for ids that may appear in decoded output (mask excluded)."""
        return 0 <= token_id < self.size and token_id != self.mask_id


@dataclass(frozen=True)
class DecoderConfig:
    """Decoding hyperparameters.

    ``tau_high`` / ``tau_low`` are the masked / decoded initial thresholds,
    ``alpha`` the streak relaxation factor. ``kernel``, ``sigma``, ``radius``
    and ``boundary`` control spatial smoothing. ``gen_length`` tokens are
    generated in ``block_size`` chunks within at most ``max_steps`` denoiser
    steps. ``full_window_queries`` asks the denoiser about every masked
    position each step instead of only the active block.
    """

    tau_high: float = 0.9
    tau_low: float = 0.3
    alpha: float = 0.85
    kernel: str = "gaussian"
    sigma: float = 1.0
    radius: int = 2
    boundary: str = "replicate"
    gen_length: int = 64
    block_size: int = 32
    max_steps: int = 64
    seed: int = 0
    full_window_queries: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.tau_low < self.tau_high <= 1.0:
            raise ConfigError(
                f"need 0 < tau_low < tau_high <= 1, got "
                f"tau_low={self.tau_low}, tau_high={self.tau_high}"
            )
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.kernel not in KERNEL_KINDS:
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if self.kernel == "gaussian" and self.sigma <= 0.0:
            raise ConfigError(f"sigma must be > 0, got {self.sigma}")
        if self.radius < 0:
            raise ConfigError(f"radius must be >= 0, got {self.radius}")
        if self.boundary not in BOUNDARY_POLICIES:
            raise ConfigError(f"unknown boundary policy {self.boundary!r}")
        if self.gen_length < 1:
            raise ConfigError(f"gen_length must be >= 1, got {self.gen_length}")
        if self.block_size < 1 or self.gen_length % self.block_size != 0:
            raise ConfigError(
                f"block_size must be >= 1 and divide gen_length, got "
                f"block_size={self.block_size}, gen_length={self.gen_length}"
            )
        if self.max_steps < 1:
            raise ConfigError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")

    @property
    def num_blocks(self) -> int:
        return self.gen_length // self.block_size

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "DecoderConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class StepPrediction:
    """One denoiser answer: argmax id and confidence per queried position.

    ``positions`` are generation coordinates, strictly ascending. Confidences
    lie in [0, 1]; predicted ids are real tokens, never the mask id.
    """

    positions: np.ndarray
    ids: np.ndarray
    confs: np.ndarray

    def __post_init__(self) -> None:
        self.positions = np.asarray(self.positions, dtype=np.int64)
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.confs = np.asarray(self.confs, dtype=np.float64)

    def validate(self, state: "DecodeState") -> None:
        n = len(self.positions)
        if len(self.ids) != n or len(self.confs) != n:
            raise DecodeError("prediction arrays have mismatched lengths")
        if n == 0:
            raise DecodeError("prediction covers no positions")
        if np.any(np.diff(self.positions) <= 0):
            raise DecodeError("prediction positions must be strictly ascending")
        if self.positions[0] < 0 or self.positions[-1] >= state.gen_length:
            raise DecodeError("prediction positions outside generation window")
        if not np.all(state.masked[state.prompt_len + self.positions]):
            raise DecodeError("prediction covers already-decoded positions")
        vocab = state.vocab
        if np.any(self.ids < 0) or np.any(self.ids >= vocab.size):
            raise DecodeError("predicted id outside vocab")
        if np.any(self.ids == vocab.mask_id):
            raise DecodeError("denoiser predicted the mask id")
        if np.any(self.confs < 0.0) or np.any(self.confs > 1.0):
            raise DecodeError("confidence outside [0, 1]")

    def conf_at(self, positions: np.ndarray) -> np.ndarray:
        """Confidences for a subset of ``self.positions`` (must be present)."""
        idx = np.searchsorted(self.positions, positions)
        if np.any(idx >= len(self.positions)) or np.any(
            self.positions[np.minimum(idx, len(self.positions) - 1)] != positions
        ):
            raise DecodeError("queried position missing from prediction")
        return self.confs[idx]

    def ids_at(self, positions: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.positions, positions)
        if np.any(idx >= len(self.positions)) or np.any(
            self.positions[np.minimum(idx, len(self.positions) - 1)] != positions
        ):
            raise DecodeError("queried position missing from prediction")
        return self.ids[idx]


@dataclass
class ThresholdMap:
    """Per-position commit thresholds over the full token window.

    ``stage`` records how far the pipeline has run: ``initial`` (two-level
    map), ``spatial`` (after kernel smoothing), ``spatio_temporal`` (after
    streak relaxation of masked generation positions).
    """

    values: np.ndarray
    stage: str
    prompt_len: int

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)

    def gen_values(self) -> np.ndarray:
        """Thresholds restricted to the generation window."""
        return self.values[self.prompt_len:]


@dataclass
class DecodeState:
    """Mutable decode-loop state; operations return updated copies.

    ``streak`` counts consecutive repeats of the previous argmax id per
    generation position (reset to 0 on change); ``prev_id`` is -1 and
    ``prev_conf`` NaN where no prediction has been seen yet.
    """

    vocab: Vocab
    prompt_len: int
    gen_length: int
    block_size: int
    step: int
    block_index: int
    tokens: np.ndarray
    masked: np.ndarray
    streak: np.ndarray
    prev_id: np.ndarray
    prev_conf: np.ndarray

    @property
    def window_len(self) -> int:
        return self.prompt_len + self.gen_length

    @property
    def num_blocks(self) -> int:
        return self.gen_length // self.block_size

    @property
    def complete(self) -> bool:
        return not bool(self.masked.any())

    def copy(self) -> "DecodeState":
        return DecodeState(
            vocab=self.vocab,
            prompt_len=self.prompt_len,
            gen_length=self.gen_length,
            block_size=self.block_size,
            step=self.step,
            block_index=self.block_index,
            tokens=self.tokens.copy(),
            masked=self.masked.copy(),
            streak=self.streak.copy(),
            prev_id=self.prev_id.copy(),
            prev_conf=self.prev_conf.copy(),
        )

    def block_range(self) -> tuple[int, int]:
        """Active block as a [lo, hi) span in generation coordinates."""
        lo = self.block_index * self.block_size
        return lo, min(lo + self.block_size, self.gen_length)

    def masked_positions(self) -> np.ndarray:
        """All still-masked positions, generation coordinates, ascending."""
        return np.flatnonzero(self.masked[self.prompt_len:])

    def active_masked_positions(self) -> np.ndarray:
        """Still-masked positions inside the active block."""
        lo, hi = self.block_range()
        pos = np.flatnonzero(self.masked[self.prompt_len + lo : self.prompt_len + hi])
        return pos + lo


def new_state(prompt: Sequence[int], cfg: DecoderConfig, vocab: Vocab) -> DecodeState:
    """Fresh state: prompt decoded, generation window fully masked.

    Prompt ids must be real vocab tokens; the reserved mask id is rejected.
    """
    prompt_arr = np.asarray(list(prompt), dtype=np.int64)
    if prompt_arr.ndim != 1:
        raise ConfigError("prompt must be a flat sequence of token ids")
    for tok in prompt_arr:
        if not vocab.valid_token(int(tok)):
            raise ConfigError(f"invalid prompt token id {int(tok)}")
    p = len(prompt_arr)
    n = p + cfg.gen_length
    tokens = np.full(n, vocab.mask_id, dtype=np.int64)
    tokens[:p] = prompt_arr
    masked = np.zeros(n, dtype=bool)
    masked[p:] = True
    return DecodeState(
        vocab=vocab,
        prompt_len=p,
        gen_length=cfg.gen_length,
        block_size=cfg.block_size,
        step=0,
        block_index=0,
        tokens=tokens,
        masked=masked,
        streak=np.zeros(cfg.gen_length, dtype=np.int64),
        prev_id=np.full(cfg.gen_length, -1, dtype=np.int64),
        prev_conf=np.full(cfg.gen_length, np.nan, dtype=np.float64),
    )


def _check_commit_ids(state: DecodeState, ids: np.ndarray) -> None:
    if np.any(ids < 0) or np.any(ids >= state.vocab.size):
        raise DecodeError("committed id outside vocab")
    if np.any(ids == state.vocab.mask_id):
        raise DecodeError("cannot commit the mask id")


def commit(state: DecodeState, positions: np.ndarray, ids: np.ndarray) -> DecodeState:
    """Write ``ids`` at masked ``positions`` of the active block.

    Advances the step counter and, when the active block empties, the block
    index. Committed tokens are final; recommitting raises.
    """
    positions = np.asarray(positions, dtype=np.int64)
    ids = np.asarray(ids, dtype=np.int64)
    if positions.size == 0:
        raise DecodeError("commit set is empty")
    if positions.size != ids.size:
        raise DecodeError("positions and ids have mismatched lengths")
    if len(np.unique(positions)) != positions.size:
        raise DecodeError("duplicate positions in commit set")
    lo, hi = state.block_range()
    if np.any(positions < lo) or np.any(positions >= hi):
        raise DecodeError(
            f"commit position outside active block [{lo}, {hi})"
        )
    if not np.all(state.masked[state.prompt_len + positions]):
        raise DecodeError("commit position already decoded")
    _check_commit_ids(state, ids)

    out = state.copy()
    out.tokens[out.prompt_len + positions] = ids
    out.masked[out.prompt_len + positions] = False
    out.step += 1
    while out.block_index < out.num_blocks:
        blo, bhi = out.block_range()
        if out.masked[out.prompt_len + blo : out.prompt_len + bhi].any():
            break
        out.block_index += 1
    return out


def force_commit(state: DecodeState, positions: np.ndarray, ids: np.ndarray) -> DecodeState:
    """Commit every remaining masked position at once, ignoring blocks.

    Only used when the step budget runs out; ``positions`` must be exactly
    the still-masked set.
    """
    positions = np.asarray(positions, dtype=np.int64)
    ids = np.asarray(ids, dtype=np.int64)
    remaining = state.masked_positions()
    if positions.size != ids.size:
        raise DecodeError("positions and ids have mismatched lengths")
    if not np.array_equal(np.sort(positions), remaining):
        raise DecodeError("force_commit must cover exactly the masked set")
    _check_commit_ids(state, ids)

    out = state.copy()
    out.tokens[out.prompt_len + positions] = ids
    out.masked[out.prompt_len + positions] = False
    out.step += 1
    out.block_index = out.num_blocks
    return out
