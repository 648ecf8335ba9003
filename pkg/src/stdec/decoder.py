"""Token-adaptive threshold decoding.

The commit rule per step: start from a two-level threshold map (low over
decoded positions, high over masked ones), smooth it spatially so masked
positions near decoded context see lowered thresholds, then relax the
threshold of positions whose argmax id has been stable across steps and
whose previous confidence already cleared the decoded level. Positions
whose confidence meets their adaptive threshold commit; if none do, the
single most confident eligible position commits so progress is guaranteed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .core import (
    STAGE_INITIAL,
    STAGE_SPATIO_TEMPORAL,
    DecoderConfig,
    DecodeState,
    StepPrediction,
    ThresholdMap,
    Vocab,
    commit,
    force_commit,
    new_state,
)
from .errors import ConfigError, DecodeError
from .smoothing import SmoothingKernel, kernel_from_config, smooth
from .trace import DecodeTrace, TraceHeader, TraceStep


@dataclass
class RelaxationVector:
    """Per-generation-position multiplier; entries are exactly 1 or alpha."""

    factors: np.ndarray
    alpha: float


@dataclass
class StepOutcome:
    """Result of one commit selection."""

    prediction: StepPrediction
    thresholds: ThresholdMap | None
    committed: np.ndarray
    committed_ids: np.ndarray
    fallback_used: bool


class Denoiser(Protocol):
    """Anything that can answer argmax id + confidence for masked positions."""

    name: str

    def predict(self, state: DecodeState, positions: np.ndarray) -> StepPrediction:
        ...


class Policy(Protocol):
    """Commit-set selection strategy plugged into the shared decode loop."""

    name: str

    def params(self) -> dict:
        ...

    def select(
        self,
        state: DecodeState,
        pred: StepPrediction,
        eligible: np.ndarray,
        cfg: DecoderConfig,
        gate_conf: np.ndarray,
    ) -> StepOutcome:
        ...


def initial_threshold_map(state: DecodeState, cfg: DecoderConfig) -> ThresholdMap:
    """Two-level map over the full window: tau_low decoded, tau_high masked."""
    values = np.where(state.masked, cfg.tau_high, cfg.tau_low)
    return ThresholdMap(values=values, stage=STAGE_INITIAL, prompt_len=state.prompt_len)


def update_streaks(state: DecodeState, pred: StepPrediction) -> DecodeState:
    """Advance id streaks for the predicted positions.

    A position's streak increments when its argmax id repeats the previous
    step's and resets to 0 otherwise; first-ever predictions start at 0.
    Stores the prediction as the new previous id/confidence.
    """
    out = state.copy()
    pos = pred.positions
    if not np.all(out.masked[out.prompt_len + pos]):
        raise DecodeError("streak update got a prediction for a decoded position")
    same = pred.ids == out.prev_id[pos]
    out.streak[pos] = np.where(same, out.streak[pos] + 1, 0)
    out.prev_id[pos] = pred.ids
    out.prev_conf[pos] = pred.confs
    return out


def relaxation_factors(
    state: DecodeState,
    cfg: DecoderConfig,
    gate_conf: np.ndarray | None = None,
) -> RelaxationVector:
    """Streak-based threshold relaxation over the generation window.

    A position earns factor alpha when its streak is at least 2 and its
    gate confidence (the confidence from the step before the current
    prediction) is present and at least tau_low; everything else gets 1.
    """
    gate = state.prev_conf if gate_conf is None else np.asarray(gate_conf, dtype=np.float64)
    if gate.shape != (state.gen_length,):
        raise ConfigError("gate_conf must cover the generation window")
    with np.errstate(invalid="ignore"):
        relax = (state.streak >= 2) & ~np.isnan(gate) & (gate >= cfg.tau_low)
    factors = np.where(relax, cfg.alpha, 1.0)
    return RelaxationVector(factors=factors, alpha=cfg.alpha)


def adaptive_thresholds(
    state: DecodeState,
    cfg: DecoderConfig,
    kernel: SmoothingKernel | None = None,
    gate_conf: np.ndarray | None = None,
) -> ThresholdMap:
    """Full pipeline: initial map -> spatial smoothing -> streak relaxation.

    Relaxation multiplies only masked generation positions; decoded ones
    keep their smoothed value. Smoothing always sees the whole window,
    prompt included.
    """
    if kernel is None:
        kernel = kernel_from_config(cfg)
    init = initial_threshold_map(state, cfg)
    values = smooth(init.values, kernel, cfg.boundary)
    factors = relaxation_factors(state, cfg, gate_conf).factors
    gen = slice(state.prompt_len, None)
    masked_gen = state.masked[gen]
    out = values.copy()
    out[gen] = np.where(masked_gen, out[gen] * factors, out[gen])
    return ThresholdMap(values=out, stage=STAGE_SPATIO_TEMPORAL, prompt_len=state.prompt_len)


def select_commit_set(
    pred: StepPrediction,
    thresholds: ThresholdMap,
    eligible: np.ndarray,
) -> StepOutcome:
    """Positions whose confidence clears their threshold; argmax fallback.

    ``eligible`` (generation coordinates, ascending) must be covered by the
    prediction. When no position clears, the single highest-confidence
    eligible position commits, ties broken toward the lowest position.
    """
    eligible = np.asarray(eligible, dtype=np.int64)
    if eligible.size == 0:
        raise DecodeError("no eligible positions to select from")
    confs = pred.conf_at(eligible)
    thr = thresholds.values[thresholds.prompt_len + eligible]
    chosen = eligible[confs >= thr]
    fallback_used = False
    if chosen.size == 0:
        chosen = eligible[np.argmax(confs) : np.argmax(confs) + 1]
        fallback_used = True
    return StepOutcome(
        prediction=pred,
        thresholds=thresholds,
        committed=chosen,
        committed_ids=pred.ids_at(chosen),
        fallback_used=fallback_used,
    )


class StdecPolicy:
    """Adaptive-threshold commit policy (the package's namesake)."""

    name = "stdec"

    def __init__(self, kernel: SmoothingKernel | None = None):
        self._kernel = kernel

    def params(self) -> dict:
        return {}

    def select(
        self,
        state: DecodeState,
        pred: StepPrediction,
        eligible: np.ndarray,
        cfg: DecoderConfig,
        gate_conf: np.ndarray,
    ) -> StepOutcome:
        if self._kernel is None:
            self._kernel = kernel_from_config(cfg)
        thr = adaptive_thresholds(state, cfg, self._kernel, gate_conf)
        return select_commit_set(pred, thr, eligible)


def _threshold_records(outcome: StepOutcome) -> list[tuple[int, float]] | None:
    if outcome.thresholds is None:
        return None
    pred = outcome.prediction
    vals = outcome.thresholds.values[outcome.thresholds.prompt_len + pred.positions]
    return [(int(p), float(v)) for p, v in zip(pred.positions, vals)]


def decode(
    denoiser: Denoiser,
    prompt: list[int] | np.ndarray,
    cfg: DecoderConfig,
    vocab: Vocab,
    policy: Policy | None = None,
) -> tuple[np.ndarray, DecodeTrace]:
    """Run the block-wise decode loop to completion.

    Each step queries the denoiser for the active block's masked positions
    (or every masked position under ``full_window_queries``), updates
    streaks, selects a commit set via ``policy`` (adaptive thresholds by
    default) restricted to the active block, and commits it. If the step
    budget runs out, one final query force-commits every remaining
    position, flagged in the trace. Returns the full token window and the
    step-by-step trace.
    """
    if policy is None:
        policy = StdecPolicy()
    state = new_state(prompt, cfg, vocab)
    steps: list[TraceStep] = []

    while not state.complete and state.step < cfg.max_steps:
        eligible = state.active_masked_positions()
        query = state.masked_positions() if cfg.full_window_queries else eligible
        pred = denoiser.predict(state, query)
        pred.validate(state)
        if not np.array_equal(pred.positions, query):
            raise DecodeError("denoiser must answer exactly the queried positions")
        gate_conf = state.prev_conf.copy()
        state = update_streaks(state, pred)
        outcome = policy.select(state, pred, eligible, cfg, gate_conf)
        steps.append(
            TraceStep(
                t=state.step,
                block=state.block_index,
                predictions=[
                    (int(p), int(i), float(c))
                    for p, i, c in zip(pred.positions, pred.ids, pred.confs)
                ],
                committed=[
                    (int(p), int(i))
                    for p, i in zip(outcome.committed, outcome.committed_ids)
                ],
                fallback_used=bool(outcome.fallback_used),
                thresholds=_threshold_records(outcome),
            )
        )
        state = commit(state, outcome.committed, outcome.committed_ids)

    if not state.complete:
        # Step budget exhausted: one last query, then commit everything left.
        remaining = state.masked_positions()
        pred = denoiser.predict(state, remaining)
        pred.validate(state)
        if not np.array_equal(pred.positions, remaining):
            raise DecodeError("denoiser must answer exactly the queried positions")
        state = update_streaks(state, pred)
        steps.append(
            TraceStep(
                t=state.step,
                block=state.block_index,
                predictions=[
                    (int(p), int(i), float(c))
                    for p, i, c in zip(pred.positions, pred.ids, pred.confs)
                ],
                committed=[(int(p), int(i)) for p, i in zip(pred.positions, pred.ids)],
                fallback_used=False,
                thresholds=None,
                forced_final=True,
            )
        )
        state = force_commit(state, pred.positions, pred.ids)

    header = TraceHeader(
        prompt=[int(t) for t in state.tokens[: state.prompt_len]],
        gen_length=cfg.gen_length,
        block_size=cfg.block_size,
        vocab_size=vocab.size,
        mask_id=vocab.mask_id,
        policy=policy.name,
        policy_params=policy.params(),
        config=cfg.to_dict(),
        denoiser=getattr(denoiser, "name", "unknown"),
        seed=getattr(denoiser, "seed", None),
        preset=getattr(denoiser, "preset_name", None),
    )
    return state.tokens.copy(), DecodeTrace(header=header, steps=steps)
