"""Reference denoisers: trace replay and a seeded synthetic model.

The synthetic denoiser draws all randomness from streams keyed by
(seed, step); within a step it draws fixed-length vectors covering the
whole generation window, so the flip and noise values at a given
(seed, step, position) never depend on which positions are queried or on
the commit policy. Paired seeds therefore see identical randomness across
policies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DecodeState, StepPrediction, Vocab
from .errors import ConfigError, ReplayError
from .trace import DecodeTrace

# Window half-width for the decoded-neighbor confidence term.
NEIGHBOR_RADIUS = 2

# Stream tag separating the ground-truth draw from per-step streams.
_GROUND_STREAM = 0x67726F756E64


@dataclass(frozen=True, eq=False)
class SyntheticPreset:
    """Behavioral profile of the synthetic denoiser.

    ``flip_prob`` is the base probability of predicting a wrong id; it
    decays linearly to zero by step gen_length/2. Confidence is
    ``conf_base`` plus ``conf_neighbor_gain`` times the decoded fraction
    of the +-2 neighborhood, plus ``conf_streak_gain`` times
    min(streak, 3)/3, plus Gaussian noise scaled by ``noise_scale``,
    clipped to [0, 1]. ``seed`` and ``ground_truth`` may be pinned here
    (e.g. by a preset file) or supplied per run; when ``ground_truth`` is
    absent it is derived deterministically from the seed.
    """

    name: str
    flip_prob: float
    conf_base: float
    conf_neighbor_gain: float
    conf_streak_gain: float
    noise_scale: float
    seed: int | None = None
    ground_truth: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.flip_prob < 1.0:
            raise ConfigError(f"flip_prob must be in [0, 1), got {self.flip_prob}")
        if not 0.0 <= self.conf_base <= 1.0:
            raise ConfigError(f"conf_base must be in [0, 1], got {self.conf_base}")
        if self.conf_neighbor_gain < 0 or self.conf_streak_gain < 0 or self.noise_scale < 0:
            raise ConfigError("preset gains and noise_scale must be >= 0")
        # Keeps the pre-clip confidence from exceeding 1 except in the
        # extreme noise tail, so clipping rarely distorts the model.
        ceiling = (
            self.conf_base
            + self.conf_neighbor_gain
            + self.conf_streak_gain
            + 3.0 * self.noise_scale
        )
        if ceiling > 1.0 + 1e-12:
            raise ConfigError(
                f"conf_base + gains + 3 * noise_scale must be <= 1, got {ceiling}"
            )


PRESETS: dict[str, SyntheticPreset] = {
    p.name: p
    for p in (
        SyntheticPreset(
            name="stable-95",
            flip_prob=0.05,
            conf_base=0.4,
            conf_neighbor_gain=0.3,
            conf_streak_gain=0.2,
            noise_scale=0.02,
        ),
        SyntheticPreset(
            name="unstable",
            flip_prob=0.5,
            conf_base=0.3,
            conf_neighbor_gain=0.1,
            conf_streak_gain=0.05,
            noise_scale=0.05,
        ),
        SyntheticPreset(
            name="degenerate-oracle",
            flip_prob=0.0,
            conf_base=1.0,
            conf_neighbor_gain=0.0,
            conf_streak_gain=0.0,
            noise_scale=0.0,
        ),
    )
}


def get_preset(name: str) -> SyntheticPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r} (known: {', '.join(sorted(PRESETS))})"
        ) from None


def load_preset(path: str | Path) -> SyntheticPreset:
    """Load a preset from a JSON file holding the SyntheticPreset fields."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read preset file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("preset file must hold a JSON object")
    known = set(SyntheticPreset.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown preset fields: {sorted(unknown)}")
    if data.get("ground_truth") is not None:
        data["ground_truth"] = tuple(int(t) for t in data["ground_truth"])
    try:
        return SyntheticPreset(**data)
    except TypeError as exc:
        raise ConfigError(f"malformed preset file {path}: {exc}") from exc


def resolve_preset(name_or_path: str) -> SyntheticPreset:
    """Built-in preset name, or a path to a preset JSON file."""
    if name_or_path in PRESETS:
        return PRESETS[name_or_path]
    if name_or_path.endswith(".json") or Path(name_or_path).exists():
        return load_preset(name_or_path)
    return get_preset(name_or_path)


def ground_truth(seed: int, gen_length: int, vocab: Vocab) -> np.ndarray:
    """Deterministic target sequence: uniform over non-mask ids."""
    rng = np.random.default_rng([seed, _GROUND_STREAM])
    raw = rng.integers(0, vocab.size - 1, size=gen_length)
    return (raw + (raw >= vocab.mask_id)).astype(np.int64)


def _decoded_neighbor_fraction(state: DecodeState, positions: np.ndarray) -> np.ndarray:
    """Fraction of existing +-NEIGHBOR_RADIUS window neighbors already decoded.

    The prompt counts as decoded context; the center position itself is
    excluded (it is masked when queried anyway).
    """
    decoded = (~state.masked).astype(np.float64)
    csum = np.concatenate([[0.0], np.cumsum(decoded)])
    n = state.window_len
    w = state.prompt_len + positions
    lo = np.maximum(0, w - NEIGHBOR_RADIUS)
    hi = np.minimum(n, w + NEIGHBOR_RADIUS + 1)
    count = csum[hi] - csum[lo] - decoded[w]
    existing = (hi - lo - 1).astype(np.float64)
    return np.divide(count, existing, out=np.zeros_like(count), where=existing > 0)


def synthetic_predict(
    preset: SyntheticPreset,
    state: DecodeState,
    seed: int,
    positions: np.ndarray | None = None,
    truth: np.ndarray | None = None,
) -> StepPrediction:
    """One synthetic denoiser step for the queried masked positions.

    ``positions`` defaults to the active block's masked set. The random
    stream is fully determined by (seed, state.step, position).
    """
    if positions is None:
        positions = state.active_masked_positions()
    positions = np.asarray(positions, dtype=np.int64)
    vocab = state.vocab
    L = state.gen_length
    if truth is None:
        truth = ground_truth(seed, L, vocab)
    t = state.step

    rng = np.random.default_rng([seed, t])
    u_flip = rng.random(L)
    wrong_raw = rng.integers(0, max(vocab.size - 2, 1), size=L)
    noise = rng.standard_normal(L)

    p_eff = preset.flip_prob * max(0.0, 1.0 - t / (L / 2.0))
    tru = truth[positions]
    if vocab.size <= 2:
        wrong = tru.copy()
    else:
        e1 = np.minimum(vocab.mask_id, tru)
        e2 = np.maximum(vocab.mask_id, tru)
        wrong = wrong_raw[positions] + (wrong_raw[positions] >= e1)
        wrong = wrong + (wrong >= e2)
    flip = u_flip[positions] < p_eff
    ids = np.where(flip, wrong, tru)

    frac = _decoded_neighbor_fraction(state, positions)
    streak_term = np.minimum(state.streak[positions], 3) / 3.0
    confs = np.clip(
        preset.conf_base
        + preset.conf_neighbor_gain * frac
        + preset.conf_streak_gain * streak_term
        + preset.noise_scale * noise[positions],
        0.0,
        1.0,
    )
    return StepPrediction(positions=positions, ids=ids, confs=confs)


class SyntheticDenoiser:
    """Stateless-per-step synthetic model bound to a preset and seed."""

    name = "synthetic"

    def __init__(
        self,
        preset: SyntheticPreset | str,
        vocab: Vocab,
        gen_length: int,
        seed: int | None = None,
    ):
        self.preset = resolve_preset(preset) if isinstance(preset, str) else preset
        self.vocab = vocab
        self.gen_length = gen_length
        if seed is None:
            seed = self.preset.seed
        if seed is None:
            raise ConfigError("synthetic denoiser needs a seed (preset pins none)")
        self.seed = int(seed)
        if self.preset.ground_truth is not None:
            truth = np.asarray(self.preset.ground_truth, dtype=np.int64)
            if truth.shape != (gen_length,):
                raise ConfigError(
                    f"preset ground_truth has length {truth.size}, need {gen_length}"
                )
            for tok in truth:
                if not vocab.valid_token(int(tok)):
                    raise ConfigError(f"invalid ground_truth token id {int(tok)}")
            self.truth = truth
        else:
            self.truth = ground_truth(self.seed, gen_length, vocab)

    @property
    def preset_name(self) -> str:
        return self.preset.name

    def predict(self, state: DecodeState, positions: np.ndarray) -> StepPrediction:
        return synthetic_predict(self.preset, state, self.seed, positions, self.truth)


def scripted_predict(
    trace: DecodeTrace, state: DecodeState, positions: np.ndarray | None = None
) -> StepPrediction:
    """Replay recorded predictions for step ``state.step``.

    ``positions`` defaults to the active block's masked set. Raises
    ReplayError when the trace has no such step or lacks any queried
    position; that happens when the replaying policy's mask schedule
    diverges from the recorded run.
    """
    if positions is None:
        positions = state.active_masked_positions()
    positions = np.asarray(positions, dtype=np.int64)
    t = state.step
    if t >= len(trace.steps):
        raise ReplayError(f"trace has no step {t} to replay")
    recorded = {pos: (tok, conf) for pos, tok, conf in trace.steps[t].predictions}
    ids = np.empty(positions.size, dtype=np.int64)
    confs = np.empty(positions.size, dtype=np.float64)
    for i, pos in enumerate(positions):
        if int(pos) not in recorded:
            raise ReplayError(
                f"step {t} of the trace has no prediction for position {int(pos)}; "
                "replay schedule diverged from the recorded run"
            )
        ids[i], confs[i] = recorded[int(pos)]
    return StepPrediction(positions=positions, ids=ids, confs=confs)


class ScriptedDenoiser:
    """Denoiser that replays the predictions recorded in a trace."""

    name = "scripted"

    def __init__(self, trace: DecodeTrace):
        self.trace = trace
        self.seed = trace.header.seed
        self.preset_name = trace.header.preset

    def predict(self, state: DecodeState, positions: np.ndarray) -> StepPrediction:
        return scripted_predict(self.trace, state, positions)
