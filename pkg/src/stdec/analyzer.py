"""Stability analysis over decode traces.

Spatial: how much decoded context surrounded each token when it committed
(strict past only; tokens committed in the same step do not count for each
other). Temporal: replay of id streaks from the recorded predictions,
independent of whatever the decoder tracked internally.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .trace import DecodeTrace


@dataclass
class SpatialStabilityReport:
    """Decoded-neighbor context at commit time.

    ``neighbor_counts[i]`` is the number of already-decoded window
    neighbors within ``radius`` of generation position i at the step it
    committed. ``fraction_at_least[s]`` is the fraction of tokens with at
    least s decoded neighbors, s = 0 .. 2 * radius.
    """

    radius: int
    include_prompt: bool
    n_tokens: int
    neighbor_counts: list[int]
    fraction_at_least: list[float]

    def to_dict(self) -> dict:
        return {
            "radius": self.radius,
            "include_prompt": self.include_prompt,
            "n_tokens": self.n_tokens,
            "neighbor_counts": self.neighbor_counts,
            "fraction_at_least": self.fraction_at_least,
        }


@dataclass
class TemporalStabilityReport:
    """Id-streak statistics at commit time, replayed from the trace.

    ``streak_at_commit[i]`` is position i's streak when it committed
    (consecutive repeats of the argmax id over its prediction history).
    ``fraction_at_least[k]`` is the fraction of tokens with streak >= k.
    ``mean_conf_first_stable[k]`` / ``mean_conf_commit[k]`` average, over
    tokens with streak >= k, the confidence at the first id-stable step
    (where the final id run began) and at the commit step; ``gap[k]`` is
    their difference. Buckets with no members hold None.
    """

    k_max: int
    n_tokens: int
    streak_at_commit: list[int]
    first_stable_step: list[int]
    commit_step: list[int]
    fraction_at_least: list[float]
    mean_conf_first_stable: list[float | None]
    mean_conf_commit: list[float | None]
    gap: list[float | None]

    def to_dict(self) -> dict:
        return {
            "k_max": self.k_max,
            "n_tokens": self.n_tokens,
            "streak_at_commit": self.streak_at_commit,
            "first_stable_step": self.first_stable_step,
            "commit_step": self.commit_step,
            "fraction_at_least": self.fraction_at_least,
            "mean_conf_first_stable": self.mean_conf_first_stable,
            "mean_conf_commit": self.mean_conf_commit,
            "gap": self.gap,
        }


def spatial_stability(
    trace: DecodeTrace, radius: int = 2, include_prompt: bool = True
) -> SpatialStabilityReport:
    """Count decoded neighbors around each commit, strictly before its step."""
    if radius < 1:
        raise ConfigError(f"radius must be >= 1, got {radius}")
    if not trace.steps:
        raise ConfigError("trace has no steps to analyze")
    h = trace.header
    p, L = len(h.prompt), h.gen_length
    n = p + L
    decoded = np.zeros(n, dtype=bool)
    decoded[:p] = True
    counts = np.full(L, -1, dtype=np.int64)

    for step in trace.steps:
        batch = [pos for pos, _ in step.committed]
        for pos in batch:
            w = p + pos
            lo, hi = max(0, w - radius), min(n, w + radius + 1)
            neigh = decoded[lo:hi].sum() - decoded[w]
            if not include_prompt:
                prompt_hi = min(hi, p)
                if prompt_hi > lo:
                    neigh -= decoded[lo:prompt_hi].sum()
            counts[pos] = int(neigh)
        decoded[[p + pos for pos in batch]] = True

    if np.any(counts < 0):
        raise ConfigError("trace does not commit the full generation window")
    max_s = 2 * radius
    fraction = [float(np.mean(counts >= s)) for s in range(max_s + 1)]
    return SpatialStabilityReport(
        radius=radius,
        include_prompt=include_prompt,
        n_tokens=L,
        neighbor_counts=[int(c) for c in counts],
        fraction_at_least=fraction,
    )


def temporal_stability(trace: DecodeTrace, k_max: int = 8) -> TemporalStabilityReport:
    """Replay id streaks from recorded predictions and bucket commits by streak.

    The replay is independent of the decoder's internal bookkeeping: a
    position's streak increments when a step's predicted id repeats the
    previous prediction for that position and resets to 0 otherwise. A
    token committed on its first prediction has streak 0.
    """
    if k_max < 0:
        raise ConfigError(f"k_max must be >= 0, got {k_max}")
    if not trace.steps:
        raise ConfigError("trace has no steps to analyze")
    L = trace.header.gen_length
    prev_id = np.full(L, -1, dtype=np.int64)
    streak = np.zeros(L, dtype=np.int64)
    run_start_step = np.full(L, -1, dtype=np.int64)
    run_start_conf = np.full(L, np.nan)
    last_conf = np.full(L, np.nan)

    k_commit = np.full(L, -1, dtype=np.int64)
    first_step = np.full(L, -1, dtype=np.int64)
    commit_step_arr = np.full(L, -1, dtype=np.int64)
    conf_first = np.full(L, np.nan)
    conf_commit = np.full(L, np.nan)

    for step in trace.steps:
        predicted_here = set()
        for pos, tok, conf in step.predictions:
            predicted_here.add(pos)
            if tok == prev_id[pos]:
                streak[pos] += 1
            else:
                streak[pos] = 0
                run_start_step[pos] = step.t
                run_start_conf[pos] = conf
            prev_id[pos] = tok
            last_conf[pos] = conf
        for pos, _ in step.committed:
            if pos not in predicted_here:
                raise ConfigError(
                    f"step {step.t} commits position {pos} without a prediction"
                )
            k_commit[pos] = streak[pos]
            first_step[pos] = run_start_step[pos]
            commit_step_arr[pos] = step.t
            conf_first[pos] = run_start_conf[pos]
            conf_commit[pos] = last_conf[pos]

    if np.any(k_commit < 0):
        raise ConfigError("trace does not commit the full generation window")

    fraction: list[float] = []
    mean_first: list[float | None] = []
    mean_commit: list[float | None] = []
    gap: list[float | None] = []
    for k in range(k_max + 1):
        members = k_commit >= k
        fraction.append(float(np.mean(members)))
        if members.any():
            mf = float(np.mean(conf_first[members]))
            mc = float(np.mean(conf_commit[members]))
            mean_first.append(mf)
            mean_commit.append(mc)
            gap.append(mc - mf)
        else:
            mean_first.append(None)
            mean_commit.append(None)
            gap.append(None)

    return TemporalStabilityReport(
        k_max=k_max,
        n_tokens=L,
        streak_at_commit=[int(k) for k in k_commit],
        first_stable_step=[int(s) for s in first_step],
        commit_step=[int(s) for s in commit_step_arr],
        fraction_at_least=fraction,
        mean_conf_first_stable=mean_first,
        mean_conf_commit=mean_commit,
        gap=gap,
    )


def write_report(
    spatial: SpatialStabilityReport,
    temporal: TemporalStabilityReport,
    path: str | Path,
) -> None:
    """Emit both reports to one file; format chosen by .csv / .json suffix.

    The CSV has a ``section`` column: spatial rows carry (threshold s,
    fraction with >= s decoded neighbors); temporal rows carry (streak k,
    fraction with streak >= k, mean confidences, gap).
    """
    path = Path(path)
    if path.suffix == ".json":
        payload = {"spatial": spatial.to_dict(), "temporal": temporal.to_dict()}
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return
    if path.suffix == ".csv":
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [
                    "section",
                    "key",
                    "fraction_at_least",
                    "mean_conf_first_stable",
                    "mean_conf_commit",
                    "gap",
                ]
            )
            for s, frac in enumerate(spatial.fraction_at_least):
                writer.writerow(["spatial", s, repr(frac), "", "", ""])
            for k in range(temporal.k_max + 1):
                mf = temporal.mean_conf_first_stable[k]
                mc = temporal.mean_conf_commit[k]
                g = temporal.gap[k]
                writer.writerow(
                    [
                        "temporal",
                        k,
                        repr(temporal.fraction_at_least[k]),
                        "" if mf is None else repr(mf),
                        "" if mc is None else repr(mc),
                        "" if g is None else repr(g),
                    ]
                )
        return
    raise ConfigError(f"unsupported report format {path.suffix!r} (use .csv or .json)")
