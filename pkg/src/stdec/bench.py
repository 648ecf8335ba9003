"""Policy x preset x seed benchmark matrix over the synthetic denoiser.

Every cell with the same (preset, seed) shares one ground truth and one set
of per-step random draws, so policies are compared on identical inputs.
All emitted numbers except wall-clock timings are deterministic.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import build_policy
from .core import DecoderConfig, Vocab
from .decoder import decode
from .denoisers import SyntheticDenoiser, resolve_preset
from .errors import ConfigError

WORKERS_ENV = "STDEC_BENCH_WORKERS"


@dataclass
class PolicySpec:
    """One policy column of the matrix; ``label`` defaults to a derived id."""

    name: str
    params: dict = field(default_factory=dict)
    label: str | None = None

    def resolved_label(self) -> str:
        if self.label:
            return self.label
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={self.params[k]}" for k in sorted(self.params))
        return f"{self.name}[{inner}]"


@dataclass
class BenchResult:
    """Metrics for one decoded cell; ``error`` marks a failed cell."""

    policy: str
    preset: str
    seed: int
    steps_used: int | None = None
    nfe: int | None = None
    tokens_per_step: float | None = None
    fallback_rate: float | None = None
    forced_final: bool | None = None
    score: float | None = None
    wall_seconds: float | None = None
    tps: float | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "preset": self.preset,
            "seed": self.seed,
            "steps_used": self.steps_used,
            "nfe": self.nfe,
            "tokens_per_step": self.tokens_per_step,
            "fallback_rate": self.fallback_rate,
            "forced_final": self.forced_final,
            "score": self.score,
            "wall_seconds": self.wall_seconds,
            "tps": self.tps,
            "error": self.error,
        }


def run_cell(
    spec: PolicySpec,
    preset_name: str,
    seed: int,
    cfg: DecoderConfig,
    vocab: Vocab,
    prompt: tuple[int, ...] = (1, 2),
) -> BenchResult:
    """Decode one cell and collect its metrics; exceptions become markers."""
    label = spec.resolved_label()
    try:
        policy = build_policy(spec.name, spec.params)
        denoiser = SyntheticDenoiser(resolve_preset(preset_name), vocab, cfg.gen_length, seed)
        t0 = time.perf_counter()
        tokens, trace = decode(denoiser, list(prompt), cfg, vocab, policy=policy)
        wall = time.perf_counter() - t0
        gen = tokens[-cfg.gen_length:]
        steps = trace.steps_used
        return BenchResult(
            policy=label,
            preset=preset_name,
            seed=seed,
            steps_used=steps,
            nfe=steps,
            tokens_per_step=cfg.gen_length / steps,
            fallback_rate=trace.fallback_rate,
            forced_final=trace.forced_final,
            score=float(np.mean(gen == denoiser.truth)),
            wall_seconds=wall,
            tps=cfg.gen_length / wall if wall > 0 else float("inf"),
        )
    except Exception as exc:
        return BenchResult(policy=label, preset=preset_name, seed=seed, error=str(exc))


def _worker_count(workers: int | None) -> int:
    if workers is not None:
        return max(1, workers)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from exc
    return 1


def run_matrix(
    policies: list[PolicySpec],
    presets: list[str],
    seeds: list[int],
    cfg: DecoderConfig,
    vocab: Vocab,
    workers: int | None = None,
    prompt: tuple[int, ...] = (1, 2),
) -> list[BenchResult]:
    """Run every (policy, preset, seed) cell; results sorted by cell key.

    ``workers`` > 1 fans cells out over processes (default read from the
    STDEC_BENCH_WORKERS environment variable, else sequential). Ordering
    and numeric outputs are identical either way.
    """
    if not policies or not presets or not seeds:
        raise ConfigError("matrix needs at least one policy, preset and seed")
    labels = [s.resolved_label() for s in policies]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"duplicate policy labels in matrix: {labels}")
    cells = [
        (spec, preset, seed)
        for spec in policies
        for preset in presets
        for seed in seeds
    ]
    prompt = tuple(int(t) for t in prompt)
    n_workers = _worker_count(workers)
    if n_workers == 1:
        results = [
            run_cell(spec, preset, seed, cfg, vocab, prompt)
            for spec, preset, seed in cells
        ]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            futures = [
                pool.submit(run_cell, spec, preset, seed, cfg, vocab, prompt)
                for spec, preset, seed in cells
            ]
            results = [f.result() for f in futures]
    results.sort(key=lambda r: (r.policy, r.preset, r.seed))
    return results


def _geomean(ratios: list[float]) -> float:
    return math.exp(sum(math.log(r) for r in ratios) / len(ratios))


def speedup_report(results: list[BenchResult], baseline: str) -> dict:
    """Aggregate per-policy speedups against the named baseline policy.

    Steps speedup (geometric mean of baseline_steps / policy_steps over
    paired cells) is the primary figure; wall-clock throughput speedup is
    reported alongside. A missing or failed baseline cell is an error;
    failed non-baseline cells are excluded and counted.
    """
    by_cell = {(r.policy, r.preset, r.seed): r for r in results}
    labels = sorted({r.policy for r in results})
    if baseline not in labels:
        raise ConfigError(f"baseline policy {baseline!r} has no results")
    pairs = sorted({(r.preset, r.seed) for r in results})
    for preset, seed in pairs:
        base = by_cell.get((baseline, preset, seed))
        if base is None:
            raise ConfigError(f"missing baseline cell ({baseline}, {preset}, {seed})")
        if base.error is not None:
            raise ConfigError(
                f"baseline cell ({baseline}, {preset}, {seed}) failed: {base.error}"
            )

    policies = {}
    for label in labels:
        cells = [r for r in results if r.policy == label]
        ok = [r for r in cells if r.error is None]
        step_ratios, tps_ratios, score_deltas = [], [], []
        for r in ok:
            base = by_cell[(baseline, r.preset, r.seed)]
            step_ratios.append(base.steps_used / r.steps_used)
            if base.tps and r.tps:
                tps_ratios.append(r.tps / base.tps)
            score_deltas.append(r.score - base.score)
        policies[label] = {
            "n_cells": len(cells),
            "n_failed": len(cells) - len(ok),
            "mean_steps": float(np.mean([r.steps_used for r in ok])) if ok else None,
            "mean_tokens_per_step": float(np.mean([r.tokens_per_step for r in ok]))
            if ok
            else None,
            "mean_score": float(np.mean([r.score for r in ok])) if ok else None,
            "steps_speedup_geomean": _geomean(step_ratios) if step_ratios else None,
            "tps_speedup_geomean": _geomean(tps_ratios) if tps_ratios else None,
            "score_delta_mean": float(np.mean(score_deltas)) if score_deltas else None,
        }
    return {"baseline": baseline, "policies": policies}


def write_results_json(
    results: list[BenchResult],
    cfg: DecoderConfig,
    vocab: Vocab,
    path: str | Path,
    prompt: tuple[int, ...] = (1, 2),
    speedup: dict | None = None,
) -> None:
    payload = {
        "config": cfg.to_dict(),
        "vocab": {"size": vocab.size, "mask_id": vocab.mask_id},
        "prompt": list(prompt),
        "results": [r.to_dict() for r in results],
    }
    if speedup is not None:
        payload["speedup"] = speedup
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


_CSV_COLUMNS = (
    "policy",
    "preset",
    "seed",
    "steps_used",
    "nfe",
    "tokens_per_step",
    "fallback_rate",
    "forced_final",
    "score",
    "wall_seconds",
    "tps",
    "error",
)


def write_results_csv(results: list[BenchResult], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_COLUMNS)
        for r in results:
            row = []
            for col in _CSV_COLUMNS:
                val = getattr(r, col)
                if val is None:
                    row.append("")
                elif isinstance(val, float):
                    row.append(repr(val))
                else:
                    row.append(val)
            writer.writerow(row)


def write_summary_md(report: dict, path: str | Path) -> None:
    lines = [
        "# Benchmark summary",
        "",
        f"Baseline policy: `{report['baseline']}`. Steps speedup is the",
        "geometric mean of baseline_steps / policy_steps over paired cells;",
        "throughput speedup is wall-clock and varies run to run.",
        "",
        "| policy | cells | failed | mean steps | tokens/step | score | steps speedup | tps speedup | score delta |",
        "|---|---|---|---|---|---|---|---|---|",
    ]

    def fmt(x, digits=4):
        return "-" if x is None else f"{x:.{digits}f}"

    for label in sorted(report["policies"]):
        p = report["policies"][label]
        lines.append(
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |".format(
                label,
                p["n_cells"],
                p["n_failed"],
                fmt(p["mean_steps"], 2),
                fmt(p["mean_tokens_per_step"]),
                fmt(p["mean_score"]),
                fmt(p["steps_speedup_geomean"]),
                fmt(p["tps_speedup_geomean"], 2),
                fmt(p["score_delta_mean"]),
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
