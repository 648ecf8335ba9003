"""Run a small benchmark matrix and print the speedup table.

Run: python3 demos/mini_benchmark.py [out_dir]
"""

import sys
import tempfile
from pathlib import Path

from stdec import (
    DecoderConfig,
    PolicySpec,
    Vocab,
    run_matrix,
    speedup_report,
    write_results_csv,
    write_results_json,
    write_summary_md,
)


def main():
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
    out_dir.mkdir(parents=True, exist_ok=True)

    policies = [
        PolicySpec("top_k", {"k": 1}, label="top1"),
        PolicySpec("fixed", {"tau": 0.9}),
        PolicySpec("stdec"),
    ]
    presets = ["stable-95", "unstable"]
    seeds = list(range(8))
    cfg = DecoderConfig(gen_length=32, block_size=16, max_steps=32)
    vocab = Vocab(size=64, mask_id=63)

    results = run_matrix(policies, presets, seeds, cfg, vocab)
    report = speedup_report(results, "top1")

    write_results_csv(results, out_dir / "results.csv")
    write_results_json(results, cfg, vocab, out_dir / "results.json", speedup=report)
    write_summary_md(report, out_dir / "summary.md")

    print(f"{len(results)} cells; baseline top1")
    print()
    print(f"{'policy':<14} {'mean steps':>10} {'tokens/step':>12} "
          f"{'steps speedup':>14} {'score delta':>12}")
    print("-" * 66)
    for label in sorted(report["policies"]):
        p = report["policies"][label]
        print(
            f"{label:<14} {p['mean_steps']:>10.2f} "
            f"{p['mean_tokens_per_step']:>12.4f} "
            f"{p['steps_speedup_geomean']:>14.4f} {p['score_delta_mean']:>+12.4f}"
        )
    print()
    print(f"wrote {out_dir}/results.csv, results.json, summary.md")


if __name__ == "__main__":
    main()
