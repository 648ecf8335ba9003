"""Command-line interface.

Exit codes: 0 success, 1 usage errors, 2 validation failures (bad config
or trace), 3 runtime failures. Decoding config is resolved as defaults,
then --config file, then dedicated flags, then --set overrides; --set
values are echoed into the trace header.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .analyzer import spatial_stability, temporal_stability, write_report
from .baselines import POLICY_NAMES, build_policy
from .bench import (
    PolicySpec,
    run_matrix,
    speedup_report,
    write_results_csv,
    write_results_json,
    write_summary_md,
)
from .core import DecoderConfig, Vocab
from .decoder import decode
from .denoisers import ScriptedDenoiser, SyntheticDenoiser, resolve_preset
from .errors import ConfigError, TraceError
from .smoothing import build_kernel
from .trace import read_trace, write_trace

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures on exit code 1 instead of 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_prompt(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(tok) for tok in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"prompt must be comma-separated integers, got {text!r}") from exc


def _parse_set(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, _, raw = pair.partition("=")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _resolve_config(args, base: dict | None = None) -> tuple[DecoderConfig, dict]:
    """Layer defaults < config file < flags < --set; return (config, overrides)."""
    cfg_dict = DecoderConfig().to_dict()
    if base:
        cfg_dict.update(base)
    if getattr(args, "config", None):
        try:
            file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg_dict.update(file_cfg)
    flag_fields = (
        ("tau_high", "tau_high"),
        ("tau_low", "tau_low"),
        ("alpha", "alpha"),
        ("kernel", "kernel"),
        ("sigma", "sigma"),
        ("radius", "radius"),
        ("boundary", "boundary"),
        ("gen_length", "gen_length"),
        ("block_size", "block_size"),
        ("max_steps", "max_steps"),
        ("seed", "seed"),
    )
    for attr, key in flag_fields:
        val = getattr(args, attr, None)
        if val is not None:
            cfg_dict[key] = val
    if getattr(args, "full_window", False):
        cfg_dict["full_window_queries"] = True
    overrides = _parse_set(getattr(args, "set", None) or [])
    cfg_dict.update(overrides)
    return DecoderConfig.from_dict(cfg_dict), overrides


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with config field overrides")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one config field (repeatable; echoed in the trace header)")
    p.add_argument("--tau-high", dest="tau_high", type=float)
    p.add_argument("--tau-low", dest="tau_low", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--kernel", choices=("gaussian", "mean", "triangular"))
    p.add_argument("--sigma", type=float)
    p.add_argument("--radius", type=int)
    p.add_argument("--boundary", choices=("replicate", "reflect"))
    p.add_argument("--gen-length", dest="gen_length", type=int)
    p.add_argument("--block-size", dest="block_size", type=int)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--full-window", dest="full_window", action="store_true",
                   help="query every masked position each step, not just the active block")


def _policy_from_args(args):
    params = {}
    if args.policy == "top_k" and args.k is not None:
        params["k"] = args.k
    if args.policy == "fixed" and args.tau is not None:
        params["tau"] = args.tau
    if args.policy == "anchor_dual":
        if args.tau_anchor is not None:
            params["tau_anchor"] = args.tau_anchor
        if args.tau_neighbor is not None:
            params["tau_neighbor"] = args.tau_neighbor
        if args.anchor_radius is not None:
            params["anchor_radius"] = args.anchor_radius
    return build_policy(args.policy, params)


def _cmd_decode(args) -> int:
    if args.denoiser == "scripted":
        if not args.trace_in:
            raise ConfigError("--denoiser scripted requires --trace-in")
        source = read_trace(args.trace_in)
        cfg, overrides = _resolve_config(args, base=source.header.config)
        vocab = Vocab(size=source.header.vocab_size, mask_id=source.header.mask_id)
        prompt = list(source.header.prompt)
        if args.prompt is not None:
            raise ConfigError("scripted replay takes its prompt from the trace")
        denoiser = ScriptedDenoiser(source)
    else:
        cfg, overrides = _resolve_config(args)
        vocab = Vocab(size=args.vocab_size,
                      mask_id=args.mask_id if args.mask_id is not None else args.vocab_size - 1)
        prompt = _parse_prompt(args.prompt if args.prompt is not None else "1,2")
        denoiser = SyntheticDenoiser(resolve_preset(args.preset), vocab, cfg.gen_length, cfg.seed)

    policy = _policy_from_args(args)
    tokens, trace = decode(denoiser, prompt, cfg, vocab, policy=policy)
    trace.header.overrides = overrides
    if args.trace_out:
        write_trace(trace, args.trace_out)
    gen = tokens[len(prompt):]
    if args.verbose:
        for step in trace.steps:
            print(
                f"step {step.t}: block={step.block} committed={len(step.committed)} "
                f"fallback={step.fallback_used} forced={step.forced_final}"
            )
    print(
        f"policy={policy.name} steps={trace.steps_used} "
        f"tokens_per_step={cfg.gen_length / trace.steps_used:.4f} "
        f"fallback_rate={trace.fallback_rate:.4f} forced_final={trace.forced_final}"
    )
    if args.print_tokens:
        print(",".join(str(int(t)) for t in gen))
    return EXIT_OK


def _cmd_kernel_dump(args) -> int:
    kernel = build_kernel(args.kind, args.radius, args.sigma)
    payload = {
        "kind": kernel.kind,
        "radius": kernel.radius,
        "sigma": kernel.sigma,
        "weights": [float(w) for w in kernel.weights],
    }
    print(json.dumps(payload))
    return EXIT_OK


def _cmd_trace_validate(args) -> int:
    trace = read_trace(args.trace, validate=True)
    if args.verbose:
        h = trace.header
        print(
            f"denoiser={h.denoiser} preset={h.preset} seed={h.seed} "
            f"block_size={h.block_size} vocab_size={h.vocab_size}"
        )
    print(
        f"OK: {trace.steps_used} steps, {trace.header.gen_length} generated tokens, "
        f"policy={trace.header.policy}"
    )
    return EXIT_OK


def _cmd_analyze(args) -> int:
    trace = read_trace(args.trace, validate=True)
    spatial = spatial_stability(
        trace, radius=args.radius, include_prompt=not args.no_prompt_neighbors
    )
    temporal = temporal_stability(trace, k_max=args.kmax)
    if args.out:
        write_report(spatial, temporal, args.out)
        print(f"wrote {args.out}")
    else:
        payload = {"spatial": spatial.to_dict(), "temporal": temporal.to_dict()}
        print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def _load_matrix(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read matrix file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("matrix file must hold a JSON object")
    return data


def _cmd_bench(args) -> int:
    matrix = _load_matrix(args.matrix)
    try:
        policy_specs = [
            PolicySpec(
                name=entry["name"],
                params=dict(entry.get("params", {})),
                label=entry.get("label"),
            )
            for entry in matrix["policies"]
        ]
        presets = list(matrix["presets"])
        seeds_raw = matrix["seeds"]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"matrix file missing or malformed field: {exc}") from exc
    if isinstance(seeds_raw, dict):
        seeds = list(range(int(seeds_raw["start"]), int(seeds_raw["start"]) + int(seeds_raw["count"])))
    else:
        seeds = [int(s) for s in seeds_raw]
    cfg = DecoderConfig.from_dict({**DecoderConfig().to_dict(), **matrix.get("config", {})})
    vocab_d = matrix.get("vocab", {"size": 64, "mask_id": 63})
    vocab = Vocab(size=int(vocab_d["size"]), mask_id=int(vocab_d["mask_id"]))
    prompt = tuple(matrix.get("prompt", [1, 2]))

    results = run_matrix(
        policy_specs, presets, seeds, cfg, vocab, workers=args.workers, prompt=prompt
    )
    baseline = matrix.get("baseline", policy_specs[0].resolved_label())
    report = speedup_report(results, baseline)

    if args.verbose:
        for r in results:
            cell = f"{r.policy} / {r.preset} / seed {r.seed}"
            if r.error is not None:
                print(f"{cell}: ERROR {r.error}")
            else:
                print(f"{cell}: steps={r.steps_used} score={r.score:.4f}")

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_results_csv(results, out_dir / "results.csv")
    write_results_json(
        results, cfg, vocab, out_dir / "results.json", prompt=prompt, speedup=report
    )
    write_summary_md(report, out_dir / "summary.md")
    n_failed = sum(1 for r in results if r.error is not None)
    print(f"ran {len(results)} cells ({n_failed} failed); wrote {out_dir}/results.csv, "
          f"results.json, summary.md")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stdec", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true",
                        help="print per-step or per-cell detail")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decode", parents=[common], help="run one decode and write a trace")
    p.add_argument("--denoiser", choices=("synthetic", "scripted"), default="synthetic")
    p.add_argument("--preset", default="stable-95",
                   help="built-in preset name or path to a preset JSON file")
    p.add_argument("--trace-in", dest="trace_in", help="source trace for scripted replay")
    p.add_argument("--prompt", default=None,
                   help="comma-separated prompt ids (synthetic only; default 1,2)")
    p.add_argument("--vocab-size", dest="vocab_size", type=int, default=64)
    p.add_argument("--mask-id", dest="mask_id", type=int, default=None,
                   help="default: vocab_size - 1")
    p.add_argument("--policy", choices=POLICY_NAMES, default="stdec")
    p.add_argument("--k", type=int, default=None, help="top_k commits per step")
    p.add_argument("--tau", type=float, default=None, help="fixed-threshold level")
    p.add_argument("--tau-anchor", dest="tau_anchor", type=float, default=None)
    p.add_argument("--tau-neighbor", dest="tau_neighbor", type=float, default=None)
    p.add_argument("--anchor-radius", dest="anchor_radius", type=int, default=None)
    p.add_argument("--trace-out", dest="trace_out", help="trace output path (.dtrace.jsonl)")
    p.add_argument("--print-tokens", dest="print_tokens", action="store_true")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("kernel-dump", parents=[common], help="print kernel weights as JSON")
    p.add_argument("--kind", choices=("gaussian", "mean", "triangular"), default="gaussian")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--radius", type=int, default=2)
    p.set_defaults(func=_cmd_kernel_dump)

    p = sub.add_parser("trace-validate", parents=[common], help="validate a trace file")
    p.add_argument("trace", help="path to a .dtrace.jsonl file")
    p.set_defaults(func=_cmd_trace_validate)

    p = sub.add_parser("analyze", parents=[common],
                       help="spatial/temporal stability of a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--radius", type=int, default=2)
    p.add_argument("--kmax", type=int, default=8)
    p.add_argument("--out", help="output path (.csv or .json); default prints JSON")
    p.add_argument("--no-prompt-neighbors", dest="no_prompt_neighbors", action="store_true",
                   help="do not count prompt tokens as decoded neighbors")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("bench", parents=[common], help="run a policy x preset x seed matrix")
    p.add_argument("--matrix", required=True, help="matrix spec JSON file")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--workers", type=int, default=None,
                   help="parallel cells (default: STDEC_BENCH_WORKERS env var, else 1)")
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, TraceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
