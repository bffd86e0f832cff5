"""Command-line entry points: prepare, synth, train, evaluate, attention."""

from __future__ import annotations

import argparse
import json
import sys

from .attention_export import attention_timeline, export_csv
from .config import VARIANTS, ConfigError, ModelConfig
from .corpus import CorpusBundle, CorpusError, ingest, prepare_corpus
from .evaluate import evaluate, static_mf_baseline
from .synthetic import GENERATORS, synth_bundle
from .training import TrainingError, align_config, load_checkpoint, train


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="revdyn",
        description="Dynamic review-sequence recommender: corpus prep, "
                    "training, evaluation, attention export.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="build a corpus bundle from JSON-lines reviews")
    p.add_argument("--input", required=True, help="reviews file (.jsonl or .jsonl.gz)")
    p.add_argument("--out", required=True, help="bundle JSON path to write")
    p.add_argument("--v-bow", type=int, default=2000)
    p.add_argument("--v-lm", type=int, default=5000)
    p.add_argument("--hash-dim", type=int, default=1024)
    p.add_argument("--hash-seed", type=int, default=13)
    p.add_argument("--max-tokens", type=int, default=150)
    p.add_argument("--min-days", type=int, default=5)
    p.add_argument("--fractions", type=float, nargs=3, default=(0.8, 0.1, 0.1),
                   metavar=("TRAIN", "VAL", "TEST"))

    p = sub.add_parser("synth", help="generate a synthetic corpus bundle")
    p.add_argument("--kind", choices=sorted(GENERATORS), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train a model on a prepared bundle")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-dir", required=True,
                   help="directory for checkpoint.npz, config.json, metrics.jsonl")
    p.add_argument("--config", help="JSON config file; omitted fields use defaults")
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--lambda-arrival", type=float)
    p.add_argument("--lambda-content", type=float)
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("evaluate", help="score a checkpoint on all splits")
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--baseline", action="store_true",
                   help="also fit and report the static factorization baseline")
    p.add_argument("--seed", type=int, default=0, help="baseline fit seed")

    p = sub.add_parser("attention", help="export per-word attention over an item timeline")
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--item", required=True)
    p.add_argument("--words", required=True, help="comma-separated word list")
    p.add_argument("--out", required=True, help="CSV path to write")
    return ap


def _cmd_prepare(args) -> int:
    raw, skipped = ingest(args.input)
    bundle = prepare_corpus(
        raw, v_bow=args.v_bow, v_lm=args.v_lm, d_hash=args.hash_dim,
        hash_seed=args.hash_seed, max_tokens=args.max_tokens,
        fractions=tuple(args.fractions), min_days=args.min_days,
    )
    bundle.save(args.out)
    print(json.dumps({
        "out": args.out, "skipped_lines": skipped, **bundle.meta,
    }))
    return 0


def _cmd_synth(args) -> int:
    bundle, truth = synth_bundle(args.kind, seed=args.seed)
    bundle.save(args.out)
    print(json.dumps({"out": args.out, "kind": args.kind, "seed": args.seed,
                      "n_reviews": len(bundle.reviews)}))
    return 0


def _cmd_train(args) -> int:
    bundle = CorpusBundle.load(args.corpus)
    cfg = ModelConfig.load(args.config) if args.config else ModelConfig()
    overrides = {}
    for name in ("variant", "epochs", "seed", "lr"):
        if getattr(args, name) is not None:
            overrides[name] = getattr(args, name)
    if args.lambda_arrival is not None:
        overrides["lambda_arrival"] = args.lambda_arrival
    if args.lambda_content is not None:
        overrides["lambda_content"] = args.lambda_content
    if overrides:
        cfg = cfg.replace(**overrides)
    cfg = align_config(cfg, bundle)
    log = None if args.quiet else print
    result = train(bundle, cfg, out_dir=args.out_dir, log=log)
    last = result.history[-1] if result.history else {}
    print(json.dumps({"out_dir": args.out_dir, "epochs": cfg.epochs,
                      "final": last}))
    return 0


def _cmd_evaluate(args) -> int:
    bundle = CorpusBundle.load(args.corpus)
    params, cfg, _ = load_checkpoint(args.checkpoint)
    reports = evaluate(params, cfg, bundle)
    out = {"splits": {s: r.to_json() for s, r in reports.items()}}
    if args.baseline:
        out["baseline_mse"] = static_mf_baseline(bundle, seed=args.seed)
    print(json.dumps(out, indent=2))
    return 0


def _cmd_attention(args) -> int:
    bundle = CorpusBundle.load(args.corpus)
    params, cfg, _ = load_checkpoint(args.checkpoint)
    words = [w for w in args.words.split(",") if w]
    records = attention_timeline(params, cfg, bundle, args.item, words)
    export_csv(records, args.out)
    print(json.dumps({"out": args.out, "rows": len(records)}))
    return 0


_DISPATCH = {
    "prepare": _cmd_prepare,
    "synth": _cmd_synth,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "attention": _cmd_attention,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except (ConfigError, CorpusError, TrainingError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
