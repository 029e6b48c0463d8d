"""Command-line interface.

Subcommands: clean, stats, split, train, eval, compare, moderate, repl,
serve, plus two workflow helpers (surrogate, vocab) for offline use.
Machine-readable outputs are versioned JSON; exit codes are mapped per
error class (see EXIT_CODES).
"""

from __future__ import annotations

import argparse
import json
import sys

from . import corpus, evaluation, moderation, surrogate, textprep, training
from .corpus import LABEL_NAMES
from .errors import (
    BackendError,
    CheckpointError,
    CiviltextError,
    ConfigurationError,
    SchemaError,
    TrainingDiverged,
    ValidationError,
)

EXIT_CODES = {
    SchemaError: 3,
    ValidationError: 3,
    ConfigurationError: 4,
    CheckpointError: 4,
    BackendError: 5,
    TrainingDiverged: 6,
}

REPL_PROMPT = "Enter a tweet to analyze (or type 'exit' to quit): "


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _write_output(payload: str, path: str | None) -> None:
    if path and path != "-":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)


def cmd_clean(args) -> int:
    if args.input and args.input != "-":
        with open(args.input, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    else:
        lines = sys.stdin.read().splitlines()
    cleaned = "\n".join(textprep.clean_text(line) for line in lines)
    if cleaned:
        cleaned += "\n"
    _write_output(cleaned, args.output)
    return 0


def cmd_stats(args) -> int:
    ds = corpus.load_dataset(args.dataset)
    report = corpus.stats_report(ds, top_k_words=args.top_k)
    _write_output(json.dumps(report, indent=2) + "\n", args.output)
    return 0


def cmd_split(args) -> int:
    ds = corpus.load_dataset(args.dataset)
    spec = corpus.SplitSpec(
        train_fraction=args.train_frac,
        val_fraction=args.val_frac,
        test_fraction=args.test_frac,
        seed=args.seed,
        stratified=not args.no_stratify,
    )
    splits = corpus.split(ds, spec)
    corpus.save_split_manifest(splits, args.output)
    sizes = {name: len(part) for name, part in splits.items()}
    print(json.dumps({"manifest": args.output, "sizes": sizes}))
    return 0


def _model_spec_from_args(args, tokenizer) -> "training.ModelSpec":
    from .models import ModelSpec

    cfg = _load_config_file(args.config).get("model", {})
    cfg.setdefault("kind", args.kind)
    if args.encoder:
        cfg["encoder_name"] = args.encoder
    if cfg["kind"] in ("cnn", "lstm", "bilstm"):
        cfg.setdefault("vocab_size", tokenizer.vocab_size)
        cfg.setdefault("pad_token_id", tokenizer.pad_token_id)
    if args.max_len:
        cfg["max_len"] = args.max_len
    return ModelSpec.from_dict(cfg)


def _resolve_splits(ds, args):
    if args.split_manifest:
        return corpus.load_split_manifest(ds, args.split_manifest)
    return corpus.split(ds, corpus.SplitSpec(seed=args.seed))


def cmd_train(args) -> int:
    tokenizer = textprep.load_tokenizer(args.tokenizer)
    ds = corpus.load_dataset(args.dataset)
    splits = _resolve_splits(ds, args)
    spec = _model_spec_from_args(args, tokenizer)

    cfg_file = _load_config_file(args.config).get("train", {})
    if args.epochs:
        cfg_file["epochs"] = args.epochs
    if args.batch_size:
        cfg_file["batch_size"] = args.batch_size
    if args.learning_rate:
        cfg_file["learning_rate"] = args.learning_rate
    if args.class_weights:
        cfg_file["use_class_weights"] = True
    cfg_file.setdefault("seed", args.seed)
    config = training.TrainConfig(**cfg_file)

    policy = training.CheckpointPolicy(path=args.checkpoint)
    handle, curves = training.train(spec, splits, config, policy, tokenizer)
    if args.curves:
        curves.to_json(args.curves)
        curves.to_csv(args.curves.rsplit(".", 1)[0] + ".csv")
    report = evaluation.evaluate(handle, splits["test"], tokenizer)
    print(
        json.dumps(
            {
                "checkpoint": args.checkpoint,
                "epochs": len(curves),
                "test_accuracy": report.accuracy,
                "test_loss": report.mean_loss,
            }
        )
    )
    return 0


def cmd_eval(args) -> int:
    from .models import load_checkpoint

    tokenizer = textprep.load_tokenizer(args.tokenizer)
    handle = load_checkpoint(args.checkpoint)
    ds = corpus.load_dataset(args.dataset)
    if args.split_manifest:
        part = corpus.load_split_manifest(ds, args.split_manifest)[args.split]
    else:
        part = corpus.split(ds, corpus.SplitSpec(seed=args.seed))[args.split]
    report = evaluation.evaluate(handle, part, tokenizer)
    _write_output(json.dumps(report.to_dict(), indent=2) + "\n", args.output)
    return 0


def cmd_compare(args) -> int:
    names = args.names.split(",") if args.names else None
    epochs = [int(e) for e in args.epochs.split(",")] if args.epochs else None
    rows = []
    for i, path in enumerate(args.reports):
        report = evaluation.EvalReport.load(path)
        name = names[i] if names else path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
        ep = epochs[i] if epochs else 3
        rows.append((name, report, ep))
    table = evaluation.compare_report(rows)
    if args.csv:
        table.to_csv(args.csv)
    _write_output(table.render_text() + "\n", args.output)
    return 0


def _load_bundle(args):
    from .models import load_checkpoint

    tokenizer = textprep.load_tokenizer(args.tokenizer)
    handle = load_checkpoint(args.checkpoint)
    return handle, tokenizer


def _rewriter_from_args(args):
    cfg = moderation.RewriterConfig(
        backend=args.backend,
        lexicon_path=args.lexicon,
    )
    transport = moderation.ReplayTransport(args.cassette) if args.cassette else None
    return moderation.make_rewriter(cfg, transport=transport)


def cmd_moderate(args) -> int:
    handle, tokenizer = _load_bundle(args)
    rewriter = _rewriter_from_args(args)
    result = moderation.moderate(args.text, handle, tokenizer, rewriter, fail_open=args.fail_open)
    payload = result.to_dict()
    payload["label_name"] = LABEL_NAMES[result.label]
    print(json.dumps(payload, indent=2))
    return 5 if result.action == "error" else 0


def cmd_repl(args) -> int:
    handle, tokenizer = _load_bundle(args)
    rewriter = _rewriter_from_args(args)
    while True:
        try:
            user_input = input(REPL_PROMPT)
        except EOFError:
            break
        if user_input.lower() == "exit":
            break
        result = moderation.moderate(
            user_input, handle, tokenizer, rewriter, fail_open=args.fail_open
        )
        print(f"Classified as: {LABEL_NAMES[result.label]}")
        if result.action == "rewrite":
            print(f"Neutralized: {result.rewritten}")
        elif result.action == "error":
            print(f"Rewrite failed (content withheld): {result.error}")
    return 0


def cmd_serve(args) -> int:
    from .service import ServiceConfig, run

    file_cfg = _load_config_file(args.config).get("service", {})
    rewriter_cfg = moderation.RewriterConfig(
        **_load_config_file(args.config).get("rewriter", {"backend": args.backend})
    )
    config = ServiceConfig(
        checkpoint_path=args.checkpoint,
        tokenizer_path=args.tokenizer,
        host=file_cfg.get("host", args.host),
        port=int(file_cfg.get("port", args.port)),
        rewriter=rewriter_cfg,
        fail_open=args.fail_open,
    )
    run(config)
    return 0


def cmd_surrogate(args) -> int:
    path = surrogate.write_csv(args.output, seed=args.seed)
    print(json.dumps({"dataset": path, "rows": surrogate.N_ROWS}))
    return 0


def cmd_vocab(args) -> int:
    ds = corpus.load_dataset(args.dataset)
    n = textprep.build_vocab(ds.frame["tweet"], args.output, size=args.size)
    print(json.dumps({"vocab": args.output, "size": n}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="civiltext",
        description="Hate-speech detection and conditional text neutralization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("clean", help="clean raw text (file or stdin), one line per input line")
    p.add_argument("--input", "-i", default="-")
    p.add_argument("--output", "-o", default="-")
    p.set_defaults(fn=cmd_clean)

    p = sub.add_parser("stats", help="exploratory statistics report as JSON")
    p.add_argument("--dataset", required=True)
    p.add_argument("--top-k", type=int, default=20)
    p.add_argument("--output", "-o", default="-")
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("split", help="emit a reproducible split manifest")
    p.add_argument("--dataset", required=True)
    p.add_argument("--output", "-o", required=True)
    p.add_argument("--train-frac", type=float, default=0.70)
    p.add_argument("--val-frac", type=float, default=0.15)
    p.add_argument("--test-frac", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--no-stratify", action="store_true")
    p.set_defaults(fn=cmd_split)

    p = sub.add_parser("train", help="train a model spec on dataset splits")
    p.add_argument("--dataset", required=True)
    p.add_argument("--tokenizer", required=True, help="tokenizer name, directory, or vocab file")
    p.add_argument("--kind", default="cnn", choices=["cnn", "lstm", "bilstm", "encoder", "encoder_cnn", "encoder_bilstm"])
    p.add_argument("--encoder", help="pretrained encoder name or local directory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--curves", help="write learning curves JSON (and CSV sibling)")
    p.add_argument("--config", help="JSON config file with model/train sections")
    p.add_argument("--split-manifest")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--max-len", type=int)
    p.add_argument("--class-weights", action="store_true")
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--split-manifest")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--output", "-o", default="-")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("compare", help="render a comparison table from saved eval reports")
    p.add_argument("reports", nargs="+")
    p.add_argument("--names", help="comma-separated row names")
    p.add_argument("--epochs", help="comma-separated per-row epoch counts")
    p.add_argument("--csv", help="also write the table as CSV")
    p.add_argument("--output", "-o", default="-")
    p.set_defaults(fn=cmd_compare)

    def add_moderation_args(p):
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--tokenizer", required=True)
        p.add_argument("--backend", default="stub", choices=list(moderation.BACKENDS))
        p.add_argument("--lexicon", help="term<TAB>replacement file for the lexicon backend")
        p.add_argument("--cassette", help="recorded-response fixture for the remote backend")
        p.add_argument("--fail-open", action="store_true")

    p = sub.add_parser("moderate", help="moderate one text")
    add_moderation_args(p)
    p.add_argument("--text", required=True)
    p.set_defaults(fn=cmd_moderate)

    p = sub.add_parser("repl", help="interactive analyze loop")
    add_moderation_args(p)
    p.set_defaults(fn=cmd_repl)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--backend", default="stub", choices=list(moderation.BACKENDS))
    p.add_argument("--fail-open", action="store_true")
    p.add_argument("--config", help="JSON config file with service/rewriter sections")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("surrogate", help="write the statistics-matched surrogate dataset CSV")
    p.add_argument("--output", "-o", required=True)
    p.add_argument("--seed", type=int, default=surrogate.DEFAULT_SEED)
    p.set_defaults(fn=cmd_surrogate)

    p = sub.add_parser("vocab", help="build a WordPiece vocab file from a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--output", "-o", required=True)
    p.add_argument("--size", type=int, default=8000)
    p.set_defaults(fn=cmd_vocab)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CiviltextError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for cls, code in EXIT_CODES.items():
            if isinstance(exc, cls):
                return code
        return 1
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
