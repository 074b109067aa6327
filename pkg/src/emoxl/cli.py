"""Command-line entry points for the full pipeline.

Exit codes: 0 success, 1 usage error, 2 data error, 3 checkpoint error.
The --data flag accepts an ED-format .csv, a .jsonl corpus cache (with its
vocabulary sidecar), or "synth:<n_pairs>" for the built-in generator.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import checkpoint as ckpt
from . import tensor as T
from .classifier import train_classifier
from .config import RunConfig, resolve_run_config
from .dataset import COARSE_LABELS, Corpus, DataError, load_ed_corpus, read_corpus_cache, \
    synth_corpus, write_corpus_cache
from .evaluation import ablation_compare, corpus_eval
from .model import train_chatbot
from .pipeline import ChatPipeline
from .report import plot_loss_curve, write_ablation_report, write_eval_report, \
    write_metrics_history
from .server import make_server


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _resolve_data(spec: str, run: RunConfig, vocab=None) -> Corpus:
    if spec.startswith("synth:"):
        try:
            n_pairs = int(spec.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad synthetic data spec {spec!r}, want synth:<n_pairs>")
        return synth_corpus(run.seed, n_pairs)
    path = Path(spec)
    if not path.exists():
        raise DataError(f"data file not found: {path}")
    if path.suffix == ".jsonl":
        return read_corpus_cache(path)
    return load_ed_corpus(path, vocab=vocab, min_freq=run.min_freq,
                          max_size=run.max_size, max_len=run.max_len)


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out", required=True)


def build_parser() -> _Parser:
    parser = _Parser(prog="emoxl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="parse a dialogue CSV into a corpus cache")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-freq", type=int, dest="min_freq")
    p.add_argument("--max-size", type=int, dest="max_size")
    p.add_argument("--config")

    for name in ("train-classifier", "train-chatbot"):
        _add_train_flags(sub.add_parser(name, help=f"{name.split('-')[1]} training"))

    p = sub.add_parser("eval", help="BLEU-4 evaluation of the full pipeline")
    p.add_argument("--data", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--chatbot", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--config")

    p = sub.add_parser("generate", help="one response for --text")
    p.add_argument("--text", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--chatbot", required=True)
    p.add_argument("--emotion", choices=list(COARSE_LABELS))

    p = sub.add_parser("chat", help="interactive read-eval loop on stdin")
    p.add_argument("--classifier", required=True)
    p.add_argument("--chatbot", required=True)

    p = sub.add_parser("serve", help="HTTP chat endpoint")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--chatbot", required=True)
    p.add_argument("--session", action="store_true")
    p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("ablation", help="emotion-fusion on/off comparison")
    p.add_argument("--data", required=True)
    p.add_argument("--seeds", default="1,2,3,4,5")
    p.add_argument("--report", required=True)
    p.add_argument("--config")

    return parser


def _run_config(args) -> RunConfig:
    flags = {k: getattr(args, k, None)
             for k in ("epochs", "batch", "lr", "dropout", "seed", "min_freq", "max_size")}
    return resolve_run_config(getattr(args, "config", None), flags)


def cmd_preprocess(args) -> int:
    run = _run_config(args)
    corpus = _resolve_data(args.data, run)
    write_corpus_cache(corpus, args.out)
    print(f"wrote {len(corpus.pairs)} pairs to {args.out}")
    return 0


def cmd_train(args, component: str) -> int:
    run = _run_config(args)
    with T.using_dtype(run.dtype()):
        corpus = _resolve_data(args.data, run)
        out = Path(args.out)
        if component == "classifier":
            params, history = train_classifier(
                corpus.pairs, run.classifier_config(corpus.vocab.size))
            ckpt.save_classifier(params, corpus.vocab, out)
        else:
            params, history = train_chatbot(
                corpus.pairs, run.model_config(corpus.vocab.size))
            ckpt.save_chatbot(params, corpus.vocab, out)
        metrics_path = Path(str(out) + ".metrics.jsonl")
        write_metrics_history(history, metrics_path)
        plot_loss_curve(history, Path(str(out) + ".loss.png"), f"{component} training")
        print(f"trained {component}: {len(history)} epochs, "
              f"final loss {history[-1].loss:.6f}; checkpoint {out}")
    return 0


def _load_pipeline(args) -> ChatPipeline:
    clf, clf_vocab = ckpt.load_classifier(args.classifier)
    bot, bot_vocab = ckpt.load_chatbot(args.chatbot)
    return ChatPipeline(clf, clf_vocab, bot, bot_vocab)


def cmd_eval(args) -> int:
    run = _run_config(args)
    with T.using_dtype(run.dtype()):
        pipeline = _load_pipeline(args)
        corpus = _resolve_data(args.data, run, vocab=pipeline.chatbot_vocab)
        report = corpus_eval(pipeline, corpus.pairs)
        paths = write_eval_report(report, args.report)
        print(f"evaluated {report.item_count} items, corpus BLEU-4 "
              f"{report.corpus_mean:.6f}; report {paths['json']}")
    return 0


def cmd_generate(args) -> int:
    with T.using_dtype(RunConfig().dtype()):
        pipeline = _load_pipeline(args)
        result = pipeline.respond(args.text, emotion_override=args.emotion)
        print(f"emotion: {result.emotion_label}")
        print(f"response: {result.response_text}")
    return 0


def cmd_chat(args) -> int:
    with T.using_dtype(RunConfig().dtype()):
        pipeline = _load_pipeline(args)
        print("type a message (end input to quit)", file=sys.stderr)
        for line in sys.stdin:
            line = line.strip()
            if not line:
                continue
            result = pipeline.respond(line)
            print(f"[{result.emotion_label}] {result.response_text}", flush=True)
    return 0


def cmd_serve(args) -> int:
    with T.using_dtype(RunConfig().dtype()):
        pipeline = _load_pipeline(args)
        try:
            server = make_server(pipeline, args.port, session_mode=args.session,
                                 verbose=args.verbose)
        except OSError as e:
            print(f"cannot bind port {args.port}: {e}", file=sys.stderr)
            return 1
        print(f"serving on http://127.0.0.1:{server.server_address[1]} "
              f"(session mode: {args.session})", file=sys.stderr)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            server.shutdown()
    return 0


def cmd_ablation(args) -> int:
    run = _run_config(args)
    with T.using_dtype(run.dtype()):
        try:
            seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        except ValueError:
            raise UsageError(f"--seeds must be comma-separated integers, got {args.seeds!r}")
        results = []
        for seed in seeds:
            corpus = _resolve_data(args.data, run)
            results.append(ablation_compare(corpus, run.model_config(corpus.vocab.size), seed))
        paths = write_ablation_report(results, args.report)
        mean_diff = sum(r.difference for r in results) / len(results)
        print(f"ablation over seeds {seeds}: mean BLEU difference {mean_diff:.6f}; "
              f"report {paths['json']}")
    return 0


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "preprocess":
            return cmd_preprocess(args)
        if args.command == "train-classifier":
            return cmd_train(args, "classifier")
        if args.command == "train-chatbot":
            return cmd_train(args, "chatbot")
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "generate":
            return cmd_generate(args)
        if args.command == "chat":
            return cmd_chat(args)
        if args.command == "serve":
            return cmd_serve(args)
        if args.command == "ablation":
            return cmd_ablation(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except ckpt.CheckpointError as e:
        print(f"checkpoint error: {e}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
