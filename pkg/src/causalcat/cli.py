"""Command-line entry point: ``causalcat {stats,train,evaluate,compare,predict}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error, 3 training abort.
Any config key can also be set with a flag of the same dotted name, e.g.
``--data.sdcnl_test path.csv`` or ``--finetune.epochs=2``.
"""

from __future__ import annotations

import argparse
import logging
import sys

from causalcat import pipeline
from causalcat.config import load_config, parse_scalar
from causalcat.corpus import parse_balance
from causalcat.errors import CausalCatError, ConfigError

log = logging.getLogger("causalcat")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--out", default="runs/latest", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--model", help="logreg, cnn_lstm, or an encoder backend id")
    p.add_argument("--max-len", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--train-composition", choices=("crawled", "sdcnl_train", "both"))
    p.add_argument("--balance", help='e.g. "c1,c2,c3:120"; "none" disables')
    p.add_argument("--backend-checkpoint", help="encoder checkpoint: local path, cache entry or hub id")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="causalcat", description=__doc__.splitlines()[0], allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("stats", allow_abbrev=False, help="word-length statistics per class and split")
    _add_common(p)
    p.add_argument("--raw", action="store_true", help="count words of raw, uncleaned text")

    p = sub.add_parser("train", allow_abbrev=False, help="train a baseline or fine-tune an encoder")
    _add_common(p)

    p = sub.add_parser("evaluate", allow_abbrev=False, help="score a checkpoint on a labeled split")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="sdcnl_test")

    p = sub.add_parser("compare", help="compare evaluation reports with a significance test")
    p.add_argument("reports", nargs="+")
    p.add_argument("--mode", default="auto", choices=("auto", "seeds", "examples", "bootstrap"))
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--by-model", action="store_true", help="group reports by model name (one run per seed)")
    p.add_argument("--out", default="runs/compare")
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("predict", help="classify posts, one per line")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", help="text file with one post per line; stdin when omitted")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _dotted_overrides(extra: list[str]) -> dict:
    overrides = {}
    i = 0
    while i < len(extra):
        arg = extra[i]
        if not arg.startswith("--"):
            raise ConfigError(f"unrecognized argument {arg!r}")
        key, eq, value = arg[2:].partition("=")
        if not eq:
            if i + 1 >= len(extra):
                raise ConfigError(f"flag {arg} needs a value")
            value = extra[i + 1]
            i += 1
        overrides[key] = parse_scalar(value)
        i += 1
    return overrides


def _config_from_args(args, extra: list[str]) -> dict:
    overrides = _dotted_overrides(extra)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.model:
        overrides["model"] = args.model
    if args.backend_checkpoint:
        overrides["backend_checkpoint"] = args.backend_checkpoint
    if args.train_composition:
        overrides["train_composition"] = args.train_composition
    if args.balance:
        if args.balance.strip().lower() == "none":
            overrides["balance.n"] = 0
        else:
            classes, n = parse_balance(args.balance)
            overrides["balance.classes"] = [int(c) for c in classes]
            overrides["balance.n"] = n
    if getattr(args, "raw", False):
        overrides["stats.raw"] = True
    config = load_config(args.config, overrides)
    baseline = config["model"] in ("logreg", "cnn_lstm")
    section = "baseline" if baseline else "finetune"
    if args.lr is not None:
        config[config["model"] if baseline else "finetune"]["learning_rate"] = args.lr
    for flag, key in (("batch", "batch_size"), ("epochs", "epochs")):
        value = getattr(args, flag)
        if value is not None:
            config[section][key] = value
    if args.max_len is not None:
        config["finetune"]["max_len"] = args.max_len
        config["cnn_lstm"]["max_len"] = args.max_len
    return config


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command in ("compare", "predict"):
            if extra:
                raise ConfigError(f"unrecognized arguments: {' '.join(extra)}")
            return _run_simple(args)
        config = _config_from_args(args, extra)
        if args.command == "stats":
            results = pipeline.run_stats(config, args.out)
            for split in results:
                print(f"{split}: {args.out}/stats_{split}.txt")
        elif args.command == "train":
            model = pipeline.run_train(config, args.out)
            print(
                f"trained {pipeline.model_name(model)}: best epoch {model.manifest['best_epoch']}, "
                f"dev accuracy {float(model.manifest['dev_accuracy']):.4f} -> {args.out}"
            )
        elif args.command == "evaluate":
            if not args.model:
                config["model"] = None
            report = pipeline.run_evaluate(config, args.checkpoint, args.split, args.out)
            print(open(f"{args.out}/report.txt", encoding="utf-8").read(), end="")
            log.info("accuracy %.4f", report.accuracy)
    except CausalCatError as exc:
        print(f"causalcat: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


def _run_simple(args) -> int:
    if args.command == "compare":
        from causalcat.evaluation import EvalReport

        reports = [EvalReport.load(p) for p in args.reports]
        result = pipeline.compare_reports(reports, names=args.reports, mode=args.mode,
                                          alpha=args.alpha, by_model=args.by_model)
        pipeline.write_comparison(result, args.out)
        print(open(f"{args.out}/compare.txt", encoding="utf-8").read(), end="")
        return 0
    if args.input:
        try:
            with open(args.input, encoding="utf-8") as fh:
                lines = fh.readlines()
        except OSError as exc:
            raise ConfigError(f"cannot read {args.input}: {exc}") from None
    else:
        lines = sys.stdin.readlines()
    for row in pipeline.predict_lines(args.checkpoint, lines):
        print(row)
    return 0


if __name__ == "__main__":
    sys.exit(main())
