import os
import sys
import time
import asyncio
import argparse
import platform

from functools import partial

import aiofiles

from jptdp import *
from jptdp.events import *


def default_seed() -> str:
    # Converted by the --seed type, so a malformed value is a usage error
    return os.environ.get("JPTDP_SEED", "1")


def version() -> str:
    try:
        from importlib.metadata import version as package_version
        return package_version("jptdp")
    except Exception:
        return "unknown"


def _number(value: str, kind, minimum, description: str):
    try:
        number = kind(value)
    except ValueError:
        number = None

    # Rejects NaN and infinities too
    if number is None or not minimum <= number < float("inf"):
        raise argparse.ArgumentTypeError(f"expected {description}, "
                                         f"got {value}")
    return number


def positive_int(value: str) -> int:
    return _number(value, int, 1, "a positive integer")


def non_negative_int(value: str) -> int:
    return _number(value, int, 0, "a non-negative integer")


def non_negative_float(value: str) -> float:
    return _number(value, float, 0.0, "a non-negative number")


def positive_float(value: str) -> float:
    number = non_negative_float(value)

    if number == 0.0:
        raise argparse.ArgumentTypeError(f"expected a positive number, "
                                         f"got {value}")
    return number


def hyperparams_from_args(cli_args: argparse.Namespace) -> Hyperparams:
    return Hyperparams(
        char_dim=cli_args.char_dim,
        word_dim=cli_args.word_dim,
        ctx_state_dim=cli_args.ctx_dim,
        ctx_layers=cli_args.ctx_layers,
        mlp_hidden=cli_args.mlp_hidden,
        char_state_dim=cli_args.char_state_dim,
        word_dropout_alpha=cli_args.word_dropout,
        noise_sigma=cli_args.noise_sigma,
        margin=cli_args.margin,
        epochs=cli_args.epochs,
        seed=cli_args.seed,
        use_chars=not cli_args.no_chars,
        single_root=not cli_args.multi_root,
        arc_loss=cli_args.arc_loss,
        learning_rate=cli_args.learning_rate
    )


def cmd_train(cli_args: argparse.Namespace) -> int:
    if cli_args.float32:
        set_precision("float32")

    config = TrainConfig(
        train_path=cli_args.train,
        dev_path=cli_args.dev,
        model_out_path=cli_args.model,
        hyper=hyperparams_from_args(cli_args),
        shuffle=not cli_args.no_shuffle,
        concurrency=cli_args.concurrency,
        quiet=cli_args.quiet
    )

    train(config)

    return 0


async def run_prediction(cli_args: argparse.Namespace,
                         model: ModelParams,
                         treebank: Treebank) -> PredictionStats:
    stats = PredictionStats()

    async with aiofiles.open(cli_args.output, mode="w", encoding="utf-8",
                             newline="") as f:
        consumers = [
            partial(on_prediction_save_conllu, f),
            partial(on_prediction_count_words, stats)
        ]

        await predict_treebank(model,
                               treebank,
                               cli_args.concurrency,
                               consumers)

    return stats


def cmd_predict(cli_args: argparse.Namespace) -> int:
    quiet = cli_args.quiet

    report(PP, f"Loading model '{cli_args.model}'", quiet)
    model = load_model(cli_args.model)

    treebank = read_conllu(cli_args.input)
    report(PP, f"Tagging and parsing {len(treebank)} sentences", quiet)

    started = time.perf_counter()
    stats = asyncio.run(run_prediction(cli_args, model, treebank))
    elapsed = max(time.perf_counter() - started, 1e-9)

    # Throughput always goes to standard error
    report(PP, f"{stats.words} words in {elapsed:.1f}s: "
               f"{stats.words / elapsed:.1f} words/second")

    return 0


def cmd_eval(cli_args: argparse.Namespace) -> int:
    gold = read_conllu(cli_args.gold)
    pred = read_conllu(cli_args.pred)

    metrics = evaluate(gold,
                       pred,
                       include_punct=not cli_args.exclude_punct,
                       strip_subtypes=cli_args.strip_deprel_subtypes)

    if cli_args.json:
        print(metrics.format_json())
    else:
        print(metrics.format_key_values())

    return 0


def cmd_stats(cli_args: argparse.Namespace) -> int:
    train_set = read_conllu(cli_args.train) if cli_args.train else None

    for path in cli_args.files:
        treebank = read_conllu(path)

        line = f"{path} sentences={len(treebank)} " \
               f"tokens={treebank.token_count} " \
               f"nonprojective={nonprojective_rate(treebank):.4f}"

        if train_set is not None:
            line = f"{line} oov={oov_rate(train_set, treebank):.4f}"

        print(line)

    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jptdp",
        description='jPTDP - joint POS tagging and graph-based '
                    'dependency parsing'
    )

    parser.add_argument("--version",
                        action="version",
                        version=f"jptdp {version()}")

    commands = parser.add_subparsers(dest="command",
                                     metavar="{train,predict,eval,stats}")
    commands.required = True

    #
    # train
    #
    train_cmd = commands.add_parser("train", help="train a joint model")
    train_cmd.set_defaults(handler=cmd_train)

    group_data = train_cmd.add_argument_group('Data')
    group_data.add_argument("--train",
                            required=True,
                            help="training treebank (CoNLL-U)")
    group_data.add_argument("--dev",
                            default=None,
                            help="development treebank. Default: 4:1 split "
                                 "of the training treebank")
    group_data.add_argument("--model",
                            required=True,
                            help="checkpoint file to write")
    group_model = train_cmd.add_argument_group('Model')
    group_model.add_argument("--char-dim",
                             type=positive_int,
                             default=64,
                             help="character embedding size")
    group_model.add_argument("--char-state-dim",
                             type=positive_int,
                             default=64,
                             help="character BiLSTM state size per direction")
    group_model.add_argument("--word-dim",
                             type=positive_int,
                             default=128,
                             help="word embedding size")
    group_model.add_argument("--ctx-dim",
                             type=positive_int,
                             default=128,
                             help="context BiLSTM state size per direction")
    group_model.add_argument("--ctx-layers",
                             type=positive_int,
                             default=2,
                             help="context BiLSTM layers")
    group_model.add_argument("--mlp-hidden",
                             type=positive_int,
                             default=100,
                             help="hidden nodes of the arc and relation MLPs")
    group_model.add_argument("--no-chars",
                             action="store_true",
                             default=False,
                             help="drop character-based word representations")
    group_model.add_argument("--multi-root",
                             action="store_true",
                             default=False,
                             help="allow several tokens to attach to ROOT")

    group_training = train_cmd.add_argument_group('Training')
    group_training.add_argument("--epochs",
                                type=positive_int,
                                default=30,
                                help="training epochs")
    group_training.add_argument("--seed",
                                type=non_negative_int,
                                default=default_seed(),
                                help="random seed. Default: $JPTDP_SEED or 1")
    group_training.add_argument("--word-dropout",
                                type=non_negative_float,
                                default=0.25,
                                help="word dropout alpha")
    group_training.add_argument("--noise-sigma",
                                type=non_negative_float,
                                default=0.2,
                                help="Gaussian input noise deviation")
    group_training.add_argument("--margin",
                                type=non_negative_float,
                                default=1.0,
                                help="hinge loss margin")
    group_training.add_argument("--arc-loss",
                                choices=ARC_LOSS_MODES,
                                default="position",
                                help="per-position or global arc hinge loss")
    group_training.add_argument("--learning-rate",
                                type=positive_float,
                                default=0.001,
                                help="Adam learning rate")
    group_training.add_argument("--no-shuffle",
                                action="store_true",
                                default=False,
                                help="keep the treebank order every epoch")
    group_training.add_argument("--float32",
                                action="store_true",
                                default=False,
                                help="train with 32-bit floats")

    #
    # predict
    #
    predict_cmd = commands.add_parser("predict",
                                      help="tag and parse a CoNLL-U file")
    predict_cmd.set_defaults(handler=cmd_predict)
    predict_cmd.add_argument("--model", required=True, help="checkpoint file")
    predict_cmd.add_argument("--input", required=True,
                             help="CoNLL-U file to annotate")
    predict_cmd.add_argument("--output", required=True,
                             help="annotated CoNLL-U file to write")

    #
    # eval
    #
    eval_cmd = commands.add_parser("eval",
                                   help="score predictions against gold")
    eval_cmd.set_defaults(handler=cmd_eval)
    eval_cmd.add_argument("--gold", required=True, help="gold CoNLL-U file")
    eval_cmd.add_argument("--pred", required=True,
                          help="predicted CoNLL-U file")
    eval_cmd.add_argument("--exclude-punct",
                          action="store_true",
                          default=False,
                          help="ignore tokens whose gold UPOS is PUNCT")
    eval_cmd.add_argument("--strip-deprel-subtypes",
                          action="store_true",
                          default=False,
                          help="compare relations without ':' subtypes")
    eval_cmd.add_argument("--json",
                          action="store_true",
                          default=False,
                          help="print the report as JSON")

    #
    # stats
    #
    stats_cmd = commands.add_parser("stats", help="treebank statistics")
    stats_cmd.set_defaults(handler=cmd_stats)
    stats_cmd.add_argument("files", nargs="+", help="CoNLL-U files")
    stats_cmd.add_argument("--train",
                           default=None,
                           help="training treebank for OOV rates")

    for cmd in (train_cmd, predict_cmd, eval_cmd, stats_cmd):
        group_display = cmd.add_argument_group('Display options')
        group_display.add_argument("-q", "--quiet",
                                   default=False,
                                   action="store_true",
                                   help="Use quiet mode")

    for cmd in (train_cmd, predict_cmd):
        cmd.add_argument("-c", "--concurrency",
                         default=5,
                         type=positive_int,
                         help="max concurrent sentences when predicting")

    return parser


def main(argv=None) -> int:

    #
    # Check python version
    #
    if tuple(map(int, platform.python_version_tuple()[:2])) < (3, 8):
        print("\n[!] Python 3.8 or above is required\n", file=sys.stderr)
        return 1

    parsed = build_parser().parse_args(argv)

    if not parsed.quiet:
        print(LOGO, file=sys.stderr)

    try:
        return parsed.handler(parsed)
    except (JptdpError, OSError) as e:
        report(PER, str(e))
        return 1
    except KeyboardInterrupt:
        report(PW, "Stopping jptdp")
        return 1


if __name__ == '__main__':
    sys.exit(main())
