"""
uti2speech command-line front-end.

    uti2speech <split|extract|train|predict|synth|eval|mushra> --config cfg.json [--set a.b=v ...]

Failures print one line ``error\t<code>\t<message>`` to stderr and exit 2.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from backend.data_ingestion.ingest_pipeline import cmd_extract, cmd_split
from backend.src.core.config import default_jobs, load_config
from backend.src.core.errors import Uti2SpeechError
from backend.src.core.logging import setup_logging
from backend.stages import ENGINES, cmd_eval, cmd_mushra, cmd_predict, cmd_synth, cmd_train

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_ERROR = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uti2speech", description="Ultrasound tongue images to speech")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="pipeline JSON config")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config value, e.g. train.learning_rate=0.005")
    common.add_argument("--jobs", type=int, default=None, help="parallel utterances (default: $UTI2SPEECH_JOBS or 1)")
    common.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING ... (default: $UTI2SPEECH_LOG_LEVEL)")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("split", parents=[common], help="write the train/val/test manifest")
    sub.add_parser("extract", parents=[common], help="align streams, resize images, compute targets")
    sub.add_parser("train", parents=[common], help="train the CNN(s)")

    predict = sub.add_parser("predict", parents=[common], help="predict features for the test set")
    predict.add_argument("--plot-data", default=None, metavar="UTT",
                         help="also write normalized original/predicted features of UTT as TSV")

    synth = sub.add_parser("synth", parents=[common], help="render predictions")
    synth.add_argument("--engine", choices=ENGINES, required=True)
    synth.add_argument("--anchor", action="store_true", help="contvoc: constant-F0 lower anchor")
    synth.add_argument("--copy", action="store_true", help="contvoc: resynthesize analysed reference parameters")

    evaluate = sub.add_parser("eval", parents=[common], help="mel-cepstral distortion report")
    evaluate.add_argument("--engine", default="griffinlim", help="synth output label to score")
    evaluate.add_argument("--domain", choices=("audio", "features"), default="audio")
    evaluate.add_argument("--ref-dir", type=Path, default=None)
    evaluate.add_argument("--test-dir", type=Path, default=None)

    mushra = sub.add_parser("mushra", parents=[common], help="listening-test score statistics")
    mushra.add_argument("--scores", required=True, type=Path, help="CSV listener,system,sentence,score[,speaker]")
    return parser


def run(args: argparse.Namespace):
    cfg = load_config(args.config, args.overrides)
    jobs = args.jobs if args.jobs is not None else default_jobs()

    if args.command == "split":
        return cmd_split(cfg)
    if args.command == "extract":
        return cmd_extract(cfg, jobs)
    if args.command == "train":
        return cmd_train(cfg)
    if args.command == "predict":
        return cmd_predict(cfg, jobs, plot_data=args.plot_data)
    if args.command == "synth":
        return cmd_synth(cfg, args.engine, jobs, anchor=args.anchor, copy=args.copy)
    if args.command == "eval":
        return cmd_eval(cfg, args.engine, args.domain, jobs, ref_dir=args.ref_dir, test_dir=args.test_dir)
    return cmd_mushra(cfg, args.scores)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        result = run(args)
    except Uti2SpeechError as e:
        logger.error("%s failed: %s", args.command, e)
        print(f"error\t{e.code}\t{e}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as e:  # noqa: BLE001 - last-resort report for the shell
        logger.exception("Unexpected failure in %s", args.command)
        print(f"error\tunexpected\t{e}", file=sys.stderr)
        return EXIT_UNEXPECTED

    for warning in result.get("warnings", []):
        logger.warning("%s", warning)
    for name, epochs in result.get("epochs", {}).items():
        logger.info("%s: best epoch %d, stopped after epoch %d", name, epochs["best_epoch"], epochs["stopped_epoch"])
    for path in result.get("outputs", []):
        print(path)
    logger.info("%s finished: %d outputs", result["stage"], len(result.get("outputs", [])))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
