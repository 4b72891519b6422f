"""Command line entry point: ``squeezeprune {synth,train,prune,eval,report}``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .autodiff import NumericError
from .config import ConfigError, RunConfig, load_config
from .data import DataError, ImageDecodeError
from .model import CheckpointError

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_IO = 2, 3, 4, 5

log = logging.getLogger("squeezeprune")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="squeezeprune", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", help="INI run configuration (defaults apply when omitted)")
        p.add_argument("--seed", type=int, help="override [run] seed")
        p.add_argument("--out", help="override [run] out_dir")
        return p

    with_config(sub.add_parser("synth", help="write the synthetic pose dataset"))
    with_config(sub.add_parser("train", help="train a model from scratch"))
    with_config(sub.add_parser("prune", help="iterative Taylor pruning of a trained checkpoint"))
    p = with_config(sub.add_parser("eval", help="verification scores and EERs for a checkpoint"))
    p.add_argument("--checkpoint", help="override [eval] checkpoint")
    p = sub.add_parser("report", help="render SVG charts for a run directory")
    p.add_argument("run_dir")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.run.seed = args.seed
    if args.out is not None:
        cfg.run.out_dir = args.out
    return cfg


def run(args) -> None:
    if args.command == "report":
        for path in pipeline.cmd_report(args.run_dir):
            print(path)
        return
    cfg = resolve_config(args)
    pipeline.snapshot_config(cfg)
    log.info("command %s, seed %d, run directory %s", args.command, cfg.run.seed, cfg.out_dir)
    if args.command == "synth":
        manifest = pipeline.cmd_synth(cfg)
        print(f"wrote {len(manifest)} images to {pipeline.synth_dir(cfg)}")
    elif args.command == "train":
        pipeline.cmd_train(cfg)
        print(cfg.out_dir / pipeline.TRAINED)
    elif args.command == "prune":
        result = pipeline.cmd_prune(cfg)
        last = result.rows[-1]
        print(f"pruned {last['pruned_fraction']:.2f}: {last['filters']} filters, "
              f"val accuracy {last['val_accuracy']:.3f}")
    elif args.command == "eval":
        for n, report in pipeline.cmd_eval(cfg, args.checkpoint).items():
            print(f"{n}-image templates: pooled EER {report.pooled_eer:.4f}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        run(args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (DataError, ImageDecodeError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except NumericError as exc:
        log.error("numeric error: %s", exc)
        return EXIT_NUMERIC
    except (OSError, CheckpointError) as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
