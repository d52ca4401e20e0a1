"""Command line entry point.

Exit status: 0 on success, 1 for invalid input or configuration, 2 when a
run fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from . import pipeline
from .config import ConfigError, PipelineConfig
from .synth import CORPORA

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
_UNSET = object()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _band(text: str):
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"band must look like lo:hi, got {text!r}")
    return [lo, hi]


def _tim_len(text: str):
    if text.lower() == "none":
        return None
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tim length must be an integer or 'none', got {text!r}")


def _common(p):
    p.add_argument("manifest", help="dataset manifest (JSON array of clip records)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--config", default=None, help="pipeline config JSON")
    p.add_argument("--jobs", type=int, default=None, help="worker processes")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--feature", choices=("LBP", "HOOF"), default=None, help="spotting feature")


def _recognition_opts(p):
    p.add_argument("--alpha", type=float, default=None, help="motion magnification factor")
    p.add_argument("--gamma", type=float, default=None, help="magnification cutoff wavelength (px)")
    p.add_argument("--band", type=_band, default=None, help="temporal passband lo:hi in Hz")
    p.add_argument("--levels", type=int, default=None, help="pyramid levels")
    p.add_argument("--tim-len", type=_tim_len, default=_UNSET, help="interpolated length, or 'none'")
    p.add_argument("--descriptor", choices=("LBP", "HOG", "HIGO", "HOOF"), default=None)
    p.add_argument("--combo", default=None, help="plane combination: TOP, XYOT, XOT, YOT or XY")
    p.add_argument("--mode", choices=("subject", "sample"), default=None, help="leave-one-out unit")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="microexpr", description="Micro-expression spotting and recognition")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("spot", help="spot micro-expressions and score an ROC over tau")
    _common(p)

    p = sub.add_parser("recognize", help="leave-one-subject-out recognition of labelled clips")
    _common(p)
    _recognition_opts(p)
    p.add_argument("--sweep", choices=("alpha", "tim"), default=None)

    p = sub.add_parser("mesr", help="spot then recognise long sequences")
    _common(p)
    _recognition_opts(p)

    p = sub.add_parser("eval", help="parameter sweeps: tau (spotting), alpha or tim (recognition)")
    p.add_argument("sweep", choices=("tau", "alpha", "tim"))
    _common(p)
    _recognition_opts(p)

    p = sub.add_parser("synth", help="write a synthetic corpus")
    p.add_argument("kind", choices=sorted(CORPORA))
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("config", help="show or check a pipeline config")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--print-defaults", action="store_true")
    g.add_argument("--validate", metavar="FILE")
    return parser


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config)
    spot = cfg.spot
    if args.tau is not None:
        spot = replace(spot, tau=args.tau)
    if args.feature is not None:
        spot = replace(spot, feature=args.feature)
    cfg = replace(cfg, spot=spot)
    if args.jobs is not None:
        cfg = replace(cfg, jobs=args.jobs)
    if hasattr(args, "alpha"):
        mag = cfg.magnify
        for name in ("alpha", "gamma", "band", "levels"):
            value = getattr(args, name)
            if value is not None:
                mag = replace(mag, **{name: value})
        cfg = replace(cfg, magnify=mag)
        if args.tim_len is not _UNSET:
            cfg = replace(cfg, tim_length=args.tim_len)
        desc = cfg.descriptor
        if args.descriptor is not None:
            desc = replace(desc, kind=args.descriptor)
        if args.combo is not None:
            desc = replace(desc, combo=args.combo)
        cfg = replace(cfg, descriptor=desc)
        if args.mode is not None:
            cfg = replace(cfg, classifier=replace(cfg.classifier, mode=args.mode))
    cfg.validate()
    return cfg


def _print(data) -> None:
    print(json.dumps(data, indent=2, sort_keys=True))


def run(args) -> int:
    if args.command == "config":
        if args.print_defaults:
            print(PipelineConfig().to_json())
        else:
            PipelineConfig.load(args.validate)
            print("ok")
        return EXIT_OK
    if args.command == "synth":
        print(CORPORA[args.kind](args.out, seed=args.seed))
        return EXIT_OK
    cfg = _config(args)
    if args.command == "spot" or (args.command == "eval" and args.sweep == "tau"):
        res = pipeline.run_spot(args.manifest, cfg, args.out)
        _print({"auc": res["summary"]["auc"], "n": res["summary"]["n"], "tpr": res["spots"]["tpr"],
                "fpr": res["spots"]["fpr"], "failures": res["spots"]["failures"]})
    elif args.command == "recognize":
        res = pipeline.run_recognize(args.manifest, cfg, args.out, args.sweep)
        _print(res["results"] if args.sweep else {"accuracy": res["accuracy"], "n": res["n"], "failures": res["failures"]})
    elif args.command == "eval":
        res = pipeline.run_recognize(args.manifest, cfg, args.out, args.sweep)
        _print(res["results"])
    elif args.command == "mesr":
        res = pipeline.run_mesr(args.manifest, cfg, args.out)
        _print({k: res[k] for k in ("spotting", "recognition", "overall", "failures")})
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return run(args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # anything else is a failed run
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
