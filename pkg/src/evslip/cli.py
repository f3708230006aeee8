"""Command line entry point: ``evslip run|replay|sweep|export-svg``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import load_config
from .errors import ConfigInvalid, EvslipError
from .experiment import replay, run_experiment, sweep_gains
from .traces import export_svg


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evslip", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    run = sub.add_parser("run", help="run one closed-loop grasp cycle")
    run.add_argument("--config", required=True)
    run.add_argument("--sockets", type=int, metavar="PORT",
                     help="run the plant in a separate process on this port (0 = any)")
    run.add_argument("--out", default="run")

    rep = sub.add_parser("replay", help="re-run detection and control on a recorded EVS1 file")
    rep.add_argument("--events", required=True)
    rep.add_argument("--mask")
    rep.add_argument("--config", required=True)
    rep.add_argument("--out", default="replay")

    sw = sub.add_parser("sweep", help="grid over kp and ki")
    sw.add_argument("--config", required=True)
    sw.add_argument("--kp", type=_floats, required=True)
    sw.add_argument("--ki", type=_floats, required=True)
    sw.add_argument("--out", default="sweep")

    ex = sub.add_parser("export-svg", help="plot every column of a trace CSV")
    ex.add_argument("--csv", required=True)
    ex.add_argument("--out")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "run":
            cfg = load_config(args.config)
            if args.sockets is not None:
                cfg = replace(cfg, net=replace(cfg.net, mode="sockets", port=args.sockets))
            report = run_experiment(cfg, args.out).report
            for key, value in report.as_dict().items():
                print(f"{key} = {value}")
        elif args.verb == "replay":
            cfg = load_config(args.config)
            replay(args.events, cfg, args.mask, args.out)
            print(Path(args.out) / "replay_trace.csv")
        elif args.verb == "sweep":
            cfg = load_config(args.config)
            if not args.kp or not args.ki:
                raise ConfigInvalid("--kp and --ki need at least one value each")
            rows = sweep_gains(cfg, args.kp, args.ki, args.out)
            print(f"{len(rows)} runs -> {Path(args.out) / 'sweep.csv'}")
        else:
            for path in export_svg(args.csv, args.out):
                print(path)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (EvslipError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
