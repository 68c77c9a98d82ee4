"""Command line front end.

    eenet-lab run --config exp.json [--out DIR] [--threads K]
    eenet-lab sweep --config exp.json --grid grid.json [--out DIR] [--threads K]
    eenet-lab gen-dataset --kind classification --rows 500 --out data.csv

Exit status is 0 on success, 1 for a bad config or grid, 2 when a run fails.
"""

import argparse
import json
import logging
import sys

from .environments import DatasetError, gen_dataset
from .experiment import THREADS_ENV, ConfigError, ExperimentConfig, run_experiment, sweep

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _read_json(path, what):
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc.strerror}") from None


def _load_config(path):
    return ExperimentConfig.from_json(_read_json(path, "config"))


def _load_grid(path):
    try:
        grid = json.loads(_read_json(path, "grid"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid grid JSON: {exc}") from None
    if not isinstance(grid, dict):
        raise ConfigError("grid must be a JSON object of key -> list")
    return grid


def cmd_run(args):
    config = _load_config(args.config)
    out = args.out if args.out is not None else config.output_dir
    summary, _ = run_experiment(config, out, args.threads)
    print(f"final mean cumulative regret {summary.final_mean:.6g} "
          f"(sd {summary.final_sd:.6g}, {config.runs} runs)")
    if out is not None:
        print(f"outputs written to {out}")


def cmd_sweep(args):
    config = _load_config(args.config)
    grid = _load_grid(args.grid)
    best, summary, results = sweep(config, grid, args.out, args.threads)
    for i, (point, _, s) in enumerate(results):
        print(f"point {i} {json.dumps(point, sort_keys=True)}: {s.final_mean:.6g}")
    print(f"best: {json.dumps(best.to_dict(), sort_keys=True)}")


def cmd_gen_dataset(args):
    try:
        path = gen_dataset(args.kind, args.rows, args.out, d=args.d,
                           n_classes=args.classes, seed=args.seed)
    except (ValueError, DatasetError) as exc:
        raise ConfigError(str(exc)) from None
    print(f"wrote {args.rows} rows to {path}")


def build_parser():
    parser = argparse.ArgumentParser(prog="eenet-lab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    threads_help = f"worker threads for independent runs (default ${THREADS_ENV} or 1)"
    p = sub.add_parser("run", help="run one experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides output_dir in the config)")
    p.add_argument("--threads", type=int, help=threads_help)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="grid search over config fields")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", required=True, help='JSON object such as {"agent.nu": [0.1, 1]}')
    p.add_argument("--out", help="output root; each grid point gets point_<i>/")
    p.add_argument("--threads", type=int, help=threads_help)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen-dataset", help="write a seeded synthetic CSV dataset")
    p.add_argument("--kind", required=True, choices=["classification", "positive_vs_negatives"])
    p.add_argument("--rows", required=True, type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--d", type=int, default=4, help="feature dimension")
    p.add_argument("--classes", type=int, default=3, help="number of classes")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_dataset)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any run failure maps to one exit code
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
