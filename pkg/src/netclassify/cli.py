"""Command line entry point: ``netclassify <command> [options]``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import pipeline
from .errors import ConfigError, NetClassifyError


def _config(args) -> pipeline.RunConfig:
    cfg = pipeline.load_config(args.config) if args.config else pipeline.RunConfig().validate()
    if args.seed_override is not None:
        cfg = cfg.with_seed(args.seed_override)
    return cfg


def _out(args, cfg) -> Path:
    return Path(args.out if args.out else cfg.out)


def _set_threads(n: int | None) -> None:
    # results never depend on this; it only caps worker threads
    if n is None:
        return
    if n < 1:
        raise ConfigError("--threads must be at least 1")
    import numba
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def cmd_run(args):
    cfg = _config(args)
    rows = pipeline.run_all(cfg, _out(args, cfg))
    sys.stdout.write(pipeline.evaluation.summary_csv(rows))


def cmd_synth(args):
    cfg = _config(args)
    out = _out(args, cfg)
    with pipeline.stage("data"):
        ds = pipeline.stage_data(cfg, out)
    print(f"{len(ds)} rows -> {out / 'data.csv'}")


def cmd_network(args):
    cfg = _config(args)
    out = _out(args, cfg)
    with pipeline.stage("network"):
        data = None
        if args.data:
            data = pipeline.parse_dataset(Path(args.data).read_text(), cfg.schema())
        path = pipeline.stage_network(cfg, out, data)
    print(path)


def cmd_metrics(args):
    with pipeline.stage("metrics"):
        if args.edges:
            text = pipeline.compute_metrics(Path(args.edges).read_text(), args.nodes)
            if args.out:
                path = pipeline._write(Path(args.out) / "metrics.csv", text)
                print(path)
            else:
                sys.stdout.write(text)
            return
        cfg = _config(args)
        print(pipeline.stage_metrics(cfg, _out(args, cfg)))


def _stage_cmd(name, fn):
    def run(args):
        cfg = _config(args)
        with pipeline.stage(name):
            result = fn(cfg, _out(args, cfg))
        if name == "evaluate":
            sys.stdout.write(pipeline.evaluation.summary_csv(result))
        else:
            for p in result:
                print(p)
    return run


def cmd_report(args):
    with pipeline.stage("report"):
        texts = [Path(p).read_text() for p in args.summaries]
        merged = pipeline.report(texts)
    if args.out:
        pipeline._write(Path(args.out), merged)
    else:
        sys.stdout.write(merged)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration (defaults when omitted)")
    common.add_argument("--out", help="run directory (overrides [output] dir)")
    common.add_argument("--seed-override", type=int, metavar="N",
                        help="replace the data and network seeds")
    common.add_argument("--threads", type=int, metavar="N", help="cap worker threads")

    p = argparse.ArgumentParser(prog="netclassify", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run every stage").set_defaults(fn=cmd_run)
    sub.add_parser("synth", parents=[common],
                   help="load or synthesize, clean and partition the data").set_defaults(fn=cmd_synth)
    s = sub.add_parser("network", parents=[common], help="weighted small-world edge list")
    s.add_argument("--data", help="dataset CSV (default: <out>/data.csv)")
    s.set_defaults(fn=cmd_network)
    s = sub.add_parser("metrics", parents=[common], help="node metrics from an edge list")
    s.add_argument("--edges", help="edge-list CSV (default: <out>/network.csv)")
    s.add_argument("--nodes", type=int, help="node count when trailing nodes are isolated")
    s.set_defaults(fn=cmd_metrics)
    for name, fn in (("train-svm", pipeline.stage_train_svm),
                     ("train-logit", pipeline.stage_train_logit),
                     ("evaluate", pipeline.stage_evaluate)):
        sub.add_parser(name, parents=[common]).set_defaults(fn=_stage_cmd(name, fn))
    s = sub.add_parser("report", help="merge summary tables")
    s.add_argument("summaries", nargs="+")
    s.add_argument("--out", help="write the merged table here instead of stdout")
    s.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _set_threads(getattr(args, "threads", None))
        args.fn(args)
    except NetClassifyError as e:
        where = getattr(e, "stage", None)
        print(f"error{f' [{where}]' if where else ''}: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
