"""Command line front end.

Subcommands:

* ``evt run --config exp.ini``           train, transfer, evaluate, report
* ``evt gen-evidence --config exp.ini``  write the evidence files a run
  would construct, without training
* ``evt report a.csv b.csv``             merge report files into a table

Exit codes: 0 success, 1 data or runtime failure, 2 usage or config error.
``EVT_THREADS`` caps BLAS thread pools; it must be honoured before numpy
loads, so the heavy imports happen inside ``main``.
"""

from __future__ import annotations

import argparse
import os
import sys


def _apply_thread_env() -> None:
    threads = os.environ.get("EVT_THREADS")
    if not threads:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, threads)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evt",
        description="latent-space manipulation with external categorical evidence",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train, transfer and evaluate one experiment")
    run.add_argument("--config", required=True, help="experiment INI file")
    run.add_argument("--seed", type=int, default=None, help="override [train] seed")
    run.add_argument("--out", default=None, help="directory for result files")
    run.add_argument("--quiet", action="store_true", help="suppress stdout table")

    gen = sub.add_parser("gen-evidence",
                         help="write the evidence files for a config without training")
    gen.add_argument("--config", required=True, help="experiment INI file")
    gen.add_argument("--seed", type=int, default=None, help="override [train] seed")
    gen.add_argument("--out", required=True, help="directory for evidence files")
    gen.add_argument("--quiet", action="store_true")

    rep = sub.add_parser("report", help="merge report CSVs into a text table")
    rep.add_argument("csvs", nargs="+", help="report CSV files")
    rep.add_argument("--out", default=None, help="write the table here instead of stdout")
    rep.add_argument("--aggregate", action="store_true",
                     help="collapse repeated configurations into mean +- std")
    rep.add_argument("--quiet", action="store_true")
    return parser


def _load(args):
    from . import config as config_mod

    try:
        exp = config_mod.load_config(args.config)
    except FileNotFoundError:
        raise config_mod.ConfigError(f"config file not found: {args.config}")
    if args.seed is not None:
        if args.seed < 0:
            raise config_mod.ConfigError("--seed must be nonnegative")
        exp.train.seed = args.seed
    return exp


def _resolve_outputs(exp, out_dir, defaults):
    paths = dict(exp.outputs)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for key, name in defaults.items():
            paths.setdefault(key, name)
        paths = {key: value if os.path.isabs(value) else os.path.join(out_dir, value)
                 for key, value in paths.items()}
    return paths


def _cmd_run(args) -> int:
    from . import config as config_mod, data, pipeline, report as report_mod

    exp = _load(args)
    if not exp.evidence:
        raise config_mod.ConfigError("run requires [evidence] sources")
    bundle = config_mod.load_dataset(exp.dataset)
    result = pipeline.run_experiment(
        bundle, exp.evidence, exp.incompleteness, exp.train,
        arch=exp.arch, eval_k=exp.eval_k, eval_restarts=exp.eval_restarts,
    )
    rep = result.report
    paths = _resolve_outputs(exp, args.out, {
        "csv": "report.csv", "table": "report.txt", "checkpoint": "model.evtk",
    })
    table = report_mod.render_table(
        [rep], title=f"{bundle.name}: bottleneck clustering, k={rep.k}")
    if "csv" in paths:
        report_mod.write_csv([rep], paths["csv"])
    if "table" in paths:
        with open(paths["table"], "w") as fh:
            fh.write(table)
    if "checkpoint" in paths:
        data.save_checkpoint(result.transferred, paths["checkpoint"])
    if not args.quiet:
        sys.stdout.write(table)
    return 0


def _cmd_gen_evidence(args) -> int:
    from . import config as config_mod, data
    from .evidence import apply_incompleteness, make_source
    from .pipeline import _S_DROP, _S_EVGEN, _describe, _int_seed

    exp = _load(args)
    if not exp.evidence:
        raise config_mod.ConfigError("gen-evidence requires [evidence] sources")
    bundle = config_mod.load_dataset(exp.dataset)
    os.makedirs(args.out, exist_ok=True)
    seed = exp.train.seed
    for i, spec in enumerate(exp.evidence):
        src = make_source(bundle.labels, spec, seed=_int_seed(seed, _S_EVGEN, i))
        src = apply_incompleteness(src, exp.incompleteness,
                                   seed=_int_seed(seed, _S_DROP, i))
        path = os.path.join(args.out, f"source_{i:02d}_{_describe(spec)}.evtcat")
        data.save_evidence(src, path)
        if not args.quiet:
            print(f"wrote {path} (w={src.width}, {src.m}/{src.n} observed)")
    return 0


def _cmd_report(args) -> int:
    from . import report as report_mod

    reports = []
    for path in args.csvs:
        reports.extend(report_mod.read_csv(path))
    if args.aggregate:
        text = report_mod.render_aggregate(report_mod.aggregate(reports))
    else:
        text = report_mod.render_table(reports)
    if args.out is not None:
        with open(args.out, "w") as fh:
            fh.write(text)
    if not args.quiet:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    _apply_thread_env()

    from .config import ConfigError
    from .data import FormatError
    from .evidence import EvidenceError

    handlers = {"run": _cmd_run, "gen-evidence": _cmd_gen_evidence,
                "report": _cmd_report}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"evt: config error: {exc}", file=sys.stderr)
        return 2
    except (FormatError, EvidenceError, OSError, ValueError, IndexError) as exc:
        print(f"evt: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
