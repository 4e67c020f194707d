import argparse
import json
import logging
import os
import sys
from typing import List, Optional
import rich
from rich.logging import RichHandler
from rich.table import Table
from udakit.errors import ConfigError, UdaError
from udakit.bench.config import BenchConfig
from udakit.bench.embed import dump_embeddings
from udakit.bench.gradsuite import INSTANCES, run_gradsuite
from udakit.bench.report import console_table, emit_report
from udakit.bench.runner import run_matrix
from udakit.data.csv import load_csv, save_csv
from udakit.data.shift import ShiftSpec, make_shift_pair
from udakit.models.checkpoint import load_checkpoint


"""
命令行入口：bench run / gradcheck / gen / embed。
"""


logger = logging.getLogger("udakit")


def setup_logging(verbose: bool) -> None:
    logging.basicConfig(level = logging.DEBUG if verbose else logging.INFO, format = "%(message)s", datefmt = "[%X]", handlers = [RichHandler(rich_tracebacks = False)], force = True)


def cmd_run(args: argparse.Namespace) -> int:
    """
    运行配置文件中的任务矩阵，写出report.csv、report.md、resolved_config.json与各个运行日志。
    """
    cfg = BenchConfig.load(args.config)
    workers = args.workers if args.workers is not None else cfg.workers
    if workers < 1:
        raise ConfigError("At least one worker is required, got %d." % (workers,))
    os.makedirs(args.out, exist_ok = True)
    cfg.dump(os.path.join(args.out, "resolved_config.json"))
    domains = {}
    for spec in cfg.domains:
        if spec.name in domains:
            raise ConfigError("Duplicate domain name '%s'." % (spec.name,))
        domains[spec.name] = spec.build()
        logger.debug("Domain %s: %d rows, %d features", spec.name, len(domains[spec.name]), domains[spec.name].dim)
    table, results = run_matrix(domains, cfg.algorithms, cfg.template, workers, args.out, cfg.save_checkpoints, cfg.dump_embeddings)
    emit_report(table, os.path.join(args.out, "report.csv"), "csv")
    emit_report(table, os.path.join(args.out, "report.md"), "markdown")
    rich.print(console_table(table))
    failed = [r for r in results if r.failed]
    if failed:
        rich.print("[red]%d of %d tasks failed on every seed.[/red]" % (len(failed), len(results)))
        return 1
    rich.print("[green]Wrote %d rows to %s.[/green]" % (len(table), args.out))
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    """
    运行有限差分梯度检验套件，任一项失败时返回非零。
    """
    results = run_gradsuite(args.instances, args.seed, args.case or None)
    t = Table(title = "Finite-difference gradient checks")
    t.add_column("case")
    t.add_column("instances", justify = "right")
    t.add_column("resampled", justify = "right")
    t.add_column("max rel err", justify = "right")
    t.add_column("status")
    for r in results:
        t.add_row(r.name, str(len(r.reports)), str(r.resampled), "%.2e" % (r.worst.max_error,), "[green]ok[/green]" if r.passed else "[red]FAILED[/red]")
    rich.print(t)
    bad = [r for r in results if not r.passed]
    for r in bad:
        logger.error("%s", r.worst)
    return 1 if bad else 0


def cmd_gen(args: argparse.Namespace) -> int:
    """
    生成一对合成域，写出<stem>_source.csv与<stem>_target.csv。
    """
    with open(args.spec, "r", encoding = "utf-8") as f:
        try:
            spec = ShiftSpec.from_dict(json.load(f))
        except json.JSONDecodeError as e:
            raise ConfigError("'%s' is not valid JSON: %s" % (args.spec, e)) from None
    source, target = make_shift_pair(spec)
    stem, _ = os.path.splitext(args.out)
    for d in (source, target):
        path = "%s_%s.csv" % (stem, d.domain_tag)
        save_csv(d, path)
        rich.print("[green]Wrote %d rows to %s.[/green]" % (len(d), path))
    return 0


def cmd_embed(args: argparse.Namespace) -> int:
    """
    用检查点中的特征提取器把两个CSV数据集投影到二维。
    """
    ckpt = load_checkpoint(args.checkpoint)
    c = ckpt.bundle.class_count
    source = load_csv(args.source, args.label_column, c, domain_tag = "source")
    target = load_csv(args.target, args.label_column, c, domain_tag = "target")
    dump_embeddings(ckpt.bundle, source, target, args.out, args.plot)
    rich.print("[green]Wrote %d rows to %s.[/green]" % (len(source) + len(target), args.out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog = "bench", description = "Unsupervised domain adaptation benchmark")
    parser.add_argument("--verbose", "-v", action = "store_true", help = "Log at DEBUG level")
    sub = parser.add_subparsers(dest = "command", required = True)

    run = sub.add_parser("run", help = "Run every ordered domain pair for every algorithm in a config")
    run.add_argument("config", help = "Bench config (JSON)")
    run.add_argument("--out", required = True, help = "Output directory")
    run.add_argument("--workers", type = int, default = None, help = "Worker processes (overrides the config)")
    run.set_defaults(func = cmd_run)

    grad = sub.add_parser("gradcheck", help = "Run the finite-difference gradient suite")
    grad.add_argument("--instances", type = int, default = INSTANCES, help = "Random instances per case")
    grad.add_argument("--seed", type = int, default = 0)
    grad.add_argument("--case", action = "append", help = "Only run this case (repeatable)")
    grad.set_defaults(func = cmd_gradcheck)

    gen = sub.add_parser("gen", help = "Materialize a synthetic source/target pair as CSV")
    gen.add_argument("--spec", required = True, help = "Shift spec (JSON)")
    gen.add_argument("--out", required = True, help = "Output path; '_source' and '_target' are added to the stem")
    gen.set_defaults(func = cmd_gen)

    embed = sub.add_parser("embed", help = "Dump a PCA projection of learned features")
    embed.add_argument("checkpoint")
    embed.add_argument("source")
    embed.add_argument("target")
    embed.add_argument("--out", required = True)
    embed.add_argument("--label-column", default = "label")
    embed.add_argument("--plot", default = None, help = "Optional PNG scatter plot")
    embed.set_defaults(func = cmd_embed)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        return args.func(args)
    except UdaError as e:
        logger.error("%s: %s", e.__class__.__name__, e)
        return 2
    except OSError as e:
        logger.error("%s", e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
