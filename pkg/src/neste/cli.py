"""Command-line interface for neste."""

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import List

from . import __version__
from .config import (
    DATA_KEYS,
    RunConfig,
    load_config_file,
    parse_hits,
    resolve_run_config,
    write_manifest,
)
from .errors import (
    CheckpointError,
    ConfigError,
    EvaluationError,
    GraphParseError,
    NameResolutionError,
    NesteError,
)
from .evaluation import EVALUATORS, TASKS, RankingReport, format_json, format_table, report_rows
from .graph_data import (
    SymbolTable,
    augment_graph,
    load_graph,
    read_records,
    save_graph,
    split_triples,
    write_atomic,
)
from .hypercomplex import Algebra
from .patterns import PatternCheck, export_relation_heatmaps, run_pattern_suite
from .scoring import CELL_NORMS, load_checkpoint, save_checkpoint
from .synthetic import generate_synthetic_graph
from .training import MODES, default_threads, train

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.neste"
LOG_NAME = "training_log.csv"


class _ArgumentParser(argparse.ArgumentParser):
    """Report usage errors with exit code 1."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        print(f"Error: {message}", file=sys.stderr)
        sys.exit(1)


def main() -> None:
    """Main CLI entry point for neste.

    Exit codes:
        0 - Success
        1 - Validation failure, bad configuration or usage error
        2 - Error reading an input file
    """
    parser = _build_parser()
    args = parser.parse_args(sys.argv[1:])
    if args.command is None:
        parser.print_help()
        sys.exit(1)

    _configure_logging(args.verbose)
    try:
        code = args.handler(args)
    except (GraphParseError, NameResolutionError) as e:
        print(f"Error reading file: {e}", file=sys.stderr)
        sys.exit(2)
    except OSError as e:
        print(f"Error reading file: {e}", file=sys.stderr)
        sys.exit(2)
    except (ConfigError, CheckpointError, EvaluationError) as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)
    except NesteError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)
    sys.exit(code)


def _configure_logging(verbose: int) -> None:
    level = logging.WARNING
    if verbose == 1:
        level = logging.INFO
    elif verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )


# -------- argument parsing --------


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for progress messages, -vv for debug output")
    common.add_argument("-c", "--config", help="key = value configuration file")
    common.add_argument("-o", "--output-dir", dest="output_dir",
                        help="directory for every output of the run")
    common.add_argument("--seed", type=int, help="random seed (falls back to NESTE_SEED)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: all cores; 1 forces deterministic mode)")
    common.add_argument("--progress", action="store_true", help="show progress bars")

    data = argparse.ArgumentParser(add_help=False)
    for key in DATA_KEYS:
        data.add_argument(f"--{key.replace('_', '-')}", dest=key, metavar="FILE")
    data.add_argument("--augmented", metavar="FILE", help="precomputed augmented triples")
    data.add_argument("--strict-names", dest="strict_names", action="store_const", const=True,
                      help="unknown names in nested/augmented files are errors")

    parser = _ArgumentParser(
        prog="neste",
        description="Hypercomplex embeddings of nested factual knowledge graphs.",
    )
    parser.add_argument("--version", action="version", version=f"neste {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_ArgumentParser)

    p = sub.add_parser("train", parents=[common, data], help="train a model")
    p.add_argument("--dim", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--regularization", type=float)
    p.add_argument("--lambda-nested", dest="lambda_nested", type=float)
    p.add_argument("--lambda-aug", dest="lambda_aug", type=float)
    p.add_argument("--negatives", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--valid-every", dest="valid_every", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--algebra", type=Algebra.parse, choices=list(Algebra))
    p.add_argument("--f32", action="store_const", const=True)
    p.add_argument("--translation", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--cell-norm", dest="cell_norm", choices=CELL_NORMS)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--save-every", dest="save_every", type=int, default=0,
                   help="also write a checkpoint every N epochs")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", parents=[common, data], help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=False)
    p.add_argument("--task", choices=(*TASKS, "all"))
    p.add_argument("--split", choices=("train", "valid", "test"))
    p.add_argument("--hits", type=parse_hits, help="comma-separated k values, e.g. 1,3,10")
    p.add_argument("--unfiltered", dest="filtered", action="store_const", const=False)
    p.add_argument("--algebra", type=Algebra.parse, choices=list(Algebra),
                   help="expected algebra of the checkpoint")
    p.add_argument("--dim", type=int, help="expected dimension of the checkpoint")
    p.add_argument("-f", "--format", default="text", choices=("text", "json", "csv"))
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("analyze", parents=[common], help="pattern suite and heatmaps")
    p.add_argument("--patterns", action="store_true", help="run the pattern suite")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--heatmaps", metavar="NAME", help="CSV file name for relation heatmaps")
    p.add_argument("--checkpoint")
    p.add_argument("-f", "--format", default="text", choices=("text", "json"))
    p.set_defaults(handler=cmd_analyze)

    p = sub.add_parser("augment", parents=[common, data], help="random-walk augmentation")
    p.add_argument("--samples-per-entity", dest="samples_per_entity", type=int, default=10)
    p.set_defaults(handler=cmd_augment)

    p = sub.add_parser("split", parents=[common], help="8:1:1 split of one triple file")
    p.add_argument("input", help="atomic or nested triple file")
    p.add_argument("--kind", choices=("atomic", "nested"), default="atomic")
    p.set_defaults(handler=cmd_split)

    p = sub.add_parser("synth", parents=[common], help="write the planted-pattern benchmark")
    p.set_defaults(handler=cmd_synth)
    return parser


_NON_CONFIG_ARGS = frozenset(
    {"verbose", "config", "handler", "command", "progress", "format", "save_every",
     "patterns", "trials", "heatmaps", "samples_per_entity", "input", "kind"}
)


def _resolve(args: argparse.Namespace) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else {}
    overrides = {k: v for k, v in vars(args).items() if k not in _NON_CONFIG_ARGS}
    if overrides.get("threads") is None and "threads" not in file_values:
        overrides["threads"] = default_threads()
    return resolve_run_config(file_values, overrides)


def _load_graph(config: RunConfig, checkpoint_names=None):
    missing = config.missing_data_keys()
    if missing:
        raise ConfigError(f"missing data files: --{missing[0].replace('_', '-')}")
    for path in config.input_paths():
        if not Path(path).exists():
            raise FileNotFoundError(f"File '{path}' not found.")
    tables = {}
    if checkpoint_names is not None:
        tables = {
            "entities": SymbolTable(checkpoint_names[0]),
            "atomic_relations": SymbolTable(checkpoint_names[1]),
            "nested_relations": SymbolTable(checkpoint_names[2]),
        }
    return load_graph(
        config.atomic_paths,
        config.nested_paths,
        augmented_path=config.augmented,
        strict=config.strict_names,
        **tables,
    )


# -------- subcommands --------


def cmd_train(args: argparse.Namespace) -> int:
    config = _resolve(args)
    graph = _load_graph(config)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    def on_epoch(record, store) -> None:
        if args.save_every and record.epoch % args.save_every == 0:
            save_checkpoint(store, out / f"checkpoint-epoch{record.epoch}.neste")

    result = train(graph, config.train, progress=args.progress, on_epoch=on_epoch)
    save_checkpoint(result.store, out / CHECKPOINT_NAME)
    result.log.write_csv(out / LOG_NAME)
    write_manifest(out, config, "train")
    if result.best_valid_mrr is not None:
        print(f"best epoch {result.best_epoch}: validation MRR {result.best_valid_mrr:.3f}")
    print(f"Wrote {out / CHECKPOINT_NAME}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = _resolve(args)
    if config.checkpoint is None:
        raise ConfigError("eval needs --checkpoint")
    if not Path(config.checkpoint).exists():
        raise FileNotFoundError(f"File '{config.checkpoint}' not found.")
    store = load_checkpoint(config.checkpoint)
    if args.algebra is not None and args.algebra is not store.algebra:
        raise CheckpointError(
            f"checkpoint algebra {store.algebra.value} does not match {args.algebra.value}"
        )
    if args.dim is not None and args.dim != store.dim:
        raise CheckpointError(f"checkpoint dim {store.dim} does not match {args.dim}")

    graph = _load_graph(
        config, (store.entity_names, store.relation_names, store.nested_relation_names)
    )
    if (
        len(graph.entities) != store.num_entities
        or len(graph.atomic_relations) != store.num_relations
        or len(graph.nested_relations) != store.num_nested_relations
    ):
        raise CheckpointError("the data files name symbols the checkpoint has no embedding for")

    tasks = TASKS if config.task == "all" else (config.task,)
    reports = [
        EVALUATORS[task](
            store,
            graph,
            config.split,
            filtered=config.filtered,
            hits=config.hits,
            threads=config.train.threads,
            progress=args.progress,
        )
        for task in tasks
    ]

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for report in reports:
        (out / f"eval_{report.task}_{report.split}.csv").write_text(
            _reports_csv([report]), encoding="utf-8"
        )
    write_manifest(out, config, "eval", config.input_paths() + [config.checkpoint])

    if args.format == "json":
        _output_json(reports)
    elif args.format == "csv":
        print(_reports_csv(reports), end="")
    else:
        _output_text(reports)
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    if not args.patterns and not args.heatmaps:
        raise ConfigError("analyze needs --patterns and/or --heatmaps")
    config = _resolve(args)
    out = Path(config.output_dir)
    code = 0

    if args.heatmaps:
        if config.checkpoint is None:
            raise ConfigError("--heatmaps needs --checkpoint")
        if not Path(config.checkpoint).exists():
            raise FileNotFoundError(f"File '{config.checkpoint}' not found.")
        store = load_checkpoint(config.checkpoint)
        out.mkdir(parents=True, exist_ok=True)
        target = out / Path(args.heatmaps).name
        heatmaps = export_relation_heatmaps(store, target)
        print(f"Wrote {len(heatmaps)} relation heatmap(s) to {target}")

    if args.patterns:
        checks = run_pattern_suite(trials=args.trials, seed=config.train.seed,
                                   cell_norm=config.train.cell_norm)
        if args.format == "json":
            print(json.dumps([c.to_dict() for c in checks], indent=2))
        else:
            _output_checks(checks)
        if not all(c.ok for c in checks):
            code = 1

    inputs = [config.checkpoint] if config.checkpoint else []
    write_manifest(out, config, "analyze", inputs)
    return code


def cmd_augment(args: argparse.Namespace) -> int:
    config = _resolve(args)
    graph = _load_graph(config)
    augmented = augment_graph(graph, args.samples_per_entity, config.train.seed)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_atomic(augmented, augmented.augmented, out / "augmented.txt")
    write_manifest(out, config, "augment")
    print(f"Wrote {len(augmented.augmented)} augmented triple(s) to {out / 'augmented.txt'}")
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    config = _resolve(args)
    path = Path(args.input)
    if not path.exists():
        raise FileNotFoundError(f"File '{path}' not found.")
    records = read_records(path, 3 if args.kind == "atomic" else 7)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in zip(("train", "valid", "test"), split_triples(records, config.train.seed)):
        with open(out / f"{args.kind}_{name}.txt", "w", encoding="utf-8") as fh:
            for record in part:
                fh.write("\t".join(record) + "\n")
        print(f"{name}: {len(part)}")
    write_manifest(out, config, "split", [str(path)])
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    config = _resolve(args)
    graph = generate_synthetic_graph(config.train.seed)
    out = Path(config.output_dir)
    written = save_graph(graph, out)
    write_manifest(out, config, "synth", [])
    for key, value in graph.stats().to_dict().items():
        print(f"{key}: {value}")
    print(f"Wrote {len(written)} file(s) to {out}")
    return 0


# -------- output --------


def _reports_csv(reports: List[RankingReport]) -> str:
    rows = [row for report in reports for row in report_rows(report)]
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buffer.getvalue()


def _output_text(reports: List[RankingReport]) -> None:
    """Output results in text format."""
    print(format_table(reports))


def _output_json(reports: List[RankingReport]) -> None:
    """Output results in JSON format."""
    print(format_json(reports))


def _output_checks(checks: List[PatternCheck]) -> None:
    for check in checks:
        status = "pass" if check.passed else "fail"
        note = ""
        if not check.required:
            note = " (informational)"
        elif not check.ok:
            note = " (UNEXPECTED)"
        print(f"  {check.algebra}  {check.name:<32} {status:<4}  {check.deviation:.3e}{note}")
    unexpected = sum(1 for c in checks if not c.ok)
    print("=" * 60)
    print(f"Ran {len(checks)} check(s), {unexpected} unexpected")


if __name__ == "__main__":
    main()
