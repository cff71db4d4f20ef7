"""
Command-line entry point.

Subcommands: synth, audit, proxy, decompose, mitigate. Configuration comes
from a JSON file (``--config``) with flag overrides. Exit status 0 means
success, 1 an operational or usage error, 2 a fairness-threshold breach.
Errors are written to stderr as one JSON object.
"""

import argparse
import json
import logging
import sys
from collections.abc import Callable, Sequence
from dataclasses import replace
from pathlib import Path
from typing import Any, NoReturn

import pandas as pd

from fairaudit.core.errors import AuditError
from fairaudit.core.models import Dataset
from fairaudit.core.serialization import dump_json, dumps_json
from fairaudit.dataset.loader import load_csv, schema_for, write_csv
from fairaudit.dataset.schema import ColumnSchema
from fairaudit.dataset.synthetic import SynthConfig, generate_synthetic
from fairaudit.mitigation.thresholds import Criterion
from fairaudit.mitigation.tradeoff import sweep_frame
from fairaudit.orchestrator.manager import AuditManager
from fairaudit.orchestrator.options import AuditOptions
from fairaudit.orchestrator.report import EXIT_FAILURE, EXIT_OK
from fairaudit.orchestrator.runs import (
    DecompositionMode,
    ProxyRun,
    Strategy,
    run_decomposition,
    run_mitigation,
    run_proxy,
)
from fairaudit.statistics.decomposition import BiasKind
from fairaudit.statistics.two_sample import StatisticId


logger = logging.getLogger(__name__)

SCHEMA_SUFFIX = ".schema.json"


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the operational status, keeping 2 for breaches."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        _print_error("UsageError", message, None)
        sys.exit(EXIT_FAILURE)


def _print_error(kind: str, message: str, field: str | None) -> None:
    print(
        json.dumps({"error": kind, "message": message, "field": field}, sort_keys=True),
        file=sys.stderr,
    )


def _csv_list(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def _float_list(value: str) -> list[float]:
    try:
        return [float(item) for item in _csv_list(value)]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated numbers, got '{value}'"
        ) from None


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", type=Path, required=True, help="Dataset CSV")
    parser.add_argument(
        "--schema", type=Path, help=f"Column-role schema JSON (default: <data>{SCHEMA_SUFFIX})"
    )
    parser.add_argument("--config", type=Path, help="Audit options JSON")
    parser.add_argument("--out", type=Path, help="Output directory; stdout when omitted")
    parser.add_argument("--format", choices=["json", "csv"], default="json")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--metrics", type=_csv_list, help="Comma-separated metric names")
    parser.add_argument("--attrs", type=_csv_list, help="Comma-separated protected attributes")
    parser.add_argument("--label", help="Label for proxy, decomposition and sweeps")
    parser.add_argument("--min-support", type=int)
    parser.add_argument("--fail-threshold", type=float)
    parser.add_argument("--aware", action="store_true", help="Train on protected columns too")
    parser.add_argument("--n-jobs", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fairaudit", description="Intersectional multi-label fairness audits")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    synth = commands.add_parser("synth", help="Generate a synthetic dataset")
    synth.add_argument("--config", type=Path, required=True, help="SynthConfig JSON")
    synth.add_argument("--out", type=Path, required=True, help="CSV path to write")
    synth.add_argument("--seed", type=int)
    synth.set_defaults(handler=cmd_synth)

    audit = commands.add_parser("audit", help="Train, measure and report")
    _add_common(audit)
    audit.add_argument("--weights", type=Path, help="Stakeholder weight JSON")
    audit.set_defaults(handler=cmd_audit)

    proxy = commands.add_parser("proxy", help="Two-sample proxy tests")
    _add_common(proxy)
    proxy.add_argument("--attr", help="Attribute to test (default: every selected attribute)")
    proxy.add_argument("--permutations", type=int)
    proxy.add_argument("--statistic", choices=[s.value for s in StatisticId])
    proxy.set_defaults(handler=cmd_proxy)

    decompose = commands.add_parser("decompose", help="Bias decomposition regressions")
    _add_common(decompose)
    decompose.add_argument(
        "--mode", choices=[m.value for m in DecompositionMode], default="instance"
    )
    decompose.add_argument("--bias", choices=[b.value for b in BiasKind])
    decompose.set_defaults(handler=cmd_decompose)

    mitigate = commands.add_parser("mitigate", help="Mitigate and compare before/after")
    _add_common(mitigate)
    mitigate.add_argument("--strategy", choices=[s.value for s in Strategy], required=True)
    mitigate.add_argument("--epsilon", type=float)
    mitigate.add_argument("--epsilons", type=_float_list, help="Comma-separated sweep grid")
    mitigate.add_argument("--criterion", choices=[c.value for c in Criterion])
    mitigate.add_argument("--tolerance", type=float)
    mitigate.set_defaults(handler=cmd_mitigate)
    return parser


# Helpers


_OVERRIDES = (
    "seed",
    "metrics",
    "attrs",
    "label",
    "min_support",
    "fail_threshold",
    "n_jobs",
    "permutations",
    "statistic",
    "epsilon",
    "epsilons",
    "criterion",
    "tolerance",
)


def load_options(args: argparse.Namespace) -> AuditOptions:
    """Options from ``--config`` with every given flag applied on top."""
    base = AuditOptions.load(args.config) if args.config else AuditOptions()
    values = base.to_dict()
    for key in _OVERRIDES:
        value = getattr(args, key, None)
        if value is not None:
            values[key] = value
    if getattr(args, "aware", False):
        values["include_protected"] = True
    return AuditOptions.from_dict(values)


def load_dataset(args: argparse.Namespace) -> Dataset:
    schema_path = args.schema or args.data.with_suffix(SCHEMA_SUFFIX)
    return load_csv(args.data, ColumnSchema.load(schema_path))


def _emit(
    document: Any,
    args: argparse.Namespace,
    filename: str,
    frame: Callable[[], pd.DataFrame] | None = None,
) -> None:
    """Write ``document`` (and its CSV form) under --out, or print it."""
    if args.out is not None:
        dump_json(document, args.out / filename)
        if frame is not None:
            csv_path = (args.out / filename).with_suffix(".csv")
            frame().to_csv(csv_path, index=False, lineterminator="\n")
        return
    if args.format == "csv" and frame is not None:
        sys.stdout.write(frame().to_csv(index=False, lineterminator="\n"))
    else:
        sys.stdout.write(dumps_json(document))


# Commands


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = SynthConfig.load(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    ds = generate_synthetic(cfg)
    write_csv(ds, args.out)
    schema_path = args.out.with_suffix(SCHEMA_SUFFIX)
    dump_json(schema_for(ds), schema_path)
    sys.stdout.write(dumps_json({
        "data": str(args.out),
        "schema": str(schema_path),
        "n_rows": ds.n_rows,
        "fingerprint": ds.fingerprint(),
    }))
    return EXIT_OK


def cmd_audit(args: argparse.Namespace) -> int:
    options = load_options(args)
    report = AuditManager(options).run(load_dataset(args), args.weights)
    if args.out is not None:
        report.write(args.out)
    elif args.format == "csv":
        sys.stdout.write(report.metrics_frame().to_csv(index=False, lineterminator="\n"))
    else:
        sys.stdout.write(dumps_json(report))
    for breach in report.breaches:
        logger.warning(
            f"Breach: {breach['metric']} disparity {breach['value']:.4f} on label "
            f"{breach['label']} ({breach['argmax']} vs {breach['argmin']})"
        )
    return report.exit_code


def cmd_proxy(args: argparse.Namespace) -> int:
    options = load_options(args)
    ds = load_dataset(args)
    attributes = [args.attr] if args.attr else list(options.attrs or ds.protected_names)
    runs = [run_proxy(ds, attribute, options) for attribute in attributes]

    def frame() -> pd.DataFrame:
        return _proxy_frame(runs)

    _emit({"seed": options.seed, "tests": runs}, args, "proxy.json", frame)
    return EXIT_OK


def _proxy_frame(runs: Sequence[ProxyRun]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {"attribute": run.attribute, "level": level, "p_value": p}
            for run in runs
            for level, p in run.p_values.items()
        ],
        columns=["attribute", "level", "p_value"],
    )


def cmd_decompose(args: argparse.Namespace) -> int:
    options = load_options(args)
    result = run_decomposition(load_dataset(args), options, args.mode, args.bias)
    _emit(result, args, "decomposition.json", result.fit.summary_frame)
    return EXIT_OK


def cmd_mitigate(args: argparse.Namespace) -> int:
    options = load_options(args)
    result = run_mitigation(load_dataset(args), options, args.strategy)
    if args.out is not None:
        result.write(args.out)
    elif args.format == "csv":
        sys.stdout.write(sweep_frame(result.points).to_csv(index=False, lineterminator="\n"))
    else:
        sys.stdout.write(dumps_json(result))
    return result.exit_code


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return int(args.handler(args))
    except AuditError as e:
        _print_error(type(e).__name__, e.message, e.field)
    except FileNotFoundError as e:
        _print_error(type(e).__name__, str(e), e.filename)
    except OSError as e:
        _print_error(type(e).__name__, str(e), getattr(e, "filename", None))
    return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
