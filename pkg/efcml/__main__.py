"""Command line interface for efcml."""
import argparse
from dataclasses import replace
import json
import logging
import sys
from typing import Any, Dict, List, Optional

import voluptuous as vol

from .baselines import ChainModel, FrozenModel, OneVsRestModel
from .const import (
    AL_MODES,
    AL_OFF,
    CONF_AL,
    CONF_BUDGET,
    CONF_CSV_HEADER,
    CONF_CSV_LABELS,
    CONF_DATA,
    CONF_DIAGNOSTICS,
    CONF_GRID_FILE,
    CONF_LABELS_XML,
    CONF_METHOD,
    CONF_OUT,
    CONF_RECORD_TIMING,
    CONF_SEED,
    CONF_SPLIT,
    DEFAULT_BUDGET,
    DEFAULT_OUT,
    DEFAULT_SEED,
    DEFAULT_SPLIT,
    METHOD_EFCML,
    METHODS,
    VERSION,
)
from .exceptions import EfcmlError
from .harness import RunSpec, load_model, run_interleaved
from .rulebase import describe_rules

_LOGGER = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="efcml", description="Evolving multi-label fuzzy classification on streams"
    )
    parser.add_argument("--version", action="version", version=VERSION)
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="interleaved test-then-train run")
    run.add_argument("--data", required=True, help="ARFF or CSV dataset")
    labels = run.add_mutually_exclusive_group(required=True)
    labels.add_argument("--labels-xml", help="MULAN label specification of an ARFF file")
    labels.add_argument(
        "--csv-labels", type=int, help="number of label columns at the end of a CSV file"
    )
    run.add_argument("--csv-header", action="store_true", help="the CSV file has a header row")
    run.add_argument("--method", choices=METHODS, default=METHOD_EFCML)
    run.add_argument("--split", type=float, default=DEFAULT_SPLIT)
    run.add_argument("--al", choices=AL_MODES, default=AL_OFF)
    run.add_argument("--budget", type=float, default=DEFAULT_BUDGET)
    run.add_argument("--grid-file", help="TOML or JSON grid")
    run.add_argument("--seed", type=int, default=DEFAULT_SEED)
    run.add_argument("--out", default=DEFAULT_OUT)
    run.add_argument(
        "--no-timing", action="store_true", help="write 0 in the update time column"
    )
    run.add_argument(
        "--diagnostics", action="store_true", help="write objective terms of the initial fits"
    )
    run.add_argument("--workers", type=int, default=1, help="parallel grid search threads")

    describe = commands.add_parser("describe", help="summarize the rules of a checkpoint")
    describe.add_argument("--model", required=True, help="model.json of a run")
    return parser


def _run_spec(args: argparse.Namespace) -> RunSpec:
    data: Dict[str, Any] = {
        CONF_DATA: args.data,
        CONF_CSV_HEADER: args.csv_header,
        CONF_METHOD: args.method,
        CONF_SPLIT: args.split,
        CONF_AL: args.al,
        CONF_BUDGET: args.budget,
        CONF_GRID_FILE: args.grid_file,
        CONF_SEED: args.seed,
        CONF_OUT: args.out,
        CONF_RECORD_TIMING: not args.no_timing,
        CONF_DIAGNOSTICS: args.diagnostics,
    }
    if args.labels_xml is not None:
        data[CONF_LABELS_XML] = args.labels_xml
    if args.csv_labels is not None:
        data[CONF_CSV_LABELS] = args.csv_labels
    spec = RunSpec.from_dict(data)
    if args.workers > 1:
        spec = replace(spec, workers=args.workers)
    return spec


def _describe(model: Any) -> List[Dict[str, Any]]:
    if isinstance(model, FrozenModel):
        return _describe(model.model)
    if isinstance(model, OneVsRestModel):
        parts = model.members
    elif isinstance(model, ChainModel):
        parts = model.links
    else:
        return describe_rules(model.rule_base)
    return [
        {"model": position, "rules": describe_rules(part.rule_base)}
        for position, part in enumerate(parts)
    ]


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point of the ``efcml`` command."""
    args = _build_parser().parse_args(argv)
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        if args.command == "describe":
            model = load_model(args.model)
            json.dump(_describe(model), sys.stdout, indent=2)
            sys.stdout.write("\n")
            return 0
        run_interleaved(_run_spec(args))
    except vol.Invalid as err:
        _LOGGER.error("Invalid arguments: %s", err)
        return 2
    except (EfcmlError, OSError) as err:
        _LOGGER.error("Error running %s: %s", args.command, err)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
