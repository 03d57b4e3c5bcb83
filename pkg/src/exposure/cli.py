"""Command line interface.

Settings come from built-in defaults, then an optional INI config file
(``--config``), then command line flags.  The config file has an
``[experiment]`` section whose keys are the long flag names with dashes or
underscores (``threshold = 5``, ``sample-fraction = 0.02``, ``kind = like,
comment``) and an optional ``[cohort]`` section describing a synthetic input
(``users``, ``pages-per-label``, ``activity``, ``affinity``, ``loyalty``,
``seed``, ``kind``).

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import math
import sys
from pathlib import Path

from . import pipeline
from .errors import ConfigError, DataError
from .model import BiasScheme, IngestOptions, ingest
from .synthgen import CohortSpec, parse_activity, write_cohort

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3

SUBCOMMANDS = {
    "concentration": ["concentration"],
    "bias-entropy": ["bias_entropy"],
    "x-stat": ["x_statistic"],
    "weak-benchmark": ["weak_benchmark"],
    "all": list(pipeline.EXPERIMENTS),
}

# flag name -> (ExperimentConfig field, converter)
EXPERIMENT_KEYS = {
    "interactions": ("interactions", str),
    "pages": ("pages", str),
    "scheme": ("scheme", str),
    "sep": ("sep", str),
    "kind": ("kinds", lambda v: tuple(k.strip() for k in (v if isinstance(v, list) else str(v).split(",")) if k.strip())),
    "threshold": ("threshold", int),
    "seed": ("seed", int),
    "replicates": ("replicates", int),
    "sample-fraction": ("sample_fraction", float),
    "bins": ("bins", int),
    "pseudocount": ("pseudocount", float),
    "activity-bins": ("activity_bins", int),
    "ecdf-points": ("ecdf_points", int),
    "benchmark-estimator": ("estimator", str),
    "workers": ("workers", int),
    "out": ("out", str),
}
BOOL_KEYS = {
    "strict-threshold": "strict_threshold",
    "lenient": "lenient",
    "csv": "csv",
    "multi-page-only": "multi_page_only",
}
COHORT_KEYS = ("users", "pages-per-label", "activity", "affinity", "loyalty", "cohort-seed", "cohort-kind")


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _add_input_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("input files")
    g.add_argument("--interactions", help="interaction log: user_id,page_id,kind[,count]")
    g.add_argument("--pages", help="page labels: page_id,bias_label")
    g.add_argument("--scheme", help="ordered bias label names, one per line")
    g.add_argument("--sep", help="field separator (default ',')")
    g.add_argument("--lenient", action="store_const", const=True, help="skip bad rows instead of failing")


def _add_cohort_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("synthetic cohort")
    g.add_argument("--users", type=int, help="number of users")
    g.add_argument("--pages-per-label", help="comma-separated page counts per label (default 20 each)")
    g.add_argument("--activity", help="'N' for fixed activity or 'powerlaw:EXP:LOW:HIGH'")
    g.add_argument("--affinity", help="expected home-label share, in [1/K, 1]")
    g.add_argument("--loyalty", help="page loyalty >= 1 ('inf' for one page per label)")
    g.add_argument("--cohort-seed", type=int)
    g.add_argument("--cohort-kind")


def _add_experiment_args(p: argparse.ArgumentParser):
    _add_input_args(p)
    _add_cohort_args(p)
    g = p.add_argument_group("experiment")
    g.add_argument("--config", help="INI config file")
    g.add_argument("--kind", action="append", help="interaction kind (repeatable; default: all present)")
    g.add_argument("--threshold", type=int, help="minimum interactions per user (default 5, inclusive)")
    g.add_argument("--strict-threshold", action="store_const", const=True, help="require n > threshold")
    g.add_argument("--all-users", dest="multi_page_only", action="store_const", const=False,
                   help="keep single-page users in the weak benchmark")
    g.add_argument("--seed", type=int)
    g.add_argument("--replicates", type=int, help="weak randomization replicates (default 100)")
    g.add_argument("--sample-fraction", type=float, help="share of eligible users sampled (default 0.02)")
    g.add_argument("--bins", type=int, help="KL histogram bins (default 50)")
    g.add_argument("--pseudocount", type=float, help="KL pseudocount per bin (default 0.5)")
    g.add_argument("--activity-bins", type=int, help="log activity bins (default 12)")
    g.add_argument("--ecdf-points", type=int, help="grid points for reported eCDFs (default 201)")
    g.add_argument("--benchmark-estimator", choices=("pooled", "user-mean"))
    g.add_argument("--workers", type=int, help="threads for Monte Carlo replicates")
    g.add_argument("--out", help="output directory (default ./report)")
    g.add_argument("--csv", action="store_const", const=True, help="also write one CSV per table")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exposure", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest-check", help="validate input files and print a summary")
    _add_input_args(p)

    p = sub.add_parser("synth", help="write a synthetic cohort in the ingest format")
    _add_cohort_args(p)
    p.add_argument("--config", help="INI config file with a [cohort] section")
    p.add_argument("--out", help="output directory (default ./synth)")

    for name in SUBCOMMANDS:
        _add_experiment_args(sub.add_parser(name, help=f"run the {name} experiment(s)"))
    return parser


def _read_config(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    unknown = set(cp.sections()) - {"experiment", "cohort"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return cp


def _section(cp, name) -> dict:
    if cp is None or not cp.has_section(name):
        return {}
    return {k.replace("_", "-"): v for k, v in cp.items(name)}


def _cohort(args, cp) -> CohortSpec | None:
    values = _section(cp, "cohort")
    for key in COHORT_KEYS:
        v = getattr(args, key.replace("-", "_"), None)
        if v is not None:
            values[key] = v
    unknown = set(values) - set(COHORT_KEYS) - {"seed", "kind"}
    if unknown:
        raise ConfigError(f"unknown cohort keys: {sorted(unknown)}")
    if not values:
        return None
    try:
        kwargs = {}
        if "users" in values:
            kwargs["n_users"] = int(values["users"])
        if "pages-per-label" in values:
            kwargs["pages_per_label"] = tuple(int(x) for x in str(values["pages-per-label"]).split(","))
        if "activity" in values:
            kwargs["activity"] = parse_activity(values["activity"])
        if "affinity" in values:
            kwargs["bias_affinity"] = float(values["affinity"])
        if "loyalty" in values:
            kwargs["page_loyalty"] = math.inf if str(values["loyalty"]) == "inf" else float(values["loyalty"])
        seed = values.get("cohort-seed", values.get("seed"))
        if seed is not None:
            kwargs["seed"] = int(seed)
        kind = values.get("cohort-kind", values.get("kind"))
        if kind is not None:
            kwargs["kind"] = str(kind)
        return CohortSpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"invalid cohort: {exc}") from None


def config_from_args(args) -> pipeline.ExperimentConfig:
    cp = _read_config(args.config) if getattr(args, "config", None) else None
    settings = _section(cp, "experiment")
    unknown = set(settings) - set(EXPERIMENT_KEYS) - set(BOOL_KEYS)
    if unknown:
        raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
    for key in list(EXPERIMENT_KEYS) + list(BOOL_KEYS):
        attr = BOOL_KEYS.get(key, key.replace("-", "_"))
        value = getattr(args, attr, None)
        if value is not None:
            settings[key] = value
    kwargs = {}
    try:
        for key, value in settings.items():
            if key in BOOL_KEYS:
                kwargs[BOOL_KEYS[key]] = _bool(value)
            else:
                name, convert = EXPERIMENT_KEYS[key]
                kwargs[name] = convert(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid setting: {exc}") from None
    cohort = _cohort(args, cp)
    if cohort is not None and "interactions" not in kwargs:
        kwargs["cohort"] = cohort
    return pipeline.ExperimentConfig(**kwargs)


def _ingest_check(args) -> int:
    if not (args.interactions and args.pages):
        raise ConfigError("ingest-check needs --interactions and --pages")
    scheme = BiasScheme.load(args.scheme) if args.scheme else None
    options = IngestOptions(sep=args.sep or ",", strict=not args.lenient, scheme=scheme)
    table = ingest(args.interactions, args.pages, options)
    summary = {
        "users": table.n_users,
        "pages": table.n_pages,
        "edges": table.n_edges,
        "labels": list(table.scheme.labels),
        "pages_per_label": table.class_sizes().tolist(),
        "interactions_per_kind": {k: int(table.edges(k)[2].sum()) for k in table.kinds},
        "report": {k: v for k, v in table.report.__dict__.items()},
    }
    summary["report"]["diagnostics"] = list(table.report.diagnostics)
    print(json.dumps(summary, indent=1, sort_keys=True))
    return EXIT_OK


def _synth(args) -> int:
    cp = _read_config(args.config) if args.config else None
    spec = _cohort(args, cp) or CohortSpec()
    out = Path(args.out or "synth")
    out.mkdir(parents=True, exist_ok=True)
    table = write_cohort(spec, out / "interactions.csv", out / "pages.csv")
    print(f"wrote {table.n_edges} edges for {table.n_users} users to {out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "ingest-check":
            return _ingest_check(args)
        if args.command == "synth":
            return _synth(args)
        config = config_from_args(args)
        report = pipeline.run(config, SUBCOMMANDS[args.command])
        path = pipeline.write_report(report, config.out, config.csv)
        print(path)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
