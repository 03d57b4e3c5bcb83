"""Experiments and report assembly.

Every experiment maps ``(table, config)`` to a JSON-serializable section.
Tables inside sections share one layout, ``{"columns": [...], "rows": [...]}``,
so they can be dumped to CSV for plotting.  Random streams are derived from
``config.seed`` per experiment and kind, and recorded in the section.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import nullmodel, stats
from .entropy import entropy_frame
from .errors import ConfigError, DataError
from .model import UNRESOLVED, BiasScheme, IngestOptions, InteractionTable, ingest
from .synthgen import CohortSpec, FixedActivity, generate

logger = logging.getLogger(__name__)

REPORT_FORMAT = "exposure-report"
REPORT_VERSION = 1
LOW_POWER = 30
TOTAL = "Total"

# stream ids for seed derivation; never renumber
STREAMS = {"concentration": 1, "bias_entropy": 2, "weak_benchmark": 3}


@dataclass(frozen=True)
class ExperimentConfig:
    interactions: str | None = None
    pages: str | None = None
    scheme: str | None = None
    sep: str = ","
    lenient: bool = False
    cohort: CohortSpec | None = None
    kinds: tuple[str, ...] = ()
    threshold: int = 5
    strict_threshold: bool = False
    multi_page_only: bool = True
    seed: int = 0
    replicates: int = 100
    sample_fraction: float = 0.02
    bins: int = 50
    pseudocount: float = 0.5
    activity_bins: int = 12
    ecdf_points: int = 201
    estimator: str = "pooled"
    workers: int = 1
    out: str = "report"
    csv: bool = False

    def __post_init__(self):
        if self.cohort is None and not (self.interactions and self.pages):
            raise ConfigError("need --interactions and --pages, or a synthetic cohort")
        if self.threshold < 1:
            raise ConfigError("threshold must be >= 1")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if not 0.0 < self.sample_fraction <= 1.0:
            raise ConfigError("sample fraction must lie in (0, 1]")
        if self.bins < 1 or self.activity_bins < 1 or self.ecdf_points < 2:
            raise ConfigError("bin counts must be positive")
        if self.pseudocount <= 0:
            raise ConfigError("pseudocount must be positive")
        if self.estimator not in nullmodel.ESTIMATORS:
            raise ConfigError(f"estimator must be one of {nullmodel.ESTIMATORS}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def to_dict(self) -> dict:
        """Config echo for reports; excludes settings that cannot change results."""
        out = {}
        for f in fields(self):
            if f.name in ("workers", "out", "csv"):
                continue
            value = getattr(self, f.name)
            if f.name == "cohort" and value is not None:
                value = cohort_to_dict(value)
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        out["threshold_rule"] = f"n > {self.threshold}" if self.strict_threshold else f"n >= {self.threshold}"
        out["quantile_rule"] = "linear interpolation (type 7)"
        out["kl_rule"] = (
            f"{self.bins} equal-width bins on [0, 1], pseudocount {self.pseudocount} per bin, "
            "benchmark rescaled to real sample size"
        )
        return out


def cohort_to_dict(spec: CohortSpec) -> dict:
    d = asdict(spec)
    d["pages_per_label"] = list(spec.pages_per_label)
    d["scheme"] = list(spec.scheme.labels)
    act = spec.activity
    d["activity"] = {"fixed": act.n} if isinstance(act, FixedActivity) else {"powerlaw": [act.exponent, act.low, act.high]}
    if math.isinf(spec.page_loyalty):
        d["page_loyalty"] = "inf"
    return d


def load_table(config: ExperimentConfig) -> InteractionTable:
    if config.cohort is not None:
        return generate(config.cohort)
    options = IngestOptions(sep=config.sep, strict=not config.lenient, scheme_path=config.scheme)
    return ingest(config.interactions, config.pages, options)


def stream_seed(config: ExperimentConfig, stream: str, kind_code: int) -> int:
    ss = np.random.SeedSequence(config.seed, spawn_key=(STREAMS[stream], kind_code))
    return int(ss.generate_state(1, np.uint64)[0])


def table_of(columns, rows) -> dict:
    return {"columns": list(columns), "rows": [list(r) for r in rows]}


def _group_names(scheme: BiasScheme) -> list[tuple[str, int | None]]:
    return [(name, i) for i, name in enumerate(scheme.labels)] + [(TOTAL, None)]


def _grid(config: ExperimentConfig) -> np.ndarray:
    return np.linspace(0.0, 1.0, config.ecdf_points)


def _ecdf_table(values, grid, K) -> dict:
    e = stats.ecdf(values, K)
    return table_of(["entropy", "ecdf"], zip(grid.tolist(), e(grid).tolist()))


def _check_kind(table: InteractionTable, kind: str):
    u, _, _ = table.edges(kind)
    if not len(u):
        raise DataError(f"no interactions of kind {kind!r}")


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------


def run_concentration(table: InteractionTable, kind: str, config: ExperimentConfig) -> dict:
    """Mean distinct pages per log-activity bin, real vs one strong randomization."""
    _check_kind(table, kind)
    seed = stream_seed(config, "concentration", table.kind_code(kind))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        real = stats.activity_concentration(table, kind, config.activity_bins)
    shuffled = nullmodel.strong_randomize(table, kind, seed)
    randomized = stats.activity_concentration(shuffled, kind, edges=real.edges)

    def curve(c):
        return table_of(
            ["bin_low", "bin_high", "users", "mean_pages"],
            zip(c.edges[:-1].tolist(), c.edges[1:].tolist(), c.users.tolist(), c.mean_pages.tolist()),
        )

    return {
        "seed": seed,
        "bins": len(real.edges) - 1,
        "real": curve(real),
        "strong": curve(randomized),
        "warnings": [str(w.message) for w in caught],
    }


def _grouped_ecdfs(frame, mask, grid, scheme, issues):
    values = frame.bias_entropy_norm[mask]
    leaning = frame.leaning[mask]
    out, sizes = {}, {}
    for name, g in _group_names(scheme):
        sel = values if g is None else values[leaning == g]
        sizes[name] = int(len(sel))
        if not len(sel):
            issues.append(f"group {name} has no eligible users; omitted")
            continue
        out[name] = _ecdf_table(sel, grid, scheme.K)
    return out, sizes


def run_bias_entropy(table: InteractionTable, kind: str, config: ExperimentConfig) -> dict:
    """Per-leaning eCDFs of normalized bias entropy, real vs strong randomization."""
    _check_kind(table, kind)
    seed = stream_seed(config, "bias_entropy", table.kind_code(kind))
    grid = _grid(config)
    scheme = table.scheme
    issues: list[str] = []
    section = {"seed": seed, "reference_lines": list(stats.reference_lines(scheme.K)), "warnings": issues}
    for label, t in (("real", table), ("strong", nullmodel.strong_randomize(table, kind, seed))):
        frame = entropy_frame(t, kind)
        active = frame.active(config.threshold, config.strict_threshold)
        ecdfs, sizes = _grouped_ecdfs(frame, active, grid, scheme, issues)
        section[label] = {
            "ecdf": ecdfs,
            "group_sizes": sizes,
            "exclusions": {
                "total_users": int(len(frame)),
                "eligible": int(active.sum()),
                "below_threshold": int((~active).sum()),
                "unresolved_leaning": int((frame.leaning[active] == UNRESOLVED).sum()),
            },
        }
    return section


def run_x_statistic(table: InteractionTable, kind: str, config: ExperimentConfig) -> dict:
    """Quartiles of the rescaled page entropy over active, non-degenerate users."""
    _check_kind(table, kind)
    frame = entropy_frame(table, kind)
    active = frame.active(config.threshold, config.strict_threshold)
    degenerate = active & frame.degenerate
    included = active & ~frame.degenerate
    section = {
        "exclusions": {
            "total_users": int(len(frame)),
            "included": int(included.sum()),
            "below_threshold": int((~active).sum()),
            "degenerate_bounds": int(degenerate.sum()),
        },
    }
    names = ["min", "q1", "median", "q3", "max"]
    if not included.any():
        section["quartiles"] = table_of(names, [])
        section["note"] = "no user above the activity threshold has distinct page-entropy bounds"
        return section
    section["quartiles"] = table_of(names, [stats.quartiles(frame.x[included])])
    return section


def run_weak_benchmark(table: InteractionTable, kind: str, config: ExperimentConfig) -> dict:
    """Real bias entropy vs the label-permutation benchmark, with KL per leaning."""
    _check_kind(table, kind)
    seed = stream_seed(config, "weak_benchmark", table.kind_code(kind))
    spec = nullmodel.RandomizationSpec("weak", seed, config.replicates, config.sample_fraction)
    bench = nullmodel.monte_carlo_weak(
        table, kind, spec, config.threshold, config.multi_page_only, config.strict_threshold, config.workers
    )
    grid = _grid(config)
    scheme = table.scheme
    issues: list[str] = []
    ecdfs, kl_rows = {}, []
    for name, g in _group_names(scheme):
        real = bench.real_group(g)
        benchmark = bench.benchmark_group(g, config.estimator)
        low_power = len(real) < LOW_POWER
        if low_power:
            issues.append(f"group {name} has {len(real)} sampled users (< {LOW_POWER}); low power")
        if not len(real) or not len(benchmark):
            issues.append(f"group {name} is empty in the real or benchmark sample; omitted")
            kl_rows.append([name, len(real), None, low_power])
            continue
        ecdfs[name] = {"real": _ecdf_table(real, grid, scheme.K), "benchmark": _ecdf_table(benchmark, grid, scheme.K)}
        kl = stats.kl_divergence(real, benchmark, config.bins, config.pseudocount)
        kl_rows.append([name, len(real), kl, low_power])
    total = int(len(entropy_frame(table, kind)))
    return {
        "seed": seed,
        "replicates": config.replicates,
        "estimator": config.estimator,
        "sample_fraction": config.sample_fraction,
        "sampled_users": int(len(bench.users)),
        "reference_lines": list(stats.reference_lines(scheme.K)),
        "exclusions": {
            "total_users": total,
            "eligible": bench.eligible,
            **bench.exclusions,
            "unresolved_leaning_sampled": int((bench.real_leaning == UNRESOLVED).sum()),
        },
        "kl": table_of(["group", "sampled_users", "kl_nats", "low_power"], kl_rows),
        "ecdf": ecdfs,
        "warnings": issues,
    }


EXPERIMENTS = {
    "concentration": run_concentration,
    "bias_entropy": run_bias_entropy,
    "x_statistic": run_x_statistic,
    "weak_benchmark": run_weak_benchmark,
}


def run(config: ExperimentConfig, experiments=None, table: InteractionTable | None = None) -> dict:
    """Run ``experiments`` (default: all) for every requested kind and build a report."""
    experiments = list(EXPERIMENTS) if experiments is None else list(experiments)
    table = load_table(config) if table is None else table
    kinds = list(config.kinds) or table.kinds_present()
    if not kinds:
        raise DataError("table has no interactions")
    sections = {}
    for kind in kinds:
        # kinds never share state: each gets its own frames and seed streams
        sections[kind] = {name: EXPERIMENTS[name](table, kind, config) for name in experiments}
    return {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "config": config.to_dict(),
        "dataset": {"users": table.n_users, "pages": table.n_pages, "edges": table.n_edges,
                    "labels": list(table.scheme.labels)},
        "sections": sections,
    }


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return None if math.isnan(obj) else obj
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _format(obj, indent: int = 0) -> str:
    pad = " " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_format(obj[k], indent + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + " " * indent + "}"
    if isinstance(obj, list) and any(isinstance(v, (dict, list)) for v in obj):
        items = [pad + _format(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + " " * indent + "]"
    return json.dumps(obj, allow_nan=False)


def dumps(report: dict) -> str:
    """Serialize a report: sorted keys, one table row per line."""
    return _format(_plain(report)) + "\n"


def _iter_tables(node, path=()):
    if isinstance(node, dict):
        if set(node) == {"columns", "rows"}:
            yield path, node
            return
        for key in sorted(node):
            yield from _iter_tables(node[key], path + (str(key),))


def write_report(report: dict, out_dir, csv_tables: bool = False) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "report.json"
    path.write_text(dumps(report), encoding="utf-8")
    if csv_tables:
        for tpath, tbl in _iter_tables(_plain(report["sections"])):
            name = "__".join(p.replace("/", "_").replace(" ", "_") for p in tpath) + ".csv"
            with open(out_dir / name, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(tbl["columns"])
                writer.writerows(["" if v is None else repr(v) if isinstance(v, float) else v for v in row]
                                 for row in tbl["rows"])
    return path
