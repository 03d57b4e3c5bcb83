"""Randomized counterparts of an interaction table.

``strong_randomize`` re-pairs interaction endpoints: every edge is cut into
unit stubs, the page stubs are shuffled against the user stubs and the result
is merged back into counts.  Users and pages keep their total activity,
multi-edges are allowed.

``weak_randomize`` keeps every interaction and shuffles the bias labels
across pages, so the number of pages per label is unchanged.

Both are deterministic given the seed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .entropy import entropy_from_counts, entropy_frame
from .errors import DataError
from .model import UNRESOLVED, InteractionTable, modal_leaning

ESTIMATORS = ("pooled", "user-mean")


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def strong_randomize(table: InteractionTable, kind: str, seed) -> InteractionTable:
    u, p, c = table.edges(kind)
    if not len(u):
        raise DataError(f"no interactions of kind {kind!r} to randomize")
    user_stubs = np.repeat(u, c)
    page_stubs = _rng(seed).permutation(np.repeat(p, c))
    return table.with_kind_edges(kind, user_stubs, page_stubs, np.ones(len(user_stubs), dtype=np.int64))


def permute_labels(table: InteractionTable, seed) -> np.ndarray:
    return _rng(seed).permutation(np.asarray(table.page_bias))


def weak_randomize(table: InteractionTable, seed) -> InteractionTable:
    if not table.n_edges:
        raise DataError("cannot randomize an empty table")
    return table.with_page_bias(permute_labels(table, seed))


@dataclass(frozen=True)
class RandomizationSpec:
    mode: str = "weak"
    seed: int = 0
    replicates: int = 100
    sample_fraction: float = 0.02

    def __post_init__(self):
        if self.mode not in ("strong", "weak"):
            raise ValueError(f"mode must be 'strong' or 'weak', not {self.mode!r}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not 0.0 < self.sample_fraction <= 1.0:
            raise ValueError("sample_fraction must lie in (0, 1]")

    def streams(self) -> tuple[np.random.SeedSequence, list[np.random.SeedSequence]]:
        """Seed for the cohort sample and one sub-seed per replicate."""
        sample, replicates = np.random.SeedSequence(self.seed).spawn(2)
        return sample, replicates.spawn(self.replicates)


@dataclass(frozen=True, eq=False)
class BenchmarkDistribution:
    """Real and label-permuted normalized bias entropies of a sampled cohort.

    ``benchmark[r, j]`` and ``benchmark_leaning[r, j]`` belong to replicate
    ``r`` and sampled user ``j``; each replicate infers leanings from its own
    permuted labels.
    """

    kind: str
    K: int
    users: np.ndarray
    eligible: int
    real: np.ndarray
    real_leaning: np.ndarray
    benchmark: np.ndarray
    benchmark_leaning: np.ndarray
    exclusions: dict = field(default_factory=dict)

    @property
    def replicates(self) -> int:
        return self.benchmark.shape[0]

    def real_group(self, group: int | None) -> np.ndarray:
        """Real values of one leaning group (``None`` = every sampled user)."""
        if group is None:
            return self.real
        return self.real[self.real_leaning == group]

    def benchmark_group(self, group: int | None, estimator: str = "pooled") -> np.ndarray:
        """Benchmark values of one leaning group.

        ``pooled`` concatenates all replicate values; ``user-mean`` first
        averages each user's value over replicates and groups users by their
        most frequent benchmark leaning.
        """
        if estimator == "pooled":
            if group is None:
                return self.benchmark.ravel()
            return self.benchmark[self.benchmark_leaning == group]
        if estimator == "user-mean":
            means = self.benchmark.mean(axis=0)
            if group is None:
                return means
            return means[self._benchmark_mode() == group]
        raise ValueError(f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}")

    def _benchmark_mode(self) -> np.ndarray:
        votes = np.zeros((len(self.users), self.K), dtype=np.int64)
        for row in self.benchmark_leaning:
            ok = row != UNRESOLVED
            votes[np.flatnonzero(ok), row[ok]] += 1
        return modal_leaning(votes)


def monte_carlo_weak(
    table: InteractionTable,
    kind: str,
    spec: RandomizationSpec,
    threshold: int = 5,
    multi_page_only: bool = True,
    strict_threshold: bool = False,
    workers: int = 1,
    permutation: Callable[[np.ndarray, np.random.Generator], np.ndarray] | None = None,
) -> BenchmarkDistribution:
    """Bias entropies of a fixed user sample under repeated label permutations.

    Eligible users meet the activity threshold and, with
    ``multi_page_only``, touch at least two pages.  A single sample of
    ``ceil(sample_fraction * eligible)`` users is drawn without replacement;
    every replicate permutes the page labels with its own sub-seed.
    ``permutation(page_bias, rng)`` replaces the uniform shuffle (test hook).
    Results do not depend on ``workers``.
    """
    if spec.mode != "weak":
        raise ValueError("monte_carlo_weak needs a weak randomization spec")
    frame = entropy_frame(table, kind)
    active = frame.active(threshold, strict_threshold)
    eligible_mask = active & (frame.pages >= 2) if multi_page_only else active
    eligible = frame.users[eligible_mask]
    if not len(eligible):
        raise DataError(f"no eligible users for kind {kind!r}")
    exclusions = {
        "below_threshold": int((~active).sum()),
        "single_page": int((active & ~eligible_mask).sum()),
    }

    sample_seed, replicate_seeds = spec.streams()
    size = math.ceil(spec.sample_fraction * len(eligible))
    users = np.sort(np.random.default_rng(sample_seed).choice(eligible, size=size, replace=False))

    u, p, c = table.edges(kind)
    keep = np.isin(u, users)
    local = np.searchsorted(users, u[keep])
    p, c = p[keep], c[keep].astype(np.float64)
    K = table.scheme.K
    page_bias = np.asarray(table.page_bias)

    def entropies(bias):
        counts = np.bincount(local * K + bias[p], weights=c, minlength=size * K).reshape(size, K)
        return entropy_from_counts(counts) / math.log(K), modal_leaning(counts)

    def replicate(ss):
        rng = np.random.default_rng(ss)
        bias = rng.permutation(page_bias) if permutation is None else np.asarray(permutation(page_bias, rng))
        return entropies(bias)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(replicate, replicate_seeds))
    else:
        results = [replicate(ss) for ss in replicate_seeds]

    real, real_leaning = entropies(page_bias)
    return BenchmarkDistribution(
        kind=kind,
        K=K,
        users=users,
        eligible=len(eligible),
        real=real,
        real_leaning=real_leaning,
        benchmark=np.stack([r[0] for r in results]),
        benchmark_leaning=np.stack([r[1] for r in results]),
        exclusions=exclusions,
    )
