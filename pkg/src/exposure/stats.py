"""Distribution summaries: eCDFs, log-binned activity curves, quartiles, KL."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import InteractionTable

logger = logging.getLogger(__name__)


def reference_lines(K: int = 5) -> tuple[float, ...]:
    """Normalized entropy of spreading evenly over 2, ..., K-1 classes."""
    return tuple(math.log(k) / math.log(K) for k in range(2, K))


@dataclass(frozen=True, eq=False)
class ECDF:
    sorted_values: np.ndarray
    references: tuple[float, ...] = ()

    @property
    def n(self) -> int:
        return len(self.sorted_values)

    def __call__(self, x):
        """Fraction of values ``<= x`` (right-continuous)."""
        return np.searchsorted(self.sorted_values, x, side="right") / self.n

    def steps(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct values and the eCDF at each of them."""
        xs, counts = np.unique(self.sorted_values, return_counts=True)
        return xs, np.cumsum(counts) / self.n


def ecdf(values, K: int = 5) -> ECDF:
    values = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if not len(values):
        raise ValueError("eCDF of an empty sample")
    return ECDF(values, reference_lines(K))


@dataclass(frozen=True, eq=False)
class BinnedCurve:
    """Mean distinct pages per user within geometric activity bins."""

    edges: np.ndarray
    users: np.ndarray
    mean_pages: np.ndarray

    @property
    def populated(self) -> np.ndarray:
        return self.users > 0


def geometric_edges(lo: float, hi: float, bins: int = 12) -> np.ndarray:
    if lo <= 0:
        raise ValueError("geometric bins need positive values")
    if hi <= lo:
        # one bin around the single observed activity
        return np.array([lo, np.nextafter(lo, np.inf)])
    return np.geomspace(lo, hi, bins + 1)


def bin_activity(activity, pages, edges) -> BinnedCurve:
    activity = np.asarray(activity, dtype=np.float64)
    nb = len(edges) - 1
    idx = np.clip(np.searchsorted(edges, activity, side="right") - 1, 0, nb - 1)
    users = np.bincount(idx, minlength=nb)
    total = np.bincount(idx, weights=np.asarray(pages, dtype=np.float64), minlength=nb)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(users > 0, total / np.maximum(users, 1), np.nan)
    return BinnedCurve(np.asarray(edges, dtype=np.float64), users, mean)


def activity_concentration(table: InteractionTable, kind: str, bins: int = 12, edges=None) -> BinnedCurve:
    """Bin users by total interactions and average their distinct pages per bin.

    Edges span the observed activity range geometrically unless given.
    """
    u, _, c = table.edges(kind)
    users, local = np.unique(u, return_inverse=True)
    if not len(users):
        raise ValueError(f"no users with interactions of kind {kind!r}")
    activity = np.bincount(local, weights=c)
    pages = np.bincount(local)
    if edges is None:
        if activity.min() == activity.max():
            warnings.warn("all users have identical activity; using a single bin", stacklevel=2)
        edges = geometric_edges(activity.min(), activity.max(), bins)
    return bin_activity(activity, pages, edges)


def quartiles(values) -> tuple[float, float, float, float, float]:
    """Min, first quartile, median, third quartile, max (linear interpolation)."""
    values = np.asarray(values, dtype=np.float64)
    if not values.size:
        raise ValueError("quartiles of an empty sample")
    q = np.quantile(values, [0.0, 0.25, 0.5, 0.75, 1.0], method="linear")
    return tuple(float(v) for v in q)


def histogram01(values, bins: int = 50) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if not values.size:
        raise ValueError("empty sample")
    if values.min() < -1e-9 or values.max() > 1 + 1e-9:
        raise ValueError("values must lie in [0, 1]")
    counts, _ = np.histogram(np.clip(values, 0.0, 1.0), bins=bins, range=(0.0, 1.0))
    return counts


def binned_distribution(values, bins: int = 50, pseudocount: float = 0.5, scale: float | None = None) -> np.ndarray:
    """Smoothed histogram of values in ``[0, 1]`` over equal-width bins.

    With ``scale`` the raw counts are first rescaled to a sample of that
    size, so the pseudocount weighs the same against samples of different
    sizes.
    """
    counts = histogram01(values, bins).astype(np.float64)
    if scale is not None:
        counts *= scale / counts.sum()
    smoothed = counts + pseudocount
    return smoothed / smoothed.sum()


def kl_from_probabilities(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    nz = p > 0
    return float(max(np.sum(p[nz] * np.log(p[nz] / q[nz])), 0.0))


def kl_divergence(real, benchmark, bins: int = 50, pseudocount: float = 0.5) -> float:
    """``D(real || benchmark)`` in nats between histogrammed samples on ``[0, 1]``.

    Both histograms get ``pseudocount`` added to every bin.  A benchmark
    larger than the real sample (e.g. pooled over replicates) is first
    rescaled to the real sample size, which equals averaging the
    per-replicate histograms.
    """
    real = np.asarray(real, dtype=np.float64).ravel()
    benchmark = np.asarray(benchmark, dtype=np.float64).ravel()
    scale = float(real.size) if benchmark.size != real.size else None
    return kl_from_probabilities(
        binned_distribution(real, bins, pseudocount),
        binned_distribution(benchmark, bins, pseudocount, scale=scale),
    )
