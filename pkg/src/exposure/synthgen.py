"""Synthetic interaction tables with planted bias and page selectivity.

Each user gets a home label, a total activity and a private preference
vector over all pages (a symmetric Dirichlet draw).  Every interaction is
either *bias-driven*, landing on a home-label page chosen by the preference
vector restricted to the home label, or *label-blind*, landing on any page
chosen by the full preference vector.  The bias-driven share is set so that,
with equally sized labels, a user's expected home-label share equals
``bias_affinity``; at ``bias_affinity = 1/K`` no interaction looks at labels.

``page_loyalty`` fixes the Dirichlet concentration so that the pages of one
label share a total concentration of ``1 / (page_loyalty - 1)``: 1 means
uniform preferences, infinity a single favourite page per label, and the
effect does not depend on how many pages a label has.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import DEFAULT_KINDS, BiasScheme, InteractionTable, write_table

BLOCK_SIZE = 1024


@dataclass(frozen=True)
class FixedActivity:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("activity must be >= 1")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, self.n, dtype=np.int64)


@dataclass(frozen=True)
class PowerLawActivity:
    """Discrete power law ``P(n) ~ n**-exponent`` on ``low..high``."""

    exponent: float = 2.0
    low: int = 1
    high: int = 1000

    def __post_init__(self):
        if not 1 <= self.low <= self.high:
            raise ValueError("need 1 <= low <= high")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        support = np.arange(self.low, self.high + 1)
        weights = support.astype(np.float64) ** -self.exponent
        cdf = np.cumsum(weights)
        cdf /= cdf[-1]
        return support[np.searchsorted(cdf, rng.random(size), side="right").clip(0, len(support) - 1)]


def parse_activity(text: str):
    """``"50"`` -> fixed, ``"powerlaw:2.0:5:500"`` -> power law."""
    text = str(text).strip()
    if text.startswith("powerlaw"):
        parts = text.split(":")[1:]
        exponent, low, high = (float(parts[0]), int(parts[1]), int(parts[2])) if parts else (2.0, 1, 1000)
        return PowerLawActivity(exponent, low, high)
    return FixedActivity(int(text))


@dataclass(frozen=True)
class CohortSpec:
    n_users: int = 1000
    pages_per_label: tuple[int, ...] = (20, 20, 20, 20, 20)
    activity: FixedActivity | PowerLawActivity = field(default_factory=lambda: FixedActivity(50))
    bias_affinity: float = 0.2
    page_loyalty: float = 1.0
    seed: int = 0
    kind: str = "like"
    scheme: BiasScheme = BiasScheme()

    def __post_init__(self):
        K = self.scheme.K
        if len(self.pages_per_label) != K:
            raise ValueError(f"pages_per_label needs {K} entries")
        if self.n_users < 1 or min(self.pages_per_label) < 1:
            raise ValueError("n_users and pages_per_label must be positive")
        if not 1.0 / K - 1e-12 <= self.bias_affinity <= 1.0:
            raise ValueError(f"bias_affinity must lie in [1/{K}, 1]")
        if self.page_loyalty < 1:
            raise ValueError("page_loyalty must be >= 1")

    @property
    def driven_share(self) -> float:
        K = self.scheme.K
        return max(0.0, (self.bias_affinity - 1.0 / K) / (1.0 - 1.0 / K))

    @property
    def concentration(self) -> float:
        """Per-page Dirichlet concentration."""
        if math.isinf(self.page_loyalty):
            return 0.0
        if self.page_loyalty == 1:
            return math.inf
        per_label = sum(self.pages_per_label) / self.scheme.K
        return 1.0 / ((self.page_loyalty - 1.0) * per_label)


def _log_preferences(rng, alpha: float, shape) -> np.ndarray:
    """Log of unnormalized symmetric Dirichlet weights, stable for tiny alpha.

    Uses ``Gamma(alpha) = Gamma(alpha + 1) * U**(1/alpha)``.
    """
    if math.isinf(alpha):
        return np.zeros(shape)
    u = rng.random(shape)
    if alpha == 0.0:
        return u  # only the per-set argmax survives, see _normalize
    return np.log(rng.gamma(alpha + 1.0, size=shape)) + np.log(u) / alpha


def _normalize(logw: np.ndarray, mask: np.ndarray, alpha: float) -> np.ndarray:
    """Row-wise probabilities over the pages selected by ``mask``."""
    masked = np.where(mask, logw, -np.inf)
    top = masked.max(axis=1, keepdims=True)
    if alpha == 0.0:
        w = (masked == top).astype(np.float64)
    else:
        w = np.exp(masked - top)
    return w / w.sum(axis=1, keepdims=True)


def _sample_rows(rng, probs: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """One categorical draw from ``probs[row]`` for each entry of ``rows``."""
    cdf = np.cumsum(probs, axis=1)
    cdf /= cdf[:, -1:]
    cdf[:, -1] = 1.0
    width = probs.shape[1]
    flat = (cdf + np.arange(len(probs))[:, None]).ravel()
    hits = np.searchsorted(flat, rows + rng.random(len(rows)), side="right")
    hits = np.minimum(hits, rows * width + width - 1)
    return hits - rows * width


def _generate_block(spec: CohortSpec, page_label: np.ndarray, seed, size: int):
    rng = np.random.default_rng(seed)
    K = spec.scheme.K
    alpha = spec.concentration
    home = rng.integers(K, size=size)
    n = spec.activity.sample(rng, size)
    driven = rng.binomial(n, spec.driven_share)
    logw = _log_preferences(rng, alpha, (size, len(page_label)))
    everywhere = np.ones_like(logw, dtype=bool)
    at_home = page_label[None, :] == home[:, None]
    probs = np.concatenate([_normalize(logw, at_home, alpha), _normalize(logw, everywhere, alpha)])
    rows = np.concatenate([
        np.repeat(np.arange(size), driven),
        size + np.repeat(np.arange(size), n - driven),
    ])
    pages = _sample_rows(rng, probs, rows)
    return rows % size, pages, home


def generate(spec: CohortSpec, return_home: bool = False):
    """Draw a synthetic :class:`InteractionTable` of kind ``spec.kind``.

    Users are generated in fixed-size blocks with per-block seeds, so the
    table depends only on ``spec``.  With ``return_home`` also returns the
    planted home label of every user.
    """
    page_label = np.repeat(np.arange(spec.scheme.K), spec.pages_per_label)
    starts = range(0, spec.n_users, BLOCK_SIZE)
    seeds = np.random.SeedSequence(spec.seed).spawn(len(starts))
    users, pages, homes = [], [], []
    for start, ss in zip(starts, seeds):
        size = min(BLOCK_SIZE, spec.n_users - start)
        u, p, h = _generate_block(spec, page_label, ss, size)
        users.append(u + start)
        pages.append(p)
        homes.append(h)
    kinds = DEFAULT_KINDS if spec.kind in DEFAULT_KINDS else DEFAULT_KINDS + (spec.kind,)
    width_u = len(str(spec.n_users - 1))
    width_p = len(str(len(page_label) - 1))
    table = InteractionTable.from_arrays(
        spec.scheme,
        np.array([f"u{i:0{width_u}d}" for i in range(spec.n_users)], dtype=object),
        np.array([f"p{j:0{width_p}d}" for j in range(len(page_label))], dtype=object),
        page_label,
        kinds,
        np.concatenate(users),
        np.concatenate(pages),
        np.full(sum(len(u) for u in users), kinds.index(spec.kind)),
    )
    if return_home:
        return table, np.concatenate(homes)
    return table


def write_cohort(spec: CohortSpec, interactions_path, pages_path, sep: str = ",") -> InteractionTable:
    table = generate(spec)
    write_table(table, interactions_path, pages_path, sep=sep)
    return table
