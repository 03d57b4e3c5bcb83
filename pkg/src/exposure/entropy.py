"""Shannon entropy of users' interactions over bias classes and pages.

Pages refine bias classes, so a user's page entropy splits into the entropy
over classes plus the class-weighted within-class entropies::

    H_page = H_bias + sum_i p_i * H_i

Holding the per-class totals fixed, the within-class terms are independent.
Each vanishes when the class's interactions sit on a single page and peaks
when they are spread as evenly as integer counts allow over the pages of the
class.  This pins the page entropy to an interval ``[m, M]``, and
``x = (H_page - m) / (M - m)`` rescales it to ``[0, 1]``.

All entropies are in nats.  Scalar functions take a :class:`UserVector`;
:func:`entropy_frame` evaluates the same quantities for every user of a
table at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import InteractionTable, UserVector, infer_leaning, modal_leaning

#: ``M - m`` below this many nats marks the bounds as degenerate.
DEGENERACY_TOL = 1e-12


def shannon(counts) -> float:
    """Plug-in entropy of a list of positive counts."""
    counts = [float(c) for c in counts]
    if not counts:
        raise ValueError("entropy of an empty distribution")
    if min(counts) < 1:
        raise ValueError("counts must be >= 1")
    n = sum(counts)
    return -sum(c / n * math.log(c / n) for c in counts) + 0.0


def _nonzero(counts):
    return [c for c in counts if c > 0]


def bias_entropy(v: UserVector, K: int | None = None) -> tuple[float, float]:
    """``(entropy, entropy / ln K)`` of the user's per-class totals."""
    K = v.scheme.K if K is None else K
    h = shannon(_nonzero(v.bias_counts))
    return h, h / math.log(K)


def page_entropy(v: UserVector) -> float:
    return shannon(v.page_counts)


def decompose(v: UserVector) -> tuple[float, list[tuple[int, float, float]]]:
    """Split page entropy into the bias entropy and per-class conditional terms.

    Returns ``(H_bias, [(class, p_i, H_i), ...])`` for every non-empty class,
    with ``page_entropy(v) == H_bias + sum(p_i * H_i)``.
    """
    n = v.n
    h_sigma = shannon(_nonzero(v.bias_counts))
    terms = []
    for i, group in enumerate(v.per_bias):
        if not group:
            continue
        counts = [c for _, c in group]
        terms.append((i, sum(counts) / n, shannon(counts)))
    return h_sigma, terms


def max_class_entropy(n_i: int, c_i: int) -> float:
    """Largest entropy of ``n_i`` interactions spread over ``c_i`` pages.

    The maximum puts ``q + 1`` interactions on ``r`` pages and ``q`` on the
    remaining ``c_i - r``, where ``q, r = divmod(n_i, c_i)``.
    """
    if n_i < 1 or c_i < 1:
        raise ValueError("need n_i >= 1 and c_i >= 1")
    if n_i <= c_i:
        return math.log(n_i)
    q, r = divmod(n_i, c_i)
    return shannon([q + 1] * r + [q] * (c_i - r))


def min_page_entropy(v: UserVector) -> float:
    return shannon(_nonzero(v.bias_counts))


def _class_capacity(v: UserVector, i: int) -> int:
    # a class can never hold fewer pages than the user actually touched in it
    return max(v.class_sizes[i], len(v.per_bias[i]))


def max_page_entropy(v: UserVector) -> float:
    n = v.n
    h = shannon(_nonzero(v.bias_counts))
    for i, n_i in enumerate(v.bias_counts):
        if n_i:
            h += n_i / n * max_class_entropy(n_i, _class_capacity(v, i))
    return h


@dataclass(frozen=True)
class EntropyBounds:
    m: float
    M: float

    @property
    def degenerate(self) -> bool:
        return self.M - self.m < DEGENERACY_TOL


def bounds(v: UserVector) -> EntropyBounds:
    return EntropyBounds(min_page_entropy(v), max_page_entropy(v))


def x_statistic(v: UserVector) -> float | None:
    """Page entropy rescaled into its feasible interval; ``None`` if degenerate.

    Evaluated as the ratio of the within-class terms actually observed to
    their maxima, which equals ``(H_page - m) / (M - m)`` and is exactly 0
    when every class uses a single page.
    """
    n = v.n
    observed = sum(p * h for _, p, h in decompose(v)[1])
    ceiling = sum(
        n_i / n * max_class_entropy(n_i, _class_capacity(v, i))
        for i, n_i in enumerate(v.bias_counts) if n_i
    )
    if ceiling < DEGENERACY_TOL:
        return None
    return min(max(observed / ceiling, 0.0), 1.0)


@dataclass(frozen=True)
class EntropyRecord:
    user: int
    kind: str
    bias_entropy: float
    bias_entropy_norm: float
    page_entropy: float
    bounds: EntropyBounds
    x: float | None
    meets_activity_threshold: bool
    multi_page: bool
    leaning: int | None


def entropy_record(v: UserVector, threshold: int = 5, strict: bool = False) -> EntropyRecord:
    h, h_norm = bias_entropy(v)
    n = v.n
    leaning = infer_leaning(v)
    return EntropyRecord(
        user=v.user,
        kind=v.kind,
        bias_entropy=h,
        bias_entropy_norm=h_norm,
        page_entropy=page_entropy(v),
        bounds=bounds(v),
        x=x_statistic(v),
        meets_activity_threshold=n > threshold if strict else n >= threshold,
        multi_page=v.pages_touched >= 2,
        leaning=None if leaning is None else leaning.index,
    )


# --------------------------------------------------------------------------
# vectorized evaluation over a whole table
# --------------------------------------------------------------------------


def _xlogx(a):
    a = np.asarray(a, dtype=np.float64)
    out = np.zeros_like(a)
    pos = a > 0
    out[pos] = a[pos] * np.log(a[pos])
    return out


def entropy_from_counts(counts: np.ndarray) -> np.ndarray:
    """Row-wise entropy of a ``(users, K)`` count matrix (zero cells ignored)."""
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.log(n) - _xlogx(counts).sum(axis=1) / n
    return np.maximum(h, 0.0)


def max_class_xlogx(n_i: np.ndarray, c_i: np.ndarray) -> np.ndarray:
    """``sum(k log k)`` over the near-uniform split of ``n_i`` into ``c_i`` parts."""
    n_i = np.asarray(n_i, dtype=np.int64)
    c_i = np.maximum(np.asarray(c_i, dtype=np.int64), 1)
    q, r = np.divmod(n_i, c_i)
    return r * _xlogx(q + 1) + (c_i - r) * _xlogx(q)


@dataclass(frozen=True, eq=False)
class EntropyFrame:
    """Per-user entropy quantities for every user with interactions of one kind.

    Arrays are aligned on ``users`` (ascending interned ids).  ``x`` is NaN
    where the bounds are degenerate; ``leaning`` is ``UNRESOLVED`` on ties.
    """

    kind: str
    K: int
    users: np.ndarray
    n: np.ndarray
    pages: np.ndarray
    bias_counts: np.ndarray
    bias_entropy: np.ndarray
    page_entropy: np.ndarray
    m: np.ndarray
    M: np.ndarray
    x: np.ndarray
    leaning: np.ndarray

    @property
    def bias_entropy_norm(self) -> np.ndarray:
        return self.bias_entropy / math.log(self.K)

    @property
    def degenerate(self) -> np.ndarray:
        return np.isnan(self.x)

    def active(self, threshold: int, strict: bool = False) -> np.ndarray:
        return self.n > threshold if strict else self.n >= threshold

    def __len__(self):
        return len(self.users)


def entropy_frame(table: InteractionTable, kind: str, page_bias: np.ndarray | None = None) -> EntropyFrame:
    """Evaluate bias/page entropy, bounds and ``x`` for every user of ``kind``.

    ``page_bias`` overrides the table's labels (used by label permutations).
    """
    page_bias = table.page_bias if page_bias is None else np.asarray(page_bias)
    K = table.scheme.K
    u, p, c = table.edges(kind)
    users, local = np.unique(u, return_inverse=True)
    n_users = len(users)
    cf = c.astype(np.float64)
    b = page_bias[p]
    cell = local * K + b

    n = np.bincount(local, weights=cf, minlength=n_users)
    pages = np.bincount(local, minlength=n_users)
    bias_counts = np.bincount(cell, weights=cf, minlength=n_users * K).reshape(n_users, K)
    page_xlogx = np.bincount(local, weights=_xlogx(cf), minlength=n_users)
    # per (user, class): sum of k log k over the class's pages
    cell_page_xlogx = np.bincount(cell, weights=_xlogx(cf), minlength=n_users * K).reshape(n_users, K)
    bias_xlogx = _xlogx(bias_counts)

    with np.errstate(divide="ignore", invalid="ignore"):
        log_n = np.log(n)
        h_bias = np.maximum(log_n - bias_xlogx.sum(axis=1) / n, 0.0)
        h_page = np.maximum(log_n - page_xlogx / n, 0.0)
        # within-class parts n_i * H_i, observed and maximal
        within = np.maximum(bias_xlogx - cell_page_xlogx, 0.0).sum(axis=1)
        sizes = np.bincount(page_bias, minlength=K)[None, :]
        touched = np.bincount(cell, minlength=n_users * K).reshape(n_users, K)
        capacity = np.maximum(sizes, touched)
        ceiling = np.maximum(bias_xlogx - max_class_xlogx(bias_counts.astype(np.int64), capacity), 0.0).sum(axis=1)
        m = h_bias
        M = h_bias + ceiling / n
        degenerate = ceiling / n < DEGENERACY_TOL
        x = np.where(degenerate, np.nan, np.clip(within / np.where(degenerate, 1.0, ceiling), 0.0, 1.0))

    return EntropyFrame(
        kind=kind,
        K=K,
        users=users,
        n=n.astype(np.int64),
        pages=pages,
        bias_counts=bias_counts.astype(np.int64),
        bias_entropy=h_bias,
        page_entropy=h_page,
        m=m,
        M=M,
        x=x,
        leaning=modal_leaning(bias_counts),
    )
