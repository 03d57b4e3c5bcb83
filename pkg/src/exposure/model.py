"""Interaction data model and ingestion.

An :class:`InteractionTable` is the weighted user-page edge multiset of one
dataset, with every page carrying exactly one bias label.  Ids are interned
to dense integers on construction and rows sharing ``(user, page, kind)`` are
merged, so the table is canonical: permuting the input rows produces an
identical table.

Files are plain delimited text::

    # interactions: user_id,page_id,kind[,count]
    u1,p1,like,2
    # pages: page_id,bias_label
    p1,Left

A leading header row and lines starting with ``#`` are skipped.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .errors import DataError

logger = logging.getLogger(__name__)

DEFAULT_LABELS = ("Left", "Center-Left", "Center", "Center-Right", "Right")
DEFAULT_KINDS = ("like", "comment")

#: Leaning code used in vectorized results for users whose mode is tied.
UNRESOLVED = -1

INTERACTION_COLUMNS = ("user_id", "page_id", "kind", "count")
PAGE_COLUMNS = ("page_id", "bias_label")


@dataclass(frozen=True)
class BiasLabel:
    index: int
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class BiasScheme:
    """Ordered set of bias labels; the order defines label indices."""

    labels: tuple[str, ...] = DEFAULT_LABELS

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) < 2:
            raise ValueError("a bias scheme needs at least two labels")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate bias labels in {labels}")

    @property
    def K(self) -> int:
        return len(self.labels)

    def label(self, index: int) -> BiasLabel:
        return BiasLabel(int(index), self.labels[index])

    def index_of(self, name: str) -> int:
        try:
            return self.labels.index(name)
        except ValueError:
            raise DataError(f"unknown bias label {name!r}; expected one of {list(self.labels)}") from None

    @classmethod
    def load(cls, path) -> "BiasScheme":
        """Read one label name per line (blank and ``#`` lines skipped)."""
        with open(path, encoding="utf-8") as fh:
            names = [ln.strip() for ln in fh]
        names = [n for n in names if n and not n.startswith("#")]
        try:
            return cls(tuple(names))
        except ValueError as exc:
            raise DataError(str(exc), path=path) from None


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class IngestReport:
    interaction_rows: int = 0
    page_rows: int = 0
    skipped_unknown_page: int = 0
    skipped_malformed: int = 0
    merged_edges: int = 0
    diagnostics: tuple[str, ...] = ()


@dataclass(frozen=True, eq=False)
class InteractionTable:
    """Immutable, canonical edge multiset ``(user, page, kind, count)``.

    Edges are stored as parallel integer arrays sorted by ``(kind, user,
    page)`` with at most one row per key, so the edges of one kind form a
    contiguous block.  Use :meth:`from_arrays` to build one.
    """

    scheme: BiasScheme
    user_names: np.ndarray
    page_names: np.ndarray
    page_bias: np.ndarray
    kinds: tuple[str, ...]
    edge_user: np.ndarray
    edge_page: np.ndarray
    edge_kind: np.ndarray
    edge_count: np.ndarray
    report: IngestReport | None = field(default=None, compare=False)

    @classmethod
    def from_arrays(
        cls,
        scheme: BiasScheme,
        user_names: Sequence,
        page_names: Sequence,
        page_bias: Sequence[int],
        kinds: Sequence[str],
        edge_user,
        edge_page,
        edge_kind,
        edge_count=None,
        report: IngestReport | None = None,
    ) -> "InteractionTable":
        """Validate, merge duplicate keys and sort edges canonically."""
        n_users, n_pages, n_kinds = len(user_names), len(page_names), len(kinds)
        page_bias = np.asarray(page_bias, dtype=np.int64)
        if page_bias.shape != (n_pages,):
            raise DataError("page_bias must hold exactly one label per page")
        if n_pages and (page_bias.min() < 0 or page_bias.max() >= scheme.K):
            raise DataError("page bias index outside the bias scheme")
        u = np.asarray(edge_user, dtype=np.int64)
        p = np.asarray(edge_page, dtype=np.int64)
        k = np.asarray(edge_kind, dtype=np.int64)
        c = np.ones(len(u), dtype=np.int64) if edge_count is None else np.asarray(edge_count, dtype=np.int64)
        if not (len(u) == len(p) == len(k) == len(c)):
            raise DataError("edge arrays differ in length")
        if len(u):
            if u.min() < 0 or u.max() >= n_users:
                raise DataError("edge references an unknown user")
            if p.min() < 0 or p.max() >= n_pages:
                raise DataError("edge references an unknown page")
            if k.min() < 0 or k.max() >= n_kinds:
                raise DataError("edge references an unknown kind")
            if c.min() < 1:
                raise DataError("edge counts must be positive")
        key = (k * n_users + u) * n_pages + p
        keys, inverse = np.unique(key, return_inverse=True)
        counts = np.bincount(inverse, weights=c, minlength=len(keys)).astype(np.int64)
        if len(keys) and counts.sum() != c.sum():  # float accumulation overflowed 2**53
            counts = np.zeros(len(keys), dtype=np.int64)
            np.add.at(counts, inverse, c)
        p_out = keys % n_pages if n_pages else keys
        rest = keys // n_pages if n_pages else keys
        u_out = rest % n_users if n_users else rest
        k_out = rest // n_users if n_users else rest
        return cls(
            scheme=scheme,
            user_names=_readonly(np.asarray(user_names, dtype=object)),
            page_names=_readonly(np.asarray(page_names, dtype=object)),
            page_bias=_readonly(page_bias),
            kinds=tuple(kinds),
            edge_user=_readonly(u_out),
            edge_page=_readonly(p_out),
            edge_kind=_readonly(k_out),
            edge_count=_readonly(counts),
            report=report,
        )

    @property
    def n_users(self) -> int:
        return len(self.user_names)

    @property
    def n_pages(self) -> int:
        return len(self.page_names)

    @property
    def n_edges(self) -> int:
        return len(self.edge_user)

    def kind_code(self, kind: str) -> int:
        try:
            return self.kinds.index(kind)
        except ValueError:
            raise DataError(f"unknown interaction kind {kind!r}; table has {list(self.kinds)}") from None

    def _kind_slice(self, kind: str) -> slice:
        code = self.kind_code(kind)
        lo, hi = np.searchsorted(self.edge_kind, [code, code + 1])
        return slice(int(lo), int(hi))

    def edges(self, kind: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(users, pages, counts)`` of one kind, sorted by user then page."""
        s = self._kind_slice(kind)
        return self.edge_user[s], self.edge_page[s], self.edge_count[s]

    def kinds_present(self) -> list[str]:
        return [self.kinds[i] for i in np.unique(self.edge_kind)]

    def user_totals(self, kind: str) -> np.ndarray:
        u, _, c = self.edges(kind)
        return np.bincount(u, weights=c, minlength=self.n_users).astype(np.int64)

    def page_totals(self, kind: str) -> np.ndarray:
        _, p, c = self.edges(kind)
        return np.bincount(p, weights=c, minlength=self.n_pages).astype(np.int64)

    def class_sizes(self) -> np.ndarray:
        """Number of pages carrying each label."""
        return np.bincount(self.page_bias, minlength=self.scheme.K)

    def user_index(self, name) -> int:
        idx = np.flatnonzero(self.user_names == name)
        if not len(idx):
            raise KeyError(name)
        return int(idx[0])

    def with_page_bias(self, page_bias) -> "InteractionTable":
        page_bias = np.asarray(page_bias, dtype=np.int64)
        if page_bias.shape != self.page_bias.shape:
            raise ValueError("page_bias shape mismatch")
        return InteractionTable(
            self.scheme, self.user_names, self.page_names, _readonly(page_bias), self.kinds,
            self.edge_user, self.edge_page, self.edge_kind, self.edge_count,
        )

    def with_kind_edges(self, kind: str, users, pages, counts) -> "InteractionTable":
        """Replace the edges of one kind, keeping every other kind as is."""
        s = self._kind_slice(kind)
        keep = np.ones(self.n_edges, dtype=bool)
        keep[s] = False
        code = self.kind_code(kind)
        return InteractionTable.from_arrays(
            self.scheme, self.user_names, self.page_names, self.page_bias, self.kinds,
            np.concatenate([self.edge_user[keep], users]),
            np.concatenate([self.edge_page[keep], pages]),
            np.concatenate([self.edge_kind[keep], np.full(len(users), code)]),
            np.concatenate([self.edge_count[keep], counts]),
        )

    def equals(self, other: "InteractionTable") -> bool:
        return (
            self.scheme == other.scheme
            and self.kinds == other.kinds
            and np.array_equal(self.user_names, other.user_names)
            and np.array_equal(self.page_names, other.page_names)
            and np.array_equal(self.page_bias, other.page_bias)
            and np.array_equal(self.edge_user, other.edge_user)
            and np.array_equal(self.edge_page, other.edge_page)
            and np.array_equal(self.edge_kind, other.edge_kind)
            and np.array_equal(self.edge_count, other.edge_count)
        )


# --------------------------------------------------------------------------
# ingestion
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class IngestOptions:
    sep: str = ","
    #: fail on unknown pages and malformed rows; otherwise skip and report them
    strict: bool = True
    kinds: tuple[str, ...] = DEFAULT_KINDS
    scheme: BiasScheme | None = None
    scheme_path: str | None = None

    def resolved_scheme(self) -> BiasScheme:
        if self.scheme is not None:
            return self.scheme
        if self.scheme_path is not None:
            return BiasScheme.load(self.scheme_path)
        return BiasScheme()


def _read_rows(path, sep: str, ncols: int) -> pd.DataFrame:
    """Read a delimited file into string columns indexed by 1-based line number.

    Blank lines, ``#`` comment lines and a leading header row are dropped.
    Rows with too many fields raise :class:`DataError`; missing trailing
    fields come back as empty strings.
    """
    names = [f"c{i}" for i in range(ncols)]
    try:
        df = pd.read_csv(
            path, sep=sep, header=None, names=names, dtype=str, na_filter=False,
            skip_blank_lines=False, index_col=False, engine="c", quoting=csv.QUOTE_NONE,
        )
        df.index = np.arange(1, len(df) + 1)
    except pd.errors.EmptyDataError:
        df = pd.DataFrame({n: pd.Series([], dtype=str) for n in names})
    except pd.errors.ParserError:
        df = _read_rows_slow(path, sep, ncols, names)
    first = df["c0"]
    blank = (first == "") & (df.iloc[:, 1:] == "").all(axis=1)
    comment = first.str.startswith("#")
    df = df[~(blank | comment)]
    if len(df) and df["c0"].iloc[0] in (INTERACTION_COLUMNS[0], PAGE_COLUMNS[0]):
        df = df.iloc[1:]
    return df


def _read_rows_slow(path, sep, ncols, names) -> pd.DataFrame:
    rows, lines = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split(sep)
            if len(parts) > ncols:
                raise DataError(f"expected at most {ncols} fields, got {len(parts)}", line=lineno, path=path)
            rows.append(parts + [""] * (ncols - len(parts)))
            lines.append(lineno)
    return pd.DataFrame(rows, columns=names, index=np.asarray(lines, dtype=np.int64), dtype=str)


def _read_pages(path, options: IngestOptions, scheme: BiasScheme):
    df = _read_rows(path, options.sep, 2)
    df = df.assign(c0=df["c0"].str.strip(), c1=df["c1"].str.strip())
    empty = (df["c0"] == "") | (df["c1"] == "")
    if empty.any():
        raise DataError("page row needs page_id and bias_label", line=int(df.index[empty.argmax()]), path=path)
    label_index = {name: i for i, name in enumerate(scheme.labels)}
    bias = df["c1"].map(label_index)
    if bias.isna().any():
        bad = bias.isna().to_numpy().argmax()
        raise DataError(
            f"unknown bias label {df['c1'].iloc[bad]!r}; expected one of {list(scheme.labels)}",
            line=int(df.index[bad]), path=path,
        )
    pages = pd.DataFrame({"page": df["c0"].to_numpy(), "bias": bias.to_numpy(dtype=np.int64)})
    dup = pages.drop_duplicates().duplicated("page", keep=False)
    if dup.any():
        raise DataError(f"page {pages['page'][dup].iloc[0]!r} has conflicting bias labels", path=path)
    pages = pages.drop_duplicates("page").sort_values("page", kind="stable")
    return pages["page"].to_numpy(dtype=object), pages["bias"].to_numpy(dtype=np.int64), len(df)


def ingest(interactions_path, pages_path, options: IngestOptions | None = None) -> InteractionTable:
    """Load an interaction log and a page-label file into an :class:`InteractionTable`.

    In strict mode (the default) the first malformed row or unknown page id
    raises :class:`DataError` naming the line; otherwise offending rows are
    dropped and tallied in ``table.report``.
    """
    options = options or IngestOptions()
    scheme = options.resolved_scheme()
    for path in (interactions_path, pages_path):
        if not Path(path).is_file():
            raise DataError("file not found", path=path)
    page_names, page_bias, page_rows = _read_pages(pages_path, options, scheme)

    df = _read_rows(interactions_path, options.sep, 4)
    n_rows = len(df)
    diagnostics = []
    user = df["c0"].str.strip()
    page = df["c1"].str.strip()
    kind = df["c2"].str.strip()
    raw_count = df["c3"].str.strip()
    count = pd.to_numeric(raw_count.mask(raw_count == "", "1"), errors="coerce")

    kind_codes = {k: i for i, k in enumerate(options.kinds)}
    kcode = kind.map(kind_codes)
    problems = [
        ((user == "") | (page == "") | (kind == ""), "missing user_id, page_id or kind"),
        (kcode.isna(), f"unknown interaction kind; expected one of {list(options.kinds)}"),
        (count.isna() | (count < 1) | (count != np.floor(count)), "count must be a positive integer"),
    ]
    malformed = np.zeros(n_rows, dtype=bool)
    for mask, message in problems:
        mask = mask.to_numpy()
        if mask.any():
            first = int(df.index[mask.argmax()])
            if options.strict:
                raise DataError(message, line=first, path=interactions_path)
            diagnostics.append(f"line {first}: {message} ({int(mask.sum())} rows)")
            malformed |= mask

    pcode = pd.Index(page_names).get_indexer(page.to_numpy())
    unknown = (pcode < 0) & ~malformed
    if unknown.any():
        first = unknown.argmax()
        if options.strict:
            raise DataError(
                f"page id {page.iloc[first]!r} not in pages file", line=int(df.index[first]), path=interactions_path
            )
        diagnostics.append(f"line {int(df.index[first])}: {int(unknown.sum())} rows reference unknown pages")

    keep = ~(malformed | unknown)
    user_codes, user_names = pd.factorize(user[keep], sort=True)
    report = IngestReport(
        interaction_rows=n_rows,
        page_rows=page_rows,
        skipped_unknown_page=int(unknown.sum()),
        skipped_malformed=int(malformed.sum()),
        diagnostics=tuple(diagnostics),
    )
    table = InteractionTable.from_arrays(
        scheme,
        np.asarray(user_names, dtype=object),
        page_names,
        page_bias,
        options.kinds,
        user_codes,
        pcode[keep],
        kcode[keep].to_numpy(dtype=np.int64),
        count[keep].to_numpy(dtype=np.int64),
    )
    report = IngestReport(**{**report.__dict__, "merged_edges": table.n_edges})
    object.__setattr__(table, "report", report)
    for line in diagnostics:
        logger.warning("%s: %s", interactions_path, line)
    logger.info(
        "ingested %d interaction rows into %d edges (%d users, %d pages)",
        n_rows, table.n_edges, table.n_users, table.n_pages,
    )
    return table


def write_table(table: InteractionTable, interactions_path, pages_path, sep: str = ",") -> None:
    """Write ``table`` in the format :func:`ingest` reads."""
    pages = pd.DataFrame({
        PAGE_COLUMNS[0]: table.page_names,
        PAGE_COLUMNS[1]: np.asarray(table.scheme.labels, dtype=object)[table.page_bias],
    })
    pages.to_csv(pages_path, sep=sep, index=False)
    edges = pd.DataFrame({
        "user_id": table.user_names[table.edge_user],
        "page_id": table.page_names[table.edge_page],
        "kind": np.asarray(table.kinds, dtype=object)[table.edge_kind],
        "count": table.edge_count,
    })
    edges.to_csv(interactions_path, sep=sep, index=False)


# --------------------------------------------------------------------------
# per-user views
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class UserVector:
    """One user's interactions of one kind, grouped by bias class then page.

    ``class_sizes`` holds the number of pages carrying each label in the
    table the vector was drawn from; the page-entropy bounds spread a class's
    interactions over that many pages.
    """

    user: int
    kind: str
    per_bias: tuple[tuple[tuple[int, int], ...], ...]
    class_sizes: tuple[int, ...]
    scheme: BiasScheme = BiasScheme()

    @classmethod
    def from_groups(cls, per_bias, class_sizes=None, user=0, kind="like", scheme=None) -> "UserVector":
        """Build from ``per_bias[i] = [(page, count), ...]``.

        Without ``class_sizes`` each class is taken to contain exactly the
        pages listed for it.
        """
        per_bias = tuple(tuple((int(p), int(c)) for p, c in group) for group in per_bias)
        if scheme is None:
            scheme = BiasScheme() if len(per_bias) == 5 else BiasScheme(tuple(f"L{i}" for i in range(len(per_bias))))
        if class_sizes is None:
            class_sizes = tuple(len(g) for g in per_bias)
        return cls(user, kind, per_bias, tuple(int(s) for s in class_sizes), scheme)

    @property
    def n(self) -> int:
        return sum(c for group in self.per_bias for _, c in group)

    @property
    def pages_touched(self) -> int:
        return sum(len(group) for group in self.per_bias)

    @property
    def bias_counts(self) -> tuple[int, ...]:
        return tuple(sum(c for _, c in group) for group in self.per_bias)

    @property
    def class_pages(self) -> tuple[int, ...]:
        """Distinct pages touched per class."""
        return tuple(len(group) for group in self.per_bias)

    @property
    def page_counts(self) -> list[int]:
        return [c for group in self.per_bias for _, c in group]


def user_vector(table: InteractionTable, user, kind: str) -> UserVector | None:
    """Group ``user``'s interactions of ``kind`` by bias class.

    ``user`` is an interned index or a user id string.  Returns ``None`` when
    the user has no interaction of that kind.
    """
    if not isinstance(user, (int, np.integer)):
        try:
            user = table.user_index(user)
        except KeyError:
            return None
    u, p, c = table.edges(kind)
    lo, hi = np.searchsorted(u, [user, user + 1])
    if lo == hi:
        return None
    groups: list[list[tuple[int, int]]] = [[] for _ in range(table.scheme.K)]
    for page, count in zip(p[lo:hi].tolist(), c[lo:hi].tolist()):
        groups[table.page_bias[page]].append((page, count))
    return UserVector(
        int(user), kind, tuple(tuple(g) for g in groups), tuple(table.class_sizes().tolist()), table.scheme
    )


def infer_leaning(v: UserVector) -> BiasLabel | None:
    """Modal bias class of ``v``; ``None`` (unresolved) when the maximum is tied."""
    counts = v.bias_counts
    if sum(counts) < 1:
        raise ValueError("user vector has no interactions")
    top = max(counts)
    winners = [i for i, c in enumerate(counts) if c == top]
    if len(winners) > 1:
        return None
    return v.scheme.label(winners[0])


def modal_leaning(bias_counts: np.ndarray) -> np.ndarray:
    """Row-wise strict mode of a ``(users, K)`` count matrix; ties give ``UNRESOLVED``."""
    bias_counts = np.asarray(bias_counts)
    top = bias_counts.max(axis=1, keepdims=True)
    n_top = (bias_counts == top).sum(axis=1)
    return np.where(n_top == 1, bias_counts.argmax(axis=1), UNRESOLVED)


def iter_user_vectors(table: InteractionTable, kind: str) -> Iterable[UserVector]:
    """Yield the vector of every user with at least one interaction of ``kind``."""
    u, _, _ = table.edges(kind)
    for user in np.unique(u):
        yield user_vector(table, int(user), kind)
