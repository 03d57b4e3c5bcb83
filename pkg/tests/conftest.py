import itertools
import math

import numpy as np
import pytest

from exposure.model import BiasScheme, InteractionTable, UserVector


def naive_entropy(counts):
    """Reference entropy written straight from the definition."""
    n = sum(counts)
    return -sum(c / n * math.log(c / n) for c in counts if c)


def compositions(n, parts):
    """All ways to place ``n`` interactions on ``parts`` pages (zeros allowed)."""
    for cut in itertools.combinations(range(n + parts - 1), parts - 1):
        prev, out = -1, []
        for c in cut + (n + parts - 1,):
            out.append(c - prev - 1)
            prev = c
        yield tuple(out)


def random_user_vector(rng, K=5, max_pages=6, max_count=40, extra_pages=3):
    while True:
        per_bias, sizes, page = [], [], 0
        for _ in range(K):
            k = int(rng.integers(0, max_pages + 1))
            group = [(page + j, int(rng.integers(1, max_count + 1))) for j in range(k)]
            page += k
            per_bias.append(group)
            sizes.append(k + int(rng.integers(0, extra_pages + 1)))
        if any(per_bias):
            return UserVector.from_groups(per_bias, class_sizes=[max(s, 1) for s in sizes])


def make_table(rows, page_labels, scheme=None, kinds=("like", "comment")):
    """Build a table from ``(user, page, kind, count)`` rows and ``{page: label_index}``."""
    scheme = scheme or BiasScheme()
    pages = sorted(page_labels)
    users = sorted({r[0] for r in rows})
    return InteractionTable.from_arrays(
        scheme,
        users,
        pages,
        [page_labels[p] for p in pages],
        kinds,
        [users.index(r[0]) for r in rows],
        [pages.index(r[1]) for r in rows],
        [kinds.index(r[2]) for r in rows],
        [r[3] for r in rows],
    )


def random_table(rng, n_users=30, n_pages=12, n_edges=80, K=5, max_count=5, kinds=("like", "comment")):
    scheme = BiasScheme() if K == 5 else BiasScheme(tuple(f"L{i}" for i in range(K)))
    return InteractionTable.from_arrays(
        scheme,
        [f"u{i:03d}" for i in range(n_users)],
        [f"p{i:03d}" for i in range(n_pages)],
        rng.integers(0, K, n_pages),
        kinds,
        rng.integers(0, n_users, n_edges),
        rng.integers(0, n_pages, n_edges),
        rng.integers(0, len(kinds), n_edges),
        rng.integers(1, max_count + 1, n_edges),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20241016)


@pytest.fixture
def example_vector():
    # L = [(p1, 3), (p2, 1)], R = [(p3, 2)]
    return UserVector.from_groups([[(1, 3), (2, 1)], [], [], [], [(3, 2)]])


# acceptance criteria outcomes, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
