import itertools
import math

import numpy as np
import pytest

from conftest import make_table, naive_entropy, random_table
from exposure.entropy import entropy_frame
from exposure.errors import DataError
from exposure.model import BiasScheme
from exposure.nullmodel import (
    RandomizationSpec,
    monte_carlo_weak,
    permute_labels,
    strong_randomize,
    weak_randomize,
)


def _per_user_totals(table, kind):
    u, _, c = table.edges(kind)
    return np.bincount(u, weights=c, minlength=table.n_users)


def _per_page_totals(table, kind):
    _, p, c = table.edges(kind)
    return np.bincount(p, weights=c, minlength=table.n_pages)


class TestStrong:
    def test_marginals_preserved(self, rng):
        for _ in range(20):
            table = random_table(rng, n_edges=150)
            for kind in table.kinds_present():
                out = strong_randomize(table, kind, int(rng.integers(1 << 30)))
                assert np.array_equal(_per_user_totals(out, kind), _per_user_totals(table, kind))
                assert np.array_equal(_per_page_totals(out, kind), _per_page_totals(table, kind))

    def test_other_kinds_untouched(self, rng):
        table = random_table(rng, n_edges=150)
        out = strong_randomize(table, "like", 3)
        assert all(np.array_equal(a, b) for a, b in zip(out.edges("comment"), table.edges("comment")))

    def test_one_user_one_page_is_identity(self):
        table = make_table([("u", "p", "like", 7)], {"p": 1})
        out = strong_randomize(table, "like", 0)
        assert out.edges("like")[2].tolist() == [7]

    def test_deterministic(self, rng):
        table = random_table(rng, n_edges=150)
        assert strong_randomize(table, "like", 11).equals(strong_randomize(table, "like", 11))

    def test_breaks_page_concentration(self):
        # every user sticks to one page; re-pairing spreads them over several
        rows = [(f"u{i}", f"p{i % 10}", "like", 20) for i in range(200)]
        table = make_table(rows, {f"p{j}": j % 5 for j in range(10)})
        before = entropy_frame(table, "like").page_entropy.mean()
        after = entropy_frame(strong_randomize(table, "like", 1), "like").page_entropy.mean()
        assert before == 0.0
        assert after > 1.0

    def test_empty_kind_raises(self):
        table = make_table([("u", "p", "like", 1)], {"p": 1})
        with pytest.raises(DataError):
            strong_randomize(table, "comment", 0)


class TestWeak:
    def test_label_histogram_and_page_entropy_unchanged(self, rng):
        table = random_table(rng, n_edges=150)
        out = weak_randomize(table, 5)
        assert np.array_equal(np.bincount(out.page_bias, minlength=5), np.bincount(table.page_bias, minlength=5))
        for kind in table.kinds:
            assert np.array_equal(entropy_frame(out, kind).page_entropy, entropy_frame(table, kind).page_entropy)
        assert all(np.array_equal(a, b) for a, b in zip(out.edges("like"), table.edges("like")))

    def test_single_label_tables_are_fixed_points(self, rng):
        table = random_table(rng, n_edges=60).with_page_bias(np.full(12, 3))
        assert weak_randomize(table, 9).equals(table)

    def test_permute_labels_is_a_permutation(self, rng):
        table = random_table(rng, n_pages=40)
        assert sorted(permute_labels(table, 1).tolist()) == sorted(table.page_bias.tolist())

    def test_empty_table_raises(self):
        table = make_table([], {"p": 0})
        with pytest.raises(DataError):
            weak_randomize(table, 0)


class TestMonteCarlo:
    @pytest.fixture
    def table(self, rng):
        return random_table(rng, n_users=80, n_pages=20, n_edges=900, max_count=4)

    def test_identity_permutation_reproduces_real(self, table):
        spec = RandomizationSpec(seed=1, replicates=5, sample_fraction=1.0)
        dist = monte_carlo_weak(table, "like", spec, permutation=lambda bias, rng: bias)
        for row in dist.benchmark:
            assert np.array_equal(row, dist.real)
        assert np.array_equal(dist.benchmark_leaning[0], dist.real_leaning)

    def test_sample_size_and_eligibility(self, table):
        frame = entropy_frame(table, "like")
        eligible = int(((frame.n >= 5) & (frame.pages >= 2)).sum())
        dist = monte_carlo_weak(table, "like", RandomizationSpec(seed=2, replicates=3, sample_fraction=0.3))
        assert dist.eligible == eligible
        assert len(dist.users) == math.ceil(0.3 * eligible)
        assert len(set(dist.users.tolist())) == len(dist.users)
        assert dist.benchmark.shape == (3, len(dist.users))

    def test_workers_do_not_change_results(self, table):
        spec = RandomizationSpec(seed=7, replicates=12, sample_fraction=0.5)
        a = monte_carlo_weak(table, "like", spec, workers=1)
        b = monte_carlo_weak(table, "like", spec, workers=4)
        assert np.array_equal(a.users, b.users)
        assert np.array_equal(a.benchmark, b.benchmark)
        assert np.array_equal(a.benchmark_leaning, b.benchmark_leaning)

    def test_no_eligible_users(self):
        table = make_table([("u", "p", "like", 2)], {"p": 0})
        with pytest.raises(DataError, match="no eligible users"):
            monte_carlo_weak(table, "like", RandomizationSpec())

    def test_user_mean_estimator_averages_each_user(self, table):
        dist = monte_carlo_weak(table, "like", RandomizationSpec(seed=3, replicates=6, sample_fraction=1.0))
        assert np.allclose(dist.benchmark_group(None, "user-mean"), dist.benchmark.mean(axis=0))
        assert dist.benchmark_group(None, "pooled").size == dist.benchmark.size
        with pytest.raises(ValueError):
            dist.benchmark_group(None, "median")

    def test_matches_exhaustive_average(self):
        # one user on four pages, two of each label: enumerate every labelling
        scheme = BiasScheme(("A", "B"))
        counts = {"p0": 3, "p1": 1, "p2": 2, "p3": 1}
        table = make_table([("u", p, "like", c) for p, c in counts.items()],
                           {"p0": 0, "p1": 0, "p2": 1, "p3": 1}, scheme=scheme)
        values = []
        for labels in set(itertools.permutations([0, 0, 1, 1])):
            totals = [sum(c for (_, c), lab in zip(counts.items(), labels) if lab == k) for k in (0, 1)]
            values.append(naive_entropy(totals) / math.log(2))
        expected = float(np.mean(values))

        dist = monte_carlo_weak(table, "like", RandomizationSpec(seed=4, replicates=10_000, sample_fraction=1.0))
        sample = dist.benchmark[:, 0]
        se = sample.std(ddof=1) / math.sqrt(len(sample))
        assert abs(sample.mean() - expected) < 3 * se
