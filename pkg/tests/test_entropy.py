import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import compositions, naive_entropy, random_table, random_user_vector
from exposure.entropy import (
    bias_entropy,
    bounds,
    decompose,
    entropy_frame,
    entropy_record,
    max_class_entropy,
    max_page_entropy,
    min_page_entropy,
    page_entropy,
    shannon,
    x_statistic,
)
from exposure.model import UserVector, iter_user_vectors

# Frozen from naive_entropy / brute force in conftest.
H_311 = 0.9502705392332347
H_631 = 0.8979457248567797
H_312 = 1.0114042647073518
H_42 = 0.6365141682948128
H_31 = 0.5623351446188083
HMAX_7_3 = 1.0789922078775833
EXAMPLE_M = 1.0986122886681096
EXAMPLE_X = 0.8112781244591333


class TestShannon:
    def test_single_class(self):
        assert shannon([7]) == 0.0

    def test_uniform(self):
        assert shannon([1, 1, 1, 1, 1]) == pytest.approx(math.log(5), abs=1e-15)
        assert shannon([1, 1, 1, 1, 1]) == pytest.approx(1.60944, abs=1e-5)

    def test_direct_evaluation(self):
        assert naive_entropy([3, 1, 1]) == pytest.approx(H_311, abs=1e-15)
        assert shannon([3, 1, 1]) == pytest.approx(H_311, abs=1e-14)
        assert shannon([3, 1, 1]) == pytest.approx(0.95027, abs=1e-5)

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            shannon([])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(1, 10_000), min_size=1, max_size=30))
    def test_range(self, counts):
        h = shannon(counts)
        assert -1e-15 <= h <= math.log(len(counts)) + 1e-12


class TestBiasEntropy:
    def test_single_class(self):
        v = UserVector.from_groups([[(0, 4), (1, 2)], [], [], [], []])
        assert bias_entropy(v) == (0.0, 0.0)

    def test_two_equal_classes_matches_first_reference_line(self):
        v = UserVector.from_groups([[(0, 3)], [], [(1, 3)], [], []])
        assert bias_entropy(v)[1] == pytest.approx(math.log(2) / math.log(5), abs=1e-15)
        assert bias_entropy(v)[1] == pytest.approx(0.43068, abs=1e-5)

    def test_direct_evaluation(self):
        v = UserVector.from_groups([[(0, 6)], [(1, 3)], [(2, 1)], [], []])
        h, norm = bias_entropy(v)
        assert h == pytest.approx(H_631, abs=1e-14)
        assert norm == pytest.approx(H_631 / math.log(5), abs=1e-14)
        assert (round(h, 5), round(norm, 5)) == (0.89795, 0.55793)


class TestPageEntropy:
    def test_one_page(self):
        assert page_entropy(UserVector.from_groups([[], [(0, 9)], [], [], []])) == 0.0

    def test_example(self, example_vector):
        assert page_entropy(example_vector) == pytest.approx(H_312, abs=1e-14)

    def test_not_below_bias_entropy(self, rng):
        for _ in range(500):
            v = random_user_vector(rng)
            assert page_entropy(v) >= bias_entropy(v)[0] - 1e-12

    def test_merging_pages_in_a_class_never_increases(self, rng):
        for _ in range(300):
            v = random_user_vector(rng)
            i = next(k for k, g in enumerate(v.per_bias) if g)
            group = v.per_bias[i]
            if len(group) < 2:
                continue
            merged = ((group[0][0], group[0][1] + group[1][1]),) + group[2:]
            w = UserVector.from_groups(v.per_bias[:i] + (merged,) + v.per_bias[i + 1:], v.class_sizes)
            assert page_entropy(w) <= page_entropy(v) + 1e-12


class TestDecompose:
    def test_single_class(self):
        v = UserVector.from_groups([[], [(0, 3), (1, 5)], [], [], []])
        h_sigma, terms = decompose(v)
        assert h_sigma == 0.0
        assert len(terms) == 1
        assert terms[0][2] == pytest.approx(page_entropy(v), abs=1e-15)

    def test_example_both_sides(self, example_vector):
        h_sigma, terms = decompose(example_vector)
        assert h_sigma == pytest.approx(H_42, abs=1e-14)
        weighted = sum(p * h for _, p, h in terms)
        assert weighted == pytest.approx(4 / 6 * H_31, abs=1e-14)
        assert h_sigma + weighted == pytest.approx(H_312, abs=1e-14)

    def test_identity_on_random_vectors(self, rng):
        for _ in range(200):
            v = random_user_vector(rng)
            h_sigma, terms = decompose(v)
            assert abs(page_entropy(v) - (h_sigma + sum(p * h for _, p, h in terms))) < 1e-12


class TestBounds:
    def test_max_class_few_interactions(self):
        assert max_class_entropy(3, 5) == pytest.approx(math.log(3), abs=1e-15)
        assert max_class_entropy(3, 5) == pytest.approx(1.09861, abs=1e-5)

    def test_max_class_against_brute_force(self):
        brute = max(naive_entropy(c) for c in compositions(7, 3))
        assert brute == pytest.approx(HMAX_7_3, abs=1e-15)
        assert max_class_entropy(7, 3) == pytest.approx(HMAX_7_3, abs=1e-14)

    @pytest.mark.parametrize("c", [1, 2, 7])
    def test_single_interaction_class_has_no_room(self, c):
        assert max_class_entropy(1, c) == 0.0

    def test_min_is_bias_entropy(self, rng):
        for _ in range(200):
            v = random_user_vector(rng)
            assert min_page_entropy(v) == bias_entropy(v)[0]

    def test_min_single_page(self):
        assert min_page_entropy(UserVector.from_groups([[(0, 5)], [], [], [], []])) == 0.0

    def test_min_of_4_2(self):
        v = UserVector.from_groups([[(0, 4)], [(1, 2)], [], [], []])
        assert min_page_entropy(v) == pytest.approx(H_42, abs=1e-14)

    def test_example_max(self, example_vector):
        assert max_page_entropy(example_vector) == pytest.approx(EXAMPLE_M, abs=1e-14)
        # cross-check against brute force over splits (L: 4 on 2 pages, R: 2 on 1 page)
        brute = max(naive_entropy(a + (2,)) for a in compositions(4, 2))
        assert brute == pytest.approx(EXAMPLE_M, abs=1e-14)

    def test_class_sizes_widen_the_ceiling(self):
        touched_only = UserVector.from_groups([[(0, 4)], [(1, 4)], [], [], []])
        with_room = UserVector.from_groups([[(0, 4)], [(1, 4)], [], [], []], class_sizes=[20, 20, 1, 1, 1])
        assert bounds(touched_only).degenerate
        assert not bounds(with_room).degenerate

    def test_bounds_hold_on_random_vectors(self, rng):
        for _ in range(1000):
            v = random_user_vector(rng)
            b = bounds(v)
            assert 0 <= b.m <= b.M
            assert b.m - 1e-9 <= page_entropy(v) <= b.M + 1e-9

    @pytest.mark.parametrize("sizes", [(1,), (3,), (2, 2), (1, 3), (4, 2)])
    def test_bounds_attained(self, sizes):
        for totals in np.ndindex(*[6] * len(sizes)):
            totals = [t + 1 for t in totals]
            values = []
            for split in _joint_splits(totals, sizes):
                values.append(naive_entropy([c for part in split for c in part]))
            # an empty trailing class keeps the scheme at two labels or more
            v = UserVector.from_groups(
                [[(10 * i, t)] for i, t in enumerate(totals)] + [[]], class_sizes=list(sizes) + [1],
            )
            assert min(values) == pytest.approx(min_page_entropy(v), abs=1e-12)
            assert max(values) == pytest.approx(max_page_entropy(v), abs=1e-12)


def _joint_splits(totals, sizes):
    if not totals:
        yield ()
        return
    for first in compositions(totals[0], sizes[0]):
        for rest in _joint_splits(totals[1:], sizes[1:]):
            yield (first,) + rest


class TestXStatistic:
    def test_one_interaction_per_class_is_degenerate(self):
        v = UserVector.from_groups([[(0, 1)], [(1, 1)], [(2, 1)], [], []], class_sizes=[20] * 5)
        assert x_statistic(v) is None

    def test_one_page_per_class_is_zero(self):
        v = UserVector.from_groups([[(0, 5)], [(1, 3)], [], [], []], class_sizes=[20] * 5)
        assert x_statistic(v) == 0.0

    def test_example(self, example_vector):
        x = x_statistic(example_vector)
        m, M, hp = H_42, EXAMPLE_M, H_312
        assert x == pytest.approx((hp - m) / (M - m), abs=1e-12)
        assert x == pytest.approx(EXAMPLE_X, abs=1e-12)

    def test_matches_definition(self, rng):
        for _ in range(500):
            v = random_user_vector(rng)
            b = bounds(v)
            x = x_statistic(v)
            if b.degenerate:
                assert x is None
                continue
            assert 0.0 <= x <= 1.0
            assert x == pytest.approx((page_entropy(v) - b.m) / (b.M - b.m), abs=1e-9)

    def test_base_invariance(self, rng):
        # rescaling every entropy by 1/ln(b) leaves normalized quantities unchanged
        for _ in range(100):
            v = random_user_vector(rng)
            b = bounds(v)
            if b.degenerate:
                continue
            for base in (2.0, 10.0):
                s = 1 / math.log(base)
                x_base = (page_entropy(v) * s - b.m * s) / (b.M * s - b.m * s)
                assert x_base == pytest.approx(x_statistic(v), abs=1e-12)
                h = bias_entropy(v)[0]
                assert (h * s) / (math.log(5) * s) == pytest.approx(bias_entropy(v)[1], abs=1e-15)


class TestEntropyFrame:
    def test_agrees_with_scalar_path(self, rng):
        table = random_table(rng, n_users=60, n_pages=15, n_edges=400, max_count=9)
        for kind in table.kinds:
            frame = entropy_frame(table, kind)
            for row, v in enumerate(iter_user_vectors(table, kind)):
                assert frame.users[row] == v.user
                assert frame.n[row] == v.n
                assert frame.pages[row] == v.pages_touched
                assert frame.bias_entropy[row] == pytest.approx(bias_entropy(v)[0], abs=1e-12)
                assert frame.page_entropy[row] == pytest.approx(page_entropy(v), abs=1e-12)
                assert frame.m[row] == pytest.approx(min_page_entropy(v), abs=1e-12)
                assert frame.M[row] == pytest.approx(max_page_entropy(v), abs=1e-12)
                x = x_statistic(v)
                if x is None:
                    assert np.isnan(frame.x[row])
                else:
                    assert frame.x[row] == pytest.approx(x, abs=1e-12)

    def test_record(self, example_vector):
        rec = entropy_record(example_vector, threshold=6)
        assert rec.meets_activity_threshold
        assert not entropy_record(example_vector, threshold=6, strict=True).meets_activity_threshold
        assert rec.multi_page
        assert rec.leaning == 0
        assert rec.bounds.m <= rec.page_entropy <= rec.bounds.M
