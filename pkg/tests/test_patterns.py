import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ordpat.errors import DimensionError, InvalidInputError
from ordpat.patterns import (
    MAX_ORDER,
    Pattern,
    all_patterns,
    check_order,
    n_patterns,
    pattern_frequencies,
    pattern_index,
    pattern_of,
    pattern_sequence,
    reflect,
    unrank,
)

from oracles import naive_index, naive_pattern

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


class TestPatternOf:
    def test_worked_window(self):
        assert pattern_of((2, 4, 1, 7, 3.5)).order == (3, 1, 4, 0, 2)

    def test_increasing_window(self):
        assert pattern_of((1, 2, 3)).order == (2, 1, 0)

    def test_tie_takes_later_index_first(self):
        assert pattern_of((5, 5)).order == (1, 0)
        assert pattern_of((3, 3, 3, 3)).order == (3, 2, 1, 0)

    @pytest.mark.parametrize("window", [(1.0,), (), (1.0, np.nan), (np.inf, 0.0)])
    def test_rejects_bad_windows(self, window):
        with pytest.raises(InvalidInputError):
            pattern_of(window)

    @given(st.lists(finite, min_size=2, max_size=7))
    def test_matches_oracle(self, window):
        assert pattern_of(window).order == naive_pattern(window)

    @given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=6, unique=True),
           st.sampled_from(["affine", "exp", "cube"]))
    def test_monotone_invariance(self, window, transform):
        x = np.array(window)
        f = {"affine": lambda v: 3.0 * v + 7.0, "exp": np.exp, "cube": lambda v: v ** 3}[transform]
        fx = f(x)
        if len(np.unique(fx)) < len(fx):
            return  # rounding merged two values
        assert pattern_of(fx) == pattern_of(x)

    @given(st.lists(st.integers(-1000, 1000), min_size=2, max_size=7, unique=True))
    def test_negation_reflects(self, window):
        x = np.array(window, dtype=float)
        assert pattern_of(-x) == reflect(pattern_of(x))


class TestReflectAndRank:
    def test_reflect_examples(self):
        assert reflect(Pattern((3, 1, 4, 0, 2))).order == (2, 0, 4, 1, 3)
        assert reflect(Pattern((0, 1, 2))).order == (2, 1, 0)

    def test_reflect_is_involution_on_s4(self):
        for perm in itertools.permutations(range(4)):
            p = Pattern(perm)
            assert reflect(reflect(p)) == p

    def test_index_extremes(self):
        assert pattern_index(Pattern((0, 1, 2))) == 0
        assert pattern_index(Pattern((2, 1, 0))) == 5

    @pytest.mark.parametrize("h", range(1, 6))
    def test_rank_unrank_bijection(self, h):
        seen = set()
        for i in range(n_patterns(h)):
            p = unrank(i, h)
            assert pattern_index(p) == i
            seen.add(p.order)
        assert len(seen) == n_patterns(h)

    @pytest.mark.parametrize("h", [1, 2, 3])
    def test_index_is_lexicographic(self, h):
        for perm in itertools.permutations(range(h + 1)):
            assert pattern_index(Pattern(perm)) == naive_index(perm)

    def test_all_patterns_rows_are_unranked(self):
        table = all_patterns(3)
        assert table.shape == (24, 4)
        for i, row in enumerate(table):
            assert tuple(row) == unrank(i, 3).order
        with pytest.raises(ValueError):
            table[0, 0] = 9

    def test_unrank_out_of_range(self):
        with pytest.raises(InvalidInputError):
            unrank(6, 2)
        with pytest.raises(InvalidInputError):
            unrank(-1, 2)

    def test_pattern_must_be_permutation(self):
        with pytest.raises(InvalidInputError):
            Pattern((0, 0, 1))
        with pytest.raises(InvalidInputError):
            Pattern((0,))


class TestPatternSequence:
    def test_four_point_series(self):
        out = pattern_sequence([1, 2, 3, 2], 1)
        expected = [pattern_index(Pattern(p)) for p in ((1, 0), (1, 0), (0, 1))]
        assert out.tolist() == expected

    def test_constant_series(self):
        out = pattern_sequence(np.full(5, 2.0), 2)
        assert np.all(out == pattern_index(Pattern((2, 1, 0))))

    def test_increasing_series(self):
        out = pattern_sequence(np.arange(10.0), 2)
        assert np.all(out == pattern_index(Pattern((2, 1, 0))))

    def test_too_short(self):
        with pytest.raises(InvalidInputError):
            pattern_sequence([1.0, 2.0], 2)

    def test_order_cap(self):
        with pytest.raises(DimensionError):
            pattern_sequence(np.arange(20.0), MAX_ORDER + 1)
        out = pattern_sequence(np.arange(20.0), MAX_ORDER + 1, allow_large=True)
        assert out.size == 20 - MAX_ORDER - 1

    @pytest.mark.parametrize("h", [0, -1, 1.5])
    def test_bad_order(self, h):
        with pytest.raises(InvalidInputError):
            check_order(h)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(0, 4), min_size=6, max_size=40), st.integers(1, 4))
    def test_matches_per_window_oracle_with_ties(self, values, h):
        x = np.array(values, dtype=float)
        expected = [naive_index(naive_pattern(list(x[i:i + h + 1]))) for i in range(x.size - h)]
        assert pattern_sequence(x, h).tolist() == expected

    def test_frequencies_use_n(self):
        idx = pattern_sequence([1, 2, 3, 2], 1)
        q = pattern_frequencies(idx, 1, 4)
        assert q[pattern_index(Pattern((1, 0)))] == 0.5
        assert q[pattern_index(Pattern((0, 1)))] == 0.25
