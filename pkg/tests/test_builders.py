from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treehist.core import ConfigError, EstimatorKind, FrequencySet, InvariantError
from treehist.builders import (
    BuildMethod,
    attach_payloads,
    bits_per_bucket,
    budget_to_buckets,
    build,
    build_equisplit,
    build_maxdiff,
    build_voptimal,
    histogram_from_json,
    histogram_to_json,
    maxdiff_boundaries,
    voptimal_boundaries,
    voptimal_boundaries_multi,
)
from treehist.estimators import PackedTreeIndex, Split2Payload, encode_4lt

from conftest import brute_maxdiff_cuts, brute_voptimal_sse, exact_sse

freq_vectors = st.lists(st.integers(min_value=0, max_value=50), min_size=1, max_size=12)


def reference_voptimal_sse(freq, h: int) -> float:
    """Plain O(m^2 h) dynamic program, no divide-and-conquer shortcuts."""
    f = np.asarray(freq, dtype=np.float64)
    m = len(f)
    h = min(h, m)
    s = np.concatenate([[0.0], np.cumsum(f)])
    ss = np.concatenate([[0.0], np.cumsum(f * f)])

    def seg(a, i):
        n = i - a
        tot = s[i] - s[a]
        return ss[i] - ss[a] - tot * tot / n

    cost = np.full((h + 1, m + 1), np.inf)
    cost[0, 0] = 0.0
    for j in range(1, h + 1):
        for i in range(j, m + 1):
            ks = np.arange(j - 1, i)
            cost[j, i] = np.min(cost[j - 1, ks] + seg(ks, i))
    return float(cost[h, m])


class TestBudget:
    @pytest.mark.parametrize(
        "method,kind,expected",
        [
            (BuildMethod.MAXDIFF, EstimatorKind.CVA, 21),
            (BuildMethod.VOPTIMAL, EstimatorKind.CVA, 21),
            (BuildMethod.MAXDIFF, EstimatorKind.TREE4, 14),
            (BuildMethod.VOPTIMAL, EstimatorKind.TREE4, 14),
            (BuildMethod.EQUISPLIT, EstimatorKind.CVA, 42),
            (BuildMethod.EQUISPLIT, EstimatorKind.TREE4, 21),
        ],
    )
    def test_42_four_byte_numbers(self, method, kind, expected):
        assert budget_to_buckets(42 * 32, method, kind) == expected

    def test_minimum_one_bucket(self):
        assert budget_to_buckets(96, BuildMethod.VOPTIMAL, EstimatorKind.TREE4) == 1
        with pytest.raises(ConfigError):
            budget_to_buckets(95, BuildMethod.VOPTIMAL, EstimatorKind.TREE4)

    def test_every_non_cva_estimator_costs_one_extra_integer(self):
        for kind in EstimatorKind:
            extra = 0 if kind is EstimatorKind.CVA else 32
            assert bits_per_bucket(BuildMethod.MAXDIFF, kind) == 64 + extra
            assert bits_per_bucket(BuildMethod.EQUISPLIT, kind) == 32 + extra


class TestEquiSplit:
    def test_exact_division(self):
        fs = FrequencySet([1] * 100)
        hist = build_equisplit(fs, 4)
        assert [(b.inf, b.sup) for b in hist] == [(1, 25), (26, 50), (51, 75), (76, 100)]

    def test_shorter_last_bucket(self):
        fs = FrequencySet([1] * 10)
        hist = build_equisplit(fs, 3)
        assert [(b.inf, b.sup) for b in hist] == [(1, 4), (5, 8), (9, 10)]

    def test_singletons(self):
        fs = FrequencySet([1] * 5)
        hist = build_equisplit(fs, 5)
        assert [(b.inf, b.sup) for b in hist] == [(i, i) for i in range(1, 6)]

    def test_storage_accounting(self):
        fs = FrequencySet([1] * 10)
        assert build_equisplit(fs, 5).storage_bits == 5 * 32

    @given(st.integers(1, 60), st.integers(1, 60))
    def test_always_valid_and_covering(self, m, k):
        k = min(k, m)
        fs = FrequencySet(np.arange(m) % 3)
        hist = build_equisplit(fs, k)
        assert hist.buckets[0].inf == 1
        assert hist.buckets[-1].sup == m
        assert hist.covers_value_set(fs)
        assert len(hist) <= k
        widths = {b.size for b in hist.buckets[:-1]}
        assert len(widths) <= 1  # all but the last share the common width


class TestMaxDiff:
    def test_area_difference_example(self):
        # V = {1,3,4,9}, f = {2,8,1,5}, spreads {2,1,5,1}, areas {4,8,5,5}
        freq = [2, 0, 8, 1, 0, 0, 0, 0, 5, 0]
        fs = FrequencySet(freq)
        hist = build_maxdiff(fs, 2)
        assert [(b.inf, b.sup) for b in hist] == [(1, 2), (3, 10)]

    def test_singleton_per_value_when_h_large(self):
        freq = [0, 3, 0, 7, 1, 0]
        fs = FrequencySet(freq)
        hist = build_maxdiff(fs, 10)
        assert [(b.inf, b.sup) for b in hist] == [(2, 3), (4, 4), (5, 6)]
        assert hist.covers_value_set(fs)

    def test_ties_prefer_leftmost(self):
        # equal areas everywhere -> zero differences -> two leftmost cuts
        freq = [2, 2, 2, 2, 2]
        fs = FrequencySet(freq)
        assert maxdiff_boundaries(fs, 3) == [0, 1]

    def test_empty_value_set_rejected(self):
        with pytest.raises(InvariantError):
            build_maxdiff(FrequencySet([0, 0, 0]), 2)

    def test_storage_accounting(self):
        fs = FrequencySet([1, 0, 2, 0, 3])
        hist = build_maxdiff(fs, 2)
        assert hist.storage_bits == 2 * 64

    @settings(max_examples=200)
    @given(freq_vectors.filter(lambda f: any(f)), st.integers(1, 6))
    def test_boundaries_match_enumeration_oracle(self, freq, h):
        fs = FrequencySet(freq)
        assert maxdiff_boundaries(fs, h) == brute_maxdiff_cuts(freq, h)

    @settings(max_examples=100)
    @given(freq_vectors.filter(lambda f: any(f)), st.integers(1, 6))
    def test_histogram_is_valid(self, freq, h):
        fs = FrequencySet(freq)
        hist = build_maxdiff(fs, h)
        assert hist.covers_value_set(fs)
        assert len(hist) <= h
        for b in hist:
            assert b.c == fs.range_count(b.inf, b.sup)


class TestVOptimal:
    def test_h_equals_m_gives_zero_sse(self):
        fs = FrequencySet([4, 1, 7])
        bounds, sse = voptimal_boundaries(fs, 3)
        assert bounds == [1, 2, 3]
        assert sse == 0.0

    def test_split_before_outlier(self):
        fs = FrequencySet([1, 1, 9])
        bounds, sse = voptimal_boundaries(fs, 2)
        assert bounds == [2, 3]
        assert sse == 0.0
        # the alternative {[1,1],[2,3]} costs 32
        assert exact_sse([1, 1, 9], [1, 3]) == Fraction(32)

    def test_constant_input_prefers_leftmost_cuts(self):
        fs = FrequencySet([5] * 6)
        bounds, sse = voptimal_boundaries(fs, 3)
        assert sse == 0.0
        assert bounds == [1, 2, 6]

    def test_nulls_count_toward_sse(self):
        # [3, 0] in one bucket has SSE 4.5, not 0
        fs = FrequencySet([3, 0])
        _, sse = voptimal_boundaries(fs, 1)
        assert sse == pytest.approx(4.5)

    @settings(max_examples=150, deadline=None)
    @given(freq_vectors, st.integers(1, 4))
    def test_sse_matches_exhaustive_enumeration(self, freq, h):
        fs = FrequencySet(freq)
        bounds, _ = voptimal_boundaries(fs, h)
        assert exact_sse(freq, bounds) == brute_voptimal_sse(freq, h)

    @settings(max_examples=20, deadline=None)
    @given(st.lists(st.integers(0, 1000), min_size=20, max_size=120), st.integers(1, 10))
    def test_matches_plain_dp_on_mid_sizes(self, freq, h):
        fs = FrequencySet(freq)
        _, sse = voptimal_boundaries(fs, h)
        assert sse == pytest.approx(reference_voptimal_sse(freq, h), rel=1e-9, abs=1e-7)

    @given(st.lists(st.integers(0, 100), min_size=2, max_size=40))
    def test_sse_non_increasing_in_h(self, freq):
        fs = FrequencySet(freq)
        results = voptimal_boundaries_multi(fs, list(range(1, min(8, fs.m) + 1)))
        sses = [results[h][1] for h in sorted(results)]
        for a, b in zip(sses, sses[1:]):
            assert b <= a + 1e-9

    def test_multi_matches_single(self):
        freq = [3, 1, 4, 1, 5, 9, 2, 6, 5, 3]
        fs = FrequencySet(freq)
        multi = voptimal_boundaries_multi(fs, [2, 4, 7])
        for h in (2, 4, 7):
            assert multi[h] == voptimal_boundaries(fs, h)

    def test_storage_accounting(self):
        fs = FrequencySet([1, 5, 1, 5])
        assert build_voptimal(fs, 2).storage_bits == 2 * 64


class TestAttachPayloads:
    def test_cva_keeps_payloads_empty(self):
        fs = FrequencySet([1, 2, 3, 4])
        hist = attach_payloads(build_equisplit(fs, 2), fs, EstimatorKind.CVA)
        assert all(b.payload is None for b in hist)

    def test_tree_payload_matches_direct_encoding(self):
        freq = [2834, 0, 2760, 0, 2818, 0, 266, 0]
        fs = FrequencySet(freq)
        hist = attach_payloads(build_equisplit(fs, 1), fs, EstimatorKind.TREE4)
        assert hist.buckets[0].payload == encode_4lt(freq)
        assert hist.estimator is EstimatorKind.TREE4

    def test_split2_payload_is_exact_half_sum(self):
        fs = FrequencySet([5, 1, 2, 2, 9, 0])
        hist = attach_payloads(build_equisplit(fs, 2), fs, EstimatorKind.SPLIT2)
        assert hist.buckets[0].payload == Split2Payload(first_half=6)  # [5, 1]
        assert hist.buckets[1].payload == Split2Payload(first_half=11)  # [2, 9]

    def test_storage_bits_grow_by_one_integer_per_bucket(self):
        fs = FrequencySet([1] * 8)
        base = build_equisplit(fs, 4)
        augmented = attach_payloads(base, fs, EstimatorKind.TREE4)
        assert augmented.storage_bits == base.storage_bits + 4 * 32


class TestBuildFrontDoor:
    def test_budget_flag_exclusivity(self):
        fs = FrequencySet([1] * 8)
        with pytest.raises(ConfigError):
            build(fs, BuildMethod.EQUISPLIT, buckets=2, budget_bits=64)
        with pytest.raises(ConfigError):
            build(fs, BuildMethod.EQUISPLIT)

    def test_budget_drives_bucket_count(self):
        fs = FrequencySet(np.arange(100))
        hist = build(fs, BuildMethod.MAXDIFF, EstimatorKind.TREE4, budget_bits=1344)
        assert len(hist) <= 14
        assert hist.storage_bits == len(hist) * 96


class TestSerialization:
    @pytest.mark.parametrize("kind", list(EstimatorKind))
    def test_json_roundtrip(self, kind):
        freq = [3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5, 8, 9, 7, 9, 3]
        fs = FrequencySet(freq)
        hist = build(fs, BuildMethod.VOPTIMAL, kind, buckets=3)
        doc = histogram_to_json(hist)
        back = histogram_from_json(doc)
        assert back == hist

    def test_payload_hex_is_big_endian_word(self):
        freq = [2834, 0, 2760, 0, 2818, 0, 266, 0]
        fs = FrequencySet(freq)
        hist = build(fs, BuildMethod.EQUISPLIT, EstimatorKind.TREE3, buckets=1)
        doc = histogram_to_json(hist)
        word = PackedTreeIndex.pack((1320, 518, 935), levels=3).word
        assert doc["buckets"][0]["payload_hex"] == f"{word:08x}"

    def test_schema_keys(self):
        fs = FrequencySet([1, 2, 3, 4])
        doc = histogram_to_json(build_equisplit(fs, 2))
        assert set(doc) >= {"estimator", "buckets"}
        assert set(doc["buckets"][0]) == {"inf", "sup", "t", "c", "payload_hex"}
