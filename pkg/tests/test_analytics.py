"""Lifecycle metrics, compute normalization, shares, tallies."""

import math

import pytest

from paperatlas.analytics import (
    AnalyticsConfig,
    ComputeRecord,
    TopicYearSeries,
    a100_equiv_hours,
    assign_quadrant,
    benchmark_share,
    cagr,
    compute_lifecycle,
    compute_usage,
    dataset_usage,
    institution_stats,
    normalized_mean_year,
    parse_gpu_info,
    topic_year_counts,
    weighted_impact,
)
from paperatlas.corpus import CorpusStore, PaperRecord
from paperatlas.errors import ValidationError


def rec(i, year=2023, topic=0, citations=0, **kwargs):
    return PaperRecord(paper_name=f"P{i}", year=year, topic_id=topic,
                       topic_name=f"T{topic}", citations=citations,
                       record_id=f"r{i}", **kwargs)


def series(counts, topic_id=0, citations=None):
    return TopicYearSeries(topic_id=topic_id, counts=dict(counts),
                           citations=dict(citations or {}))


class TestCagr:
    def test_quadrupling_gives_exactly_one(self):
        assert cagr(series({2023: 50, 2025: 200}), 2025) == 1.0

    def test_flat_gives_zero(self):
        assert cagr(series({2023: 80, 2025: 80}), 2025) == 0.0

    def test_derived_value(self):
        got = cagr(series({2023: 80, 2025: 100}), 2025)
        assert abs(got - 0.11803399) < 1e-8

    def test_zero_base_year_is_undefined(self):
        assert cagr(series({2024: 10, 2025: 10}), 2025) is None

    def test_collapse_to_zero(self):
        assert cagr(series({2023: 9, 2025: 0}), 2025) == -1.0

    def test_strictly_increasing_in_recent_count(self):
        values = [cagr(series({2023: 50, 2025: n}), 2025) for n in (10, 50, 90, 200)]
        assert values == sorted(values)
        assert len(set(values)) == len(values)


class TestMeanYear:
    def test_all_latest(self):
        assert normalized_mean_year(series({2025: 7}), (2020, 2025)) == (2025.0, 1.0)

    def test_all_earliest(self):
        assert normalized_mean_year(series({2020: 3}), (2020, 2025)) == (2020.0, 0.0)

    def test_two_year_mix(self):
        mean, norm = normalized_mean_year(series({2021: 1, 2023: 1}), (2020, 2025))
        assert mean == 2022.0
        assert abs(norm - 0.4) < 1e-12

    def test_empty_topic_rejected(self):
        with pytest.raises(ValidationError):
            normalized_mean_year(series({}), (2020, 2025))

    def test_norm_stays_in_unit_interval(self):
        for counts in ({2020: 1, 2025: 1}, {2022: 3}, {2024: 1, 2025: 9}):
            _, norm = normalized_mean_year(series(counts), (2020, 2025))
            assert 0.0 <= norm <= 1.0


class TestWeightedImpact:
    def test_single_topic_is_one(self):
        assert weighted_impact([42.0], [3.0], 0.6) == [1.0]

    def test_golden_pair(self):
        got = weighted_impact([100.0, 50.0], [10.0, 20.0], 0.6)
        assert got[0] == 1.0
        assert abs(got[1] - 0.59375) < 1e-12

    def test_scale_invariance(self):
        a = weighted_impact([100.0, 50.0], [10.0, 20.0], 0.6)
        b = weighted_impact([700.0, 350.0], [70.0, 140.0], 0.6)
        assert all(abs(x - y) < 1e-12 for x, y in zip(a, b))

    def test_all_zero_is_undefined(self):
        assert weighted_impact([0.0, 0.0], [0.0, 0.0], 0.6) == [None, None]

    def test_ranking_preserved(self):
        cites = [5.0, 90.0, 40.0, 10.0]
        counts = [50.0, 1.0, 20.0, 2.0]
        w = weighted_impact(cites, counts, 0.6)
        raw = [0.6 * c + 0.4 * t for c, t in zip(cites, counts)]
        assert sorted(range(4), key=lambda i: -w[i]) == \
            sorted(range(4), key=lambda i: -raw[i])


class TestQuadrant:
    CFG = AnalyticsConfig(recency_threshold=0.5)

    def test_emerging(self):
        assert assign_quadrant(0.5, 0.9, self.CFG) == "Emerging"

    def test_mature(self):
        assert assign_quadrant(-0.2, 0.1, self.CFG) == "Mature"

    def test_booming(self):
        assert assign_quadrant(-0.1, 0.9, self.CFG) == "Booming"

    def test_declining(self):
        assert assign_quadrant(0.3, 0.1, self.CFG) == "Declining"

    def test_boundary_counts_as_ge(self):
        assert assign_quadrant(0.0, 0.5, self.CFG) == "Emerging"

    def test_undefined_growth_is_new(self):
        assert assign_quadrant(None, 0.9, self.CFG) == "New"


class TestGpuInfo:
    def test_paper_format(self):
        got = parse_gpu_info("8*A100*24")
        assert (got.gpu_count, got.gpu_model, got.hours) == (8, "A100", 24.0)

    def test_empty_is_none(self):
        assert parse_gpu_info("") is None
        assert parse_gpu_info("   ") is None

    def test_malformed_is_none(self):
        assert parse_gpu_info("A100 x8") is None

    def test_whitespace_tolerated(self):
        got = parse_gpu_info(" 4 * V100 * 12.5 ")
        assert (got.gpu_count, got.gpu_model, got.hours) == (4, "V100", 12.5)

    def test_zero_count_rejected(self):
        assert parse_gpu_info("0*A100*5") is None


class TestA100Hours:
    def test_identity_factor(self):
        got = a100_equiv_hours(ComputeRecord(8, "A100", 24.0), {"A100": 1.0})
        assert got.a100_equiv_hours == 192.0

    def test_user_supplied_factor(self):
        got = a100_equiv_hours(ComputeRecord(4, "V100", 10.0),
                               {"A100": 1.0, "V100": 0.3})
        assert abs(got.a100_equiv_hours - 12.0) < 1e-12

    def test_unknown_model_unresolved(self):
        got = a100_equiv_hours(ComputeRecord(2, "TPUv4", 5.0), {"A100": 1.0})
        assert got.a100_equiv_hours is None

    def test_case_insensitive_model_lookup(self):
        got = a100_equiv_hours(ComputeRecord(1, "a100", 3.0), {"A100": 1.0})
        assert got.a100_equiv_hours == 3.0

    def test_non_positive_factor_rejected(self):
        with pytest.raises(ValidationError):
            a100_equiv_hours(ComputeRecord(1, "A100", 1.0), {"A100": 0.0})

    def test_linear_in_count_and_hours(self):
        table = {"A100": 1.0}
        base = a100_equiv_hours(ComputeRecord(2, "A100", 7.0), table).a100_equiv_hours
        twice_count = a100_equiv_hours(ComputeRecord(4, "A100", 7.0), table).a100_equiv_hours
        twice_hours = a100_equiv_hours(ComputeRecord(2, "A100", 14.0), table).a100_equiv_hours
        assert twice_count == 2 * base == twice_hours


class TestBenchmarkShare:
    def _store(self, bench, total, year=2022):
        records = []
        for i in range(bench):
            records.append(rec(i, year=year,
                               field_positioning="Benchmark / Dataset Contribution"))
        for i in range(bench, total):
            records.append(rec(i, year=year,
                               field_positioning="Methodological Innovation"))
        return CorpusStore(records=records)

    def test_reported_2022_share(self):
        share = benchmark_share(self._store(1007, 10000))
        assert share[2022] == 0.1007

    def test_no_benchmarks(self):
        assert benchmark_share(self._store(0, 50))[2022] == 0.0

    def test_all_benchmarks(self):
        assert benchmark_share(self._store(50, 50))[2022] == 1.0

    def test_novelty_type_also_counts(self):
        records = [rec(0, novelty_type="Benchmark / Dataset"),
                   rec(1, novelty_type="Algorithm / Model")]
        share = benchmark_share(CorpusStore(records=records))
        assert share[2023] == 0.5


class TestDatasetUsage:
    def test_simple_tally(self):
        store = CorpusStore(records=[
            rec(0, year=2022, datasets=["ImageNet"]),
            rec(1, year=2022, datasets=["ImageNet"]),
        ])
        assert dataset_usage(store) == {"imagenet": {2022: 2}}

    def test_case_normalization_merges(self):
        store = CorpusStore(records=[
            rec(0, datasets=["imagenet"]),
            rec(1, datasets=["ImageNet"]),
        ])
        assert dataset_usage(store)["imagenet"][2023] == 2

    def test_alias_map(self):
        store = CorpusStore(records=[
            rec(0, datasets=["ILSVRC"]),
            rec(1, datasets=["ImageNet"]),
        ])
        usage = dataset_usage(store, aliases={"ilsvrc": "imagenet"})
        assert usage["imagenet"][2023] == 2

    def test_generator_ground_truth(self):
        from paperatlas.synth import generate_corpus

        records, truth = generate_corpus(n_records=500, n_topics=3, seed=3)
        usage = dataset_usage(CorpusStore(records=records))
        expected = {d: dict(years) for d, years in truth.dataset_counts.items()}
        assert usage == expected


class TestInstitutions:
    def test_pair_counted_once(self):
        store = CorpusStore(records=[rec(0, institution=["A", "B"])])
        stats = institution_stats(store)
        assert stats.cooccurrence == {("A", "B"): 1}
        assert stats.counts == {"A": 1, "B": 1}

    def test_single_institution_no_pair(self):
        store = CorpusStore(records=[rec(0, institution=["A"])])
        assert institution_stats(store).cooccurrence == {}

    def test_duplicate_listing_counts_once(self):
        store = CorpusStore(records=[rec(0, institution=["A", "A", "B"])])
        stats = institution_stats(store)
        assert stats.counts["A"] == 1
        assert stats.cooccurrence == {("A", "B"): 1}

    def test_matches_brute_force_recount(self):
        from paperatlas.synth import generate_corpus

        records, _ = generate_corpus(n_records=300, n_topics=3, seed=9)
        store = CorpusStore(records=records)
        stats = institution_stats(store)

        counts = {}
        matrix = {}
        pairs = {}
        for r in records:
            insts = sorted(set(r.institution))
            for a in insts:
                counts[a] = counts.get(a, 0) + 1
                key = (r.topic_id, a)
                matrix[key] = matrix.get(key, 0) + 1
            for x in range(len(insts)):
                for y in range(x + 1, len(insts)):
                    key = (insts[x], insts[y])
                    pairs[key] = pairs.get(key, 0) + 1
        assert stats.counts == counts
        assert stats.topic_matrix == matrix
        assert stats.cooccurrence == pairs

    def test_pair_total_is_twice_row_sum_identity(self):
        store = CorpusStore(records=[
            rec(0, institution=["A", "B"]),
            rec(1, institution=["B", "C"]),
            rec(2, institution=["A", "B", "C"]),
        ])
        stats = institution_stats(store)
        row = {}
        for (a, b), c in stats.cooccurrence.items():
            row[a] = row.get(a, 0) + c
            row[b] = row.get(b, 0) + c
        assert sum(row.values()) == 2 * sum(stats.cooccurrence.values())


class TestPipelineAggregates:
    def _store(self):
        records = [
            rec(0, year=2023, topic=0, citations=10, gpu_info="8*A100*24"),
            rec(1, year=2025, topic=0, citations=4, gpu_info="bogus"),
            rec(2, year=2025, topic=0, citations=2, gpu_info="2*TPUv4*5"),
            rec(3, year=2023, topic=1, citations=50),
            rec(4, year=2025, topic=1, citations=1, gpu_info="1*A100*10"),
            rec(5, year=2024, topic=-1, citations=9),
        ]
        return CorpusStore(records=records)

    def test_topic_year_counts_exclude_noise(self):
        series_by_topic = topic_year_counts(self._store())
        assert set(series_by_topic) == {0, 1}
        assert series_by_topic[0].counts == {2023: 1, 2025: 2}
        assert series_by_topic[0].citations == {2023: 10, 2025: 6}

    def test_compute_usage_counts(self):
        usage = compute_usage(self._store())
        assert usage.parsed == 3
        assert usage.malformed == 1
        assert usage.unresolved == 1
        assert usage.rows == [(2023, 0, 1, 192.0), (2025, 1, 1, 10.0)]

    def test_lifecycle_end_to_end(self):
        metrics = compute_lifecycle(self._store(), AnalyticsConfig())
        by_topic = {m.topic_id: m for m in metrics}
        got = by_topic[0]
        assert got.cagr == math.sqrt(2) - 1
        assert got.n_recent == 2
        assert by_topic[1].impact_norm is not None
        assert {m.quadrant for m in metrics} <= \
            {"Emerging", "Booming", "Mature", "Declining", "New"}

    def test_impact_max_is_exactly_one(self):
        metrics = compute_lifecycle(self._store(), AnalyticsConfig())
        assert max(m.impact_norm for m in metrics) == 1.0
