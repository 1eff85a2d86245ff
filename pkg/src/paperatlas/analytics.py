"""Trend statistics over a topic-tagged corpus.

All operations are pure folds over an immutable store: topic lifecycle
metrics (growth rate, recency, impact, quadrant), normalized GPU-hours,
benchmark share, dataset usage tallies, and institution statistics.
Outputs are plot-ready tables; no charts are rendered here.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import NOISE_TOPIC_ID, CorpusStore, PaperRecord
from .errors import ValidationError

logger = logging.getLogger(__name__)

QUADRANT_LABELS = {
    "I": "Emerging",
    "II": "Booming",
    "III": "Mature",
    "IV": "Declining",
}

#: Enumerated labels that classify a record as a benchmark contribution.
BENCHMARK_FIELD_POSITIONING = "Benchmark / Dataset Contribution"
BENCHMARK_NOVELTY_TYPE = "Benchmark / Dataset"


@dataclass
class AnalyticsConfig:
    """Knobs for the lifecycle and compute analyses.

    ``alpha`` weighs citations against paper count in the impact metric
    (beta = 1 - alpha). The growth threshold defaults to zero; the
    recency threshold defaults to the corpus median when left None.
    The GPU table ships with only the identity factor; every other
    model's throughput factor must be supplied by the user.
    """

    alpha: float = 0.6
    reference_year: int = 2025
    growth_threshold: float = 0.0
    recency_threshold: float | None = None
    gpu_table: dict[str, float] = field(default_factory=lambda: {"A100": 1.0})
    dataset_aliases: dict[str, str] = field(default_factory=dict)
    window_years: int = 2
    quadrant_labels: dict[str, str] = field(default_factory=lambda: dict(QUADRANT_LABELS))

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError("alpha must lie in [0, 1]")
        for model, factor in self.gpu_table.items():
            if factor <= 0:
                raise ValidationError(f"gpu factor for {model} must be > 0")

    @property
    def beta(self) -> float:
        return 1.0 - self.alpha

    @classmethod
    def from_json(cls, path: str | Path) -> "AnalyticsConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        return cls(**data)


@dataclass
class TopicYearSeries:
    """Per-year paper counts and citation totals for one topic."""

    topic_id: int
    counts: dict[int, int] = field(default_factory=dict)
    citations: dict[int, int] = field(default_factory=dict)

    def count(self, year: int) -> int:
        return self.counts.get(year, 0)

    def citation_total(self, years=None) -> int:
        if years is None:
            return sum(self.citations.values())
        return sum(self.citations.get(y, 0) for y in years)

    def total(self, years=None) -> int:
        if years is None:
            return sum(self.counts.values())
        return sum(self.counts.get(y, 0) for y in years)


def topic_year_counts(store: CorpusStore) -> dict[int, TopicYearSeries]:
    """Exact per-(topic, year) counts and citation sums; noise excluded."""
    series: dict[int, TopicYearSeries] = {}
    for record in store.records:
        if record.topic_id == NOISE_TOPIC_ID:
            continue
        s = series.setdefault(record.topic_id, TopicYearSeries(record.topic_id))
        s.counts[record.year] = s.counts.get(record.year, 0) + 1
        s.citations[record.year] = s.citations.get(record.year, 0) + record.citations
    return series


def cagr(series: TopicYearSeries, t: int) -> float | None:
    """Two-year compound annual growth rate (N_t / N_{t-2})^(1/2) - 1.

    Returns None when the topic had no papers in year t-2 (a "new"
    topic); division by zero never occurs.
    """
    n_now = series.count(t)
    n_then = series.count(t - 2)
    if n_then == 0:
        return None
    return math.sqrt(n_now / n_then) - 1.0


def normalized_mean_year(series: TopicYearSeries,
                         year_range: tuple[int, int]) -> tuple[float, float]:
    """Mean publication year and its min-max normalization over the corpus range."""
    total = series.total()
    if total == 0:
        raise ValidationError(f"topic {series.topic_id} has no papers")
    mean = sum(y * c for y, c in series.counts.items()) / total
    y_min, y_max = year_range
    if y_max == y_min:
        return mean, 0.5  # degenerate single-year corpus
    return mean, (mean - y_min) / (y_max - y_min)


def weighted_impact(citations: list[float], counts: list[float],
                    alpha: float) -> list[float | None]:
    """Max-normalized convex combination alpha*C_i + (1-alpha)*T_i.

    The ranking equals the raw ranking; the top topic scores exactly 1.
    When every raw value is zero the metric is undefined for all topics.
    """
    if len(citations) != len(counts):
        raise ValidationError("citations and counts differ in length")
    if not citations:
        raise ValidationError("need at least one topic")
    beta = 1.0 - alpha
    raw = [alpha * c + beta * t for c, t in zip(citations, counts)]
    peak = max(raw)
    if peak <= 0.0:
        return [None] * len(raw)
    return [r / peak for r in raw]


def assign_quadrant(cagr_value: float | None, mean_year_norm: float,
                    config: AnalyticsConfig) -> str:
    """Quadrant label from the (growth, recency) coordinates.

    Boundaries count as >= on both axes; an undefined growth rate maps
    to "New", outside the four quadrants.
    """
    if cagr_value is None:
        return "New"
    g0 = config.growth_threshold
    y0 = config.recency_threshold if config.recency_threshold is not None else 0.5
    growing = cagr_value >= g0
    recent = mean_year_norm >= y0
    if growing and recent:
        key = "I"
    elif not growing and recent:
        key = "II"
    elif not growing and not recent:
        key = "III"
    else:
        key = "IV"
    return config.quadrant_labels[key]


@dataclass
class LifecycleMetrics:
    topic_id: int
    topic_name: str
    cagr: float | None
    mean_year: float
    mean_year_norm: float
    n_recent: int
    impact_raw: float
    impact_norm: float | None
    quadrant: str


def compute_lifecycle(store: CorpusStore,
                      config: AnalyticsConfig | None = None) -> list[LifecycleMetrics]:
    """Lifecycle metrics for every topic in the store.

    The impact combination uses citations and paper counts over the
    two-year window ending at the reference year, and the recency
    threshold defaults to the median normalized mean year.
    """
    config = config or AnalyticsConfig()
    series = topic_year_counts(store)
    if not series:
        return []
    years = [r.year for r in store.records]
    year_range = (min(years), max(years))
    t = config.reference_year
    window = range(t - config.window_years + 1, t + 1)

    topic_ids = sorted(series)
    means = {}
    for tid in topic_ids:
        means[tid] = normalized_mean_year(series[tid], year_range)
    y0 = config.recency_threshold
    if y0 is None:
        norms = sorted(m[1] for m in means.values())
        mid = len(norms) // 2
        y0 = norms[mid] if len(norms) % 2 == 1 else (norms[mid - 1] + norms[mid]) / 2
    cfg = AnalyticsConfig(
        alpha=config.alpha, reference_year=config.reference_year,
        growth_threshold=config.growth_threshold, recency_threshold=y0,
        gpu_table=config.gpu_table, dataset_aliases=config.dataset_aliases,
        window_years=config.window_years, quadrant_labels=config.quadrant_labels,
    )

    window_citations = [float(series[tid].citation_total(window)) for tid in topic_ids]
    window_counts = [float(series[tid].total(window)) for tid in topic_ids]
    impacts = weighted_impact(window_citations, window_counts, cfg.alpha)

    names = {}
    for record in store.records:
        names.setdefault(record.topic_id, record.topic_name)

    out = []
    for i, tid in enumerate(topic_ids):
        growth = cagr(series[tid], t)
        mean, norm = means[tid]
        out.append(LifecycleMetrics(
            topic_id=tid,
            topic_name=names.get(tid, ""),
            cagr=growth,
            mean_year=mean,
            mean_year_norm=norm,
            n_recent=series[tid].total(window),
            impact_raw=cfg.alpha * window_citations[i] + cfg.beta * window_counts[i],
            impact_norm=impacts[i],
            quadrant=assign_quadrant(growth, norm, cfg),
        ))
    return out


@dataclass
class ComputeRecord:
    """One parsed gpu-info entry: <count>*<model>*<hours>."""

    gpu_count: int
    gpu_model: str
    hours: float
    a100_equiv_hours: float | None = None


_GPU_RE = re.compile(
    r"^\s*(\d+)\s*\*\s*([A-Za-z0-9_.\-]+)\s*\*\s*(\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)\s*$"
)


def parse_gpu_info(text: str) -> ComputeRecord | None:
    """Parse the gpu-info grammar; empty text means no compute info.

    Malformed non-empty text logs a warning and returns None; callers
    aggregating compute keep their own malformed counts.
    """
    if not text or not text.strip():
        return None
    match = _GPU_RE.match(text)
    if match is None:
        logger.warning("unparseable gpu_info: %r", text)
        return None
    count = int(match.group(1))
    hours = float(match.group(3))
    if count <= 0 or hours <= 0.0:
        logger.warning("gpu_info must have positive count and hours: %r", text)
        return None
    return ComputeRecord(gpu_count=count, gpu_model=match.group(2), hours=hours)


def a100_equiv_hours(rec: ComputeRecord,
                     table: dict[str, float]) -> ComputeRecord:
    """Fill in gpu_count * hours * factor(model); unknown models stay unresolved."""
    for model, factor in table.items():
        if factor <= 0:
            raise ValidationError(f"gpu factor for {model} must be > 0")
    normalized = {m.upper(): f for m, f in table.items()}
    factor = normalized.get(rec.gpu_model.upper())
    rec.a100_equiv_hours = None if factor is None else rec.gpu_count * rec.hours * factor
    return rec


@dataclass
class ComputeUsage:
    """Aggregated A100-equivalent hours per (year, topic)."""

    rows: list[tuple[int, int, int, float]]  # (year, topic_id, n_records, hours)
    parsed: int = 0
    malformed: int = 0
    unresolved: int = 0


def compute_usage(store: CorpusStore,
                  config: AnalyticsConfig | None = None) -> ComputeUsage:
    config = config or AnalyticsConfig()
    totals: dict[tuple[int, int], list[float]] = defaultdict(lambda: [0, 0.0])
    parsed = malformed = unresolved = 0
    for record in store.records:
        if not record.gpu_info or not record.gpu_info.strip():
            continue
        rec = parse_gpu_info(record.gpu_info)
        if rec is None:
            malformed += 1
            continue
        parsed += 1
        a100_equiv_hours(rec, config.gpu_table)
        if rec.a100_equiv_hours is None:
            unresolved += 1
            continue
        cell = totals[(record.year, record.topic_id)]
        cell[0] += 1
        cell[1] += rec.a100_equiv_hours
    rows = [
        (year, topic, int(cell[0]), cell[1])
        for (year, topic), cell in sorted(totals.items())
    ]
    if malformed or unresolved:
        logger.warning("compute: %d malformed, %d unresolved gpu models",
                       malformed, unresolved)
    return ComputeUsage(rows=rows, parsed=parsed, malformed=malformed,
                        unresolved=unresolved)


def is_benchmark(record: PaperRecord) -> bool:
    return (record.field_positioning == BENCHMARK_FIELD_POSITIONING
            or record.novelty_type == BENCHMARK_NOVELTY_TYPE)


def benchmark_share(store: CorpusStore) -> dict[int, float]:
    """Proportion of benchmark-classified records per year."""
    totals: Counter[int] = Counter()
    bench: Counter[int] = Counter()
    for record in store.records:
        totals[record.year] += 1
        if is_benchmark(record):
            bench[record.year] += 1
    return {year: bench[year] / totals[year] for year in sorted(totals)}


def dataset_usage(store: CorpusStore,
                  aliases: dict[str, str] | None = None) -> dict[str, dict[int, int]]:
    """Per-dataset, per-year usage counts.

    Dataset names are lowercased and stripped before counting; the
    alias map (normalized variant -> canonical display name) merges
    known spellings.
    """
    aliases = {k.strip().lower(): v for k, v in (aliases or {}).items()}
    usage: dict[str, dict[int, int]] = defaultdict(lambda: defaultdict(int))
    for record in store.records:
        for raw in record.datasets:
            name = raw.strip().lower()
            if not name:
                continue
            name = aliases.get(name, name)
            usage[name][record.year] += 1
    return {d: dict(years) for d, years in sorted(usage.items())}


@dataclass
class InstitutionStats:
    counts: dict[str, int]
    topic_matrix: dict[tuple[int, str], int]
    cooccurrence: dict[tuple[str, str], int]  # unordered pairs, a < b


def institution_stats(store: CorpusStore) -> InstitutionStats:
    """Institution paper counts, topic cross-tab, and collaboration pairs.

    A paper with institutions {A, B} adds one to each institution's
    count, one to each (topic, institution) cell, and one to the
    unordered pair (A, B). Duplicate listings within a record count once.
    """
    counts: Counter[str] = Counter()
    topic_matrix: Counter[tuple[int, str]] = Counter()
    pairs: Counter[tuple[str, str]] = Counter()
    for record in store.records:
        institutions = sorted({i.strip() for i in record.institution if i.strip()})
        for inst in institutions:
            counts[inst] += 1
            topic_matrix[(record.topic_id, inst)] += 1
        for i, a in enumerate(institutions):
            for b in institutions[i + 1:]:
                pairs[(a, b)] += 1
    return InstitutionStats(
        counts=dict(counts), topic_matrix=dict(topic_matrix),
        cooccurrence=dict(pairs),
    )


def _write_csv(path: Path, header: list[str], rows: list) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def export_analytics(store: CorpusStore, out_dir: str | Path,
                     config: AnalyticsConfig | None = None,
                     ) -> tuple[dict[str, Path], ComputeUsage]:
    """Write every analytics CSV into out_dir; returns paths and compute stats."""
    config = config or AnalyticsConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    lifecycle = compute_lifecycle(store, config)
    path = out_dir / "lifecycle.csv"
    _write_csv(path,
               ["topic_id", "name", "cagr", "mean_year", "mean_year_norm",
                "n_recent", "W", "quadrant"],
               [[m.topic_id, m.topic_name, _fmt(m.cagr), _fmt(m.mean_year),
                 _fmt(m.mean_year_norm), m.n_recent, _fmt(m.impact_norm),
                 m.quadrant] for m in lifecycle])
    written["lifecycle"] = path

    usage = compute_usage(store, config)
    path = out_dir / "compute.csv"
    _write_csv(path, ["year", "topic_id", "n_records", "a100_equiv_hours"],
               [[y, t, n, _fmt(h)] for y, t, n, h in usage.rows])
    written["compute"] = path

    share = benchmark_share(store)
    path = out_dir / "benchmark_share.csv"
    _write_csv(path, ["year", "share"],
               [[year, _fmt(s)] for year, s in share.items()])
    written["benchmark_share"] = path

    datasets = dataset_usage(store, config.dataset_aliases)
    path = out_dir / "dataset_usage.csv"
    _write_csv(path, ["dataset", "year", "count"],
               [[d, y, c] for d, years in datasets.items()
                for y, c in sorted(years.items())])
    written["dataset_usage"] = path

    inst = institution_stats(store)
    path = out_dir / "institutions.csv"
    _write_csv(path, ["institution", "papers"],
               [[name, inst.counts[name]] for name in sorted(inst.counts)])
    written["institutions"] = path

    path = out_dir / "collab_pairs.csv"
    _write_csv(path, ["institution_a", "institution_b", "papers"],
               [[a, b, inst.cooccurrence[(a, b)]]
                for a, b in sorted(inst.cooccurrence)])
    written["collab_pairs"] = path
    return written, usage
