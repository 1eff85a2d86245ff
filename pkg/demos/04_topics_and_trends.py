"""
From clusters to named topics and trend tables
==============================================

Generates a synthetic corpus with planted topics, clusters it, builds
keyword signatures and the topic tree, then computes the full set of
trend statistics: lifecycle quadrants, normalized compute, benchmark
share, dataset usage, and collaboration pairs.
"""

from paperatlas import (
    AnalyticsConfig, ClusterParams, CorpusStore, ReductionConfig,
    assign_topics, benchmark_share, build_topic_tree, build_vocabulary,
    compute_lifecycle, ctfidf_weights, dataset_usage, embed_corpus,
    institution_stats, name_topics, reduce_dims, run_hdbscan,
)
from paperatlas.analytics import compute_usage
from paperatlas.synth import generate_corpus

records, truth = generate_corpus(n_records=900, n_topics=4, seed=3)
store = CorpusStore(records=records)
print(f"{len(store)} records across {truth.n_topics} planted topics")

# Embed title+summary, reduce, cluster.
vs = embed_corpus([(r.record_id, r.paper_name, r.abstract_summary)
                   for r in store.records], dim=256)
reduced = reduce_dims(vs, ReductionConfig(n_components=8))
clustering, tree = run_hdbscan(reduced, ClusterParams(min_cluster_size=40))
print(f"found {clustering.n_clusters} clusters, {clustering.n_noise} noise")

# Keyword signatures via class-based TF-IDF; naming falls back to the
# top terms when no LLM gateway is configured.
docs = [r.embedding_text() for r in store.records]
vocab = build_vocabulary(docs)
sigs = ctfidf_weights(clustering, vocab, docs)
name_topics(None, sigs)
for topic_id, sig in sorted(sigs.items()):
    print(f"  topic {topic_id}: {sig.name!r}  top terms {sig.top_terms[:5]}")

# The topic tree lifts selected clusters into leaves under collapsed
# ancestors, with an Outliers bucket for noise.
topic_tree = build_topic_tree(tree, clustering, sigs,
                              total_records=len(store))
assign_topics(store, clustering, topic_tree)
print("tree nodes:", {n.kind for n in topic_tree.nodes.values()},
      "| outliers:", topic_tree.outliers().paper_count)

# Lifecycle metrics: growth rate over the trailing two years, recency,
# and max-normalized impact, mapped into named quadrants.
config = AnalyticsConfig(alpha=0.6, reference_year=2025)
print("\nlifecycle:")
for m in compute_lifecycle(store, config):
    growth = "new" if m.cagr is None else f"{m.cagr:+.2f}"
    print(f"  {m.topic_name[:32]:32s} cagr={growth:>6s} "
          f"recent={m.n_recent:3d} W={m.impact_norm:.3f} -> {m.quadrant}")

# Compute normalization: gpu_info strings become A100-equivalent hours;
# unknown models stay unresolved rather than inventing factors.
usage = compute_usage(store, AnalyticsConfig(
    gpu_table={"A100": 1.0, "V100": 0.35, "H100": 2.4, "RTX3090": 0.4}))
total_hours = sum(h for _, _, _, h in usage.rows)
print(f"\ncompute: {usage.parsed} parsed, {usage.malformed} malformed, "
      f"{usage.unresolved} unresolved, {total_hours:,.0f} A100-equiv hours")

share = benchmark_share(store)
print("benchmark share by year:",
      {y: round(s, 3) for y, s in share.items()})

top_datasets = sorted(dataset_usage(store).items(),
                      key=lambda kv: -sum(kv[1].values()))[:3]
print("busiest datasets:", [(d, sum(y.values())) for d, y in top_datasets])

stats = institution_stats(store)
busiest_pair = max(stats.cooccurrence.items(), key=lambda kv: kv[1])
print("strongest collaboration:", busiest_pair)
