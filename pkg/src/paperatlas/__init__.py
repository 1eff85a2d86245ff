"""Corpus profiling for scholarly paper records.

Turns structured paper records into a topic taxonomy, trend analytics,
and an intent-driven retrieval index. See the README for the pipeline
walkthrough and the demos/ directory for narrative examples.
"""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    CorpusStore,
    MetadataFilter,
    PaperRecord,
    VENUES,
    filter_metadata,
    ingest_corpus,
    parse_record,
    serialize_record,
)
from .vectorize import (  # noqa: F401
    ReductionConfig,
    VectorSet,
    cosine_similarity,
    embed_corpus,
    embed_text,
    export_vectors,
    import_vectors,
    reduce_dims,
)
from .cluster import (  # noqa: F401
    Clustering,
    ClusterParams,
    CondensedTree,
    build_mst,
    condense_tree,
    core_distances,
    mutual_reachability,
    run_hdbscan,
    select_clusters_eom,
)
from .topics import (  # noqa: F401
    TopicSignature,
    TopicTree,
    Vocabulary,
    assign_topics,
    build_topic_tree,
    build_vocabulary,
    ctfidf_weights,
    name_topics,
    top_terms,
)
from .analytics import (  # noqa: F401
    AnalyticsConfig,
    ComputeRecord,
    LifecycleMetrics,
    TopicYearSeries,
    a100_equiv_hours,
    assign_quadrant,
    benchmark_share,
    cagr,
    compute_lifecycle,
    dataset_usage,
    institution_stats,
    normalized_mean_year,
    parse_gpu_info,
    topic_year_counts,
    weighted_impact,
)
from .retrieval import (  # noqa: F401
    EvidenceBundle,
    QueryPlan,
    RankedResults,
    SubQuery,
    assemble_evidence,
    build_field_index,
    decompose_query,
    parse_query_plan,
    retrieve,
    score_document,
)
from .llmgateway import (  # noqa: F401
    GatewayConfig,
    LLMGateway,
    MockGateway,
    call_with_retry,
    gateway_from_env,
    parse_structured_response,
    render_prompt,
)
