"""
Intent-driven retrieval with provenance-stamped evidence
========================================================

Builds the per-field retrieval index over a synthetic corpus, runs a
hand-written query plan and a decomposed natural-language question
(through a scripted mock gateway), and assembles evidence bundles.
"""

import json

from paperatlas import (
    CorpusStore, MockGateway, assemble_evidence, build_field_index,
    decompose_query, parse_query_plan, retrieve,
)
from paperatlas.retrieval import SubQuery
from paperatlas.synth import generate_corpus

records, _ = generate_corpus(n_records=600, n_topics=4, seed=21)
store = CorpusStore(records=records)

# One vector set per searchable field, aligned to the store. This is
# the immutable retrieval index.
index = build_field_index(store, dim=256)
print("indexed fields:", sorted(index))

# A query plan combines hard metadata constraints with weighted
# semantic fields. Weights must sum to one.
plan = parse_query_plan({
    "conference": [],
    "year": [2023, 2024, 2025],
    "abstract_summary": "graph message passing on large node sets",
    "methods": "spectral aggregation over neighborhoods",
    "vector_search_plan": [
        {"field": "abstract_summary", "weight": 0.7},
        {"field": "methods", "weight": 0.3},
    ],
}, k=5)
results = retrieve(store, index, SubQuery(0, plan, "graph methods"))
print("\ntop hits (filtered to 2023-2025):")
for entry in results.entries:
    record = store.by_id(entry.record_id)
    print(f"  {entry.score:+.4f}  {record.conference} {record.year}  "
          f"{record.paper_name[:48]}")

# The evidence bundle stamps each excerpt with its provenance so a
# downstream answer generator can cite sources.
bundle = assemble_evidence(store, [results], "graph methods")
excerpt = bundle.sections[0]["excerpts"][0]
print("\nfirst excerpt:", json.dumps(
    {k: excerpt[k] for k in ("record_id", "conference", "year")}))

# Natural-language questions go through the intent planner. With no
# gateway (or a failing one) a deterministic keyword fallback applies;
# a scripted mock stands in for a live endpoint here.
subs, warnings = decompose_query(None, "diffusion guidance for image editing")
print("\nfallback plan fields:", dict(subs[0].plan.weights))

scripted = MockGateway({"intent_plan": [{"response": json.dumps([
    {"abstract_summary": "diffusion guidance",
     "vector_search_plan": [{"field": "abstract_summary", "weight": 1.0}]},
    {"methods": "latent editing with inversion",
     "vector_search_plan": [{"field": "methods", "weight": 1.0}]},
])}]})
subs, warnings = decompose_query(scripted, "guidance and editing?")
print("gateway decomposition:", [s.index for s in subs], "warnings:", warnings)

all_results = [retrieve(store, index, sub, k=3) for sub in subs]
bundle = assemble_evidence(store, all_results, "guidance and editing?")
print("bundle sections:", len(bundle.sections),
      "| serialized bytes:", len(bundle.serialize()))
