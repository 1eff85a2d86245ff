"""Intent-driven retrieval: query plans, weighted field scoring, evidence.

A query plan pairs hard metadata constraints with a weighted list of
searchable fields. Retrieval filters first, then exhaustively scores
the filtered set field by field (cosine between the query text's
vector and each record's stored field vector), combines scores by the
plan weights, and keeps the top k with a total, deterministic ordering
(score descending, record id ascending).

The retrieval index - the store plus one VectorSet per searchable
field - is immutable after build; any number of retrievals may run
against it concurrently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import CorpusStore, MetadataFilter, PaperRecord
from .errors import ValidationError
from .llmgateway import extract_json, render_prompt
from .vectorize import VectorSet, embed_corpus, embed_text, tokenize

#: Record fields that carry their own vector in the retrieval index.
SEARCHABLE_FIELDS = (
    "abstract_summary", "methods", "keywords", "datasets", "metrics",
    "architecture", "loss_function", "limitations",
)

_PLAN_LIST_KEYS = ("conference", "year", "paper_name", "authors", "keywords",
                   "datasets", "metrics", "limitations")
_PLAN_TEXT_KEYS = ("abstract_summary", "methods", "architecture", "loss_function")

#: Canonical key order of the plan JSON schema.
PLAN_SCHEMA_KEYS = (
    "conference", "year", "paper_name", "authors", "keywords",
    "keywords_explanation", "abstract_summary", "methods", "architecture",
    "loss_function", "datasets", "metrics", "vector_search_plan",
)

WEIGHT_SUM_TOLERANCE = 0.05


@dataclass
class QueryPlan:
    """Validated retrieval intent: metadata filter, field texts, weights."""

    metadata: MetadataFilter
    field_texts: dict[str, str]
    weights: dict[str, float]
    k: int = 10
    content: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list, compare=False)

    def to_json(self) -> dict:
        """Canonical plan object, schema keys in order, weights normalized."""
        out = {}
        for key in PLAN_SCHEMA_KEYS[:-1]:
            out[key] = self.content.get(key, [] if key in _PLAN_LIST_KEYS else
                                        ({} if key == "keywords_explanation" else ""))
        if self.content.get("limitations"):
            out["limitations"] = self.content["limitations"]
        out["vector_search_plan"] = [
            {"field": f, "weight": w} for f, w in self.weights.items()
        ]
        return out


def _field_query_text(key: str, content: dict) -> str:
    value = content.get(key, "")
    if isinstance(value, list):
        return " ".join(str(v) for v in value).strip()
    return str(value).strip()


def parse_query_plan(plan: str | dict, k: int = 10) -> QueryPlan:
    """Validate a plan JSON object into a :class:`QueryPlan`.

    Venue codes must come from the fixed list; planned fields with
    empty query text are dropped; the remaining weights must each lie
    in [0, 1] and sum to 1 within 0.05 (small deviations renormalize
    with a warning, larger ones are rejected).
    """
    if isinstance(plan, str):
        try:
            plan = json.loads(plan)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"plan is not valid JSON: {exc.msg}") from exc
    if not isinstance(plan, dict):
        raise ValidationError("plan must be a JSON object")

    content: dict = {}
    for key in _PLAN_LIST_KEYS:
        value = plan.get(key) or []
        if not isinstance(value, list):
            value = [value]
        content[key] = [v for v in value if v not in ("", None)]
    for key in _PLAN_TEXT_KEYS:
        content[key] = str(plan.get(key) or "")
    explanation = plan.get("keywords_explanation") or {}
    if not isinstance(explanation, dict):
        raise ValidationError("keywords_explanation must be an object")
    content["keywords_explanation"] = {str(a): str(b) for a, b in explanation.items()}

    years = set()
    for y in content["year"]:
        try:
            years.add(int(y))
        except (TypeError, ValueError):
            raise ValidationError(f"year: expected integers, got {y!r}")
    metadata = MetadataFilter(
        conferences=set(content["conference"]) or None,
        years=years or None,
        authors=[str(a) for a in content["authors"]] or None,
        paper_names=[str(p) for p in content["paper_name"]] or None,
    )

    raw_plan = plan.get("vector_search_plan")
    if not isinstance(raw_plan, list):
        raise ValidationError("vector_search_plan must be a list")
    warnings: list[str] = []
    planned: dict[str, float] = {}
    for entry in raw_plan:
        if not isinstance(entry, dict) or "field" not in entry or "weight" not in entry:
            raise ValidationError(
                "each vector_search_plan entry needs 'field' and 'weight'"
            )
        name = str(entry["field"])
        if name not in SEARCHABLE_FIELDS:
            raise ValidationError(f"field not searchable: {name}")
        if name in planned:
            raise ValidationError(f"field planned twice: {name}")
        try:
            weight = float(entry["weight"])
        except (TypeError, ValueError):
            raise ValidationError(f"field {name}: weight must be a number")
        if not 0.0 <= weight <= 1.0:
            raise ValidationError(f"field {name}: weight {weight} outside [0, 1]")
        planned[name] = weight

    # The tolerance guards against planner bugs, so it applies to the
    # weights as given; empty-text fields are dropped afterwards and
    # the survivors renormalized.
    given_total = sum(planned.values())
    if abs(given_total - 1.0) > WEIGHT_SUM_TOLERANCE:
        raise ValidationError(
            f"vector_search_plan weights sum to {given_total:.4f}, "
            f"deviating more than {WEIGHT_SUM_TOLERANCE} from 1.0"
        )
    if abs(given_total - 1.0) > 1e-9:
        warnings.append(f"weights summed to {given_total:.6f}; renormalized")

    field_texts: dict[str, str] = {}
    weights: dict[str, float] = {}
    for name, weight in planned.items():
        text = _field_query_text(name, content)
        if not text:
            warnings.append(f"field {name}: empty query text, dropped from plan")
            continue
        field_texts[name] = text
        weights[name] = weight

    if not weights:
        raise ValidationError("no searchable fields in plan")
    total = sum(weights.values())
    if total <= 0.0:
        raise ValidationError("vector_search_plan weights sum to zero")
    if abs(total - 1.0) > 1e-9:
        weights = {f: w / total for f, w in weights.items()}

    plan_k = plan.get("k", k)
    try:
        plan_k = int(plan_k)
    except (TypeError, ValueError):
        raise ValidationError("k must be a positive integer")
    if plan_k < 1:
        raise ValidationError("k must be a positive integer")

    return QueryPlan(metadata=metadata, field_texts=field_texts,
                     weights=weights, k=plan_k, content=content,
                     warnings=warnings)


@dataclass
class SubQuery:
    index: int
    plan: QueryPlan
    origin: str


def fallback_plan(question: str, k: int = 10) -> QueryPlan:
    """Keyword-derived single plan: uniform weights over summary and methods."""
    tokens = tokenize(question)
    return parse_query_plan({
        "keywords": tokens,
        "abstract_summary": question,
        "methods": question,
        "vector_search_plan": [
            {"field": "abstract_summary", "weight": 0.5},
            {"field": "methods", "weight": 0.5},
        ],
    }, k=k)


def decompose_query(gateway, question: str,
                    k: int = 10) -> tuple[list[SubQuery], list[str]]:
    """Split a question into validated sub-query plans.

    With a gateway, the intent prompt may yield one plan object or an
    array of them (one per sub-question). Any gateway or validation
    failure degrades to the deterministic single-sub-query fallback,
    with the failure recorded as a warning; this never raises on
    gateway trouble.
    """
    if not question or not question.strip():
        raise ValidationError("question must be non-empty")
    warnings: list[str] = []
    if gateway is not None:
        try:
            prompt = render_prompt("intent_plan", {"question": question})
            raw = gateway.complete(prompt, template="intent_plan")
            value = extract_json(raw)
            objs = value if isinstance(value, list) else [value]
            if not objs:
                raise ValidationError("gateway returned an empty plan list")
            subs = [
                SubQuery(index=i, plan=parse_query_plan(obj, k=k), origin=question)
                for i, obj in enumerate(objs)
            ]
            return subs, warnings
        except Exception as exc:
            warnings.append(f"query decomposition fell back: {exc}")
    return [SubQuery(index=0, plan=fallback_plan(question, k), origin=question)], warnings


def record_field_text(record: PaperRecord, name: str) -> str:
    value = getattr(record, name)
    if isinstance(value, list):
        return " ".join(value)
    return value


def build_field_index(store: CorpusStore, dim: int = 512,
                      fields: tuple[str, ...] = SEARCHABLE_FIELDS) -> dict[str, VectorSet]:
    """One embedding-space VectorSet per searchable field, store-aligned."""
    index: dict[str, VectorSet] = {}
    for name in fields:
        texts = [
            (r.record_id, record_field_text(r, name), "") for r in store.records
        ]
        index[name] = embed_corpus(texts, dim=dim)
    return index


@dataclass
class RankedEntry:
    record_id: str
    score: float
    field_sims: dict[str, float]


@dataclass
class RankedResults:
    sub: SubQuery
    entries: list[RankedEntry]


def score_document(doc_vectors: dict[str, np.ndarray],
                   query_vectors: dict[str, np.ndarray],
                   plan: QueryPlan) -> tuple[float, dict[str, float]]:
    """Weighted sum of per-field cosine similarities for one record.

    A missing or empty record field contributes similarity 0.
    """
    sims: dict[str, float] = {}
    score = 0.0
    for name, weight in plan.weights.items():
        dv = doc_vectors.get(name)
        qv = query_vectors[name]
        if dv is None or not np.any(dv):
            sims[name] = 0.0
            continue
        sim = float(np.dot(dv, qv))
        nd = float(np.linalg.norm(dv))
        nq = float(np.linalg.norm(qv))
        sim = sim / (nd * nq) if nd > 0 and nq > 0 else 0.0
        sims[name] = sim
        score += weight * sim
    return score, sims


def retrieve(store: CorpusStore, field_vectors: dict[str, VectorSet],
             sub: SubQuery, k: int | None = None) -> RankedResults:
    """Filter by metadata, score the survivors, keep the top k.

    Deterministic: candidates are scored exhaustively and ordered by
    (score descending, record_id ascending). An empty filtered set
    yields empty results, not an error.
    """
    plan = sub.plan
    k = k or plan.k
    for name in plan.weights:
        if name not in field_vectors:
            raise ValidationError(f"field index missing field: {name}")
        if field_vectors[name].ids != store.ids:
            raise ValidationError(f"field index for {name} not aligned with store")

    candidates = [i for i, r in enumerate(store.records) if plan.metadata.matches(r)]
    if not candidates:
        return RankedResults(sub=sub, entries=[])

    dim = field_vectors[next(iter(plan.weights))].dim
    query_vectors = {
        name: embed_text(plan.field_texts[name], "", dim=dim)
        for name in plan.weights
    }

    idx = np.asarray(candidates)
    scores = np.zeros(len(idx), dtype=np.float64)
    per_field: dict[str, np.ndarray] = {}
    for name, weight in plan.weights.items():
        # Row-wise multiply-and-sum rather than a BLAS matvec: threaded
        # BLAS may split the reduction differently per matrix shape,
        # which would make scores depend on the candidate-set size.
        sims = (field_vectors[name].vectors[idx] * query_vectors[name]).sum(axis=1)
        per_field[name] = sims
        scores += weight * sims

    order = sorted(range(len(idx)),
                   key=lambda p: (-scores[p], store.records[idx[p]].record_id))
    entries = [
        RankedEntry(
            record_id=store.records[idx[p]].record_id,
            score=float(scores[p]),
            field_sims={name: float(per_field[name][p]) for name in plan.weights},
        )
        for p in order[:k]
    ]
    return RankedResults(sub=sub, entries=entries)


@dataclass
class EvidenceBundle:
    """Provenance-stamped excerpts backing each sub-query's results."""

    question: str
    sections: list[dict]

    def to_json(self) -> dict:
        return {"question": self.question, "sections": self.sections}

    def serialize(self) -> str:
        return json.dumps(self.to_json(), ensure_ascii=False, indent=2)

    @classmethod
    def from_json(cls, data: str | dict) -> "EvidenceBundle":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(question=data["question"], sections=data["sections"])


def assemble_evidence(store: CorpusStore, results: list[RankedResults],
                      question: str) -> EvidenceBundle:
    """Collect the searched fields of every returned record, with provenance."""
    sections = []
    for res in results:
        excerpts = []
        for entry in res.entries:
            try:
                record = store.by_id(entry.record_id)
            except KeyError:
                raise ValidationError(
                    f"results reference unknown record_id: {entry.record_id}"
                )
            excerpts.append({
                "record_id": record.record_id,
                "paper_name": record.paper_name,
                "conference": record.conference,
                "year": record.year,
                "fields": {
                    name: record_field_text(record, name)
                    for name in res.sub.plan.weights
                },
            })
        sections.append({
            "sub_index": res.sub.index,
            "query": res.sub.origin,
            "plan_fields": list(res.sub.plan.weights),
            "results": [
                {"record_id": e.record_id, "score": e.score,
                 "field_sims": e.field_sims}
                for e in res.entries
            ],
            "excerpts": excerpts,
        })
    return EvidenceBundle(question=question, sections=sections)
