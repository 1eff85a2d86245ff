"""Topic signatures, naming, and the hierarchical topic tree.

Keyword signatures use class-based TF-IDF: term frequency inside a
cluster's concatenated documents, discounted by the term's frequency
across all clusters. Topic naming is optionally delegated to an LLM
gateway with a deterministic fallback, so a missing or failing gateway
never aborts the pipeline.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .cluster import Clustering, CondensedTree, NOISE
from .corpus import NOISE_TOPIC_NAME, CorpusStore
from .errors import ValidationError
from .llmgateway import parse_structured_response, render_prompt
from .vectorize import ngrams, tokenize

logger = logging.getLogger(__name__)


@dataclass
class Vocabulary:
    """Unigram/bigram terms with document frequencies, post-filter.

    A term is retained when df <= max_df_percent * N and
    df >= min(min_df_floor, max(2, ceil(0.005 * N))); the floor scales
    down so desk-sized corpora keep a usable vocabulary.
    """

    df: dict[str, int]
    n_docs: int
    max_df_percent: float = 0.9
    min_df_floor: int = 50
    ngram_range: tuple[int, int] = (1, 2)
    effective_min_df: int = 2

    def __contains__(self, term: str) -> bool:
        return term in self.df

    def __len__(self) -> int:
        return len(self.df)


def effective_min_df(n_docs: int, min_df_floor: int) -> int:
    return min(min_df_floor, max(2, math.ceil(0.005 * n_docs)))


def build_vocabulary(docs: list[str], max_df_percent: float = 0.9,
                     min_df_floor: int = 50,
                     ngram_range: tuple[int, int] = (1, 2)) -> Vocabulary:
    """Count document frequencies and apply the df filters."""
    if not docs:
        raise ValidationError("cannot build a vocabulary from an empty corpus")
    counts: Counter[str] = Counter()
    for doc in docs:
        counts.update(set(ngrams(tokenize(doc), ngram_range)))
    n = len(docs)
    min_df = effective_min_df(n, min_df_floor)
    max_df = max_df_percent * n
    kept = {t: c for t, c in counts.items() if min_df <= c <= max_df}
    return Vocabulary(df=kept, n_docs=n, max_df_percent=max_df_percent,
                      min_df_floor=min_df_floor, ngram_range=ngram_range,
                      effective_min_df=min_df)


@dataclass
class TopicSignature:
    """Keyword weights for one topic, plus its (possibly LLM-given) name."""

    topic_id: int
    weights: dict[str, float] = field(default_factory=dict)
    top_terms: list[str] = field(default_factory=list)
    name: str = ""
    summary: str = ""


def class_term_stats(clustering: Clustering, vocab: Vocabulary,
                     docs: list[str]) -> tuple[dict[int, Counter], dict[int, int]]:
    """Per-class vocab term counts and raw unigram token totals.

    Term counting respects document boundaries: an n-gram never spans
    two concatenated documents.
    """
    labels = clustering.labels
    if len(labels) != len(docs):
        raise ValidationError("labels and documents are not aligned")
    class_ids = sorted({int(l) for l in labels} - {NOISE})
    term_counts: dict[int, Counter] = {c: Counter() for c in class_ids}
    token_counts: dict[int, int] = {c: 0 for c in class_ids}
    for label, doc in zip(labels, docs):
        label = int(label)
        if label == NOISE:
            continue
        tokens = tokenize(doc)
        token_counts[label] += len(tokens)
        counts = term_counts[label]
        for term in ngrams(tokens, vocab.ngram_range):
            if term in vocab:
                counts[term] += 1
    return term_counts, token_counts


def ctfidf_weights(clustering: Clustering, vocab: Vocabulary,
                   docs: list[str]) -> dict[int, TopicSignature]:
    """Class-based TF-IDF signatures for every non-noise cluster.

    weight(t, c) = tf(t, c) * ln(1 + A / tf(t)) with tf(t, c) the term
    count in class c's documents, tf(t) the count across all classes,
    and A the average unigram token count per class. Terms never seen
    inside a class weigh exactly 0 and are omitted from its signature.
    """
    term_counts, token_counts = class_term_stats(clustering, vocab, docs)
    class_ids = sorted(term_counts)

    total_tf: Counter[str] = Counter()
    for counts in term_counts.values():
        total_tf.update(counts)
    avg_tokens = (
        sum(token_counts.values()) / len(class_ids) if class_ids else 0.0
    )

    signatures: dict[int, TopicSignature] = {}
    for c in class_ids:
        weights = {
            term: count * math.log(1.0 + avg_tokens / total_tf[term])
            for term, count in term_counts[c].items()
            if total_tf[term] > 0
        }
        sig = TopicSignature(topic_id=c, weights=weights)
        sig.top_terms = top_terms(sig, 10)
        signatures[c] = sig
    return signatures


def top_terms(sig: TopicSignature, k: int) -> list[str]:
    """The k highest-weight terms, weight descending then lexicographic."""
    if k <= 0:
        return []
    ranked = sorted(
        ((w, t) for t, w in sig.weights.items() if w > 0.0),
        key=lambda wt: (-wt[0], wt[1]),
    )
    return [t for _, t in ranked[:k]]


def fallback_name(sig: TopicSignature) -> str:
    terms = top_terms(sig, 3)
    if not terms:
        return f"Topic {sig.topic_id}"
    return " ".join(terms).title()


def name_topics(gateway, sigs: dict[int, TopicSignature],
                abstracts_by_topic: dict[int, list[str]] | None = None,
                max_abstracts: int = 10) -> list[str]:
    """Name every signature, via the gateway when one is provided.

    Returns the warnings collected along the way. Gateway failures and
    malformed responses fall back to joining the top three terms, so the
    output always covers every input topic.
    """
    warnings: list[str] = []
    abstracts_by_topic = abstracts_by_topic or {}
    for topic_id in sorted(sigs):
        sig = sigs[topic_id]
        if gateway is None:
            sig.name = fallback_name(sig)
            continue
        sample = abstracts_by_topic.get(topic_id, [])[:max_abstracts]
        try:
            prompt = render_prompt("topic_name", {
                "top_terms": ", ".join(top_terms(sig, 10)),
                "abstracts": "\n---\n".join(sample) if sample else "(none)",
            })
            raw = gateway.complete(prompt, template="topic_name")
            parsed = parse_structured_response(raw, {
                "name": (str, True),
                "summary": (str, False),
            })
            sig.name = parsed["name"]
            sig.summary = parsed["summary"]
        except Exception as exc:  # any gateway trouble degrades, never aborts
            sig.name = fallback_name(sig)
            message = f"topic {topic_id}: naming fell back ({exc})"
            warnings.append(message)
            logger.warning(message)
    return warnings


@dataclass
class TopicTreeNode:
    node_id: int
    name: str
    parent: int | None
    children: list[int]
    paper_count: int
    depth: int
    kind: str  # "root" | "internal" | "topic" | "outliers"
    topic_id: int | None = None


@dataclass
class TopicTree:
    nodes: dict[int, TopicTreeNode]
    root_id: int = 0

    def leaves(self) -> list[TopicTreeNode]:
        return [n for n in self.nodes.values() if n.kind == "topic"]

    def outliers(self) -> TopicTreeNode:
        return next(n for n in self.nodes.values() if n.kind == "outliers")

    def name_of(self, topic_id: int) -> str:
        for node in self.nodes.values():
            if node.topic_id == topic_id:
                return node.name
        raise KeyError(topic_id)


def build_topic_tree(tree: CondensedTree, clustering: Clustering,
                     sigs: dict[int, TopicSignature],
                     total_records: int | None = None) -> TopicTree:
    """Lift the selected clusters into a topic tree.

    Selected clusters become leaves; their condensed-tree ancestors
    become internal nodes with single-child chains collapsed. A
    reserved "Outliers" bucket under the root holds everything that
    belongs to no topic. The root's paper_count covers topics only.
    """
    selected = set(clustering.selected)
    for cid in selected:
        anc = tree.nodes[cid].parent
        while anc is not None:
            if anc in selected:
                raise ValidationError(
                    f"selected nodes {anc} and {cid} are nested; selection must "
                    "be an antichain"
                )
            anc = tree.nodes[anc].parent

    # Restrict the condensed tree to root + selected + their ancestors.
    relevant = {tree.root_id} | selected
    for cid in selected:
        anc = tree.nodes[cid].parent
        while anc is not None:
            relevant.add(anc)
            anc = tree.nodes[anc].parent
    near_parent: dict[int, int | None] = {}
    for cid in relevant:
        anc = tree.nodes[cid].parent
        while anc is not None and anc not in relevant:
            anc = tree.nodes[anc].parent
        near_parent[cid] = anc

    child_count: Counter[int] = Counter(
        p for c, p in near_parent.items() if p is not None
    )
    kept = {
        cid for cid in relevant
        if cid == tree.root_id or cid in selected or child_count[cid] >= 2
    }
    kept_parent: dict[int, int | None] = {}
    for cid in kept:
        anc = near_parent[cid]
        while anc is not None and anc not in kept:
            anc = near_parent[anc]
        kept_parent[cid] = anc

    children_of: dict[int, list[int]] = {cid: [] for cid in kept}
    for cid in sorted(kept):
        parent = kept_parent[cid]
        if parent is not None:
            children_of[parent].append(cid)

    # Assign tree-local ids breadth-first from the root.
    tree_id: dict[int, int] = {}
    order = [tree.root_id]
    for cid in order:
        order.extend(children_of[cid])
    for i, cid in enumerate(order):
        tree_id[cid] = i

    nodes: dict[int, TopicTreeNode] = {}
    for cid in order:
        nid = tree_id[cid]
        parent_cid = kept_parent[cid]
        if cid == tree.root_id:
            kind, name, topic_id = "root", "All Topics", None
        elif cid in selected:
            topic_id = clustering.label_of_node[cid]
            sig = sigs.get(topic_id)
            kind, name = "topic", (sig.name if sig else f"Topic {topic_id}")
        else:
            kind, name, topic_id = "internal", "", None
        nodes[nid] = TopicTreeNode(
            node_id=nid, name=name,
            parent=tree_id[parent_cid] if parent_cid is not None else None,
            children=[tree_id[c] for c in children_of[cid]],
            paper_count=0, depth=0, kind=kind, topic_id=topic_id,
        )

    # Counts flow up from leaves; the root total excludes outliers.
    for cid in reversed(order):
        nid = tree_id[cid]
        node = nodes[nid]
        if node.kind == "topic":
            node.paper_count = tree.nodes[cid].size
        else:
            node.paper_count = sum(nodes[c].paper_count for c in node.children)

    total = total_records if total_records is not None else tree.n_points
    non_noise = nodes[0].paper_count
    outliers_id = len(nodes)
    nodes[outliers_id] = TopicTreeNode(
        node_id=outliers_id, name=NOISE_TOPIC_NAME, parent=0, children=[],
        paper_count=total - non_noise, depth=1, kind="outliers", topic_id=NOISE,
    )
    nodes[0].children.append(outliers_id)

    for cid in order:
        nid = tree_id[cid]
        parent = nodes[nid].parent
        nodes[nid].depth = 0 if parent is None else nodes[parent].depth + 1

    return TopicTree(nodes=nodes, root_id=0)


def assign_topics(store: CorpusStore, clustering: Clustering,
                  topic_tree: TopicTree) -> CorpusStore:
    """Stamp every record with its topic id and name (noise -> Outliers)."""
    if clustering.ids is None:
        raise ValidationError("clustering carries no record ids")
    if len(clustering.ids) != len(store.records) or set(clustering.ids) != set(store.ids):
        raise ValidationError("clustering ids do not align with the store")
    label_by_id = {rid: int(lab) for rid, lab in zip(clustering.ids, clustering.labels)}
    names = {n.topic_id: n.name for n in topic_tree.leaves()}
    for record in store.records:
        label = label_by_id[record.record_id]
        record.topic_id = label
        record.topic_name = names.get(label, NOISE_TOPIC_NAME)
    return store


def topics_to_dict(sigs: dict[int, TopicSignature],
                   topic_tree: TopicTree, k: int = 10) -> list[dict]:
    counts = {n.topic_id: n.paper_count for n in topic_tree.leaves()}
    return [
        {
            "id": topic_id,
            "name": sig.name,
            "summary": sig.summary,
            "top_terms": top_terms(sig, k),
            "paper_count": counts.get(topic_id, 0),
        }
        for topic_id, sig in sorted(sigs.items())
    ]


def topic_tree_to_dict(topic_tree: TopicTree) -> list[dict]:
    return [
        {
            "id": node.node_id,
            "name": node.name,
            "parent": node.parent,
            "children": node.children,
            "paper_count": node.paper_count,
            "depth": node.depth,
            "kind": node.kind,
            "topic_id": node.topic_id,
        }
        for _, node in sorted(topic_tree.nodes.items())
    ]


def save_topics(sigs: dict[int, TopicSignature], topic_tree: TopicTree,
                store_dir: str | Path, k: int = 10) -> None:
    store_dir = Path(store_dir)
    with open(store_dir / "topics.json", "w", encoding="utf-8") as fh:
        json.dump(topics_to_dict(sigs, topic_tree, k), fh, indent=2)
        fh.write("\n")
    with open(store_dir / "topic_tree.json", "w", encoding="utf-8") as fh:
        json.dump(topic_tree_to_dict(topic_tree), fh, indent=2)
        fh.write("\n")
