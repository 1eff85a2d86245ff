"""Density-based hierarchical clustering on document vectors.

The full pipeline is implemented here, stage by stage: core distances,
the mutual-reachability metric, an exact O(n^2) Prim minimum spanning
tree, a single-linkage dendrogram, its condensation into a tree of
clusters no smaller than ``min_cluster_size`` (smaller split sides fall
out as individual points), and excess-of-mass cluster selection over
the condensed tree's stabilities.

Everything is deterministic: distance ties during MST construction are
broken by lexicographic (smaller index, larger index) edge order, fixed
before construction, so identical inputs always produce identical
hierarchies and labels.

Scale notes: distances are computed row- and block-wise, never as a
full n x n matrix, so memory stays O(n * dim) and the exact MST path
is practical into the tens of thousands of points.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .vectorize import VectorSet

#: Label for points attached to no selected cluster.
NOISE = -1

#: Edge weights are clamped to this floor before taking lambda = 1/weight.
_MIN_WEIGHT = 1e-12

_METRICS = ("euclidean", "cosine")


@dataclass
class ClusterParams:
    min_cluster_size: int = 50
    min_samples: int = 1
    selection: str = "eom"
    metric: str = "euclidean"

    def __post_init__(self):
        if self.min_cluster_size < 2:
            raise ValidationError("min_cluster_size must be >= 2")
        if self.min_samples < 1:
            raise ValidationError("min_samples must be >= 1")
        if self.selection != "eom":
            raise ValidationError(f"unsupported selection method: {self.selection}")
        if self.metric == "cosine-distance":
            self.metric = "cosine"
        if self.metric not in _METRICS:
            raise ValidationError(f"unsupported metric: {self.metric}")


class _PairwiseRows:
    """Row-at-a-time pairwise distances for one fixed point set.

    Every stage of the pipeline reads distances through :meth:`row`, and
    only through it: computing the same pair via differently shaped BLAS
    products can differ in the last ulp, which is enough to flip
    tie-break decisions downstream. One primitive keeps the metric
    bitwise self-consistent (and symmetric, since float multiplication
    and addition commute elementwise).
    """

    def __init__(self, points: np.ndarray, metric: str):
        points = np.ascontiguousarray(points, dtype=np.float64)
        self.n = points.shape[0]
        self.metric = metric
        if metric == "cosine":
            norms = np.linalg.norm(points, axis=1)
            if np.any(norms == 0.0):
                raise ValidationError("cosine metric undefined for zero vectors")
            self._unit = points / norms[:, None]
        else:
            self._points = points
            self._sq = np.einsum("ij,ij->i", points, points)

    def row(self, i: int) -> np.ndarray:
        if self.metric == "cosine":
            d = 1.0 - self._unit @ self._unit[i]
            np.clip(d, 0.0, 2.0, out=d)
        else:
            d = self._sq + self._sq[i] - 2.0 * (self._points @ self._points[i])
            np.maximum(d, 0.0, out=d)
            np.sqrt(d, out=d)
        d[i] = 0.0
        return d


def pairwise_distances(points: np.ndarray, metric: str = "euclidean") -> np.ndarray:
    """Full n x n distance matrix (small n: tests, demos, oracles).

    Assembled row by row so entries are bitwise identical to what the
    clustering stages see.
    """
    rows = _PairwiseRows(np.asarray(points, dtype=np.float64), metric)
    return np.stack([rows.row(i) for i in range(rows.n)])


def core_distances(points: np.ndarray, min_samples: int,
                   metric: str = "euclidean") -> np.ndarray:
    """Distance from each point to its min_samples-th nearest neighbor.

    The point itself is excluded: min_samples=1 means the nearest other
    point. Computed by exact brute force, one row at a time.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < min_samples + 1:
        raise ValidationError(
            f"need at least min_samples+1={min_samples + 1} points, got {n}"
        )
    rows = _PairwiseRows(points, metric)
    cores = np.empty(n, dtype=np.float64)
    for i in range(n):
        # The self-distance 0 occupies rank 0 of the row, so the
        # min_samples-th order statistic is the desired neighbor.
        cores[i] = np.partition(rows.row(i), min_samples)[min_samples]
    return cores


class MutualReachability:
    """Symmetric mutual-reachability distance over a fixed point set.

    d_mreach(a, b) = max(core(a), core(b), d(a, b)); always >= the base
    distance and >= both core distances.
    """

    def __init__(self, points: np.ndarray, cores: np.ndarray,
                 metric: str = "euclidean"):
        self._rows = _PairwiseRows(np.asarray(points, dtype=np.float64), metric)
        self.cores = np.asarray(cores, dtype=np.float64)
        if self.cores.shape[0] != self._rows.n:
            raise ValidationError("core distances not aligned with points")
        self.n = self._rows.n

    def row(self, i: int) -> np.ndarray:
        d = self._rows.row(i)
        np.maximum(d, self.cores, out=d)
        np.maximum(d, self.cores[i], out=d)
        d[i] = 0.0
        return d

    def pair(self, a: int, b: int) -> float:
        if a == b:
            return 0.0
        return float(self.row(a)[b])


def mutual_reachability(points: np.ndarray, cores: np.ndarray,
                        metric: str = "euclidean") -> MutualReachability:
    return MutualReachability(points, cores, metric)


def _edge_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def build_mst(points: np.ndarray, mreach: MutualReachability) -> list[tuple[int, int, float]]:
    """Exact Prim MST of the mutual-reachability graph.

    Returns n-1 edges (u, v, weight) with u < v, in construction order.
    Weight ties are broken by lexicographic (u, v) edge order both when
    updating candidate edges and when choosing the next vertex.
    """
    n = mreach.n
    if n < 2:
        raise ValidationError("MST needs at least 2 points")
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best_w = mreach.row(0)
    best_w[0] = np.inf
    best_src = np.zeros(n, dtype=np.int64)

    edges: list[tuple[int, int, float]] = []
    for _ in range(n - 1):
        cand = np.where(in_tree, np.inf, best_w)
        v = int(np.argmin(cand))
        w = float(cand[v])
        ties = np.nonzero(cand == w)[0]
        if len(ties) > 1:
            v = int(min(ties, key=lambda t: _edge_key(int(best_src[t]), int(t))))
        u = int(best_src[v])
        edges.append((*_edge_key(u, v), w))
        in_tree[v] = True

        row = mreach.row(v)
        improve = (row < best_w) & ~in_tree
        eq = (row == best_w) & ~improve & ~in_tree
        if eq.any():
            for t in np.nonzero(eq)[0]:
                if _edge_key(v, int(t)) < _edge_key(int(best_src[t]), int(t)):
                    improve[t] = True
        best_src[improve] = v
        best_w[improve] = row[improve]
    return edges


def _single_linkage(edges: list[tuple[int, int, float]], n: int):
    """Merge MST edges by ascending weight into a binary dendrogram.

    Node ids: 0..n-1 are points, n+t is the t-th merge. Returns parallel
    arrays (left, right, weight, size) indexed by merge order.
    """
    order = sorted(range(len(edges)), key=lambda t: (edges[t][2], edges[t][0], edges[t][1]))
    uf = np.arange(2 * n - 1, dtype=np.int64)

    def find(x: int) -> int:
        root = x
        while uf[root] != root:
            root = uf[root]
        while uf[x] != root:
            uf[x], x = root, uf[x]
        return root

    sizes = np.ones(2 * n - 1, dtype=np.int64)
    left = np.empty(n - 1, dtype=np.int64)
    right = np.empty(n - 1, dtype=np.int64)
    weight = np.empty(n - 1, dtype=np.float64)
    for t, e in enumerate(order):
        u, v, w = edges[e]
        ru, rv = find(u), find(v)
        if ru == rv:
            raise ValidationError("edge list is not a spanning tree")
        node = n + t
        lo, hi = (ru, rv) if ru < rv else (rv, ru)
        left[t], right[t], weight[t] = lo, hi, w
        sizes[node] = sizes[lo] + sizes[hi]
        uf[lo] = node
        uf[hi] = node
    return left, right, weight, sizes


@dataclass
class ClusterNode:
    """One cluster in the condensed tree."""

    node_id: int
    parent: int | None
    birth_lambda: float
    death_lambda: float
    size: int
    stability: float
    children: tuple[int, ...] = ()


@dataclass
class CondensedTree:
    """Cluster hierarchy with per-cluster stabilities and point attachments.

    ``attachments`` holds one (point, cluster, lambda) triple per input
    point: the cluster the point last belonged to and the density level
    at which it left.
    """

    nodes: dict[int, ClusterNode]
    root_id: int
    attachments: list[tuple[int, int, float]]
    min_cluster_size: int
    n_points: int

    def validate(self) -> None:
        """Assert structural invariants; raises AssertionError on violation."""
        seen = [p for p, _, _ in self.attachments]
        assert len(seen) == self.n_points and len(set(seen)) == self.n_points, \
            "every point must appear in exactly one attachment"
        for node in self.nodes.values():
            assert node.stability >= 0.0
            if node.node_id != self.root_id:
                assert node.parent in self.nodes
                assert node.size >= self.min_cluster_size
                assert node.size < self.nodes[node.parent].size
        for node in self.nodes.values():
            attached = sum(1 for _, c, _ in self.attachments if c == node.node_id)
            child_total = sum(self.nodes[c].size for c in node.children)
            assert node.size == attached + child_total, \
                f"node {node.node_id}: size {node.size} != {attached}+{child_total}"


def condense_tree(mst_edges: list[tuple[int, int, float]],
                  min_cluster_size: int) -> CondensedTree:
    """Condense the single-linkage dendrogram of an MST.

    Walking the dendrogram top-down, a split whose two sides both reach
    ``min_cluster_size`` creates two child clusters; otherwise the points
    of each undersized side fall out of the current cluster at
    lambda = 1/weight and the oversized side (if any) continues the
    cluster. stability(C) = sum over points of (lambda_point -
    lambda_birth(C)), where points departing into a child cluster count
    at the child's birth lambda.
    """
    if min_cluster_size < 2:
        raise ValidationError("min_cluster_size must be >= 2")
    n = len(mst_edges) + 1
    if n < 2:
        raise ValidationError("need at least one edge")
    left, right, weight, sizes = _single_linkage(mst_edges, n)

    def node_size(x: int) -> int:
        return int(sizes[x])

    def points_under(x: int):
        stack = [x]
        while stack:
            y = stack.pop()
            if y < n:
                yield y
            else:
                stack.append(int(left[y - n]))
                stack.append(int(right[y - n]))

    root_dendro = n + (n - 2)
    nodes: dict[int, ClusterNode] = {
        0: ClusterNode(0, None, 0.0, 0.0, n, 0.0)
    }
    children: dict[int, list[int]] = {0: []}
    attachments: list[tuple[int, int, float]] = []
    next_cid = 1

    work = [(root_dendro, 0)]
    while work:
        dendro, cid = work.pop()
        while True:
            t = dendro - n
            lam = 1.0 / max(float(weight[t]), _MIN_WEIGHT)
            lo, hi = int(left[t]), int(right[t])
            lo_count, hi_count = node_size(lo), node_size(hi)
            if lo_count >= min_cluster_size and hi_count >= min_cluster_size:
                for side, count in ((lo, lo_count), (hi, hi_count)):
                    child = next_cid
                    next_cid += 1
                    nodes[child] = ClusterNode(child, cid, lam, lam, count, 0.0)
                    children[child] = []
                    children[cid].append(child)
                    work.append((side, child))
                nodes[cid].death_lambda = lam
                break
            if lo_count < min_cluster_size and hi_count < min_cluster_size:
                for side in (lo, hi):
                    for p in points_under(side):
                        attachments.append((p, cid, lam))
                nodes[cid].death_lambda = lam
                break
            small, big = (lo, hi) if lo_count < min_cluster_size else (hi, lo)
            for p in points_under(small):
                attachments.append((p, cid, lam))
            nodes[cid].death_lambda = lam
            dendro = big  # the surviving side continues this cluster

    for cid, node in nodes.items():
        node.children = tuple(children[cid])
    stability = {cid: 0.0 for cid in nodes}
    for _, cid, lam in attachments:
        stability[cid] += lam - nodes[cid].birth_lambda
    for node in nodes.values():
        if node.parent is not None:
            stability[node.parent] += (
                (node.birth_lambda - nodes[node.parent].birth_lambda) * node.size
            )
    for cid, node in nodes.items():
        node.stability = max(0.0, stability[cid])

    return CondensedTree(
        nodes=nodes, root_id=0, attachments=attachments,
        min_cluster_size=min_cluster_size, n_points=n,
    )


def select_clusters_eom(tree: CondensedTree) -> frozenset[int]:
    """Excess-of-mass selection over the condensed tree.

    Bottom-up, a node replaces its currently selected descendants when
    its stability strictly exceeds their total; on equality the
    descendants are kept. The root is never selectable, so the result
    is an antichain of non-root nodes.
    """
    value: dict[int, float] = {}
    chosen: dict[int, list[int]] = {}
    # Children always receive larger ids than their parent, so descending
    # id order visits children before parents.
    for cid in sorted(tree.nodes, reverse=True):
        node = tree.nodes[cid]
        child_value = sum(value[c] for c in node.children)
        child_chosen = [s for c in node.children for s in chosen[c]]
        if cid == tree.root_id:
            value[cid] = child_value
            chosen[cid] = child_chosen
            continue
        if node.stability > child_value:
            value[cid] = node.stability
            chosen[cid] = [cid]
        else:
            value[cid] = child_value
            chosen[cid] = child_chosen
    return frozenset(chosen[tree.root_id])


@dataclass
class Clustering:
    """Per-point labels plus the selected condensed-tree nodes behind them."""

    labels: np.ndarray
    selected: frozenset[int]
    params: ClusterParams
    ids: list[str] | None = None
    label_of_node: dict[int, int] = field(default_factory=dict)

    @property
    def n_clusters(self) -> int:
        return len(self.selected)

    @property
    def n_noise(self) -> int:
        return int(np.sum(self.labels == NOISE))

    def members(self, label: int) -> np.ndarray:
        return np.nonzero(self.labels == label)[0]


def run_hdbscan(points, params: ClusterParams | None = None) -> tuple[Clustering, CondensedTree]:
    """Run the full clustering pipeline on a reduced VectorSet or array.

    Zero-text rows of a VectorSet are excluded from clustering and
    labeled noise. Cluster labels are renumbered 0..k-1 by decreasing
    member count (ties by condensed node id); unattached points get -1.
    """
    params = params or ClusterParams()
    ids: list[str] | None = None
    if isinstance(points, VectorSet):
        matrix = points.vectors
        active = np.nonzero(~points.zero_rows)[0]
        ids = list(points.ids)
    else:
        matrix = np.asarray(points, dtype=np.float64)
        active = np.arange(matrix.shape[0])
    X = matrix[active]

    if X.shape[0] < max(2, params.min_samples + 1):
        raise ValidationError(
            f"too few points to cluster: {X.shape[0]} after zero-text exclusion"
        )

    cores = core_distances(X, params.min_samples, params.metric)
    mreach = mutual_reachability(X, cores, params.metric)
    edges = build_mst(X, mreach)
    tree = condense_tree(edges, params.min_cluster_size)
    selected = select_clusters_eom(tree)

    # Nearest selected ancestor-or-self for every condensed node; ids
    # ascend from root so parents resolve before children.
    owner: dict[int, int | None] = {}
    for cid in sorted(tree.nodes):
        node = tree.nodes[cid]
        if cid in selected:
            owner[cid] = cid
        elif node.parent is None:
            owner[cid] = None
        else:
            owner[cid] = owner[node.parent]

    ordered = sorted(selected, key=lambda c: (-tree.nodes[c].size, c))
    label_of_node = {c: i for i, c in enumerate(ordered)}

    labels_active = np.full(X.shape[0], NOISE, dtype=np.int64)
    for p, cid, _ in tree.attachments:
        own = owner[cid]
        if own is not None:
            labels_active[p] = label_of_node[own]

    labels = np.full(matrix.shape[0], NOISE, dtype=np.int64)
    labels[active] = labels_active
    clustering = Clustering(labels=labels, selected=selected, params=params,
                            ids=ids, label_of_node=label_of_node)
    return clustering, tree


def clustering_to_dict(clustering: Clustering, tree: CondensedTree) -> dict:
    """JSON-ready export: params, labels keyed by record id, tree nodes."""
    ids = clustering.ids or [str(i) for i in range(len(clustering.labels))]
    return {
        "params": {
            "min_cluster_size": clustering.params.min_cluster_size,
            "min_samples": clustering.params.min_samples,
            "selection": clustering.params.selection,
            "metric": clustering.params.metric,
        },
        "labels": {rid: int(lab) for rid, lab in zip(ids, clustering.labels)},
        "selected": sorted(clustering.selected),
        "label_of_node": {str(k): v for k, v in sorted(clustering.label_of_node.items())},
        "nodes": [
            {
                "id": node.node_id,
                "parent": node.parent,
                "birth_lambda": node.birth_lambda,
                "death_lambda": node.death_lambda,
                "size": node.size,
                "stability": node.stability,
                "children": list(node.children),
            }
            for _, node in sorted(tree.nodes.items())
        ],
    }


def save_clustering(clustering: Clustering, tree: CondensedTree,
                    path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(clustering_to_dict(clustering, tree), fh, indent=2)
        fh.write("\n")


def load_clustering(path: str | Path) -> Clustering:
    """Rehydrate labels and selection from clustering.json (no tree)."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    params = ClusterParams(**data["params"])
    ids = list(data["labels"].keys())
    labels = np.asarray(list(data["labels"].values()), dtype=np.int64)
    return Clustering(
        labels=labels,
        selected=frozenset(data["selected"]),
        params=params,
        ids=ids,
        label_of_node={int(k): v for k, v in data["label_of_node"].items()},
    )


def load_condensed_tree(path: str | Path) -> CondensedTree:
    """Rehydrate the condensed-tree structure from clustering.json.

    Point attachments are not persisted, so the returned tree carries
    structure and stabilities only (enough to build a topic tree).
    """
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    nodes = {
        item["id"]: ClusterNode(
            node_id=item["id"],
            parent=item["parent"],
            birth_lambda=item["birth_lambda"],
            death_lambda=item["death_lambda"],
            size=item["size"],
            stability=item["stability"],
            children=tuple(item["children"]),
        )
        for item in data["nodes"]
    }
    return CondensedTree(
        nodes=nodes, root_id=0, attachments=[],
        min_cluster_size=data["params"]["min_cluster_size"],
        n_points=len(data["labels"]),
    )
