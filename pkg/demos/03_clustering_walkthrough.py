"""
Density clustering, stage by stage
==================================

Runs each clustering stage by hand on three planted point clouds:
core distances, mutual reachability, the exact minimum spanning tree,
the condensed cluster tree with stabilities, and excess-of-mass
selection. Ends with the one-call pipeline.
"""

import numpy as np

from paperatlas import (
    ClusterParams, build_mst, condense_tree, core_distances,
    mutual_reachability, run_hdbscan, select_clusters_eom,
)

rng = np.random.default_rng(7)
points = np.vstack([
    rng.normal((0, 0), 0.6, (40, 2)),
    rng.normal((8, 0), 0.6, (40, 2)),
    rng.normal((4, 7), 0.6, (40, 2)),
    rng.uniform(-3, 11, (12, 2)),      # background clutter
])
print(f"{len(points)} points, three planted blobs plus clutter\n")

# Stage 1: core distance = distance to the min_samples-th nearest
# neighbor. Dense regions get small cores, clutter gets large ones.
cores = core_distances(points, min_samples=3)
print("core distance range: %.3f .. %.3f" % (cores.min(), cores.max()))

# Stage 2: mutual reachability replaces the raw metric; no pair can be
# closer than either point's core distance.
mreach = mutual_reachability(points, cores, metric="euclidean")
print("d(0,1)=%.3f  vs  d_mreach(0,1)=%.3f" % (
    float(np.linalg.norm(points[0] - points[1])), mreach.pair(0, 1)))

# Stage 3: exact Prim MST over the mutual-reachability graph.
edges = build_mst(points, mreach)
weights = sorted(w for _, _, w in edges)
print("MST edges: %d | median weight %.3f | max %.3f" % (
    len(edges), weights[len(weights) // 2], weights[-1]))

# Stage 4: condense the single-linkage hierarchy. Splits smaller than
# min_cluster_size fall out as points; everything else becomes a node
# with a stability score.
tree = condense_tree(edges, min_cluster_size=15)
print("\ncondensed tree:")
for node in tree.nodes.values():
    print(f"  node {node.node_id}: parent={node.parent} size={node.size} "
          f"stability={node.stability:.2f}")

# Stage 5: excess-of-mass selection keeps the most stable antichain.
selected = select_clusters_eom(tree)
print("selected nodes:", sorted(selected))

# The one-call pipeline wires the stages together and labels points.
clustering, _ = run_hdbscan(points, ClusterParams(min_cluster_size=15,
                                                  min_samples=3))
sizes = {label: int((clustering.labels == label).sum())
         for label in range(clustering.n_clusters)}
print("\ncluster sizes:", sizes, "| noise points:", clustering.n_noise)
