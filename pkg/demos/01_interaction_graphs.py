"""Build the four interaction graphs for a hand-made street scene.

Shows how distance, visibility, planning, and category edges differ for the
same agents, and that column normalization makes every column sum to one.
"""

import numpy as np

from epg_mgcn.graphs import build_adjacency, normalize_adjacency
from epg_mgcn.scene import Sample, ego_center

# Four agents, two observed frames each (enough for headings):
#   0 ego vehicle   driving +x at 1.5 m/frame
#   1 car           3.5 m ahead, slightly slower
#   2 pedestrian    crossing from the right, heading +y
#   3 bicyclist     behind the ego, heading +x
observed = np.array([
    [[-1.5, 0.0], [0.0, 0.0]],
    [[2.3, 0.5], [3.5, 0.5]],
    [[6.0, -4.0], [6.0, -3.0]],
    [[-7.0, -1.0], [-6.0, -1.0]],
])
future = observed[:, -1:] + np.arange(1, 5)[None, :, None] * (
    observed[:, -1:] - observed[:, -2:-1])
sample = ego_center(Sample(
    categories=["vehicle", "vehicle", "pedestrian", "bicyclist"],
    observed=observed,
    future=future,
    ego_plan=future[0].copy(),
    obs_mask=np.ones((4, 2), dtype=bool),
    fut_mask=np.ones((4, 4), dtype=bool),
    frame_rate=2.0,
    agent_ids=[0, 1, 2, 3],
))

adjacency = build_adjacency(sample, d_d=10.0, beta_degrees=20.0)

np.set_printoptions(precision=3, suppress=True)
print("distance graph (reciprocal meters, symmetric):")
print(adjacency.distance)
print("\nvisibility graph (directed; row = watcher):")
print(adjacency.visibility)
print("\nplanning graph (edges into the ego, column 0):")
print(adjacency.planning)
print("\ncategory graph (same-type pairs):")
print(adjacency.category)

norm = normalize_adjacency(adjacency.distance)
print("\nnormalized distance graph column sums:", norm.sum(axis=0))

# The bicyclist (3) trails the ego: it sees the ego, the ego does not see it.
print("\nbicyclist->ego visibility:", adjacency.visibility[3, 0])
print("ego->bicyclist visibility:", adjacency.visibility[0, 3])
