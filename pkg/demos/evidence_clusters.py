"""
Grouping evidence around a claim
================================

Evidence embeddings are clustered with average-linkage on cosine distance.
The cluster holding the claim is the supporting cluster (SuC). The cluster
with the most evidence is the representative cluster (ReC); on a tie the one
whose centroid is nearer the claim wins. Everything else is the
complementary cluster (CoC).
"""

import numpy as np

from oocstance.clustering import agglomerate, assign_clusters, cosine_distance_matrix

rng = np.random.default_rng(0)
claim = np.array([1.0, 0.0, 0.0])

# two items near the claim, two near one other direction, one far away
evidence = np.array([
    [0.95, 0.10, 0.00],
    [0.90, 0.05, 0.10],
    [0.00, 1.00, 0.10],
    [0.10, 0.95, 0.00],
    [-0.2, 0.00, 1.00],
])
evidence += 0.01 * rng.normal(size=evidence.shape)

print(np.round(cosine_distance_matrix(np.vstack([claim, evidence])), 3))
print("clusters at 0.166:", agglomerate(np.vstack([claim, evidence]), 0.166))

a = assign_clusters(claim, evidence, 0.166, 0.166)
# {0, 1} and {2, 3} both hold two items; {0, 1} sits nearer the claim
print("SuC", sorted(a.suc), "ReC", sorted(a.rec), "CoC", sorted(a.coc))

# a looser threshold folds more evidence into the claim's cluster
a = assign_clusters(claim, evidence, 1.2, 1.2)
print("loose: SuC", sorted(a.suc), "ReC", sorted(a.rec), "CoC", sorted(a.coc))
