"""From raw text-style features and an edge file to a test and a fit.

Builds a small citation-like dataset on disk (0/1 word indicators, labels
and links), reduces the features to two principal components, writes the
node table, and runs the score test and EM fit on it.

Run with ``python3 demos/text_features_pipeline.py``.
"""

import os
import tempfile

import numpy as np

from graphlogit import fit_em, load_dataset, pca_fit, run_test, sbm_generate, sigmoid
from graphlogit.graph import SbmConfig

rng = np.random.default_rng(5)
cfg = SbmConfig((150, 150), [[0.04, 0.002], [0.002, 0.04]])
graph = sbm_generate(cfg, rng)
n = cfg.n

# Word indicators whose usage differs by community.
topic = cfg.membership()
first_half = np.arange(300) < 150
rates = np.where((topic[:, None] == 0) == first_half[None, :], 0.09, 0.02)
words = (rng.random((n, 300)) < rates).astype(float)

pca = pca_fit(words, 2)
print("explained variance ratio of two components:", np.round(pca.explained_variance_ratio, 4))
X = (pca.scores - pca.scores.mean(0)) / pca.scores.std(0)

# Outcomes with a network effect on half the nodes.
beta = np.array([1.0, -0.5])
s = graph.adjacency @ (X @ beta)
zeta = rng.random(n) < 0.5
Y = (rng.random(n) < sigmoid(-0.2 + X @ beta + 0.4 * zeta * s)).astype(int)

with tempfile.TemporaryDirectory() as tmp:
    nodes = os.path.join(tmp, "nodes.csv")
    edges = os.path.join(tmp, "edges.txt")
    labels = [f"doc{i:04d}" for i in range(n)]
    with open(nodes, "w") as fh:
        fh.write("id,y,x1,x2\n")
        for lab, y, x in zip(labels, Y, X):
            fh.write(f"{lab},{y},{float(x[0])!r},{float(x[1])!r}\n")
    with open(edges, "w") as fh:
        for i, j in graph.edges():
            # both orientations, as public citation lists often have
            fh.write(f"{labels[i]}\t{labels[j]}\n{labels[j]}\t{labels[i]}\n")
    data = load_dataset(nodes, edges)

print(f"loaded {data.n} nodes and {data.graph.edge_count} edges")
res = run_test(data, B=500, seed=2)
print(f"T_n = {res.t_n:.2f}, p-value {res.p_value:.3f}")
fit = fit_em(data)
print("EM estimate:", fit.params.to_dict())
