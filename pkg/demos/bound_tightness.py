"""
The graph-only lower bound on lambda_min(W) against the true value.

The bound uses only the algebraic connectivity of the communication graph,
the number of sensing defenders m and the team size N. This script shows how
tight it is on random graphs and where the minimum over gamma sits.
"""
import math

import numpy as np

from simcapture.graph_core import CommGraph, build_capture_matrices, lemma1_lower_bound

rng = np.random.default_rng(0)
rows = []
for _ in range(300):
    n = int(rng.integers(2, 9))
    w = np.triu((rng.random((n, n)) < 0.5).astype(float), 1)
    w = w + w.T
    # chain the nodes so every graph is connected
    for i in range(n - 1):
        w[i, i + 1] = w[i + 1, i] = 1.0
    b = np.zeros(n)
    b[rng.choice(n, size=rng.integers(1, n + 1), replace=False)] = 1
    cm = build_capture_matrices(CommGraph(w, b))
    bound, gamma = lemma1_lower_bound(cm, return_gamma=True)
    rows.append((n, cm.m, cm.lambda_min_w, bound, gamma))

ratio = np.array([r[3] / r[2] for r in rows])
print(f"bound / lambda_min over {len(rows)} graphs: min {ratio.min():.3f}, median {np.median(ratio):.3f}, max {ratio.max():.3f}")
print(f"minimum at gamma -> infinity (bound = m/N) in {sum(math.isinf(r[4]) for r in rows)} cases")

# Full sensing on a complete graph is the tight case.
cm = build_capture_matrices(CommGraph.complete(4))
print(f"K4, all sensing: lambda_min = {cm.lambda_min_w:.12f}, bound = {lemma1_lower_bound(cm):.12f}")

for m in range(1, 7):
    sel = [r for r in rows if r[1] == m]
    if sel:
        print(f"m = {m}: mean tightness {np.mean([r[3] / r[2] for r in sel]):.3f} over {len(sel)} graphs")
