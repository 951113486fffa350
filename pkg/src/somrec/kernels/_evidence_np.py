"""Pure-numpy evidence kernel, the fallback when the compiled one is absent.

Brute-force over (hypothesis, node) pairs, chunked over hypotheses to keep
the distance matrix small. Must agree with the compiled kernel to float
precision; tests and the benchmark compare the two directly.
"""

import numpy as np

# cap on temporary (chunk x nodes) matrices
_PAIR_BUDGET = 2_000_000


def evidence_deltas(
    search_locs,
    rot_normals,
    rot_dirs,
    node_locs,
    node_normals,
    node_dirs,
    node_feat_ev,
    radius,
    use_dir_term,
):
    """Per-hypothesis evidence delta: best node match in the search radius, else -1.

    A match is scored as pose agreement (normal plus, optionally, the
    symmetric curvature-direction term) plus the node's precomputed feature
    evidence. All rotated sensed vectors are expressed in the model frame.
    """
    search_locs = np.ascontiguousarray(search_locs, dtype=np.float64)
    n = search_locs.shape[0]
    m = node_locs.shape[0]
    out = np.full(n, -1.0)
    if m == 0 or n == 0:
        return out

    r2 = radius * radius
    chunk = max(1, _PAIR_BUDGET // m)
    for s in range(0, n, chunk):
        e = min(s + chunk, n)
        d2 = ((search_locs[s:e, None, :] - node_locs[None, :, :]) ** 2).sum(axis=2)
        within = d2 <= r2
        cos_pn = rot_normals[s:e] @ node_normals.T
        if use_dir_term:
            cos_cd = rot_dirs[s:e] @ node_dirs.T
            morph = 0.5 * cos_pn + 0.5 * (2.0 * cos_cd * cos_cd - 1.0)
        else:
            morph = cos_pn
        score = np.where(within, morph + node_feat_ev[None, :], -np.inf)
        best = score.max(axis=1)
        hit = np.isfinite(best)
        out[s:e][hit] = best[hit]
    return out
