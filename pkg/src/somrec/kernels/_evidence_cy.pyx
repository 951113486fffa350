# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled evidence kernel: best node match per hypothesis within a radius."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def evidence_deltas(
    double[:, ::1] search_locs,
    double[:, ::1] rot_normals,
    double[:, ::1] rot_dirs,
    double[:, ::1] node_locs,
    double[:, ::1] node_normals,
    double[:, ::1] node_dirs,
    double[::1] node_feat_ev,
    double radius,
    bint use_dir_term,
):
    cdef Py_ssize_t n = search_locs.shape[0]
    cdef Py_ssize_t m = node_locs.shape[0]
    out_arr = np.full(n, -1.0)
    cdef double[::1] out = out_arr
    if m == 0 or n == 0:
        return out_arr

    cdef double r2 = radius * radius
    cdef Py_ssize_t i, j
    cdef double dx, dy, dz, d2, cos_pn, cos_cd, score, best
    cdef bint found
    for i in range(n):
        best = 0.0
        found = False
        for j in range(m):
            dx = search_locs[i, 0] - node_locs[j, 0]
            dy = search_locs[i, 1] - node_locs[j, 1]
            dz = search_locs[i, 2] - node_locs[j, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 > r2:
                continue
            cos_pn = (
                rot_normals[i, 0] * node_normals[j, 0]
                + rot_normals[i, 1] * node_normals[j, 1]
                + rot_normals[i, 2] * node_normals[j, 2]
            )
            if use_dir_term:
                cos_cd = (
                    rot_dirs[i, 0] * node_dirs[j, 0]
                    + rot_dirs[i, 1] * node_dirs[j, 1]
                    + rot_dirs[i, 2] * node_dirs[j, 2]
                )
                score = 0.5 * cos_pn + 0.5 * (2.0 * cos_cd * cos_cd - 1.0)
            else:
                score = cos_pn
            score += node_feat_ev[j]
            if not found or score > best:
                best = score
                found = True
        if found:
            out[i] = best
    return out_arr
