# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the per-node kernels in ``_pykernels``.

Contracts are identical to the fallback module; outputs must match it
element for element. Inputs are normalized (dtype, contiguity) by
``adahop.kernels`` before dispatch.
"""

import numpy as np

cimport numpy as cnp
from libc.stdlib cimport qsort


cdef int _cmp_i32(const void* a, const void* b) noexcept nogil:
    cdef cnp.int32_t x = (<const cnp.int32_t*> a)[0]
    cdef cnp.int32_t y = (<const cnp.int32_t*> b)[0]
    return (x > y) - (x < y)


def all_distance_layers(object indptr_obj, object indices_obj, int n, int max_depth):
    cdef cnp.int64_t[::1] indptr = indptr_obj
    cdef cnp.int32_t[::1] indices = indices_obj

    lay_indptr_arr = np.zeros(n * max_depth + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] lay_indptr = lay_indptr_arr
    reach_arr = np.zeros(n, dtype=np.int32)
    cdef cnp.int32_t[::1] reach = reach_arr

    cdef cnp.int64_t cap = indices.shape[0] + 16
    nodes_arr = np.empty(cap, dtype=np.int32)
    cdef cnp.int32_t[::1] nodes = nodes_arr

    dist_arr = np.full(n, -1, dtype=np.int32)
    cdef cnp.int32_t[::1] dist = dist_arr
    queue_arr = np.empty(n, dtype=np.int32)
    cdef cnp.int32_t[::1] queue = queue_arr

    cdef cnp.int64_t total = 0
    cdef int ego, depth, u, v, k
    cdef cnp.int64_t qhead, qtail, level_end, p, layer_start

    for ego in range(n):
        dist[ego] = 0
        queue[0] = ego
        qhead = 0
        qtail = 1
        depth = 0
        while qhead < qtail and depth < max_depth:
            depth += 1
            level_end = qtail
            layer_start = total
            while qhead < level_end:
                u = queue[qhead]
                qhead += 1
                for p in range(indptr[u], indptr[u + 1]):
                    v = indices[p]
                    if dist[v] < 0:
                        dist[v] = depth
                        queue[qtail] = v
                        qtail += 1
                        if total >= cap:
                            cap = cap * 2
                            nodes_arr = np.resize(nodes_arr, cap)
                            nodes = nodes_arr
                        nodes[total] = v
                        total += 1
            if total > layer_start:
                reach[ego] = depth
                qsort(&nodes[layer_start], total - layer_start,
                      sizeof(cnp.int32_t), _cmp_i32)
            lay_indptr[ego * max_depth + depth] = total
        for k in range(depth + 1, max_depth + 1):
            lay_indptr[ego * max_depth + k] = total
        for p in range(qtail):
            dist[queue[p]] = -1

    return lay_indptr_arr, np.ascontiguousarray(nodes_arr[:total]), reach_arr


def treated_counts(object lay_indptr_obj, object lay_nodes_obj, object z_obj,
                   int n, int max_depth):
    cdef cnp.int64_t[::1] lay_indptr = lay_indptr_obj
    cdef cnp.int32_t[::1] lay_nodes = lay_nodes_obj
    cdef cnp.int8_t[::1] z = z_obj

    counts_arr = np.zeros((n, max_depth), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] counts = counts_arr
    cdef int i, k, s
    cdef cnp.int64_t p

    for i in range(n):
        for k in range(max_depth):
            s = 0
            for p in range(lay_indptr[i * max_depth + k],
                           lay_indptr[i * max_depth + k + 1]):
                s += z[lay_nodes[p]]
            counts[i, k] = s
    return counts_arr


def overlap_counts(object lay_indptr_obj, object lay_nodes_obj, object depths_obj,
                   int n, int max_depth):
    cdef cnp.int64_t[::1] lay_indptr = lay_indptr_obj
    cdef cnp.int32_t[::1] lay_nodes = lay_nodes_obj
    cdef cnp.int32_t[::1] depths = depths_obj

    counts_arr = np.ones(n, dtype=np.int64)
    cdef cnp.int64_t[::1] counts = counts_arr
    cdef int ego
    cdef cnp.int64_t p, start, stop

    for ego in range(n):
        start = lay_indptr[ego * max_depth]
        stop = lay_indptr[ego * max_depth + depths[ego]]
        for p in range(start, stop):
            counts[lay_nodes[p]] += 1
    return counts_arr
