# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled routing kernels.

Mirrors ``fallback.py`` expression-for-expression: identical term
accumulation order and libm trig, so arrival times are bit-identical to
the pure-Python backend.  The internal heap breaks equal keys by node
index, matching the (time, node) tuples the fallback pushes into heapq.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, floor, INFINITY, NAN
from libc.stdlib cimport malloc, free, realloc

cdef double C_LIGHT = 299792.458


cdef inline void _position(double[:, ::1] term_data, int[::1] term_off,
                           int node, double t, double* out) noexcept nogil:
    cdef double x = 0.0, y = 0.0, z = 0.0, ang, c, s
    cdef int r
    for r in range(term_off[node], term_off[node + 1]):
        ang = term_data[r, 9] * t + term_data[r, 10]
        c = cos(ang)
        s = sin(ang)
        x += term_data[r, 0] + term_data[r, 3] * c + term_data[r, 6] * s
        y += term_data[r, 1] + term_data[r, 4] * c + term_data[r, 7] * s
        z += term_data[r, 2] + term_data[r, 5] * c + term_data[r, 8] * s
    out[0] = x
    out[1] = y
    out[2] = z


cdef inline double _hop(double[:, ::1] term_data, int[::1] term_off,
                        cnp.uint8_t[:, ::1] grid_up, int[:, ::1] next_up,
                        double dt, int n_grid,
                        int u, int v, int pair, double a,
                        double* depart_out) noexcept nogil:
    cdef int w = <int>floor(a / dt)
    cdef int w2
    cdef double d, dx, dy, dz, dist
    cdef double pu[3]
    cdef double pv[3]
    if w >= n_grid:
        depart_out[0] = NAN
        return INFINITY
    if w < 0:
        w = 0
    if grid_up[pair, w]:
        d = a
    else:
        w2 = next_up[pair, w]
        if w2 < 0:
            depart_out[0] = NAN
            return INFINITY
        d = w2 * dt
        if d < a:
            depart_out[0] = NAN
            return INFINITY
    _position(term_data, term_off, u, d, pu)
    _position(term_data, term_off, v, d, pv)
    dx = pv[0] - pu[0]
    dy = pv[1] - pu[1]
    dz = pv[2] - pu[2]
    dist = sqrt(dx * dx + dy * dy + dz * dz)
    depart_out[0] = d
    return d + dist / C_LIGHT


def hop_time(double[:, ::1] term_data, int[::1] term_off,
             cnp.uint8_t[:, ::1] grid_up, int[:, ::1] next_up,
             double dt, int n_grid, int u, int v, int pair, double a):
    cdef double d
    cdef double arr = _hop(term_data, term_off, grid_up, next_up, dt, n_grid,
                           u, v, pair, a, &d)
    return (d, arr)


cdef struct HeapEntry:
    double key
    int node


cdef inline bint _heap_less(HeapEntry a, HeapEntry b) noexcept nogil:
    return a.key < b.key or (a.key == b.key and a.node < b.node)


def dijkstra(double[:, ::1] term_data, int[::1] term_off,
             int[::1] adj_off, int[::1] adj_node, int[::1] adj_pair,
             cnp.uint8_t[:, ::1] grid_up, int[:, ::1] next_up,
             double dt, int n_grid, double horizon,
             int src, double t_send, int dst=-1):
    """See fallback.dijkstra; returns numpy arrays (ea, pred, depart, eq_flag)."""
    cdef int n = adj_off.shape[0] - 1
    cdef cnp.ndarray[double, ndim=1] ea_arr = np.full(n, np.inf)
    cdef cnp.ndarray[int, ndim=1] pred_arr = np.full(n, -1, dtype=np.int32)
    cdef cnp.ndarray[double, ndim=1] dep_arr = np.full(n, np.nan)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] eq_arr = np.zeros(n, dtype=np.uint8)
    cdef double[::1] ea = ea_arr
    cdef int[::1] pred = pred_arr
    cdef double[::1] dep = dep_arr
    cdef cnp.uint8_t[::1] eq = eq_arr

    cdef int cap = 4 * n + 16
    cdef HeapEntry* heap = <HeapEntry*>malloc(cap * sizeof(HeapEntry))
    if heap == NULL:
        raise MemoryError()
    cdef int size = 0
    cdef HeapEntry top, tmp
    cdef int i, j, child, u, v, e
    cdef double a, d, arr

    ea[src] = t_send
    heap[0].key = t_send
    heap[0].node = src
    size = 1
    try:
        with nogil:
            while size > 0:
                top = heap[0]
                size -= 1
                heap[0] = heap[size]
                i = 0
                while True:
                    child = 2 * i + 1
                    if child >= size:
                        break
                    if child + 1 < size and _heap_less(heap[child + 1], heap[child]):
                        child += 1
                    if _heap_less(heap[child], heap[i]):
                        tmp = heap[i]
                        heap[i] = heap[child]
                        heap[child] = tmp
                        i = child
                    else:
                        break
                a = top.key
                u = top.node
                if a > ea[u]:
                    continue
                if dst >= 0 and a > ea[dst]:
                    break
                for e in range(adj_off[u], adj_off[u + 1]):
                    v = adj_node[e]
                    arr = _hop(term_data, term_off, grid_up, next_up, dt,
                               n_grid, u, v, adj_pair[e], a, &d)
                    if arr > horizon:
                        continue
                    if arr < ea[v]:
                        ea[v] = arr
                        pred[v] = u
                        dep[v] = d
                        if size == cap:
                            with gil:
                                cap *= 2
                                heap = <HeapEntry*>realloc(
                                    heap, cap * sizeof(HeapEntry))
                                if heap == NULL:
                                    raise MemoryError()
                        heap[size].key = arr
                        heap[size].node = v
                        j = size
                        size += 1
                        while j > 0 and _heap_less(heap[j], heap[(j - 1) // 2]):
                            tmp = heap[j]
                            heap[j] = heap[(j - 1) // 2]
                            heap[(j - 1) // 2] = tmp
                            j = (j - 1) // 2
                    elif arr == ea[v] and pred[v] != u:
                        eq[v] = 1
    finally:
        free(heap)
    return ea_arr, pred_arr, dep_arr, eq_arr


def bellman_hops(double[:, ::1] term_data, int[::1] term_off,
                 int[::1] adj_off, int[::1] adj_node, int[::1] adj_pair,
                 cnp.uint8_t[:, ::1] grid_up, int[:, ::1] next_up,
                 double dt, int n_grid, double horizon,
                 int src, double t_send, int max_rounds=0):
    """See fallback.bellman_hops; returns numpy arrays (dp, minhops)."""
    cdef int n = adj_off.shape[0] - 1
    if max_rounds <= 0:
        max_rounds = n
    cdef cnp.ndarray[double, ndim=1] dp_arr = np.full(n, np.inf)
    cdef cnp.ndarray[int, ndim=1] mh_arr = np.full(n, -1, dtype=np.int32)
    cdef cnp.ndarray[double, ndim=1] prev_arr = np.empty(n)
    cdef double[::1] dp = dp_arr
    cdef int[::1] mh = mh_arr
    cdef double[::1] prev = prev_arr
    cdef int rnd, u, v, e
    cdef double a, d, arr
    cdef bint changed
    dp[src] = t_send
    mh[src] = 0
    with nogil:
        for rnd in range(1, max_rounds + 1):
            prev[:] = dp
            changed = False
            for u in range(n):
                a = prev[u]
                if a == INFINITY:
                    continue
                for e in range(adj_off[u], adj_off[u + 1]):
                    v = adj_node[e]
                    arr = _hop(term_data, term_off, grid_up, next_up, dt,
                               n_grid, u, v, adj_pair[e], a, &d)
                    if arr > horizon:
                        continue
                    if arr < dp[v]:
                        dp[v] = arr
                        mh[v] = rnd
                        changed = True
            if not changed:
                break
    return dp_arr, mh_arr
