# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops for the route-discovery simulator.

Every function here has a pure-Python twin in ``_kernels_py`` with the
same signature and bit-identical results; ``prpsim.kernels`` picks one
at import time.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

DEF UNSEEN = 0
DEF FORWARDED = 1
DEF BLOCKED = 2
DEF REPLIED = 3


def adjacency(const double[::1] x, const double[::1] y, double range_m):
    """Symmetric in-range matrix (uint8, zero diagonal) for the given positions."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, j
    cdef double dx, dy, r2 = range_m * range_m
    out = np.zeros((n, n), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] a = out
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx * dx + dy * dy <= r2:
                a[i, j] = 1
                a[j, i] = 1
    return out


def rreq_fanout(const int[::1] receivers, int target,
                unsigned char[::1] status, unsigned char[::1] received,
                fwd_mask, bint unblock):
    """Apply one RREQ broadcast to its receivers.

    Marks every receiver in ``received`` and advances ``status``. Returns
    ``(handlers, target_hit)`` where ``handlers`` lists, in receiver
    order, the nodes that must now run the forwarding step. With
    ``fwd_mask`` None every first-time receiver is a handler (blind flood).
    """
    cdef Py_ssize_t i, n = receivers.shape[0]
    cdef int v
    cdef unsigned char s
    cdef bint target_hit = False
    cdef bint flood = fwd_mask is None
    cdef const unsigned char[::1] chosen
    if not flood:
        chosen = fwd_mask
    handlers = []
    for i in range(n):
        v = receivers[i]
        received[v] = 1
        s = status[v]
        if v == target:
            if s != REPLIED:
                status[v] = REPLIED
                target_hit = True
            continue
        if flood:
            if s == UNSEEN:
                status[v] = FORWARDED
                handlers.append(v)
        elif chosen[v]:
            if s == UNSEEN or (s == BLOCKED and unblock):
                status[v] = FORWARDED
                handlers.append(v)
        elif s == UNSEEN:
            status[v] = BLOCKED
    return handlers, target_hit


def neighbor_order(const double[::1] heard_at, const double[::1] dist_m,
                   double now, double max_age, int self_id):
    """Ids of live entries in one neighbor-table row, farthest first.

    An entry is live when ``now - heard_at <= max_age``. Ties on distance
    resolve to the lower id.
    """
    cdef Py_ssize_t n = heard_at.shape[0]
    cdef Py_ssize_t i, j, m = 0
    cdef int v
    cdef double d
    out = np.empty(n, dtype=np.int32)
    cdef int[::1] ids = out
    for i in range(n):
        if i == self_id or not (now - heard_at[i] <= max_age):
            continue
        # insertion sort; rows hold a few dozen live entries
        d = dist_m[i]
        j = m
        while j > 0 and dist_m[ids[j - 1]] < d:
            ids[j] = ids[j - 1]
            j -= 1
        ids[j] = <int>i
        m += 1
    return out[:m]


def neighbor_lists(const cnp.uint8_t[:, ::1] adj):
    """CSR form (indptr, indices) of an adjacency matrix; each row ascending."""
    cdef Py_ssize_t n = adj.shape[0]
    cdef Py_ssize_t i, j, k = 0
    indptr = np.empty(n + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] ptr = indptr
    cdef Py_ssize_t total = 0
    for i in range(n):
        for j in range(n):
            total += adj[i, j]
    indices = np.empty(total, dtype=np.int32)
    cdef int[::1] idx = indices
    ptr[0] = 0
    for i in range(n):
        for j in range(n):
            if adj[i, j]:
                idx[k] = <int>j
                k += 1
        ptr[i + 1] = k
    return indptr, indices
