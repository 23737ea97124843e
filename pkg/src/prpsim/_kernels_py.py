"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``."""

import numpy as np

UNSEEN, FORWARDED, BLOCKED, REPLIED = 0, 1, 2, 3


def adjacency(x, y, range_m):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dx = x[:, None] - x[None, :]
    dy = y[:, None] - y[None, :]
    a = (dx * dx + dy * dy <= range_m * range_m).astype(np.uint8)
    np.fill_diagonal(a, 0)
    return a


def rreq_fanout(receivers, target, status, received, fwd_mask, unblock):
    handlers = []
    target_hit = False
    for v in receivers.tolist():
        received[v] = 1
        s = status[v]
        if v == target:
            if s != REPLIED:
                status[v] = REPLIED
                target_hit = True
            continue
        if fwd_mask is None:
            if s == UNSEEN:
                status[v] = FORWARDED
                handlers.append(v)
        elif fwd_mask[v]:
            if s == UNSEEN or (s == BLOCKED and unblock):
                status[v] = FORWARDED
                handlers.append(v)
        elif s == UNSEEN:
            status[v] = BLOCKED
    return handlers, target_hit


def neighbor_order(heard_at, dist_m, now, max_age, self_id):
    live = now - heard_at <= max_age
    live[self_id] = False
    ids = np.flatnonzero(live).astype(np.int32)
    # lexsort: last key is primary
    return ids[np.lexsort((ids, -dist_m[ids]))]


def neighbor_lists(adj):
    rows, cols = np.nonzero(adj)
    indptr = np.zeros(adj.shape[0] + 1, dtype=np.intp)
    np.cumsum(np.bincount(rows, minlength=adj.shape[0]), out=indptr[1:])
    return indptr, cols.astype(np.int32)
