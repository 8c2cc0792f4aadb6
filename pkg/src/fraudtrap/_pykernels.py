"""Pure-Python/numpy implementations of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable, or when
``FRAUDTRAP_PURE=1`` is set. Every function here has the same signature and
returns bit-identical results to its counterpart in ``_kernels.pyx``.
"""
import numpy as np

MODE_LPA, MODE_SUM, MODE_MAX, MODE_TOPK = 0, 1, 2, 3


def count_pairs(key_indptr, key_objs, key_labeled, n_objects, workers=1):
    """Co-occurrence counts for every object pair sharing an edge key.

    Each edge key with ``d`` objects contributes one increment to each of its
    ``d(d-1)/2`` object pairs. Object lists per key must be sorted ascending
    and duplicate-free.

    Returns ``(a, b, overlap, labeled_overlap)`` sorted by ``(a, b)`` with
    ``a < b``.
    """
    key_indptr = np.asarray(key_indptr, dtype=np.int64)
    key_objs = np.asarray(key_objs, dtype=np.int64)
    lengths = np.diff(key_indptr)
    n_keys = lengths.size
    empty = np.zeros(0, dtype=np.int64)
    if key_objs.size == 0:
        return empty, empty.copy(), empty.copy(), empty.copy()

    key_of = np.repeat(np.arange(n_keys, dtype=np.int64), lengths)
    pos = np.arange(key_objs.size, dtype=np.int64) - key_indptr[key_of]
    n_after = lengths[key_of] - 1 - pos
    total = int(n_after.sum())
    if total == 0:
        return empty, empty.copy(), empty.copy(), empty.copy()

    first = np.repeat(np.arange(key_objs.size, dtype=np.int64), n_after)
    run_start = np.repeat(np.cumsum(n_after) - n_after, n_after)
    second = first + 1 + (np.arange(total, dtype=np.int64) - run_start)

    code = key_objs[first] * n_objects + key_objs[second]
    labeled = np.asarray(key_labeled, dtype=np.int64)[key_of[first]]
    uniq, inverse, counts = np.unique(code, return_inverse=True, return_counts=True)
    lab_counts = np.bincount(inverse, weights=labeled, minlength=uniq.size)
    return (
        uniq // n_objects,
        uniq % n_objects,
        counts.astype(np.int64),
        np.rint(lab_counts).astype(np.int64),
    )


def greedy_color(indptr, indices, n):
    colors = np.full(n, -1, dtype=np.int64)
    for v in range(n):
        used = {colors[u] for u in indices[indptr[v]:indptr[v + 1]] if colors[u] >= 0}
        c = 0
        while c in used:
            c += 1
        colors[v] = c
    return colors


def _update(i, indptr, indices, weights, labels, mode, k, strict):
    h = {}
    cnt = {}
    for idx in range(indptr[i], indptr[i + 1]):
        lab = int(labels[indices[idx]])
        w = float(weights[idx])
        c = cnt.get(lab, 0)
        if mode == MODE_LPA:
            h[lab] = h.get(lab, 0.0) + 1.0
        elif mode == MODE_SUM:
            h[lab] = h.get(lab, 0.0) + w
        elif mode == MODE_MAX:
            if c == 0:
                h[lab] = w
        elif c < k:
            h[lab] = h.get(lab, 0.0) + w
        cnt[lab] = c + 1
    if mode == MODE_TOPK and strict:
        for lab, c in cnt.items():
            if c < k:
                h[lab] = 0.0
    best = max(h.values())
    current = int(labels[i])
    n_best = 0
    lowest = -1
    keep = False
    for lab, val in h.items():
        if val == best:
            n_best += 1
            if lab == current:
                keep = True
            if lowest < 0 or lab < lowest:
                lowest = lab
    return (current if keep else lowest), n_best > 1


def _monochromatic(indptr, indices, labels):
    src = np.repeat(np.arange(indptr.size - 1), np.diff(indptr))
    return int(np.count_nonzero(labels[src] == labels[indices]) // 2)


def propagate(indptr, indices, weights, order, class_ptr, labels, mode, k,
              strict, max_iters, workers=1):
    """Color-scheduled label propagation.

    ``order`` lists nodes grouped by color class, ``class_ptr`` delimits the
    classes. Neighbour lists must be pre-sorted by descending weight (ties by
    ascending id). ``labels`` is updated in place.

    Returns ``(iterations, converged, ties, history)`` where ``history`` holds
    ``(changes, monochromatic_edges)`` per iteration.
    """
    indptr = np.asarray(indptr, dtype=np.int64)
    history = []
    ties = 0
    converged = False
    iterations = 0
    n_classes = len(class_ptr) - 1
    while iterations < max_iters:
        iterations += 1
        changes = 0
        for ci in range(n_classes):
            for j in range(class_ptr[ci], class_ptr[ci + 1]):
                i = int(order[j])
                if indptr[i] == indptr[i + 1]:
                    continue
                new, tied = _update(i, indptr, indices, weights, labels, mode, k, strict)
                ties += tied
                if new != labels[i]:
                    labels[i] = new
                    changes += 1
        history.append((changes, _monochromatic(indptr, indices, labels)))
        if changes == 0:
            converged = True
            break
    return iterations, converged, ties, history
