# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: pair counting, greedy coloring, label propagation.

Mirrors ``_pykernels`` exactly; the two are checked against each other in
the test suite.
"""
from concurrent.futures import ThreadPoolExecutor

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange, threadid
from libc.stdlib cimport malloc, free
from libc.stdint cimport int32_t, int64_t, uint32_t
from libcpp.vector cimport vector
from libcpp.algorithm cimport sort

cnp.import_array()

cdef enum:
    MODE_LPA = 0
    MODE_SUM = 1
    MODE_MAX = 2
    MODE_TOPK = 3

cdef int64_t OVERLAP_MAX = 2147483647


cdef void _count_rows(
    int64_t lo, int64_t hi,
    const int64_t[::1] obj_indptr, const int64_t[::1] obj_keys,
    const int64_t[::1] key_indptr, const int64_t[::1] key_objs,
    const cnp.uint8_t[::1] key_labeled,
    uint32_t* acc, uint32_t* lab,
    vector[int64_t]& out_a, vector[int64_t]& out_b,
    vector[int64_t]& out_o, vector[int64_t]& out_l,
) noexcept nogil:
    cdef vector[int64_t] touched
    cdef int64_t a, p, q, key, b, t
    cdef uint32_t is_lab
    for a in range(lo, hi):
        touched.clear()
        for p in range(obj_indptr[a], obj_indptr[a + 1]):
            key = obj_keys[p]
            is_lab = key_labeled[key]
            for q in range(key_indptr[key], key_indptr[key + 1]):
                b = key_objs[q]
                if b <= a:
                    continue
                if acc[b] == 0:
                    touched.push_back(b)
                acc[b] += 1
                lab[b] += is_lab
        sort(touched.begin(), touched.end())
        for t in range(<int64_t>touched.size()):
            b = touched[t]
            out_a.push_back(a)
            out_b.push_back(b)
            out_o.push_back(acc[b])
            out_l.push_back(lab[b])
            acc[b] = 0
            lab[b] = 0


def _count_chunk(int64_t lo, int64_t hi, obj_indptr, obj_keys, key_indptr,
                 key_objs, key_labeled, int64_t n_objects):
    cdef const int64_t[::1] oip = obj_indptr
    cdef const int64_t[::1] ok = obj_keys
    cdef const int64_t[::1] kip = key_indptr
    cdef const int64_t[::1] ko = key_objs
    cdef const cnp.uint8_t[::1] kl = key_labeled
    cdef vector[int64_t] va, vb, vo, vl
    cdef uint32_t* acc = <uint32_t*>malloc(max(n_objects, 1) * sizeof(uint32_t))
    cdef uint32_t* lab = <uint32_t*>malloc(max(n_objects, 1) * sizeof(uint32_t))
    cdef int64_t i, m
    if acc == NULL or lab == NULL:
        free(acc)
        free(lab)
        raise MemoryError()
    try:
        for i in range(n_objects):
            acc[i] = 0
            lab[i] = 0
        with nogil:
            _count_rows(lo, hi, oip, ok, kip, ko, kl, acc, lab, va, vb, vo, vl)
    finally:
        free(acc)
        free(lab)
    m = va.size()
    a = np.empty(m, dtype=np.int64)
    b = np.empty(m, dtype=np.int64)
    o = np.empty(m, dtype=np.int64)
    l = np.empty(m, dtype=np.int64)
    cdef int64_t[::1] av = a, bv = b, ovv = o, lv = l
    for i in range(m):
        av[i] = va[i]
        bv[i] = vb[i]
        ovv[i] = vo[i]
        lv[i] = vl[i]
    return a, b, o, l


def count_pairs(key_indptr, key_objs, key_labeled, int64_t n_objects, int workers=1):
    """Co-occurrence counts for every object pair sharing an edge key.

    Row-wise accumulation: for each object ``a`` walk its edge keys and bump
    a dense counter for every later object ``b`` on the same key. Rows are
    sharded into contiguous ranges across ``workers`` threads and the chunks
    concatenated in row order, so output does not depend on ``workers``.
    """
    key_indptr = np.ascontiguousarray(key_indptr, dtype=np.int64)
    key_objs = np.ascontiguousarray(key_objs, dtype=np.int64)
    key_labeled = np.ascontiguousarray(key_labeled, dtype=np.uint8)
    n_keys = key_indptr.shape[0] - 1
    # transpose key->objects into object->keys
    key_of = np.repeat(np.arange(n_keys, dtype=np.int64), np.diff(key_indptr))
    order = np.argsort(key_objs, kind="stable")
    obj_keys = np.ascontiguousarray(key_of[order])
    obj_indptr = np.zeros(n_objects + 1, dtype=np.int64)
    np.cumsum(np.bincount(key_objs, minlength=n_objects), out=obj_indptr[1:])
    if obj_indptr.size > 1 and int(np.diff(obj_indptr).max(initial=0)) > OVERLAP_MAX:
        raise OverflowError("object in-degree exceeds 32-bit overlap accumulator")

    args = (obj_indptr, obj_keys, key_indptr, key_objs, key_labeled, n_objects)
    workers = max(1, min(workers, n_objects))
    if workers == 1:
        return _count_chunk(0, n_objects, *args)
    bounds = np.linspace(0, n_objects, workers + 1).astype(np.int64)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda r: _count_chunk(r[0], r[1], *args),
                              zip(bounds[:workers], bounds[1:])))
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(4))


def greedy_color(indptr, indices, int64_t n):
    cdef const int64_t[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const int64_t[::1] ix = np.ascontiguousarray(indices, dtype=np.int64)
    colors = np.full(n, -1, dtype=np.int64)
    stamp = np.full(n + 1, -1, dtype=np.int64)
    cdef int64_t[::1] col = colors
    cdef int64_t[::1] st = stamp
    cdef int64_t v, p, c
    with nogil:
        for v in range(n):
            for p in range(ip[v], ip[v + 1]):
                c = col[ix[p]]
                if c >= 0:
                    st[c] = v
            c = 0
            while st[c] == v:
                c += 1
            col[v] = c
    return colors


cdef inline int64_t _update(
    int64_t i, const int64_t* ip, const int64_t* ix, const double* w,
    int64_t* labels, int mode, int64_t k, bint strict,
    double* hval, int64_t* cnt, int64_t* touched,
) noexcept nogil:
    # returns (new_label << 1) | tie_flag
    cdef int64_t p, lab, c, nt = 0, t, lowest = -1, current = labels[i]
    cdef int n_best = 0
    cdef bint keep = False
    cdef double best, val
    for p in range(ip[i], ip[i + 1]):
        lab = labels[ix[p]]
        c = cnt[lab]
        if c == 0:
            touched[nt] = lab
            nt += 1
            hval[lab] = 0.0
        if mode == MODE_LPA:
            hval[lab] += 1.0
        elif mode == MODE_SUM:
            hval[lab] += w[p]
        elif mode == MODE_MAX:
            if c == 0:
                hval[lab] = w[p]
        elif c < k:
            hval[lab] += w[p]
        cnt[lab] = c + 1
    if mode == MODE_TOPK and strict:
        for t in range(nt):
            if cnt[touched[t]] < k:
                hval[touched[t]] = 0.0
    best = hval[touched[0]]
    for t in range(1, nt):
        if hval[touched[t]] > best:
            best = hval[touched[t]]
    for t in range(nt):
        lab = touched[t]
        val = hval[lab]
        if val == best:
            n_best += 1
            if lab == current:
                keep = True
            if lowest < 0 or lab < lowest:
                lowest = lab
        cnt[lab] = 0
    if keep:
        lowest = current
    return (lowest << 1) | (n_best > 1)


def propagate(indptr, indices, weights, order, class_ptr, labels, int mode,
              int64_t k, bint strict, int64_t max_iters, int workers=1):
    """Color-scheduled label propagation; see ``_pykernels.propagate``.

    Nodes inside one color class are updated by an OpenMP parallel loop
    (``workers`` threads). Same-class nodes are never adjacent, so each
    update reads only labels that are fixed for the duration of the class.
    """
    cdef const int64_t[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    # pad so that &ix[0] / &wv[0] are valid on edgeless graphs
    cdef const int64_t[::1] ix = np.append(np.asarray(indices, dtype=np.int64), 0)
    cdef const double[::1] wv = np.append(np.asarray(weights, dtype=np.float64), 0.0)
    cdef const int64_t[::1] od = np.ascontiguousarray(order, dtype=np.int64)
    cdef const int64_t[::1] cp = np.ascontiguousarray(class_ptr, dtype=np.int64)
    cdef int64_t[::1] lv = labels
    cdef int64_t n = lv.shape[0]
    cdef int nthreads = max(1, workers)
    hval_arr = np.zeros(nthreads * max(n, 1), dtype=np.float64)
    cnt_arr = np.zeros(nthreads * max(n, 1), dtype=np.int64)
    touched_arr = np.zeros(nthreads * max(n, 1), dtype=np.int64)
    cdef double[::1] hv = hval_arr
    cdef int64_t[::1] cv = cnt_arr
    cdef int64_t[::1] tv = touched_arr
    cdef int64_t n_classes = cp.shape[0] - 1
    cdef int64_t iterations = 0, changes, ties = 0, ci, j, i, res, src, mono, lo, hi
    cdef const int64_t* ipp = &ip[0]
    cdef const int64_t* ixp = &ix[0]
    cdef const double* wp = &wv[0]
    cdef int64_t* lp = &lv[0] if n > 0 else NULL
    cdef double* hp = &hv[0]
    cdef int64_t* cpp = &cv[0]
    cdef int64_t* tp = &tv[0]
    cdef bint converged = False
    history = []
    while iterations < max_iters:
        iterations += 1
        changes = 0
        for ci in range(n_classes):
            lo = cp[ci]
            hi = cp[ci + 1]
            for j in prange(lo, hi, nogil=True, num_threads=nthreads,
                            schedule="static"):
                i = od[j]
                if ipp[i] < ipp[i + 1]:
                    res = _update(i, ipp, ixp, wp, lp, mode, k, strict,
                                  hp + threadid() * n, cpp + threadid() * n,
                                  tp + threadid() * n)
                    ties += res & 1
                    if (res >> 1) != lp[i]:
                        lp[i] = res >> 1
                        changes += 1
        mono = 0
        with nogil:
            for src in range(n):
                for j in range(ip[src], ip[src + 1]):
                    if lv[src] == lv[ix[j]]:
                        mono += 1
        history.append((changes, mono // 2))
        if changes == 0:
            converged = True
            break
    return iterations, converged, ties, history
