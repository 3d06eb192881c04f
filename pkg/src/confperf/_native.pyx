# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_purepy``; same contracts, same tie-breaking."""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free, qsort
from libc.math cimport INFINITY

cnp.import_array()

cdef double TAU = 1e-12


cdef struct Pair:
    double x
    double y
    Py_ssize_t pos


cdef int _cmp_pair(const void* a, const void* b) noexcept nogil:
    cdef const Pair* pa = <const Pair*> a
    cdef const Pair* pb = <const Pair*> b
    if pa.x < pb.x:
        return -1
    if pa.x > pb.x:
        return 1
    if pa.pos < pb.pos:
        return -1
    if pa.pos > pb.pos:
        return 1
    return 0


def best_split(double[:, ::1] X, double[::1] y, cnp.int64_t[::1] rows, features, Py_ssize_t min_leaf):
    cdef Py_ssize_t n = rows.shape[0]
    cdef Py_ssize_t i, k, f, best_f = -1
    cdef double total = 0.0, base, cl, cr, score, best_score = -INFINITY, best_t = 0.0
    cdef double feat_best
    cdef Py_ssize_t feat_pos
    cdef Pair* buf
    cdef cnp.int64_t[::1] feats = np.ascontiguousarray(features, dtype=np.int64)
    if n < 2 * min_leaf:
        return -1, 0.0, 0.0
    for i in range(n):
        total += y[rows[i]]
    base = total * total / n
    buf = <Pair*> malloc(n * sizeof(Pair))
    if buf == NULL:
        raise MemoryError()
    try:
        for k in range(feats.shape[0]):
            f = feats[k]
            for i in range(n):
                buf[i].x = X[rows[i], f]
                buf[i].y = y[rows[i]]
                buf[i].pos = i
            qsort(buf, n, sizeof(Pair), _cmp_pair)
            # local best for this feature: first maximal position
            cl = 0.0
            for i in range(min_leaf - 1):
                cl += buf[i].y
            feat_best = -INFINITY
            feat_pos = -1
            for i in range(min_leaf, n - min_leaf + 1):
                cl += buf[i - 1].y
                if not (buf[i - 1].x < buf[i].x):
                    continue
                cr = total - cl
                score = (cl * cl) / i + (cr * cr) / (n - i)
                if score > feat_best:
                    feat_best = score
                    feat_pos = i
            if feat_pos >= 0 and feat_best > best_score:
                best_score = feat_best
                best_f = f
                best_t = 0.5 * (buf[feat_pos - 1].x + buf[feat_pos].x)
    finally:
        free(buf)
    if best_f < 0:
        return -1, 0.0, 0.0
    return int(best_f), best_t, best_score - base


cdef inline bint _is_up(double a, double s, double C) nogil:
    return (s > 0 and a < C) or (s < 0 and a > 0)


cdef inline bint _is_low(double a, double s, double C) nogil:
    return (s > 0 and a > 0) or (s < 0 and a < C)


def smo_solve(K_in, y_in, double C, double epsilon, double tol, bint shrinking, long max_iter):
    cdef double[:, ::1] K = np.ascontiguousarray(K_in, dtype=np.float64)
    cdef double[::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef Py_ssize_t l = y.shape[0]
    cdef Py_ssize_t l2 = 2 * l
    cdef Py_ssize_t t, i, j, si, sj, counter
    cdef long it = 0
    cdef bint converged = False, any_inactive, found
    cdef double gmax, gmax2, gd, q, obj, best_obj, ai, aj, ai_old, aj_old, ci, cj
    cdef double quad, delta, diff, tot, mg, yg, gmax1s, gmax2s, qi, d
    cdef const double* Ki
    cdef const double* Kj

    sign_np = np.concatenate([np.ones(l), -np.ones(l)])
    alpha_np = np.zeros(l2)
    G_np = np.concatenate([epsilon - np.asarray(y_in, dtype=np.float64), epsilon + np.asarray(y_in, dtype=np.float64)])
    active_np = np.ones(l2, dtype=np.uint8)
    cdef double[::1] sign = sign_np
    cdef double[::1] alpha = alpha_np
    cdef double[::1] G = G_np
    cdef unsigned char[::1] active = active_np
    cdef double[::1] QD = np.empty(l2)
    for t in range(l2):
        QD[t] = K[t % l, t % l]

    counter = min(l2, 1000) + 1
    while it < max_iter:
        counter -= 1
        if shrinking and counter == 0:
            counter = min(l2, 1000)
            gmax1s = -INFINITY
            gmax2s = -INFINITY
            for t in range(l2):
                if not active[t]:
                    continue
                if _is_up(alpha[t], sign[t], C) and -sign[t] * G[t] > gmax1s:
                    gmax1s = -sign[t] * G[t]
                if _is_low(alpha[t], sign[t], C) and sign[t] * G[t] > gmax2s:
                    gmax2s = sign[t] * G[t]
            for t in range(l2):
                if not active[t]:
                    continue
                if alpha[t] >= C:
                    if sign[t] > 0:
                        if -G[t] > gmax1s:
                            active[t] = 0
                    elif -G[t] > gmax2s:
                        active[t] = 0
                elif alpha[t] <= 0:
                    if sign[t] > 0:
                        if G[t] > gmax2s:
                            active[t] = 0
                    elif G[t] > gmax1s:
                        active[t] = 0

        # the halves t < l (sign +1) and t >= l (sign -1) are scanned in index
        # order, so ties resolve exactly as in the numpy version
        gmax = -INFINITY
        gmax2 = -INFINITY
        i = -1
        any_inactive = False
        for t in range(l):
            if not active[t]:
                any_inactive = True
                continue
            if alpha[t] < C:
                mg = -G[t]
                if i < 0 or mg > gmax:
                    gmax = mg
                    i = t
            if alpha[t] > 0:
                if G[t] > gmax2:
                    gmax2 = G[t]
        for t in range(l, l2):
            if not active[t]:
                any_inactive = True
                continue
            if alpha[t] > 0:
                if i < 0 or G[t] > gmax:
                    gmax = G[t]
                    i = t
            if alpha[t] < C:
                yg = -G[t]
                if yg > gmax2:
                    gmax2 = yg
        if i < 0 or gmax + gmax2 < tol:
            if shrinking and any_inactive:
                for t in range(l2):
                    active[t] = 1
                counter = min(l2, 1000)
                continue
            converged = True
            break

        si = i % l
        Ki = &K[si, 0]
        qi = QD[i]
        j = -1
        best_obj = INFINITY
        found = False
        for t in range(l):
            if not active[t] or not alpha[t] > 0:
                continue
            gd = gmax + G[t]
            if gd > 0:
                q = qi + QD[t] - 2.0 * Ki[t]
                if not (q > 0):
                    q = TAU
                obj = -(gd * gd) / q
                if not found or obj < best_obj:
                    best_obj = obj
                    j = t
                    found = True
        for t in range(l, l2):
            if not active[t] or not alpha[t] < C:
                continue
            gd = gmax - G[t]
            if gd > 0:
                q = qi + QD[t] - 2.0 * Ki[t - l]
                if not (q > 0):
                    q = TAU
                obj = -(gd * gd) / q
                if not found or obj < best_obj:
                    best_obj = obj
                    j = t
                    found = True
        if not found:
            if shrinking and any_inactive:
                for t in range(l2):
                    active[t] = 1
                counter = min(l2, 1000)
                continue
            converged = True
            break

        it += 1
        sj = j % l
        ai = alpha[i]
        aj = alpha[j]
        ai_old = ai
        aj_old = aj
        if sign[i] != sign[j]:
            quad = QD[i] + QD[j] + 2.0 * (-K[si, sj])
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj = 0.0
                    ai = diff
            else:
                if ai < 0:
                    ai = 0.0
                    aj = -diff
            if diff > 0:
                if ai > C:
                    ai = C
                    aj = C - diff
            else:
                if aj > C:
                    aj = C
                    ai = C + diff
        else:
            quad = QD[i] + QD[j] - 2.0 * K[si, sj]
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            tot = ai + aj
            ai -= delta
            aj += delta
            if tot > C:
                if ai > C:
                    ai = C
                    aj = tot - C
            else:
                if aj < 0:
                    aj = 0.0
                    ai = tot
            if tot > C:
                if aj > C:
                    aj = C
                    ai = tot - C
            else:
                if ai < 0:
                    ai = 0.0
                    aj = tot
        alpha[i] = ai
        alpha[j] = aj
        ci = sign[i] * (ai - ai_old)
        cj = sign[j] * (aj - aj_old)
        Kj = &K[sj, 0]
        for t in range(l):
            d = Ki[t] * ci + Kj[t] * cj
            G[t] += d
            G[t + l] -= d

    rho = _rho(alpha, G, sign, C, l2)
    coef = alpha_np[:l] - alpha_np[l:]
    return coef, rho, it, converged, alpha_np


cdef double _rho(double[::1] alpha, double[::1] G, double[::1] sign, double C, Py_ssize_t l2):
    cdef Py_ssize_t t, nfree = 0
    cdef double acc = 0.0, ub = INFINITY, lb = -INFINITY, yg
    for t in range(l2):
        if alpha[t] > 0 and alpha[t] < C:
            nfree += 1
            acc += sign[t] * G[t]
    if nfree > 0:
        return acc / nfree
    for t in range(l2):
        yg = sign[t] * G[t]
        if alpha[t] >= C:
            if sign[t] < 0:
                if yg < ub:
                    ub = yg
            elif yg > lb:
                lb = yg
        else:
            if sign[t] > 0:
                if yg < ub:
                    ub = yg
            elif yg > lb:
                lb = yg
    return (ub + lb) / 2.0


# -- whole-tree construction -------------------------------------------------

cdef struct SplitMix:
    unsigned long long state


cdef inline unsigned long long _sm_next(SplitMix* g) noexcept nogil:
    cdef unsigned long long z
    g.state += 0x9E3779B97F4A7C15ULL
    z = g.state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline Py_ssize_t _sm_below(SplitMix* g, Py_ssize_t n) noexcept nogil:
    return <Py_ssize_t> (((_sm_next(g) >> 32) * <unsigned long long> n) >> 32)


cdef inline double _sm_uniform(SplitMix* g) noexcept nogil:
    return (_sm_next(g) >> 11) * (1.0 / 9007199254740992.0)


cdef void _best_split_c(double[:, ::1] X, double[::1] y, cnp.int64_t* rows, Py_ssize_t n,
                        cnp.int64_t* feats, Py_ssize_t nf, Py_ssize_t min_leaf, Pair* buf,
                        Py_ssize_t* out_f, double* out_t) noexcept:
    cdef Py_ssize_t i, k, f, feat_pos, best_f = -1
    cdef double total = 0.0, cl, cr, score, feat_best, best_score = -INFINITY, best_t = 0.0
    out_f[0] = -1
    if n < 2 * min_leaf:
        return
    for i in range(n):
        total += y[rows[i]]
    for k in range(nf):
        f = feats[k]
        for i in range(n):
            buf[i].x = X[rows[i], f]
            buf[i].y = y[rows[i]]
            buf[i].pos = i
        qsort(buf, n, sizeof(Pair), _cmp_pair)
        cl = 0.0
        for i in range(min_leaf - 1):
            cl += buf[i].y
        feat_best = -INFINITY
        feat_pos = -1
        for i in range(min_leaf, n - min_leaf + 1):
            cl += buf[i - 1].y
            if not (buf[i - 1].x < buf[i].x):
                continue
            cr = total - cl
            score = (cl * cl) / i + (cr * cr) / (n - i)
            if score > feat_best:
                feat_best = score
                feat_pos = i
        if feat_pos >= 0 and feat_best > best_score:
            best_score = feat_best
            best_f = f
            best_t = 0.5 * (buf[feat_pos - 1].x + buf[feat_pos].x)
    out_f[0] = best_f
    out_t[0] = best_t


cdef void _random_split_c(double[:, ::1] X, double[::1] y, cnp.int64_t* rows, Py_ssize_t n,
                          cnp.int64_t* feats, Py_ssize_t nf, Py_ssize_t min_leaf, double total,
                          SplitMix* g, Py_ssize_t* out_f, double* out_t) noexcept:
    cdef Py_ssize_t i, k, f, nl, best_f = -1
    cdef double lo, hi, x, t, cl, score, best_score = -INFINITY, best_t = 0.0
    for k in range(nf):
        f = feats[k]
        lo = INFINITY
        hi = -INFINITY
        for i in range(n):
            x = X[rows[i], f]
            if x < lo:
                lo = x
            if x > hi:
                hi = x
        if not (lo < hi):
            continue
        t = lo + _sm_uniform(g) * (hi - lo)
        nl = 0
        cl = 0.0
        for i in range(n):
            if X[rows[i], f] <= t:
                nl += 1
                cl += y[rows[i]]
        if nl < min_leaf or n - nl < min_leaf or nl == n:
            continue
        score = cl * cl / nl + (total - cl) * (total - cl) / (n - nl)
        if score > best_score:
            best_score = score
            best_f = f
            best_t = t
    out_f[0] = best_f
    out_t[0] = best_t


def build_tree(X_in, y_in, rows_in, Py_ssize_t max_features, Py_ssize_t min_leaf, bint random_splitter, seed):
    cdef double[:, ::1] X = np.ascontiguousarray(X_in, dtype=np.float64)
    cdef double[::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    rows_np = np.array(rows_in, dtype=np.int64)
    cdef cnp.int64_t[::1] rows = rows_np
    cdef Py_ssize_t n = rows.shape[0], d = X.shape[1], m = max_features
    cdef Py_ssize_t cap = 2 * n + 1, count = 0, top = 0
    cdef Py_ssize_t node, lo, hi, cnt, i, j, k, f, nl, tmpf
    cdef double t, total, ymin, ymax, acc
    cdef SplitMix g
    g.state = <unsigned long long> (int(seed) & 0xFFFFFFFFFFFFFFFF)

    feature_np = np.full(cap, -1, dtype=np.int64)
    threshold_np = np.zeros(cap)
    left_np = np.full(cap, -1, dtype=np.int64)
    right_np = np.full(cap, -1, dtype=np.int64)
    value_np = np.zeros(cap)
    cdef cnp.int64_t[::1] feature = feature_np
    cdef double[::1] threshold = threshold_np
    cdef cnp.int64_t[::1] left = left_np
    cdef cnp.int64_t[::1] right = right_np
    cdef double[::1] value = value_np
    # stack entries: node, start, end (rows[start:end] belong to node)
    stack_np = np.zeros((cap, 3), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] stack = stack_np
    order_np = np.zeros(max(d, 1), dtype=np.int64)
    cdef cnp.int64_t[::1] order = order_np
    sorted_np = np.zeros(max(d, 1), dtype=np.int64)
    cdef cnp.int64_t[::1] first = sorted_np
    tmp_np = np.zeros(max(n, 1), dtype=np.int64)
    cdef cnp.int64_t[::1] tmp = tmp_np
    cdef Pair* buf = <Pair*> malloc(max(n, 1) * sizeof(Pair))
    if buf == NULL:
        raise MemoryError()
    try:
        acc = 0.0
        for i in range(n):
            acc += y[rows[i]]
        value[0] = acc / n
        count = 1
        stack[0, 0] = 0
        stack[0, 1] = 0
        stack[0, 2] = n
        top = 1
        while top > 0:
            top -= 1
            node = stack[top, 0]
            lo = stack[top, 1]
            hi = stack[top, 2]
            cnt = hi - lo
            ymin = INFINITY
            ymax = -INFINITY
            total = 0.0
            for i in range(lo, hi):
                total += y[rows[i]]
                if y[rows[i]] < ymin:
                    ymin = y[rows[i]]
                if y[rows[i]] > ymax:
                    ymax = y[rows[i]]
            if cnt < 2 * min_leaf or ymax == ymin:
                continue
            for i in range(d):
                order[i] = i
            if m < d or random_splitter:
                for i in range(d - 1, 0, -1):
                    j = _sm_below(&g, i + 1)
                    tmpf = order[i]
                    order[i] = order[j]
                    order[j] = tmpf
            if random_splitter:
                _random_split_c(X, y, &rows[lo], cnt, &order[0], m, min_leaf, total, &g, &f, &t)
            else:
                # scored in ascending feature index, like the reference
                for i in range(m):
                    first[i] = order[i]
                for i in range(1, m):
                    tmpf = first[i]
                    j = i - 1
                    while j >= 0 and first[j] > tmpf:
                        first[j + 1] = first[j]
                        j -= 1
                    first[j + 1] = tmpf
                _best_split_c(X, y, &rows[lo], cnt, &first[0], m, min_leaf, buf, &f, &t)
            k = m
            while f < 0 and k < d:
                if random_splitter:
                    _random_split_c(X, y, &rows[lo], cnt, &order[k], 1, min_leaf, total, &g, &f, &t)
                else:
                    _best_split_c(X, y, &rows[lo], cnt, &order[k], 1, min_leaf, buf, &f, &t)
                k += 1
            if f < 0:
                continue
            # stable partition of rows[lo:hi]
            nl = 0
            for i in range(lo, hi):
                if X[rows[i], f] <= t:
                    nl += 1
            if nl == 0 or nl == cnt:
                continue
            j = 0
            k = nl
            for i in range(lo, hi):
                if X[rows[i], f] <= t:
                    tmp[j] = rows[i]
                    j += 1
                else:
                    tmp[k] = rows[i]
                    k += 1
            for i in range(cnt):
                rows[lo + i] = tmp[i]
            feature[node] = f
            threshold[node] = t
            left[node] = count
            acc = 0.0
            for i in range(lo, lo + nl):
                acc += y[rows[i]]
            value[count] = acc / nl
            count += 1
            right[node] = count
            acc = 0.0
            for i in range(lo + nl, hi):
                acc += y[rows[i]]
            value[count] = acc / (cnt - nl)
            count += 1
            # right first so the left child is expanded next
            stack[top, 0] = right[node]
            stack[top, 1] = lo + nl
            stack[top, 2] = hi
            top += 1
            stack[top, 0] = left[node]
            stack[top, 1] = lo
            stack[top, 2] = lo + nl
            top += 1
    finally:
        free(buf)
    return (feature_np[:count].copy(), threshold_np[:count].copy(), left_np[:count].copy(),
            right_np[:count].copy(), value_np[:count].copy())
