"""Reference implementations of the hot kernels (numpy only).

``_native.pyx`` mirrors these function by function; both must select the
same splits and working sets given the same inputs.
"""

import numpy as np

TAU = 1e-12


def best_split(X, y, rows, features, min_leaf):
    """Best variance-reducing threshold over ``features`` for the node ``rows``.

    Returns ``(feature, threshold, gain)``; ``feature == -1`` if no split keeps
    at least ``min_leaf`` rows on both sides. ``gain`` is the decrease of the
    node's sum of squared deviations.
    """
    n = len(rows)
    best_f, best_t, best_score = -1, 0.0, -np.inf
    if n < 2 * min_leaf:
        return best_f, best_t, 0.0
    ys_node = y[rows]
    total = 0.0
    for v in ys_node:
        total += v
    base = total * total / n
    for f in features:
        xs = X[rows, f]
        order = np.argsort(xs, kind="stable")
        xs_s = xs[order]
        cs = np.cumsum(ys_node[order])
        # split after position i-1 (left holds i rows)
        i = np.arange(min_leaf, n - min_leaf + 1)
        i = i[xs_s[i - 1] < xs_s[i]]
        if len(i) == 0:
            continue
        cl = cs[i - 1]
        cr = total - cl
        score = (cl * cl) / i + (cr * cr) / (n - i)
        k = int(np.argmax(score))
        if score[k] > best_score:
            best_score = score[k]
            best_f = int(f)
            best_t = 0.5 * (xs_s[i[k] - 1] + xs_s[i[k]])
    if best_f < 0:
        return -1, 0.0, 0.0
    return best_f, float(best_t), float(best_score - base)


def smo_solve(K, y, C, epsilon, tol, shrinking, max_iter):
    """Epsilon-SVR dual by sequential minimal optimization (second-order working set).

    Variables ``a[:l]`` and ``a[l:]`` are the upper and lower tube multipliers.
    Returns ``(coef, rho, n_iter, converged, alpha)`` with the decision function
    ``f(x) = sum(coef * k(x_i, x)) - rho``.
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    l = len(y)
    l2 = 2 * l
    sign = np.concatenate([np.ones(l), -np.ones(l)])
    src = np.concatenate([np.arange(l), np.arange(l)])
    QD = np.diag(K)[src]
    alpha = np.zeros(l2)
    G = np.concatenate([epsilon - y, epsilon + y])
    active = np.ones(l2, dtype=bool)
    counter = min(l2, 1000) + 1
    it = 0
    converged = False
    while it < max_iter:
        counter -= 1
        if shrinking and counter == 0:
            counter = min(l2, 1000)
            active = _shrink(alpha, G, sign, C, active, l2)
        up = active & (((sign > 0) & (alpha < C)) | ((sign < 0) & (alpha > 0)))
        low = active & (((sign > 0) & (alpha > 0)) | ((sign < 0) & (alpha < C)))
        mG = -sign * G
        if up.any():
            cand = np.where(up, mG, -np.inf)
            i = int(np.argmax(cand))
            gmax = cand[i]
        else:
            i, gmax = -1, -np.inf
        yG = sign * G
        gmax2 = np.max(np.where(low, yG, -np.inf)) if low.any() else -np.inf
        if gmax + gmax2 < tol or i < 0:
            if shrinking and not active.all():
                active[:] = True
                counter = min(l2, 1000)
                continue
            converged = True
            break
        grad_diff = gmax + yG
        Ki = K[src[i]][src]
        quad = QD[i] + QD - 2.0 * Ki
        quad = np.where(quad > 0, quad, TAU)
        ok = low & (grad_diff > 0)
        if not ok.any():
            if shrinking and not active.all():
                active[:] = True
                counter = min(l2, 1000)
                continue
            converged = True
            break
        obj = np.where(ok, -(grad_diff * grad_diff) / quad, np.inf)
        j = int(np.argmin(obj))
        it += 1
        ai_old, aj_old = alpha[i], alpha[j]
        ai, aj = _pair_update(i, j, alpha, G, sign, QD, K[src[i], src[j]], C)
        alpha[i], alpha[j] = ai, aj
        ci = sign[i] * (ai - ai_old)
        cj = sign[j] * (aj - aj_old)
        G += sign * (K[src[i]][src] * ci + K[src[j]][src] * cj)
    rho = _rho(alpha, G, sign, C)
    coef = alpha[:l] - alpha[l:]
    return coef, rho, it, converged, alpha


def _pair_update(i, j, alpha, G, sign, QD, kij, C):
    ai, aj = alpha[i], alpha[j]
    if sign[i] != sign[j]:
        quad = QD[i] + QD[j] + 2.0 * (-kij)
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
        quad = QD[i] + QD[j] - 2.0 * kij
        if quad <= 0:
            quad = TAU
        delta = (G[i] - G[j]) / quad
        total = ai + aj
        ai -= delta
        aj += delta
        if total > C:
            if ai > C:
                ai = C
                aj = total - C
        else:
            if aj < 0:
                aj = 0.0
                ai = total
        if total > C:
            if aj > C:
                aj = C
                ai = total - C
        else:
            if ai < 0:
                ai = 0.0
                aj = total
    return ai, aj


def _shrink(alpha, G, sign, C, active, l2):
    up = active & (((sign > 0) & (alpha < C)) | ((sign < 0) & (alpha > 0)))
    low = active & (((sign > 0) & (alpha > 0)) | ((sign < 0) & (alpha < C)))
    gmax1 = np.max(np.where(up, -sign * G, -np.inf)) if up.any() else -np.inf
    gmax2 = np.max(np.where(low, sign * G, -np.inf)) if low.any() else -np.inf
    at_upper = alpha >= C
    at_lower = alpha <= 0
    pos = sign > 0
    shrunk = np.zeros(l2, dtype=bool)
    shrunk |= at_upper & pos & (-G > gmax1)
    shrunk |= at_upper & ~pos & (-G > gmax2)
    shrunk |= at_lower & pos & (G > gmax2)
    shrunk |= at_lower & ~pos & (G > gmax1)
    return active & ~shrunk


def _rho(alpha, G, sign, C):
    yG = sign * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        vals = yG[free].tolist()
        acc = 0.0
        for v in vals:
            acc += v
        return acc / len(vals)
    at_upper = alpha >= C
    pos = sign > 0
    ub_mask = (at_upper & ~pos) | (~at_upper & pos)
    lb_mask = (at_upper & pos) | (~at_upper & ~pos)
    ub = np.min(yG[ub_mask]) if ub_mask.any() else np.inf
    lb = np.max(yG[lb_mask]) if lb_mask.any() else -np.inf
    return float((ub + lb) / 2.0)


# -- whole-tree construction -------------------------------------------------

MASK64 = (1 << 64) - 1


class _SplitMix:
    """splitmix64 stream shared bit-for-bit with the compiled tree builder."""

    def __init__(self, seed):
        self.state = int(seed) & MASK64

    def next(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n):
        return ((self.next() >> 32) * n) >> 32

    def uniform(self):
        return (self.next() >> 11) * (1.0 / 9007199254740992.0)


def _seq_sum(v):
    return float(np.cumsum(v)[-1]) if len(v) else 0.0


def _random_split(X, y, rows, features, min_leaf, total, rng):
    n = len(rows)
    best_f, best_t, best_score = -1, 0.0, -np.inf
    for f in features:
        xs = X[rows, f]
        lo, hi = xs.min(), xs.max()
        if not lo < hi:
            continue
        t = lo + rng.uniform() * (hi - lo)
        left = xs <= t
        nl = int(left.sum())
        if nl < min_leaf or n - nl < min_leaf or nl == n:
            continue
        cl = _seq_sum(y[rows][left])
        score = cl * cl / nl + (total - cl) * (total - cl) / (n - nl)
        if score > best_score:
            best_f, best_t, best_score = int(f), float(t), score
    if best_f < 0:
        return -1, 0.0, 0.0
    return best_f, best_t, best_score - total * total / n


def build_tree(X, y, rows, max_features, min_leaf, random_splitter, seed):
    """Grow a full regression tree over ``rows`` (repeats allowed).

    Nodes are numbered depth-first, left child first. A node becomes a leaf when
    its labels are constant, it holds fewer than ``2 * min_leaf`` rows, or no
    feature admits a split. With ``max_features < d`` (or the random splitter)
    each node draws a feature permutation; the first ``max_features`` are
    scored and, if none splits, the rest are tried one by one.
    Returns ``(feature, threshold, left, right, value)`` arrays.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    rows = np.asarray(rows, dtype=np.int64)
    d = X.shape[1]
    m = max_features
    rng = _SplitMix(seed)
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(r):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(_seq_sum(y[r]) / len(r))
        return len(feature) - 1

    stack = [(new_node(rows), rows)]
    while stack:
        node, r = stack.pop()
        ys = y[r]
        if len(r) < 2 * min_leaf or ys.max() == ys.min():
            continue
        order = list(range(d))
        if m < d or random_splitter:
            for i in range(d - 1, 0, -1):
                j = rng.below(i + 1)
                order[i], order[j] = order[j], order[i]
        total = _seq_sum(ys)
        if random_splitter:
            f, t, _ = _random_split(X, y, r, order[:m], min_leaf, total, rng)
        else:
            f, t, _ = best_split(X, y, r, np.sort(np.array(order[:m], dtype=np.int64)), min_leaf)
        k = m
        while f < 0 and k < d:
            if random_splitter:
                f, t, _ = _random_split(X, y, r, order[k:k + 1], min_leaf, total, rng)
            else:
                f, t, _ = best_split(X, y, r, np.array(order[k:k + 1], dtype=np.int64), min_leaf)
            k += 1
        if f < 0:
            continue
        go_left = X[r, f] <= t
        lr, rr = r[go_left], r[~go_left]
        if len(lr) == 0 or len(rr) == 0:
            continue
        feature[node], threshold[node] = int(f), float(t)
        left[node] = new_node(lr)
        right[node] = new_node(rr)
        stack.append((right[node], rr))
        stack.append((left[node], lr))
    return (np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64), np.array(value))
