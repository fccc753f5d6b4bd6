# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Semantics and arithmetic order mirror ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def census_transform(img):
    cdef const cnp.uint8_t[:, ::1] a = np.ascontiguousarray(img, dtype=np.uint8)
    cdef Py_ssize_t h = a.shape[0], w = a.shape[1], i, j
    out = np.empty((h - 2, w - 2), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] o = out
    cdef cnp.uint8_t c, code
    with nogil:
        for i in range(1, h - 1):
            for j in range(1, w - 1):
                c = a[i, j]
                code = 0
                if c >= a[i - 1, j - 1]: code |= 128
                if c >= a[i - 1, j]: code |= 64
                if c >= a[i - 1, j + 1]: code |= 32
                if c >= a[i, j - 1]: code |= 16
                if c >= a[i, j + 1]: code |= 8
                if c >= a[i + 1, j - 1]: code |= 4
                if c >= a[i + 1, j]: code |= 2
                if c >= a[i + 1, j + 1]: code |= 1
                o[i - 1, j - 1] = code
    return out


def block_histograms(codes, blocks):
    cdef const cnp.uint8_t[:, ::1] a = np.ascontiguousarray(codes, dtype=np.uint8)
    cdef const cnp.int64_t[:, ::1] bl = np.ascontiguousarray(blocks, dtype=np.int64)
    cdef Py_ssize_t nb = bl.shape[0], b, i, j
    out = np.zeros((nb, 256), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] o = out
    with nogil:
        for b in range(nb):
            for i in range(bl[b, 0], bl[b, 1]):
                for j in range(bl[b, 2], bl[b, 3]):
                    o[b, a[i, j]] += 1
    return out


def nearest_centroid(X, C):
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] c = np.ascontiguousarray(C, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], k = c.shape[0], i, j, t
    labels = np.empty(n, dtype=np.int64)
    best = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] lab = labels
    cdef double[::1] bd = best
    cdef double acc, diff, cur
    cdef Py_ssize_t arg
    with nogil:
        for i in range(n):
            cur = INFINITY
            arg = 0
            for j in range(k):
                acc = 0.0
                for t in range(d):
                    diff = x[i, t] - c[j, t]
                    acc = acc + diff * diff
                    # partial sums only grow; equality already loses the tie
                    if acc >= cur:
                        break
                if acc < cur:
                    cur = acc
                    arg = j
            lab[i] = arg
            bd[i] = cur
    return labels, best


def gini_best_split(Xs, Ys, Ws, Py_ssize_t n_classes, Py_ssize_t min_leaf):
    cdef const double[:, ::1] xs = np.ascontiguousarray(Xs, dtype=np.float64)
    cdef const cnp.int64_t[:, ::1] ys = np.ascontiguousarray(Ys, dtype=np.int64)
    cdef const cnp.int64_t[:, ::1] ws = np.ascontiguousarray(Ws, dtype=np.int64)
    cdef Py_ssize_t m = xs.shape[0], f = xs.shape[1], col, p, k
    if m < 2:
        return -1, -1, np.inf
    cnt_l_arr = np.zeros(n_classes, dtype=np.int64)
    tot_arr = np.zeros(n_classes, dtype=np.int64)
    cdef cnp.int64_t[::1] cnt_l = cnt_l_arr
    cdef cnp.int64_t[::1] tot = tot_arr
    cdef cnp.int64_t n_l, n_r, sq_l, sq_r, cr, total_n
    cdef double score, best = INFINITY, nl, nr
    cdef Py_ssize_t best_col = -1, best_pos = -1
    with nogil:
        for col in range(f):
            for k in range(n_classes):
                cnt_l[k] = 0
                tot[k] = 0
            total_n = 0
            for p in range(m):
                tot[ys[p, col]] += ws[p, col]
                total_n += ws[p, col]
            n_l = 0
            for p in range(m - 1):
                cnt_l[ys[p, col]] += ws[p, col]
                n_l += ws[p, col]
                if not (xs[p, col] < xs[p + 1, col]):
                    continue
                n_r = total_n - n_l
                if n_l < min_leaf or n_r < min_leaf:
                    continue
                sq_l = 0
                sq_r = 0
                for k in range(n_classes):
                    sq_l += cnt_l[k] * cnt_l[k]
                    cr = tot[k] - cnt_l[k]
                    sq_r += cr * cr
                nl = <double>n_l
                nr = <double>n_r
                score = (nl - (<double>sq_l) / nl) + (nr - (<double>sq_r) / nr)
                if score < best:
                    best = score
                    best_col = col
                    best_pos = p
    if best_col < 0:
        return -1, -1, np.inf
    return best_col, best_pos, best


def gini_threshold_scores(X, y, w, thresholds, Py_ssize_t n_classes, Py_ssize_t min_leaf):
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef const cnp.int64_t[::1] yy = np.ascontiguousarray(y, dtype=np.int64)
    cdef const cnp.int64_t[::1] ww = np.ascontiguousarray(w, dtype=np.int64)
    cdef const double[::1] thr = np.ascontiguousarray(thresholds, dtype=np.float64)
    cdef Py_ssize_t m = x.shape[0], f = x.shape[1], col, i, k
    out = np.empty(f, dtype=np.float64)
    cdef double[::1] o = out
    cnt_l_arr = np.zeros(n_classes, dtype=np.int64)
    tot_arr = np.zeros(n_classes, dtype=np.int64)
    cdef cnp.int64_t[::1] cnt_l = cnt_l_arr
    cdef cnp.int64_t[::1] tot = tot_arr
    cdef cnp.int64_t n_l, n_r, sq_l, sq_r, cr, total_n = 0
    cdef double nl, nr
    with nogil:
        for i in range(m):
            tot[yy[i]] += ww[i]
            total_n += ww[i]
        for col in range(f):
            for k in range(n_classes):
                cnt_l[k] = 0
            n_l = 0
            for i in range(m):
                if x[i, col] <= thr[col]:
                    cnt_l[yy[i]] += ww[i]
                    n_l += ww[i]
            n_r = total_n - n_l
            if n_l < min_leaf or n_r < min_leaf:
                o[col] = INFINITY
                continue
            sq_l = 0
            sq_r = 0
            for k in range(n_classes):
                sq_l += cnt_l[k] * cnt_l[k]
                cr = tot[k] - cnt_l[k]
                sq_r += cr * cr
            nl = <double>n_l
            nr = <double>n_r
            o[col] = (nl - (<double>sq_l) / nl) + (nr - (<double>sq_r) / nr)
    return out


def newton_best_split(Xs, Gs, Hs, double lam, Py_ssize_t min_leaf):
    cdef const double[:, ::1] xs = np.ascontiguousarray(Xs, dtype=np.float64)
    cdef const double[:, ::1] gs = np.ascontiguousarray(Gs, dtype=np.float64)
    cdef const double[:, ::1] hs = np.ascontiguousarray(Hs, dtype=np.float64)
    cdef Py_ssize_t m = xs.shape[0], f = xs.shape[1], col, p
    if m < 2:
        return -1, -1, -np.inf
    cdef double g_tot, h_tot, gl, hl, gr, hr, score, best = -INFINITY
    cdef Py_ssize_t best_col = -1, best_pos = -1
    with nogil:
        for col in range(f):
            g_tot = 0.0
            h_tot = 0.0
            for p in range(m):
                g_tot = g_tot + gs[p, col]
                h_tot = h_tot + hs[p, col]
            gl = 0.0
            hl = 0.0
            for p in range(m - 1):
                gl = gl + gs[p, col]
                hl = hl + hs[p, col]
                if not (xs[p, col] < xs[p + 1, col]):
                    continue
                if p + 1 < min_leaf or m - p - 1 < min_leaf:
                    continue
                gr = g_tot - gl
                hr = h_tot - hl
                score = gl * gl / (hl + lam) + gr * gr / (hr + lam)
                if score > best:
                    best = score
                    best_col = col
                    best_pos = p
    if best_col < 0:
        return -1, -1, -np.inf
    return best_col, best_pos, best


def tree_apply(X, feature, threshold, left, right):
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef const cnp.int64_t[::1] feat = np.ascontiguousarray(feature, dtype=np.int64)
    cdef const double[::1] thr = np.ascontiguousarray(threshold, dtype=np.float64)
    cdef const cnp.int64_t[::1] lt = np.ascontiguousarray(left, dtype=np.int64)
    cdef const cnp.int64_t[::1] rt = np.ascontiguousarray(right, dtype=np.int64)
    cdef Py_ssize_t n = x.shape[0], i
    cdef cnp.int64_t node
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    with nogil:
        for i in range(n):
            node = 0
            while feat[node] >= 0:
                if x[i, feat[node]] <= thr[node]:
                    node = lt[node]
                else:
                    node = rt[node]
            o[i] = node
    return out
