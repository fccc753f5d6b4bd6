"""Pure numpy implementations of the hot kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same signature
and bit-identical output. Arithmetic order is kept sequential where the
compiled loop accumulates sequentially, so the two backends can be compared
with ``==`` rather than a tolerance.
"""

import numpy as np

# (row offset, column offset) of each neighbor, most-significant bit first.
CENSUS_NEIGHBORS = (
    (-1, -1), (-1, 0), (-1, 1),
    (0, -1), (0, 1),
    (1, -1), (1, 0), (1, 1),
)


def census_transform(img):
    img = np.ascontiguousarray(img, dtype=np.uint8)
    h, w = img.shape
    center = img[1:h - 1, 1:w - 1]
    codes = np.zeros((h - 2, w - 2), dtype=np.uint8)
    for bit, (dy, dx) in enumerate(CENSUS_NEIGHBORS):
        neighbor = img[1 + dy:h - 1 + dy, 1 + dx:w - 1 + dx]
        codes |= (center >= neighbor).astype(np.uint8) << np.uint8(7 - bit)
    return codes


def block_histograms(codes, blocks):
    """256-bin code counts for each ``(r0, r1, c0, c1)`` block."""
    codes = np.ascontiguousarray(codes, dtype=np.uint8)
    blocks = np.asarray(blocks, dtype=np.int64)
    out = np.zeros((len(blocks), 256), dtype=np.int64)
    for b, (r0, r1, c0, c1) in enumerate(blocks):
        out[b] = np.bincount(codes[r0:r1, c0:c1].ravel(), minlength=256)
    return out


def nearest_centroid(X, C):
    """Index of and squared distance to the nearest row of ``C`` for each row of ``X``.

    Distances are summed dimension by dimension in index order; ties go to
    the lowest centroid index.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    C = np.ascontiguousarray(C, dtype=np.float64)
    n, d = X.shape
    k = C.shape[0]
    labels = np.empty(n, dtype=np.int64)
    best = np.empty(n, dtype=np.float64)
    # chunk rows to bound the (rows, k) working set
    step = max(1, 2_000_000 // max(1, k))
    for start in range(0, n, step):
        xs = X[start:start + step]
        d2 = np.zeros((xs.shape[0], k), dtype=np.float64)
        for j in range(d):
            diff = xs[:, j, None] - C[None, :, j]
            d2 += diff * diff
        lab = np.argmin(d2, axis=1)
        labels[start:start + step] = lab
        best[start:start + step] = d2[np.arange(xs.shape[0]), lab]
    return labels, best


def gini_best_split(Xs, Ys, Ws, n_classes, min_leaf):
    """Best Gini split over presorted columns.

    ``Xs[:, c]`` is sorted ascending and ``Ys``/``Ws`` are the labels and
    integer weights in the same order. The score is the weighted child Gini
    impurity ``sum_side (n - sum_k cnt_k**2 / n)``; lower is better. Returns
    ``(col, pos, score)`` meaning "left = rows 0..pos of column col", or
    ``(-1, -1, inf)`` when nothing is splittable.
    """
    Xs = np.asarray(Xs, dtype=np.float64)
    m, f = Xs.shape
    if m < 2:
        return -1, -1, np.inf
    Ys = np.asarray(Ys, dtype=np.int64)
    Ws = np.asarray(Ws, dtype=np.int64)
    onehot = np.zeros((m, f, n_classes), dtype=np.int64)
    np.put_along_axis(onehot, Ys[:, :, None], Ws[:, :, None], axis=2)
    cnt_left = np.cumsum(onehot, axis=0)[:-1]
    total = cnt_left[-1] + onehot[-1]
    cnt_right = total[None] - cnt_left
    n_left = cnt_left.sum(axis=2)
    n_right = cnt_right.sum(axis=2)
    sq_left = (cnt_left * cnt_left).sum(axis=2)
    sq_right = (cnt_right * cnt_right).sum(axis=2)
    valid = (Xs[:-1] < Xs[1:]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    with np.errstate(divide="ignore", invalid="ignore"):
        nl = n_left.astype(np.float64)
        nr = n_right.astype(np.float64)
        score = (nl - sq_left.astype(np.float64) / nl) + (nr - sq_right.astype(np.float64) / nr)
    score = np.where(valid, score, np.inf)
    # column-major scan order: all positions of column 0, then column 1, ...
    flat = score.T.ravel()
    i = int(np.argmin(flat))
    if not np.isfinite(flat[i]):
        return -1, -1, np.inf
    return i // (m - 1), i % (m - 1), float(flat[i])


def gini_threshold_scores(X, y, w, thresholds, n_classes, min_leaf):
    """Weighted child Gini score of ``x <= threshold`` for each column; inf if invalid."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    w = np.asarray(w, dtype=np.int64)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    m, f = X.shape
    onehot = np.zeros((m, n_classes), dtype=np.int64)
    onehot[np.arange(m), y] = w
    left = (X <= thresholds[None, :]).astype(np.int64)
    cnt_left = left.T @ onehot
    cnt_right = onehot.sum(axis=0)[None] - cnt_left
    n_left = cnt_left.sum(axis=1)
    n_right = cnt_right.sum(axis=1)
    sq_left = (cnt_left * cnt_left).sum(axis=1)
    sq_right = (cnt_right * cnt_right).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        nl = n_left.astype(np.float64)
        nr = n_right.astype(np.float64)
        score = (nl - sq_left.astype(np.float64) / nl) + (nr - sq_right.astype(np.float64) / nr)
    valid = (n_left >= min_leaf) & (n_right >= min_leaf)
    return np.where(valid, score, np.inf)


def newton_best_split(Xs, Gs, Hs, lam, min_leaf):
    """Best second-order regression split over presorted columns.

    Maximizes ``GL**2/(HL+lam) + GR**2/(HR+lam)``. Returns ``(col, pos, score)``
    or ``(-1, -1, -inf)``.
    """
    Xs = np.asarray(Xs, dtype=np.float64)
    m, f = Xs.shape
    if m < 2:
        return -1, -1, -np.inf
    g_left = np.cumsum(np.asarray(Gs, dtype=np.float64), axis=0)
    h_left = np.cumsum(np.asarray(Hs, dtype=np.float64), axis=0)
    g_tot = g_left[-1]
    h_tot = h_left[-1]
    g_left = g_left[:-1]
    h_left = h_left[:-1]
    g_right = g_tot[None] - g_left
    h_right = h_tot[None] - h_left
    score = g_left * g_left / (h_left + lam) + g_right * g_right / (h_right + lam)
    pos = np.arange(m - 1)[:, None]
    valid = (Xs[:-1] < Xs[1:]) & (pos + 1 >= min_leaf) & (m - pos - 1 >= min_leaf)
    score = np.where(valid, score, -np.inf)
    flat = score.T.ravel()
    i = int(np.argmax(flat))
    if not np.isfinite(flat[i]):
        return -1, -1, -np.inf
    return i // (m - 1), i % (m - 1), float(flat[i])


def tree_apply(X, feature, threshold, left, right):
    """Leaf node index reached by each row of ``X``; leaves have ``feature == -1``."""
    X = np.asarray(X, dtype=np.float64)
    node = np.zeros(X.shape[0], dtype=np.int64)
    rows = np.arange(X.shape[0])
    active = feature[node] >= 0
    while active.any():
        r = rows[active]
        nd = node[r]
        go_left = X[r, feature[nd]] <= threshold[nd]
        node[r] = np.where(go_left, left[nd], right[nd])
        active = feature[node] >= 0
    return node
