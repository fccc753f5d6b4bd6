"""Visual vocabularies: k-means codebooks and diagonal Gaussian mixtures.

Every per-entity feature vector (one face, one pose) is a visual word. The
vocabularies here are fitted on the pooled words of the training images and
record which image ids they were fitted on, so leakage can be audited later.
"""

from dataclasses import dataclass, field

import numpy as np

from . import serialization
from ._backend import kernels

LOG_2PI = np.log(2.0 * np.pi)
VARIANCE_FLOOR = 1e-6


class CodebookError(ValueError):
    pass


class DegenerateComponentError(CodebookError):
    pass


@dataclass(frozen=True, eq=False)
class VisualWordSet:
    """Pooled visual words with the image id each one came from."""

    words: np.ndarray
    owners: tuple

    def __post_init__(self):
        words = np.asarray(self.words, dtype=np.float64)
        if words.ndim != 2 or words.shape[0] < 1 or words.shape[1] < 1:
            raise CodebookError(f"need an (n >= 1, D >= 1) word array, got shape {words.shape}")
        if len(self.owners) != words.shape[0]:
            raise CodebookError("every word needs exactly one owner image id")
        object.__setattr__(self, "words", words)
        object.__setattr__(self, "owners", tuple(self.owners))

    @classmethod
    def from_images(cls, per_image):
        """Pool ``{image_id: (n_i, D) array}``; images without words are skipped."""
        blocks, owners = [], []
        for image_id, vecs in per_image.items():
            vecs = np.asarray(vecs, dtype=np.float64)
            if vecs.size == 0:
                continue
            blocks.append(vecs.reshape(len(vecs), -1))
            owners += [image_id] * len(vecs)
        if not blocks:
            raise CodebookError("no visual words in any image")
        return cls(np.vstack(blocks), tuple(owners))

    @property
    def dim(self):
        return self.words.shape[1]

    def __len__(self):
        return self.words.shape[0]


def _word_array(words):
    if isinstance(words, VisualWordSet):
        X, provenance = words.words, tuple(sorted(set(words.owners)))
    else:
        X, provenance = np.asarray(words, dtype=np.float64), ()
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1:
            raise CodebookError(f"need an (n, D) word array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise CodebookError("visual words contain non-finite values")
    return np.ascontiguousarray(X), provenance


def _check_word(word, dim):
    word = np.asarray(word, dtype=np.float64)
    if word.shape[-1] != dim:
        raise CodebookError(f"word has dimension {word.shape[-1]}, model expects {dim}")
    return word


@dataclass(frozen=True, eq=False)
class Codebook:
    centroids: np.ndarray
    inertia: float
    inertia_history: tuple = ()
    n_iter: int = 0
    provenance: tuple = ()
    meta: dict = field(default_factory=dict)

    @property
    def k(self):
        return self.centroids.shape[0]

    @property
    def dim(self):
        return self.centroids.shape[1]

    def assign(self, word):
        """Nearest centroid index; lowest index wins ties."""
        return int(self.assign_many(np.atleast_2d(_check_word(word, self.dim)))[0])

    def assign_many(self, words):
        words = _check_word(np.atleast_2d(words), self.dim)
        return kernels.nearest_centroid(words, self.centroids)[0]

    def save(self, path):
        meta = dict(self.meta, inertia=self.inertia, n_iter=self.n_iter, provenance=list(self.provenance))
        arrays = {"centroids": self.centroids, "inertia_history": np.asarray(self.inertia_history)}
        return serialization.save_model(path, "kmeans", self.k, self.dim, arrays, meta)

    @classmethod
    def load(cls, path):
        kind, _, _, arrays, meta = serialization.load_model_file(path)
        if kind != "kmeans":
            raise serialization.ModelFormatError(f"{path}: expected a kmeans model, found {kind}")
        meta = dict(meta)
        return cls(
            centroids=arrays["centroids"],
            inertia=meta.pop("inertia"),
            inertia_history=tuple(arrays["inertia_history"].tolist()),
            n_iter=meta.pop("n_iter"),
            provenance=tuple(meta.pop("provenance")),
            meta=meta,
        )


def assign(codebook, word):
    return codebook.assign(word)


def _sq_dist_to(X, c):
    diff = X - c
    return np.einsum("ij,ij->i", diff, diff)


def _init_kmeanspp(X, k, rng):
    n = X.shape[0]
    idx = [int(rng.integers(n))]
    d2 = _sq_dist_to(X, X[idx[0]])
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            # every word coincides with a chosen center
            nxt = int(rng.integers(n))
        idx.append(nxt)
        d2 = np.minimum(d2, _sq_dist_to(X, X[nxt]))
    return X[idx].copy()


def _init_farthest(X, k):
    first = int(np.argmax(_sq_dist_to(X, X.mean(axis=0))))
    idx = [first]
    d2 = _sq_dist_to(X, X[first])
    for _ in range(1, k):
        nxt = int(np.argmax(d2))
        idx.append(nxt)
        d2 = np.minimum(d2, _sq_dist_to(X, X[nxt]))
    return X[idx].copy()


def _repair_empty(labels, d2, counts, k):
    """Move the farthest words of multi-member clusters into empty clusters."""
    order = np.argsort(-d2, kind="stable")
    used = 0
    for j in np.flatnonzero(counts == 0):
        while used < len(order) and counts[labels[order[used]]] < 2:
            used += 1
        p = order[used]
        used += 1
        counts[labels[p]] -= 1
        labels[p] = j
        counts[j] = 1
    return labels, counts


def fit_kmeans(words, k, seed=0, max_iter=300, tol=1e-6, init="k-means++"):
    """Lloyd's algorithm from a seeded k-means++ (or farthest-first) start.

    Stops when no centroid moves by ``tol`` or more (Euclidean), when the
    assignment stops changing, or after ``max_iter`` updates.
    """
    X, provenance = _word_array(words)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise CodebookError(f"need 1 <= k <= n words, got k={k}, n={n}")
    if tol <= 0:
        raise CodebookError("tol must be positive")
    if init == "k-means++":
        C = _init_kmeanspp(X, k, np.random.default_rng(seed))
    elif init == "farthest":
        C = _init_farthest(X, k)
    else:
        raise CodebookError(f"unknown init {init!r}")

    history = []
    prev_labels = None
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        labels, d2 = kernels.nearest_centroid(X, C)
        history.append(float(d2.sum()))
        counts = np.bincount(labels, minlength=k)
        repaired = bool(np.any(counts == 0))
        if repaired:
            labels, counts = _repair_empty(labels.copy(), d2, counts, k)
        sums = np.zeros_like(C)
        np.add.at(sums, labels, X)
        new_C = sums / counts[:, None]
        shift = float(np.sqrt(np.max(np.sum((new_C - C) ** 2, axis=1))))
        C = new_C
        stable = prev_labels is not None and not repaired and np.array_equal(labels, prev_labels)
        prev_labels = labels
        if shift < tol or stable:
            break

    _, d2 = kernels.nearest_centroid(X, C)
    inertia = float(d2.sum())
    history.append(inertia)
    meta = {"seed": seed, "init": init, "tol": tol, "max_iter": max_iter, "n_words": n}
    return Codebook(C, inertia, tuple(history), n_iter, provenance, meta)


@dataclass(frozen=True, eq=False)
class GmmModel:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    log_likelihood_history: tuple = ()
    n_iter: int = 0
    provenance: tuple = ()
    meta: dict = field(default_factory=dict)

    @property
    def k(self):
        return self.means.shape[0]

    @property
    def dim(self):
        return self.means.shape[1]

    def log_joint(self, X):
        """``log w_j + log N(x | mean_j, diag(var_j))`` as an ``(n, k)`` array."""
        X = _check_word(np.atleast_2d(X), self.dim)
        out = np.empty((X.shape[0], self.k))
        with np.errstate(divide="ignore"):
            log_w = np.log(self.weights)
        for j in range(self.k):
            z = (X - self.means[j]) ** 2 / self.variances[j]
            out[:, j] = log_w[j] - 0.5 * (self.dim * LOG_2PI + np.log(self.variances[j]).sum() + z.sum(axis=1))
        return out

    def responsibilities(self, words):
        """Posterior over components per word, computed in log space."""
        lj = self.log_joint(words)
        return np.exp(lj - _logsumexp(lj)[:, None])

    def mean_log_likelihood(self, words):
        return float(_logsumexp(self.log_joint(words)).mean())

    def save(self, path):
        meta = dict(self.meta, n_iter=self.n_iter, provenance=list(self.provenance))
        arrays = {
            "weights": self.weights,
            "means": self.means,
            "variances": self.variances,
            "log_likelihood_history": np.asarray(self.log_likelihood_history),
        }
        return serialization.save_model(path, "gmm", self.k, self.dim, arrays, meta)

    @classmethod
    def load(cls, path):
        kind, _, _, arrays, meta = serialization.load_model_file(path)
        if kind != "gmm":
            raise serialization.ModelFormatError(f"{path}: expected a gmm model, found {kind}")
        meta = dict(meta)
        return cls(
            arrays["weights"], arrays["means"], arrays["variances"],
            tuple(arrays["log_likelihood_history"].tolist()),
            meta.pop("n_iter"), tuple(meta.pop("provenance")), meta,
        )


def _logsumexp(a):
    top = np.max(a, axis=1)
    return top + np.log(np.exp(a - top[:, None]).sum(axis=1))


def responsibilities(model, word):
    """Posterior ``p(component | word)`` for one word (1-D) or many (2-D)."""
    word = np.asarray(word, dtype=np.float64)
    r = model.responsibilities(word)
    return r[0] if word.ndim == 1 else r


def _m_step(X, resp, means, variances, floor):
    n = X.shape[0]
    nk = resp.sum(axis=0)
    weights = nk / n
    means = means.copy()
    variances = variances.copy()
    for j in np.flatnonzero(nk > 0):
        r = resp[:, j]
        means[j] = r @ X / nk[j]
        variances[j] = np.maximum(r @ ((X - means[j]) ** 2) / nk[j], floor)
    return weights, means, variances


def fit_gmm(words, k, seed=0, max_iter=100, tol=1e-6, kmeans_iter=100):
    """Diagonal-covariance EM started from a seeded k-means fit.

    Variances are floored at ``1e-6`` times the per-dimension data variance,
    which is the exact constrained M-step, so the mean log-likelihood never
    decreases. Stops when it improves by less than ``tol``.
    """
    X, provenance = _word_array(words)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise CodebookError(f"need 1 <= k <= n words, got k={k}, n={n}")
    if tol <= 0:
        raise CodebookError("tol must be positive")
    floor = VARIANCE_FLOOR * X.var(axis=0)

    cb = fit_kmeans(X, k, seed=seed, max_iter=kmeans_iter)
    labels = cb.assign_many(X)
    counts = np.bincount(labels, minlength=k)
    weights = counts / n
    means = cb.centroids.copy()
    variances = np.empty_like(means)
    for j in range(k):
        members = X[labels == j]
        variances[j] = ((members - means[j]) ** 2).mean(axis=0) if len(members) else X.var(axis=0)
    variances = np.maximum(variances, floor)
    if np.any(variances <= 0):
        raise DegenerateComponentError(
            "zero variance that flooring cannot fix (some dimension is constant across all words)")

    model = GmmModel(weights, means, variances)
    lj = model.log_joint(X)
    lse = _logsumexp(lj)
    history = [float(lse.mean())]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        resp = np.exp(lj - lse[:, None])
        model = GmmModel(*_m_step(X, resp, model.means, model.variances, floor))
        lj = model.log_joint(X)
        lse = _logsumexp(lj)
        history.append(float(lse.mean()))
        if history[-1] - history[-2] < tol:
            break
    meta = {"seed": seed, "tol": tol, "max_iter": max_iter, "n_words": n}
    return GmmModel(model.weights, model.means, model.variances, tuple(history), n_iter, provenance, meta)
