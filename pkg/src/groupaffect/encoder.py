"""Per-image encodings of visual words and captions, and modality fusion.

An image with ``n`` detected entities contributes an ``(n, D)`` word array.
The k-means encoders assign each word to its nearest centroid (hard
assignment), so the TF histogram, the VLAD residuals and the weighted
centroid average all agree on which code a word belongs to.
"""

import re
from collections import Counter
from dataclasses import dataclass

import numpy as np

MODALITIES = ("face", "pose", "scene", "text")
ENCODERS = ("tf", "vlad", "wa", "gmm", "centrist", "bow")

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


class EncodingError(ValueError):
    pass


class EmptyImageError(EncodingError):
    """The image has no visual words (no face or pose was detected)."""


@dataclass(frozen=True, eq=False)
class EncodedImage:
    image_id: str
    modality: str
    encoder: str
    values: np.ndarray
    # (modality, encoder, offset, length) for each fused part
    parts: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if not self.parts:
            object.__setattr__(self, "parts", ((self.modality, self.encoder, 0, len(self.values)),))

    def __len__(self):
        return len(self.values)


def _words_for(codebook_dim, words):
    words = np.asarray(words, dtype=np.float64)
    if words.size == 0:
        raise EmptyImageError("image has no visual words")
    words = np.atleast_2d(words)
    if words.shape[1] != codebook_dim:
        raise EncodingError(f"words have dimension {words.shape[1]}, model expects {codebook_dim}")
    return words


def term_frequencies(codebook, words):
    words = _words_for(codebook.dim, words)
    counts = np.bincount(codebook.assign_many(words), minlength=codebook.k)
    return counts / counts.sum()


def encode_tf(codebook, words, image_id="", modality="face"):
    """Fraction of the image's words assigned to each code; length ``k``."""
    return EncodedImage(image_id, modality, "tf", term_frequencies(codebook, words))


def vlad_residuals(codebook, words):
    """Un-normalized per-cluster residual sums, shape ``(k, D)``."""
    words = _words_for(codebook.dim, words)
    labels = codebook.assign_many(words)
    out = np.zeros_like(codebook.centroids)
    np.add.at(out, labels, words - codebook.centroids[labels])
    return out


def encode_vlad(codebook, words, image_id="", modality="face", normalize=True):
    """Concatenated residual sums (length ``k * D``), globally L2-normalized.

    A raw encoding that is exactly zero is returned as zeros.
    """
    v = vlad_residuals(codebook, words).ravel()
    if normalize:
        norm = np.linalg.norm(v)
        if norm > 0:
            v = v / norm
    return EncodedImage(image_id, modality, "vlad", v)


def encode_wa(codebook, words, image_id="", modality="face"):
    """TF-weighted average of centroids; length ``D``."""
    return EncodedImage(image_id, modality, "wa", term_frequencies(codebook, words) @ codebook.centroids)


def encode_gmm(model, words, image_id="", modality="face"):
    """Mean component responsibility over the image's words; length ``k``."""
    words = _words_for(model.dim, words)
    return EncodedImage(image_id, modality, "gmm", model.responsibilities(words).mean(axis=0))


def encoded_length(encoder, k=None, dim=None, vocab_size=None):
    """Vector length an encoder produces under a given model configuration."""
    lengths = {
        "tf": k,
        "gmm": k,
        "vlad": None if k is None or dim is None else k * dim,
        "wa": dim,
        "centrist": 7905,
        "bow": vocab_size,
    }
    if encoder not in lengths:
        raise EncodingError(f"unknown encoder {encoder!r}")
    if lengths[encoder] is None:
        raise EncodingError(f"encoder {encoder!r} needs more model parameters to size")
    return lengths[encoder]


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple

    def __post_init__(self):
        tokens = tuple(self.tokens)
        if list(tokens) != sorted(set(tokens)):
            raise EncodingError("vocabulary tokens must be unique and sorted")
        object.__setattr__(self, "tokens", tokens)

    @property
    def size(self):
        return len(self.tokens)

    def index(self):
        return {t: i for i, t in enumerate(self.tokens)}


def tokenize(text):
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


def build_vocabulary(captions, min_count=1):
    """Sorted lowercase alphanumeric tokens seen at least ``min_count`` times."""
    captions = list(captions)
    if not captions:
        raise EncodingError("cannot build a vocabulary from an empty corpus")
    counts = Counter(tok for cap in captions for tok in tokenize(cap))
    return Vocabulary(tuple(sorted(t for t, c in counts.items() if c >= min_count)))


PAD_PREFIX = "#pad"


def fixed_size_vocabulary(captions, size, min_count=1):
    """Vocabulary of exactly ``size`` tokens.

    Keeps the ``size`` most frequent tokens seen at least ``min_count`` times
    (ties broken alphabetically) and pads with placeholder tokens that no
    caption can produce, so the encoded length depends only on ``size``.
    """
    if size < 1:
        raise EncodingError("vocabulary size must be >= 1")
    counts = Counter(tok for cap in captions for tok in tokenize(cap))
    ranked = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))[:size]
    pads = [f"{PAD_PREFIX}{i:05d}" for i in range(size - len(ranked))]
    return Vocabulary(tuple(sorted(ranked + pads)))


def bow_counts(vocab, caption):
    index = vocab.index()
    counts = np.zeros(vocab.size)
    for tok in tokenize(caption):
        i = index.get(tok)
        if i is not None:
            counts[i] += 1
    return counts


def encode_bow(vocab, caption, image_id=""):
    """In-vocabulary token counts divided by their total; zeros if none match."""
    if vocab.size == 0:
        raise EncodingError("vocabulary is empty")
    counts = bow_counts(vocab, caption)
    total = counts.sum()
    return EncodedImage(image_id, "text", "bow", counts / total if total else counts)


def concatenate(parts, layout=None):
    """Fuse one image's encodings in order.

    ``layout``, when given, is the run's ``[(modality, encoder, length), ...]``
    and every part must match it position by position.
    """
    parts = list(parts)
    if not parts:
        raise EncodingError("nothing to concatenate")
    image_id = parts[0].image_id
    for p in parts:
        if p.image_id != image_id:
            raise EncodingError(f"mixed image ids {image_id!r} and {p.image_id!r}")
    if layout is not None:
        layout = list(layout)
        if len(layout) != len(parts):
            raise EncodingError(f"expected {len(layout)} parts, got {len(parts)}")
        for p, (mod, enc, length) in zip(parts, layout):
            if (p.modality, p.encoder) != (mod, enc):
                raise EncodingError(f"part {p.modality}:{p.encoder} where {mod}:{enc} was expected")
            if len(p) != length:
                raise EncodingError(f"{mod}:{enc} has length {len(p)}, expected {length}")
    if len(parts) == 1:
        return parts[0]
    offsets = np.cumsum([0] + [len(p) for p in parts[:-1]])
    provenance = tuple((p.modality, p.encoder, int(o), len(p)) for p, o in zip(parts, offsets))
    return EncodedImage(image_id, "fused", "concat", np.concatenate([p.values for p in parts]), provenance)
