import re
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groupaffect.codebook import Codebook, GmmModel
from groupaffect.encoder import (EmptyImageError, EncodedImage, EncodingError, Vocabulary, build_vocabulary,
                                 fixed_size_vocabulary,
                                 bow_counts, concatenate, encode_bow, encode_gmm, encode_tf, encode_vlad,
                                 encode_wa, encoded_length, tokenize, vlad_residuals)


def grid_book(k, d=1):
    return Codebook(np.arange(k, dtype=float)[:, None] * np.ones((1, d)) * 10.0, 0.0)


def random_book(rng, k, d):
    return Codebook(rng.normal(size=(k, d)), 0.0)


def tf_oracle(book, words):
    codes = [int(np.argmin(((book.centroids - w) ** 2).sum(axis=1))) for w in words]
    counts = Counter(codes)
    return np.array([float(Fraction(counts.get(j, 0), len(codes))) for j in range(book.k)])


def vlad_oracle(book, words):
    out = np.zeros_like(book.centroids)
    for w in words:
        j = int(np.argmin(((book.centroids - w) ** 2).sum(axis=1)))
        for d in range(book.dim):
            out[j, d] += w[d] - book.centroids[j, d]
    return out.ravel()


def test_tf_example():
    book = grid_book(8)
    v = encode_tf(book, [[30.0], [31.0], [70.0]]).values
    expected = np.zeros(8)
    expected[3], expected[7] = 2 / 3, 1 / 3
    np.testing.assert_array_equal(v, expected)


@pytest.mark.parametrize("code", [0, 4, 7])
def test_tf_single_word_one_hot(code):
    np.testing.assert_array_equal(encode_tf(grid_book(8), [[10.0 * code]]).values, np.eye(8)[code])


def test_tf_matches_count_oracle(rng):
    book = random_book(rng, 16, 5)
    words = rng.normal(size=(40, 5))
    np.testing.assert_array_equal(encode_tf(book, words).values, tf_oracle(book, words))


def test_empty_image_raises():
    with pytest.raises(EmptyImageError):
        encode_tf(grid_book(3), np.zeros((0, 1)))


def test_dimension_mismatch():
    with pytest.raises(EncodingError):
        encode_vlad(grid_book(3, 2), np.zeros((2, 3)))


def test_vlad_single_word_on_centroid_is_zero():
    v = encode_vlad(grid_book(4, 2), [[20.0, 20.0]]).values
    np.testing.assert_array_equal(v, np.zeros(8))


def test_vlad_symmetric_words_cancel():
    book = grid_book(3, 2)
    v = encode_vlad(book, [[11.0, 9.0], [9.0, 11.0], [0.5, 0.0]]).values.reshape(3, 2)
    np.testing.assert_array_equal(v[1], [0.0, 0.0])
    assert np.linalg.norm(v) == pytest.approx(1.0)


def test_vlad_matches_residual_oracle(rng):
    book = random_book(rng, 4, 3)
    words = rng.normal(size=(25, 3))
    raw = encode_vlad(book, words, normalize=False).values
    np.testing.assert_allclose(raw, vlad_oracle(book, words), rtol=1e-9, atol=1e-12)
    v = encode_vlad(book, words).values
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
    assert len(v) == encoded_length("vlad", k=4, dim=3)


def test_wa_single_cluster():
    book = grid_book(4, 3)
    np.testing.assert_array_equal(encode_wa(book, [[20.0, 20.0, 20.0], [21.0, 19.0, 20.0]]).values, [20.0] * 3)


def test_wa_even_split():
    book = grid_book(4, 2)
    np.testing.assert_allclose(encode_wa(book, [[0.0, 0.0], [10.0, 10.0]]).values, [5.0, 5.0])


def test_wa_equals_tf_times_centroids(rng):
    book = random_book(rng, 7, 4)
    words = rng.normal(size=(13, 4))
    expected = [sum(t * book.centroids[j, d] for j, t in enumerate(encode_tf(book, words).values)) for d in range(4)]
    np.testing.assert_allclose(encode_wa(book, words).values, expected, atol=1e-12)


def gmm_model():
    return GmmModel(np.array([0.5, 0.5]), np.array([[-50.0], [50.0]]), np.array([[1.0], [1.0]]))


def test_gmm_single_word_is_responsibility():
    m = GmmModel(np.array([0.2, 0.8]), np.array([[0.0], [1.0]]), np.array([[1.0], [2.0]]))
    np.testing.assert_array_equal(encode_gmm(m, [[0.3]]).values, m.responsibilities([[0.3]])[0])


def test_gmm_two_opposite_words():
    np.testing.assert_allclose(encode_gmm(gmm_model(), [[-50.0], [50.0]]).values, [0.5, 0.5], atol=1e-12)


def test_gmm_matches_per_word_average(rng):
    k, d = 5, 3
    m = GmmModel(rng.dirichlet(np.ones(k)), rng.normal(size=(k, d)), rng.uniform(0.5, 2, size=(k, d)))
    words = rng.normal(size=(11, d))
    total = np.zeros(k)
    for w in words:
        total += m.responsibilities(w[None, :])[0]
    v = encode_gmm(m, words).values
    np.testing.assert_allclose(v, total / len(words), atol=1e-14)
    assert v.sum() == pytest.approx(1.0, abs=1e-9)


def test_vocabulary_examples():
    assert build_vocabulary(["a man", "a dog"]).tokens == ("a", "dog", "man")
    assert build_vocabulary(["a man", "a dog"], min_count=2).tokens == ("a",)


def test_vocabulary_matches_word_count_script():
    captions = ["Two men, FIGHTING in a street!", "a woman-and a child smiling", "people sitting at a table", "",
                "crowd of 3 people"]
    seen = Counter()
    for cap in captions:
        seen.update(w for w in re.findall(r"[a-z0-9]+", cap.lower()))
    assert build_vocabulary(captions).tokens == tuple(sorted(seen))
    assert build_vocabulary(captions, min_count=2).tokens == tuple(sorted(w for w, c in seen.items() if c >= 2))
    assert tokenize("Hello,world  42x") == ["hello", "world", "42x"]


def test_fixed_size_vocabulary():
    corpus = ["b b a", "c b a d", "e"]
    assert fixed_size_vocabulary(corpus, 2).tokens == ("a", "b")
    padded = fixed_size_vocabulary(corpus, 7, min_count=2)
    assert padded.size == 7
    assert [t for t in padded.tokens if not t.startswith("#")] == ["a", "b"]
    assert encode_bow(padded, "a b b #pad00000").values.sum() == pytest.approx(1.0)
    assert np.count_nonzero(encode_bow(padded, "a b b #pad00000").values) == 2
    with pytest.raises(EncodingError):
        fixed_size_vocabulary(corpus, 0)


def test_vocabulary_must_be_sorted():
    with pytest.raises(EncodingError):
        Vocabulary(("b", "a"))


def test_bow_worked_example():
    vocab = Vocabulary(tuple(f"w{i}" for i in range(1, 7)))
    np.testing.assert_array_equal(bow_counts(vocab, "w3 w4 w2 w4"), [0, 1, 1, 2, 0, 0])
    np.testing.assert_array_equal(encode_bow(vocab, "w3 w4 w2 w4").values, np.array([0, 1, 1, 2, 0, 0]) / 4)


def test_bow_empty_caption():
    vocab = Vocabulary(("a", "b"))
    np.testing.assert_array_equal(encode_bow(vocab, "").values, [0.0, 0.0])
    np.testing.assert_array_equal(encode_bow(vocab, "zzz unseen").values, [0.0, 0.0])


def test_bow_matches_dictionary_counter(rng):
    tokens = tuple(sorted(f"t{i:02d}" for i in range(20)))
    vocab = Vocabulary(tokens)
    words = [tokens[i] for i in rng.integers(0, 20, size=30)]
    counts = {}
    for w in words:
        counts[w] = counts.get(w, 0) + 1
    expected = np.array([counts.get(t, 0) / len(words) for t in tokens])
    np.testing.assert_allclose(encode_bow(vocab, " ".join(words)).values, expected, atol=1e-15)


def part(n, mod="m", enc="e", image_id="x"):
    return EncodedImage(image_id, mod, enc, np.arange(n, dtype=float))


def test_concatenate_offsets():
    fused = concatenate([part(7905, "scene", "centrist"), part(2048, "face", "wa"), part(364, "text", "bow")])
    assert len(fused) == 10317
    assert [p[2] for p in fused.parts] == [0, 7905, 9953]
    assert (fused.modality, fused.encoder) == ("fused", "concat")


def test_concatenate_single_part_identity():
    p = part(5)
    assert concatenate([p]) is p


def test_face_set_length():
    lengths = [encoded_length("tf", k=1000), 1000, encoded_length("wa", dim=2048), encoded_length("gmm", k=512)]
    assert len(concatenate([part(n, "face", e) for n, e in zip(lengths, ["tf", "vlad", "wa", "gmm"])])) == 4560


def test_concatenate_checks():
    with pytest.raises(EncodingError):
        concatenate([part(2, image_id="a"), part(2, image_id="b")])
    with pytest.raises(EncodingError):
        concatenate([part(2, "face", "tf"), part(3, "face", "wa")], layout=[("face", "tf", 2), ("face", "wa", 4)])
    with pytest.raises(EncodingError):
        concatenate([])


def word_sets():
    return st.integers(0, 2**32 - 1).map(lambda s: np.random.default_rng(s))


@settings(max_examples=60, deadline=None)
@given(word_sets(), st.integers(1, 30), st.integers(1, 8), st.integers(1, 5))
def test_encoder_properties(rng, n, k, d):
    book = random_book(rng, k, d)
    gmm = GmmModel(rng.dirichlet(np.ones(k)), book.centroids, rng.uniform(0.3, 2, size=(k, d)))
    words = rng.normal(size=(n, d))
    tf = encode_tf(book, words).values
    assert tf.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(tf >= 0)
    np.testing.assert_allclose(tf * n, np.round(tf * n), atol=1e-9)

    perm = words[rng.permutation(n)]
    doubled = np.vstack([words, words])
    for fn, model in ((encode_tf, book), (encode_wa, book), (encode_gmm, gmm)):
        base = fn(model, words).values
        np.testing.assert_allclose(fn(model, perm).values, base, atol=1e-12)
        np.testing.assert_allclose(fn(model, doubled).values, base, atol=1e-12)

    raw = vlad_residuals(book, words).ravel()
    np.testing.assert_allclose(vlad_residuals(book, perm).ravel(), raw, atol=1e-12)
    np.testing.assert_allclose(vlad_residuals(book, doubled).ravel(), 2 * raw, atol=1e-12)
    v = encode_vlad(book, words).values
    if np.any(raw != 0):
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(encode_vlad(book, doubled).values, v, atol=1e-12)
    else:
        np.testing.assert_array_equal(v, 0.0)
    np.testing.assert_allclose(encode_wa(book, words).values, tf @ book.centroids, atol=1e-12)
