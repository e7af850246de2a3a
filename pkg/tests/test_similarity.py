import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from groundline.captioner import CaptionTrack
from groundline.core import FrameTimeline, Query
from groundline.gateway import Gateway, OfflineEmbedProvider
from groundline.querygen import DebiasedQuerySet
from groundline.similarity import (
    DimensionMismatch,
    ZeroVector,
    build_similarity,
    cosine,
    cosine_matrix,
    decode_matrix,
    encode_matrix,
    read_matrix,
    write_matrix,
)

vec = arrays(np.float64, 6, elements=st.floats(-10, 10, allow_nan=False)).filter(lambda v: np.linalg.norm(v) > 1e-3)


def track(captions, fps=0.5):
    tl = FrameTimeline.synthetic("v", len(captions), fps)
    return CaptionTrack("v", tl, tuple(captions))


def test_cosine_examples():
    assert cosine(np.array([0.6, 0.8]), np.array([0.6, 0.8])) == pytest.approx(1.0)
    assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0
    assert cosine(np.array([0.6, 0.8]), np.array([1.0, 0.0])) == pytest.approx(0.6, abs=1e-15)


def test_cosine_errors():
    with pytest.raises(DimensionMismatch):
        cosine(np.ones(2), np.ones(3))
    with pytest.raises(ZeroVector):
        cosine(np.zeros(2), np.ones(2))


@given(vec, vec, st.floats(0.01, 100))
def test_cosine_scale_invariant(a, b, c):
    raw = float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
    assert cosine(a * c, b) == pytest.approx(raw, abs=1e-12)
    assert -1.0 <= cosine(a, b) <= 1.0


def test_matrix_shape_and_range():
    rng = np.random.default_rng(0)
    m = cosine_matrix(rng.normal(size=(5, 16)), rng.normal(size=(150, 16)))
    assert m.shape == (5, 150)
    assert np.all(np.isfinite(m)) and m.min() >= -1 and m.max() <= 1


def test_build_similarity_properties():
    captions = [f"a frame showing object {i}" for i in range(10)] + ["a dog on the beach"]
    qs = DebiasedQuerySet(Query("q", "dog beach"), ("a dog on the beach",) * 3 + ("cat", "sofa"))
    emb = OfflineEmbedProvider(dim=256)
    m = build_similarity(qs, track(captions), Gateway(embed_provider=emb))
    assert m.values.shape == (5, 11)
    np.testing.assert_array_equal(m.values[0], m.values[1])
    assert m.values[0].argmax() == 10 and m.values[0, 10] == pytest.approx(1.0, abs=1e-12)


def test_build_similarity_column_permutation():
    captions = ["red car", "blue sky", "green tree", "a dog", "yellow sun"]
    qs = DebiasedQuerySet(Query("q", "dog"), ("a dog", "red car"))
    gw = Gateway(embed_provider=OfflineEmbedProvider(dim=128))
    perm = [3, 0, 4, 1, 2]
    a = build_similarity(qs, track(captions), gw).values
    b = build_similarity(qs, track([captions[i] for i in perm]), gw).values
    np.testing.assert_array_equal(a[:, perm], b)


def test_each_text_embedded_once():
    class Counting(OfflineEmbedProvider):
        seen = []

        def embed(self, texts, model_id):
            self.seen.extend(texts)
            return super().embed(texts, model_id)

    emb = Counting(dim=64)
    qs = DebiasedQuerySet(Query("q", "x"), ("x y",) * 5)
    build_similarity(qs, track(["c1", "c2", "c1"]), Gateway(embed_provider=emb))
    assert sorted(emb.seen) == ["c1", "c2", "x y"]


def test_matrix_file_roundtrip(tmp_path):
    vals = np.random.default_rng(1).uniform(-1, 1, (5, 40))
    path = tmp_path / "m.glsm"
    write_matrix(vals, path)
    m = read_matrix(path, 0.5, "vid", duration=80.0)
    np.testing.assert_allclose(m.values, vals, atol=1e-7)
    assert m.timeline.n_frames == 40 and m.timeline.fps == 0.5


def test_matrix_file_validation():
    data = encode_matrix(np.zeros((2, 3)))
    assert decode_matrix(data).shape == (2, 3)
    with pytest.raises(ValueError, match="magic"):
        decode_matrix(b"XXXX" + data[4:])
    with pytest.raises(ValueError):
        decode_matrix(data[:-1])
