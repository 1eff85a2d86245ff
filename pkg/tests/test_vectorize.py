"""Embedding, vector exchange format, PCA reduction, cosine similarity."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paperatlas.errors import ValidationError
from paperatlas.vectorize import (
    ReductionConfig,
    VectorSet,
    _bucket,
    cosine_similarity,
    embed_corpus,
    embed_text,
    export_vectors,
    import_vectors,
    ngrams,
    reduce_dims,
    tokenize,
)


class TestEmbed:
    def test_deterministic(self):
        a = embed_text("Graph networks", "A study of message passing.", 256)
        b = embed_text("Graph networks", "A study of message passing.", 256)
        assert a.tobytes() == b.tobytes()

    def test_empty_text_gives_zero_vector(self):
        v = embed_text("", "", 64)
        assert not np.any(v)

    def test_unit_norm(self):
        v = embed_text("one two", "three four five", 128)
        assert abs(np.linalg.norm(v) - 1.0) < 1e-6

    def test_tokenize_on_non_alphanumerics(self):
        assert tokenize("Port-Hamiltonian (2024)!") == ["port", "hamiltonian", "2024"]

    def test_ngrams_range(self):
        assert ngrams(["a", "b", "c"]) == ["a", "b", "c", "a b", "b c"]

    def test_disjoint_docs_have_zero_cosine_at_collision_free_dim(self):
        # 5-token corpus; first verify the hash assigns distinct buckets,
        # then check exact TF against a hand-built vector.
        doc1 = ("alpha beta", "gamma")
        doc2 = ("delta", "epsilon")
        terms = (["alpha", "beta", "gamma", "alpha beta", "beta gamma"]
                 + ["delta", "epsilon", "delta epsilon"])
        buckets = {t: _bucket(t, 4096) for t in terms}
        assert len(set(buckets.values())) == len(terms), "hash collision at dim 4096"

        v1 = embed_text(*doc1, 4096)
        v2 = embed_text(*doc2, 4096)
        assert cosine_similarity(v1, v2) == 0.0

        expected = np.zeros(4096)
        for t in ["alpha", "beta", "gamma", "alpha beta", "beta gamma"]:
            expected[buckets[t]] += 1.0
        expected /= np.linalg.norm(expected)
        np.testing.assert_array_equal(v1, expected)

    def test_embed_corpus_matches_embed_text(self):
        texts = [("a", "Graph nets", "message passing"),
                 ("b", "", ""),
                 ("c", "Diffusion", "image synthesis models")]
        vs = embed_corpus(texts, dim=128)
        for row, (rid, title, abstract) in zip(vs.vectors, texts):
            np.testing.assert_array_equal(row, embed_text(title, abstract, 128))
        assert vs.zero_rows.tolist() == [False, True, False]

    @given(st.text(max_size=40), st.text(max_size=40))
    @settings(max_examples=50, deadline=None)
    def test_norm_invariant(self, title, abstract):
        v = embed_text(title, abstract, 64)
        norm = np.linalg.norm(v)
        assert norm == 0.0 or abs(norm - 1.0) < 1e-6


class TestExchangeFormat:
    def _vs(self):
        rows = np.array([[0.6, 0.8, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        return VectorSet(ids=["a", "b", "c"], vectors=rows)

    def test_round_trip(self, tmp_path):
        vs = self._vs()
        path = tmp_path / "v.jsonl"
        export_vectors(vs, path)
        loaded = import_vectors(path, ["a", "b", "c"])
        np.testing.assert_allclose(loaded.vectors, vs.vectors, atol=1e-8)
        assert loaded.zero_rows.tolist() == [False, True, False]
        assert loaded.space_tag == "embedding"

    def test_nine_significant_digits(self, tmp_path):
        vs = VectorSet(ids=["a"], vectors=np.array([[1 / 3, 2 / 3]]))
        path = tmp_path / "v.jsonl"
        export_vectors(vs, path)
        body = path.read_text().splitlines()[1]
        assert "0.333333333" in body

    def test_missing_id_named(self, tmp_path):
        path = tmp_path / "v.jsonl"
        export_vectors(self._vs(), path)
        with pytest.raises(ValidationError, match="missing id: d"):
            import_vectors(path, ["a", "b", "c", "d"])

    def test_dim_mismatch(self, tmp_path):
        path = tmp_path / "v.jsonl"
        path.write_text('{"dim": 2, "count": 1}\n{"id": "a", "v": [1.0]}\n')
        with pytest.raises(ValidationError, match="dim"):
            import_vectors(path, ["a"])

    def test_reduced_rows_not_renormalized(self, tmp_path):
        vs = VectorSet(ids=["a"], vectors=np.array([[3.0, 4.0]]),
                       space_tag="reduced")
        path = tmp_path / "v.jsonl"
        export_vectors(vs, path)
        loaded = import_vectors(path, ["a"], space_tag="reduced")
        np.testing.assert_allclose(loaded.vectors, [[3.0, 4.0]])


class TestReduce:
    def test_collinear_points_to_one_component(self):
        pts = np.array([[0.0, 0, 0], [1, 1, 1], [3, 3, 3]])
        vs = VectorSet(ids=["a", "b", "c"], vectors=pts,
                       zero_rows=np.zeros(3, bool))
        red = reduce_dims(vs, ReductionConfig(n_components=1))
        assert red.space_tag == "reduced"
        got = np.abs(np.diff(red.vectors[:, 0]))
        want = [np.linalg.norm(pts[1] - pts[0]), np.linalg.norm(pts[2] - pts[1])]
        np.testing.assert_allclose(got, want, atol=1e-12)

        # independent eigendecomposition oracle on the 3x3 covariance
        centered = pts - pts.mean(axis=0)
        cov = centered.T @ centered / 2
        eigvals, eigvecs = np.linalg.eigh(cov)
        direction = eigvecs[:, -1]
        oracle = centered @ direction
        np.testing.assert_allclose(np.abs(red.vectors[:, 0]), np.abs(oracle),
                                   atol=1e-12)

    def test_full_dim_preserves_distances(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(20, 8))
        vs = VectorSet(ids=[str(i) for i in range(20)], vectors=pts,
                       zero_rows=np.zeros(20, bool))
        red = reduce_dims(vs, ReductionConfig(n_components=8))
        before = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
        after = np.linalg.norm(red.vectors[:, None] - red.vectors[None, :], axis=2)
        np.testing.assert_allclose(after, before, atol=1e-9)
        np.testing.assert_allclose(red.vectors.mean(axis=0), 0.0, atol=1e-9)

    def test_captured_variance_equals_top_eigenvalues(self):
        rng = np.random.default_rng(11)
        pts = rng.normal(size=(100, 50))
        vs = VectorSet(ids=[str(i) for i in range(100)], vectors=pts,
                       zero_rows=np.zeros(100, bool))
        red = reduce_dims(vs, ReductionConfig(n_components=10))
        centered = red.vectors - red.vectors.mean(axis=0)
        captured = (centered ** 2).sum() / 99
        # brute-force eigenvalue oracle
        c = pts - pts.mean(axis=0)
        eigvals = np.linalg.eigvalsh(c.T @ c / 99)
        expected = eigvals[-10:].sum()
        assert abs(captured - expected) / expected < 1e-6

    def test_deterministic_for_fixed_input(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(size=(30, 12))
        vs = VectorSet(ids=[str(i) for i in range(30)], vectors=pts,
                       zero_rows=np.zeros(30, bool))
        a = reduce_dims(vs, ReductionConfig(n_components=4))
        b = reduce_dims(vs, ReductionConfig(n_components=4))
        assert a.vectors.tobytes() == b.vectors.tobytes()

    def test_sign_convention(self):
        rng = np.random.default_rng(9)
        pts = rng.normal(size=(25, 6))
        vs = VectorSet(ids=[str(i) for i in range(25)], vectors=pts,
                       zero_rows=np.zeros(25, bool))
        red = reduce_dims(vs, ReductionConfig(n_components=6))
        # flipping input order of rows must not change column signs
        perm = rng.permutation(25)
        vs2 = VectorSet(ids=[str(i) for i in perm], vectors=pts[perm],
                        zero_rows=np.zeros(25, bool))
        red2 = reduce_dims(vs2, ReductionConfig(n_components=6))
        np.testing.assert_allclose(red2.vectors, red.vectors[perm], atol=1e-9)

    def test_too_many_components_rejected(self):
        vs = VectorSet(ids=["a", "b"], vectors=np.eye(2))
        with pytest.raises(ValidationError, match="n_components"):
            reduce_dims(vs, ReductionConfig(n_components=3))

    def test_too_few_samples_rejected(self):
        vs = VectorSet(ids=["a"], vectors=np.ones((1, 4)))
        with pytest.raises(ValidationError, match="at least 2"):
            reduce_dims(vs, ReductionConfig(n_components=2))

    def test_zero_rows_excluded_from_fit_but_transformed(self):
        rng = np.random.default_rng(13)
        pts = rng.normal(size=(10, 4))
        pts[3] = 0.0
        vs = VectorSet(ids=[str(i) for i in range(10)], vectors=pts)
        red = reduce_dims(vs, ReductionConfig(n_components=2))
        assert red.zero_rows[3]
        assert red.vectors.shape == (10, 2)


class TestCosine:
    def test_self_similarity(self):
        v = np.array([0.6, 0.8])
        assert abs(cosine_similarity(v, v) - 1.0) < 1e-9

    def test_orthogonal(self):
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_known_angle(self):
        u = np.array([1.0, 0.0])
        v = np.array([1.0, 1.0]) / np.sqrt(2)
        assert abs(cosine_similarity(u, v) - 0.70710678) < 1e-8

    def test_zero_vector_flagged(self):
        sim, degenerate = cosine_similarity(
            np.zeros(3), np.array([1.0, 0, 0]), with_flag=True)
        assert sim == 0.0 and degenerate

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        u, v = rng.normal(size=4), rng.normal(size=4)
        assert cosine_similarity(u, v) == cosine_similarity(v, u)
