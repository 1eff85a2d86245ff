"""Document vectors: hashed term-frequency embedding, import/export, PCA.

The built-in encoder is a deterministic feature-hashed unigram+bigram
term-frequency embedder: self-contained and reproducible across machines
(the hash is content-derived, never process-salted). Deployments with a
sentence-embedding model export its vectors and import them through the
exchange format instead; the pipeline downstream is identical.

Dimensionality reduction is exact PCA via eigendecomposition of the
centered covariance, with a fixed sign convention so results are
bit-reproducible. A provenance profile for externally computed manifold
reductions (n_components=40, n_neighbors=120, min_dist=0.08, cosine
metric, random_state=42) is shipped in :data:`EXTERNAL_REDUCTION_PROFILE`
for users who reduce outside this package and import the result.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError

#: Parameters of the manifold reduction used by upstream deployments;
#: recorded for provenance only, never executed here.
EXTERNAL_REDUCTION_PROFILE = {
    "method": "umap",
    "n_components": 40,
    "n_neighbors": 120,
    "min_dist": 0.08,
    "metric": "cosine",
    "random_state": 42,
}

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


def ngrams(tokens: list[str], ngram_range: tuple[int, int] = (1, 2)) -> list[str]:
    """All n-grams (space-joined) for n in the inclusive range."""
    lo, hi = ngram_range
    out: list[str] = []
    for n in range(lo, hi + 1):
        if n == 1:
            out.extend(tokens)
        else:
            out.extend(
                " ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1)
            )
    return out


def _bucket(term: str, dim: int) -> int:
    digest = hashlib.blake2b(term.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dim


def embed_text(title: str, abstract: str, dim: int = 512) -> np.ndarray:
    """Deterministic hashed TF vector of the concatenated title + abstract.

    The text is lowercased, tokenized on non-alphanumerics, expanded to
    unigrams and bigrams, and counts are hashed into ``dim`` buckets,
    then L2-normalized. Empty text yields the zero vector (the caller
    records the zero-text flag).
    """
    if dim < 2:
        raise ValidationError(f"embedding dim must be >= 2, got {dim}")
    vec = np.zeros(dim, dtype=np.float64)
    tokens = tokenize(f"{title}. {abstract}")
    if not tokens:
        return vec
    for term in ngrams(tokens):
        vec[_bucket(term, dim)] += 1.0
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


@dataclass
class VectorSet:
    """Id-aligned dense vectors, one row per record id.

    ``space_tag`` is "embedding" (unit rows, except zero-text rows) or
    "reduced". ``zero_rows`` marks rows whose source text was empty;
    such rows are excluded from clustering.
    """

    ids: list[str]
    vectors: np.ndarray
    space_tag: str = "embedding"
    zero_rows: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.ids):
            raise ValidationError(
                f"vector matrix shape {self.vectors.shape} does not match "
                f"{len(self.ids)} ids"
            )
        if self.zero_rows is None:
            self.zero_rows = ~np.any(self.vectors, axis=1)
        self.zero_rows = np.asarray(self.zero_rows, dtype=bool)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.ids)


def embed_corpus(texts: list[tuple[str, str, str]], dim: int = 512) -> VectorSet:
    """Embed (id, title, abstract) triples into a VectorSet.

    Term buckets are memoized across documents, which matters on large
    corpora where the vocabulary is heavily reused.
    """
    bucket_cache: dict[str, int] = {}
    rows = np.zeros((len(texts), dim), dtype=np.float64)
    ids: list[str] = []
    for i, (rid, title, abstract) in enumerate(texts):
        ids.append(rid)
        tokens = tokenize(f"{title}. {abstract}")
        for term in ngrams(tokens):
            idx = bucket_cache.get(term)
            if idx is None:
                idx = _bucket(term, dim)
                bucket_cache[term] = idx
            rows[i, idx] += 1.0
    norms = np.linalg.norm(rows, axis=1)
    nonzero = norms > 0.0
    rows[nonzero] /= norms[nonzero, None]
    return VectorSet(ids=ids, vectors=rows, space_tag="embedding",
                     zero_rows=~nonzero)


def export_vectors(vs: VectorSet, path: str | Path) -> None:
    """Write the exchange format: a header line then one JSON line per id.

    Reals are serialized with 9 significant digits.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write('{"dim":%d,"count":%d}\n' % (vs.dim, len(vs)))
        for rid, row in zip(vs.ids, vs.vectors):
            values = ",".join(format(x, ".9g") for x in row)
            fh.write('{"id":%s,"v":[%s]}\n' % (json.dumps(rid), values))


def import_vectors(path: str | Path, ids: list[str],
                   space_tag: str = "embedding") -> VectorSet:
    """Load an exchange-format file and align it to the expected ids.

    Embedding-space rows are re-normalized to unit norm; all-zero rows
    are flagged zero-text. Rows in "reduced" space are taken as-is.
    Raises :class:`ValidationError` naming the first missing or
    unexpected id, or on any dim mismatch.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
            dim, count = int(header["dim"]), int(header["count"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            raise ValidationError(f"{path}: bad vector-file header")
        by_id: dict[str, np.ndarray] = {}
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            vec = np.asarray(row["v"], dtype=np.float64)
            if vec.shape != (dim,):
                raise ValidationError(
                    f"id {row['id']}: vector has dim {vec.shape[0]}, header says {dim}"
                )
            by_id[str(row["id"])] = vec
    if len(by_id) != count:
        raise ValidationError(
            f"{path}: header count {count} but {len(by_id)} rows present"
        )
    for rid in ids:
        if rid not in by_id:
            raise ValidationError(f"vector file missing id: {rid}")
    unexpected = set(by_id) - set(ids)
    if unexpected:
        raise ValidationError(f"vector file has unexpected id: {sorted(unexpected)[0]}")

    matrix = np.stack([by_id[rid] for rid in ids])
    norms = np.linalg.norm(matrix, axis=1)
    zero = norms == 0.0
    if space_tag == "embedding":
        matrix[~zero] /= norms[~zero, None]
    return VectorSet(ids=list(ids), vectors=matrix, space_tag=space_tag,
                     zero_rows=zero)


@dataclass
class ReductionConfig:
    method: str = "pca"  # "pca" or "import"
    n_components: int = 40
    seed: int = 42
    import_path: str | None = None

    def __post_init__(self):
        if self.method not in ("pca", "import"):
            raise ValidationError(f"unknown reduction method: {self.method}")
        if self.n_components < 1:
            raise ValidationError("n_components must be positive")


def reduce_dims(vs: VectorSet, cfg: ReductionConfig) -> VectorSet:
    """Exact PCA of an embedding-space VectorSet.

    Components come from an eigendecomposition of the centered sample
    covariance, ordered by descending eigenvalue, each signed so that
    its largest-magnitude loading is positive. Zero-text rows do not
    participate in the fit but are transformed like every other row.
    """
    if cfg.method != "pca":
        raise ValidationError("reduce_dims only computes PCA; use import_vectors "
                              "for externally reduced spaces")
    if vs.space_tag != "embedding":
        raise ValidationError(f"expected embedding-space vectors, got {vs.space_tag!r}")
    if cfg.n_components > vs.dim:
        raise ValidationError(
            f"n_components={cfg.n_components} exceeds input dim {vs.dim}"
        )
    fit_rows = vs.vectors[~vs.zero_rows]
    if fit_rows.shape[0] < 2:
        raise ValidationError("PCA needs at least 2 non-empty rows")

    mean = fit_rows.mean(axis=0)
    centered = fit_rows - mean
    cov = centered.T @ centered / (fit_rows.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][: cfg.n_components]
    components = eigvecs[:, order].T  # (k, dim)
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0

    reduced = (vs.vectors - mean) @ components.T
    return VectorSet(ids=list(vs.ids), vectors=reduced, space_tag="reduced",
                     zero_rows=vs.zero_rows.copy())


def captured_variance(vs: VectorSet, reduced: VectorSet) -> float:
    """Total sample variance of the reduced coordinates (fit rows only)."""
    rows = reduced.vectors[~reduced.zero_rows]
    centered = rows - rows.mean(axis=0)
    return float((centered ** 2).sum() / (rows.shape[0] - 1))


def cosine_similarity(u: np.ndarray, v: np.ndarray, *, with_flag: bool = False):
    """Standard cosine similarity in [-1, 1].

    A zero vector on either side yields 0.0; pass ``with_flag=True`` to
    also receive a degenerate-input indicator.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return (0.0, True) if with_flag else 0.0
    sim = float(np.dot(u, v) / (nu * nv))
    sim = max(-1.0, min(1.0, sim))
    return (sim, False) if with_flag else sim
