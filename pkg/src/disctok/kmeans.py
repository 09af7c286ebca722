"""Full-batch (and optional mini-batch) k-means for codebook training.

Semantics are pinned for reproducibility:
  - k-means++ seeding: first center uniform over frames, subsequent centers
    sampled with probability proportional to squared distance to the nearest
    chosen center (no greedy local trials).
  - Assignment ties break to the lowest cluster index.
  - Inertia is computed against the centroids used for the assignment, i.e.
    before the mean update, so full-batch inertia is non-increasing.
  - Empty clusters are repaired by moving the empty centroid onto the frame
    farthest from its assigned centroid.
All distance arithmetic runs in float64 regardless of input dtype.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin

from .errors import (
    DimensionMismatchError,
    EmptyInputError,
    FeatureFormatError,
    FeatureVersionError,
    InsufficientDataError,
    TruncatedFileError,
)

CODEBOOK_MAGIC = b"DTKC"
CODEBOOK_VERSION = 1
_CB_HEADER = struct.Struct("<4sIII")


def _as_frames(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"expected 2-D frame array, got shape {X.shape}")
    if X.shape[0] == 0:
        raise EmptyInputError("no frames given")
    if not np.isfinite(X).all():
        raise ValueError("frames contain NaN or Inf")
    return X


def _squared_distances(frames: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, (n_frames, n_centroids).

    Uses the expanded dot-product identity in float64; negatives from
    rounding are clamped to zero.
    """
    f2 = np.einsum("ij,ij->i", frames, frames)[:, None]
    c2 = np.einsum("ij,ij->i", centroids, centroids)[None, :]
    d = f2 + c2 - 2.0 * (frames @ centroids.T)
    np.maximum(d, 0.0, out=d)
    return d


def _squared_distances_chunked(frames, centroids, chunk=8192):
    out = np.empty((frames.shape[0], centroids.shape[0]))
    for start in range(0, frames.shape[0], chunk):
        out[start : start + chunk] = _squared_distances(
            frames[start : start + chunk], centroids
        )
    return out


def kmeanspp_init(frames, n_clusters: int, seed) -> np.ndarray:
    """k-means++ seeding; every returned centroid is an actual data frame."""
    frames = _as_frames(frames)
    if n_clusters < 2:
        raise ValueError(f"n_clusters must be >= 2, got {n_clusters}")
    if len(np.unique(frames, axis=0)) < n_clusters:
        raise InsufficientDataError(
            f"need at least {n_clusters} distinct frames for {n_clusters} clusters"
        )
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    n = frames.shape[0]
    centers = np.empty((n_clusters, frames.shape[1]))
    first = rng.integers(n)
    centers[0] = frames[first]
    closest = _squared_distances_chunked(frames, centers[:1])[:, 0]
    for k in range(1, n_clusters):
        total = closest.sum()
        if total <= 0.0:
            # All remaining mass on already-chosen points; pick any unseen
            # distinct frame (cannot happen given the distinctness check,
            # kept as a guard against float underflow).
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centers[k] = frames[idx]
        d_new = _squared_distances_chunked(frames, centers[k : k + 1])[:, 0]
        np.minimum(closest, d_new, out=closest)
    return centers


def lloyd_step(frames, centroids) -> tuple[np.ndarray, float]:
    """One Lloyd iteration: returns (updated centroids, pre-update inertia)."""
    frames = _as_frames(frames)
    centroids = np.asarray(centroids, dtype=np.float64)
    if frames.shape[1] != centroids.shape[1]:
        raise DimensionMismatchError(
            f"frames have dim {frames.shape[1]}, centroids {centroids.shape[1]}"
        )
    dists = _squared_distances_chunked(frames, centroids)
    labels = dists.argmin(axis=1)  # argmin takes the lowest index on ties
    point_d = dists[np.arange(len(frames)), labels]
    inertia = float(point_d.sum())

    k = centroids.shape[0]
    counts = np.bincount(labels, minlength=k)
    sums = np.zeros_like(centroids)
    np.add.at(sums, labels, frames)
    new_centroids = centroids.copy()
    nonempty = counts > 0
    new_centroids[nonempty] = sums[nonempty] / counts[nonempty, None]

    # Empty-cluster repair: claim the frame farthest from its centroid,
    # one frame per empty cluster in index order.
    farthest_pool = point_d.copy()
    for j in np.flatnonzero(~nonempty):
        idx = int(farthest_pool.argmax())
        new_centroids[j] = frames[idx]
        farthest_pool[idx] = -1.0
    return new_centroids, inertia


@dataclass(frozen=True)
class TrainConfig:
    max_iterations: int = 300
    rel_tolerance: float = 1e-6
    batch_size: int | str = "full"
    empty_cluster_policy: str = "reassign_farthest"

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.rel_tolerance <= 0:
            raise ValueError("rel_tolerance must be > 0")
        if self.empty_cluster_policy != "reassign_farthest":
            raise ValueError(f"unknown policy {self.empty_cluster_policy!r}")


@dataclass(frozen=True)
class Codebook:
    centroids: np.ndarray  # (K, D) float64
    train_language: str
    ssl_layer: int
    seed: int
    final_inertia: float
    n_train_frames: int

    @property
    def cluster_size(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    @property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.centroids, dtype="<f8").tobytes())
        h.update(str(self.centroids.shape).encode())
        return h.hexdigest()[:16]


class KMeansQuantizer(BaseEstimator, ClusterMixin, TransformerMixin):
    """sklearn-style k-means vector quantizer.

    fit(X) learns `n_clusters` centroids from pooled frames, predict(X)
    returns token ids, transform(X) returns squared distances to every
    centroid. Deterministic given (X, params, random_state).
    """

    def __init__(self, n_clusters=128, max_iter=300, tol=1e-6,
                 batch_size="full", random_state=0):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.tol = tol
        self.batch_size = batch_size
        self.random_state = random_state

    def fit(self, X, y=None):
        frames = _as_frames(X)
        rng = np.random.default_rng(self.random_state)
        centroids = kmeanspp_init(frames, self.n_clusters, rng)
        full_batch = self.batch_size == "full" or self.batch_size is None

        if full_batch:
            prev_inertia = np.inf
            inertia = np.inf
            history = []
            for _ in range(self.max_iter):
                centroids, inertia = lloyd_step(frames, centroids)
                history.append(inertia)
                if prev_inertia < np.inf:
                    rel = (prev_inertia - inertia) / max(prev_inertia, 1e-300)
                    if rel < self.tol:
                        break
                prev_inertia = inertia
            self.inertia_history_ = history
        else:
            batch = int(self.batch_size)
            if batch < self.n_clusters:
                raise ValueError("batch_size must be >= n_clusters")
            n = frames.shape[0]
            counts = np.zeros(self.n_clusters)
            for _ in range(self.max_iter):
                idx = rng.choice(n, size=min(batch, n), replace=False)
                sub = frames[idx]
                d = _squared_distances_chunked(sub, centroids)
                labels = d.argmin(axis=1)
                for j in np.unique(labels):
                    members = sub[labels == j]
                    counts[j] += len(members)
                    eta = len(members) / counts[j]
                    centroids[j] = (1 - eta) * centroids[j] + eta * members.mean(axis=0)
            d = _squared_distances_chunked(frames, centroids)
            inertia = float(d.min(axis=1).sum())
            self.inertia_history_ = [inertia]

        self.cluster_centers_ = centroids
        self.inertia_ = float(inertia)
        self.n_features_in_ = frames.shape[1]
        self.n_train_frames_ = frames.shape[0]
        return self

    def _check_fitted(self):
        if not hasattr(self, "cluster_centers_"):
            raise RuntimeError("KMeansQuantizer is not fitted")

    def transform(self, X):
        self._check_fitted()
        frames = _as_frames(X)
        if frames.shape[1] != self.n_features_in_:
            raise DimensionMismatchError(
                f"expected dim {self.n_features_in_}, got {frames.shape[1]}"
            )
        return _squared_distances_chunked(frames, self.cluster_centers_)

    def predict(self, X):
        return self.transform(X).argmin(axis=1)

    def to_codebook(self, train_language="", ssl_layer=-1, seed=None) -> Codebook:
        self._check_fitted()
        return Codebook(
            centroids=self.cluster_centers_.copy(),
            train_language=train_language,
            ssl_layer=ssl_layer,
            seed=int(self.random_state if seed is None else seed),
            final_inertia=self.inertia_,
            n_train_frames=self.n_train_frames_,
        )


def train(frames, n_clusters, config: TrainConfig | None = None, seed=0,
          train_language="", ssl_layer=-1) -> Codebook:
    """Train a codebook over pooled frames; records provenance."""
    config = config or TrainConfig()
    est = KMeansQuantizer(
        n_clusters=n_clusters,
        max_iter=config.max_iterations,
        tol=config.rel_tolerance,
        batch_size=config.batch_size,
        random_state=seed,
    ).fit(frames)
    return est.to_codebook(train_language=train_language, ssl_layer=ssl_layer, seed=seed)


def assign(frame, codebook: Codebook) -> tuple[int, float]:
    """Nearest-centroid assignment for a single frame."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 1:
        raise ValueError("assign expects a single frame")
    if frame.shape[0] != codebook.dim:
        raise DimensionMismatchError(
            f"frame dim {frame.shape[0]} != codebook dim {codebook.dim}"
        )
    d = _squared_distances(frame[None, :], codebook.centroids)[0]
    token = int(d.argmin())
    return token, float(d[token])


def assign_batch(frames, codebook: Codebook) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized assignment: (token ids, squared distances) per frame."""
    frames = _as_frames(frames)
    if frames.shape[1] != codebook.dim:
        raise DimensionMismatchError(
            f"frames dim {frames.shape[1]} != codebook dim {codebook.dim}"
        )
    d = _squared_distances_chunked(frames, codebook.centroids)
    tokens = d.argmin(axis=1)
    return tokens, d[np.arange(len(frames)), tokens]


def quantization_error(matrices, codebook: Codebook) -> float:
    """Mean over all frames of squared distance to the assigned centroid."""
    total = 0.0
    n = 0
    for matrix in matrices:
        _, dists = assign_batch(matrix, codebook)
        total += float(dists.sum())
        n += len(dists)
    if n == 0:
        raise EmptyInputError("quantization_error needs at least one frame")
    return total / n


def save_codebook(codebook: Codebook, path) -> None:
    """DTKC container: header, float64 centroids row-major, JSON metadata trailer."""
    k, d = codebook.centroids.shape
    meta = {
        "train_language": codebook.train_language,
        "ssl_layer": codebook.ssl_layer,
        "seed": codebook.seed,
        "final_inertia": codebook.final_inertia,
        "n_train_frames": codebook.n_train_frames,
    }
    with open(path, "wb") as fh:
        fh.write(_CB_HEADER.pack(CODEBOOK_MAGIC, CODEBOOK_VERSION, k, d))
        fh.write(np.ascontiguousarray(codebook.centroids, dtype="<f8").tobytes())
        fh.write(json.dumps(meta, sort_keys=True).encode("utf-8"))


def load_codebook(path) -> Codebook:
    with open(path, "rb") as fh:
        header = fh.read(_CB_HEADER.size)
        if len(header) < _CB_HEADER.size:
            raise TruncatedFileError(f"{path}: file shorter than header")
        magic, version, k, d = _CB_HEADER.unpack(header)
        if magic != CODEBOOK_MAGIC:
            raise FeatureFormatError(f"{path}: bad magic {magic!r}")
        if version != CODEBOOK_VERSION:
            raise FeatureVersionError(f"{path}: unsupported version {version}")
        expected = k * d * 8
        payload = fh.read(expected)
        if len(payload) < expected:
            raise TruncatedFileError(f"{path}: truncated centroid payload")
        trailer = fh.read()
    centroids = np.frombuffer(payload, dtype="<f8").reshape(k, d).copy()
    meta = json.loads(trailer.decode("utf-8"))
    return Codebook(
        centroids=centroids,
        train_language=meta["train_language"],
        ssl_layer=int(meta["ssl_layer"]),
        seed=int(meta["seed"]),
        final_inertia=float(meta["final_inertia"]),
        n_train_frames=int(meta["n_train_frames"]),
    )
