"""Embedding of violation texts and k-means partitioning for diverse selection.

The embedding backend is pluggable; tests use a deterministic feature-hashing
embedder. Clustering is Lloyd's algorithm with k-means++ seeding and
best-of-n_init restarts, recording the objective after every iteration so the
non-increasing property can be checked directly.
"""
from __future__ import annotations

import hashlib
import json
import re
import struct
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    NonFiniteInput,
    TooFewPoints,
    UncoveredVector,
)

_WORD_RE = re.compile(r"[a-z0-9]+")


class HashingEmbedder:
    """Deterministic test embedder: hashed word n-gram counts, L2-normalized."""

    def __init__(self, dim: int = 256, ngram_range: tuple[int, int] = (1, 2)):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.ngram_range = ngram_range
        self.embedder_id = f"hashing-{dim}-{ngram_range[0]}{ngram_range[1]}"

    def _buckets(self, text: str):
        words = _WORD_RE.findall(text.lower())
        lo, hi = self.ngram_range
        for n in range(lo, hi + 1):
            for i in range(len(words) - n + 1):
                gram = " ".join(words[i:i + n])
                digest = hashlib.md5(gram.encode("utf-8")).digest()
                yield int.from_bytes(digest[:8], "little") % self.dim

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        out = []
        for text in texts:
            vec = np.zeros(self.dim)
            for bucket in self._buckets(text):
                vec[bucket] += 1.0
            norm = np.linalg.norm(vec)
            if norm > 0:
                vec /= norm
            out.append(vec.tolist())
        return out


def embed(texts: Sequence[str], embedder) -> np.ndarray:
    """Embed texts into a uniform-dimension float matrix."""
    if any(not t for t in texts):
        raise ValueError("texts must be non-empty strings")
    raw = embedder.embed(list(texts))
    dims = {len(v) for v in raw}
    if len(dims) != 1:
        raise DimensionMismatch(f"backend returned dimensions {sorted(dims)}")
    mat = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(mat)):
        raise NonFiniteInput("embedding contains non-finite components")
    return mat


@dataclass
class ClusterModel:
    m: int
    centroids: np.ndarray  # (m, dim)
    assignment: dict[str, int]  # record id -> cluster index
    inertia: float
    seed: int
    # inertia recorded after each (assignment, update) pair of the best run
    inertia_history: list[float] = field(default_factory=list)

    def members(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = {i: [] for i in range(self.m)}
        for rid, ci in self.assignment.items():
            out[ci].append(rid)
        return out


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # (n, m) squared Euclidean distances
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("nmd,nmd->nm", diff, diff)


def _kmeanspp_init(points: np.ndarray, m: int, rng: np.random.Generator):
    n = len(points)
    centroids = np.empty((m, points.shape[1]))
    first = rng.integers(n)
    centroids[0] = points[first]
    closest = np.sum((points - centroids[0]) ** 2, axis=1)
    for i in range(1, m):
        total = closest.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(closest), r))
            idx = min(idx, n - 1)
        centroids[i] = points[idx]
        closest = np.minimum(closest, np.sum((points - centroids[i]) ** 2,
                                             axis=1))
    return centroids


def _repair_empty(points: np.ndarray, centroids: np.ndarray,
                  labels: np.ndarray, m: int) -> None:
    """Reseed each empty cluster to the point farthest from its own centroid.

    Donors from singleton clusters are skipped so repair never creates a new
    empty cluster; loops until every cluster is populated.
    """
    n = len(points)
    while True:
        counts = np.bincount(labels, minlength=m)
        empties = np.flatnonzero(counts == 0)
        if len(empties) == 0:
            return
        ci = int(empties[0])
        dist_to_own = np.sum((points - centroids[labels]) ** 2, axis=1)
        order = np.argsort(-dist_to_own)
        for donor in order:
            if counts[labels[donor]] > 1:
                labels[int(donor)] = ci
                break
        else:
            return  # m > distinct points; leave as is


def _lloyd(points: np.ndarray, m: int, rng: np.random.Generator,
           max_iter: int, tol: float):
    centroids = _kmeanspp_init(points, m, rng)
    # tol is relative to the data's overall spread, as in common libraries
    spread = np.linalg.norm(points - points.mean(axis=0))
    scale = max(spread / max(np.sqrt(len(points)), 1.0), 1e-12)
    history: list[float] = []
    labels = None
    for _ in range(max_iter):
        d2 = _sq_dists(points, centroids)
        labels = np.argmin(d2, axis=1)
        _repair_empty(points, centroids, labels, m)
        new_centroids = np.empty_like(centroids)
        for ci in range(m):
            new_centroids[ci] = points[labels == ci].mean(axis=0)
        d2_new = _sq_dists(points, new_centroids)
        inertia = float(d2_new[np.arange(len(points)), labels].sum())
        history.append(inertia)
        shift = np.linalg.norm(new_centroids - centroids)
        centroids = new_centroids
        if shift / scale < tol:
            break
    # final reassignment so labels match the returned centroids
    d2 = _sq_dists(points, centroids)
    labels = np.argmin(d2, axis=1)
    _repair_empty(points, centroids, labels, m)
    inertia = float(np.sum((points - centroids[labels]) ** 2))
    history.append(inertia)
    return centroids, labels, inertia, history


def kmeans(vectors: np.ndarray, m: int, seed: int,
           ids: Sequence[str] | None = None, n_init: int = 10,
           max_iter: int = 300, tol: float = 1e-4) -> ClusterModel:
    """Best-of-n_init Lloyd's k-means with k-means++ initialization."""
    points = np.asarray(vectors, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("vectors must be a 2-D array")
    if not np.all(np.isfinite(points)):
        raise NonFiniteInput("input vectors contain non-finite values")
    n = len(points)
    if m < 1 or m > n:
        raise TooFewPoints(f"m={m} with {n} points")
    if ids is None:
        ids = [str(i) for i in range(n)]
    if len(ids) != n:
        raise ValueError("ids length must match vectors")

    best = None
    for r in range(n_init):
        rng = np.random.default_rng(np.random.SeedSequence([seed, r]))
        result = _lloyd(points, m, rng, max_iter, tol)
        if best is None or result[2] < best[2]:
            best = result
    centroids, labels, inertia_val, history = best
    assignment = {rid: int(ci) for rid, ci in zip(ids, labels)}
    return ClusterModel(m=m, centroids=centroids, assignment=assignment,
                        inertia=inertia_val, seed=seed,
                        inertia_history=history)


def inertia(vectors: np.ndarray, model: ClusterModel,
            ids: Sequence[str] | None = None) -> float:
    """Recompute the sum of squared distances to assigned centroids."""
    points = np.asarray(vectors, dtype=np.float64)
    if ids is None:
        ids = [str(i) for i in range(len(points))]
    total = 0.0
    for rid, vec in zip(ids, points):
        if rid not in model.assignment:
            raise UncoveredVector(rid)
        ci = model.assignment[rid]
        total += float(np.sum((vec - model.centroids[ci]) ** 2))
    return total


def save_vector_cache(fh: IO[bytes], ids: Sequence[str],
                      vectors: np.ndarray, embedder_id: str) -> None:
    """id -> vector cache: JSON header line, then little-endian float32 rows."""
    mat = np.asarray(vectors, dtype=np.float32)
    header = {"dim": int(mat.shape[1]), "embedder": embedder_id,
              "count": int(mat.shape[0]), "ids": list(ids)}
    fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
    for row in mat:
        fh.write(struct.pack(f"<{len(row)}f", *row))


def load_vector_cache(fh: IO[bytes]):
    header = json.loads(fh.readline().decode("utf-8"))
    dim, count = header["dim"], header["count"]
    data = fh.read(4 * dim * count)
    mat = np.frombuffer(data, dtype="<f4").reshape(count, dim).astype(np.float64)
    return header["ids"], mat, header["embedder"]
