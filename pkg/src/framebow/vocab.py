"""Hierarchical k-means vocabulary tree.

Training recursively clusters the descriptor corpus with k-means++ seeded
Lloyd iterations; leaves are the visual words.  Quantization descends the
tree greedily (nearest child, ties to the lowest index), costing O(K*L)
distance evaluations per descriptor.

Centroids are held in float32, matching the serialized form, so a reloaded
tree quantizes identically to the freshly trained one.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError

TREE_MAGIC = b"BVWT"
TREE_VERSION = 1
_HEADER = struct.Struct("<4sHIIII")  # magic, version, K, L, word_count, node_count
_NODE = struct.Struct("<iII")        # parent, child_start, child_count
DIM = 128


@dataclass(frozen=True)
class VocabTrainConfig:
    branching: int = 10
    depth: int = 3
    max_iterations: int = 50
    tolerance: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.branching < 2:
            raise ValueError("branching must be >= 2")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")


@dataclass(frozen=True)
class VocabularyTree:
    """Breadth-first node table; leaves carry word ids in table order."""

    branching: int
    depth: int
    centroids: np.ndarray    # (n_nodes, 128) float32
    parent: np.ndarray       # (n_nodes,) int32, -1 at the root
    child_start: np.ndarray  # (n_nodes,) int32
    child_count: np.ndarray  # (n_nodes,) int32
    word_id: np.ndarray      # (n_nodes,) int32, -1 for internal nodes

    @property
    def word_count(self) -> int:
        return int((self.word_id >= 0).sum())

    @property
    def node_count(self) -> int:
        return self.centroids.shape[0]

    def leaf_centroids(self) -> np.ndarray:
        """Centroids of all words, indexed by word id."""
        leaves = np.flatnonzero(self.word_id >= 0)
        order = np.argsort(self.word_id[leaves])
        return self.centroids[leaves[order]]


def _nearest(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the nearest centroid per point; ties break to lowest index."""
    # ||p - c||^2 = ||p||^2 - 2 p.c + ||c||^2; the ||p||^2 term is constant
    # per row and cannot affect the argmin.
    scores = -2.0 * (points @ centroids.T) + (centroids * centroids).sum(axis=1)
    return scores.argmin(axis=1)


def lloyd_kmeans(
    points: np.ndarray,
    k: int,
    seed_seq: np.random.SeedSequence,
    max_iterations: int = 50,
    tolerance: float = 1e-6,
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """k-means++ seeded Lloyd iterations; empty clusters are dropped.

    Returns (float64 centroids, assignments, per-iteration objective values).
    The objective (sum of squared distances to the assigned centroid) is
    non-increasing across iterations.
    """
    n = len(points)
    if n == 0:
        raise ValueError("cannot cluster an empty point set")
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    k = min(k, n)

    centers = [points[rng.integers(n)]]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    while len(centers) < k:
        total = d2.sum()
        if total <= 0.0:
            break
        idx = rng.choice(n, p=d2 / total)
        centers.append(points[idx])
        d2 = np.minimum(d2, ((points - centers[-1]) ** 2).sum(axis=1))
    centroids = np.array(centers, dtype=np.float64)

    history: list[float] = []
    prev = np.inf
    for _ in range(max_iterations):
        assign = _nearest(points, centroids)
        keep = np.unique(assign)
        if len(keep) < len(centroids):
            centroids = centroids[keep]
            remap = np.full(assign.max() + 1, -1)
            remap[keep] = np.arange(len(keep))
            assign = remap[assign]
        objective = float(((points - centroids[assign]) ** 2).sum())
        assert objective <= prev * (1 + 1e-12) + 1e-12, "Lloyd objective increased"
        history.append(objective)
        for j in range(len(centroids)):
            centroids[j] = points[assign == j].mean(axis=0)
        if prev - objective <= tolerance * max(objective, 1e-30):
            break
        prev = objective
    assign = _nearest(points, centroids)
    return centroids, assign, history


def train_tree(descriptors: np.ndarray, config: VocabTrainConfig = VocabTrainConfig()) -> VocabularyTree:
    """Build the vocabulary tree over a descriptor corpus.

    Deterministic for a fixed (corpus, config): per-node k-means seeds derive
    from the config seed and the node's breadth-first id.
    """
    descriptors = np.asarray(descriptors, dtype=np.float64)
    if descriptors.ndim != 2 or len(descriptors) == 0:
        raise ValueError("descriptor corpus must be a non-empty 2-D array")

    centroids: list[np.ndarray] = [descriptors.mean(axis=0).astype(np.float32)]
    parent: list[int] = [-1]
    child_start: list[int] = [0]
    child_count: list[int] = [0]
    # queue of (node id, member rows, level)
    pending: deque[tuple[int, np.ndarray, int]] = deque([(0, np.arange(len(descriptors)), 0)])

    while pending:
        node, rows, level = pending.popleft()
        if level >= config.depth or len(rows) <= config.branching:
            continue  # leaf
        kept, _, _ = lloyd_kmeans(
            descriptors[rows], config.branching, np.random.SeedSequence([config.seed, node]),
            config.max_iterations, config.tolerance,
        )
        # quantization happens against float32 centroids; partition the same way
        kept32 = kept.astype(np.float32)
        assign = _nearest(descriptors[rows], kept32.astype(np.float64))
        live = np.unique(assign)
        if len(live) <= 1:
            continue  # all members collapse onto one centroid: keep as leaf
        first_child = len(centroids)
        child_start[node] = first_child
        child_count[node] = len(live)
        for j in live:
            child_id = len(centroids)
            centroids.append(kept32[j])
            parent.append(node)
            child_start.append(0)
            child_count.append(0)
            pending.append((child_id, rows[assign == j], level + 1))

    n_nodes = len(centroids)
    child_count_arr = np.array(child_count, dtype=np.int32)
    word_id = np.full(n_nodes, -1, dtype=np.int32)
    leaves = np.flatnonzero(child_count_arr == 0)
    word_id[leaves] = np.arange(len(leaves), dtype=np.int32)
    return VocabularyTree(
        branching=config.branching,
        depth=config.depth,
        centroids=np.vstack(centroids).astype(np.float32),
        parent=np.array(parent, dtype=np.int32),
        child_start=np.array(child_start, dtype=np.int32),
        child_count=child_count_arr,
        word_id=word_id,
    )


def quantize(tree: VocabularyTree, descriptor: np.ndarray) -> int:
    """Word id of one descriptor via greedy descent."""
    return int(quantize_batch(tree, np.asarray(descriptor, dtype=np.float64)[None, :])[0])


def quantize_batch(tree: VocabularyTree, descriptors: np.ndarray) -> np.ndarray:
    """Word ids for many descriptors; identical semantics to `quantize`."""
    descriptors = np.asarray(descriptors, dtype=np.float64)
    n = len(descriptors)
    current = np.zeros(n, dtype=np.intp)
    if n == 0:
        return tree.word_id[current[:0]].astype(np.int64)
    cents = tree.centroids.astype(np.float64)
    while True:
        counts = tree.child_count[current]
        active = np.flatnonzero(counts > 0)
        if active.size == 0:
            break
        for node in np.unique(current[active]):
            rows = active[current[active] == node]
            start = int(tree.child_start[node])
            span = cents[start:start + int(tree.child_count[node])]
            current[rows] = start + _nearest(descriptors[rows], span)
    words = tree.word_id[current]
    assert np.all(words >= 0)
    return words.astype(np.int64)


def save_tree(path: str | Path, tree: VocabularyTree) -> None:
    """Write the versioned little-endian binary tree file."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(
            TREE_MAGIC, TREE_VERSION, tree.branching, tree.depth,
            tree.word_count, tree.node_count,
        ))
        for i in range(tree.node_count):
            fh.write(_NODE.pack(
                int(tree.parent[i]), int(tree.child_start[i]), int(tree.child_count[i]),
            ))
            fh.write(tree.centroids[i].astype("<f4").tobytes())


def load_tree(path: str | Path) -> VocabularyTree:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: file too short for a tree header")
    magic, version, k, depth, word_count, node_count = _HEADER.unpack_from(raw)
    if magic != TREE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {TREE_MAGIC!r}")
    if version != TREE_VERSION:
        raise FormatError(f"{path}: unsupported tree version {version}")
    record = _NODE.size + DIM * 4
    expected = _HEADER.size + node_count * record
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes for {node_count} nodes, found {len(raw)}")

    parent = np.empty(node_count, dtype=np.int32)
    child_start = np.empty(node_count, dtype=np.int32)
    child_count = np.empty(node_count, dtype=np.int32)
    centroids = np.empty((node_count, DIM), dtype=np.float32)
    offset = _HEADER.size
    for i in range(node_count):
        parent[i], child_start[i], child_count[i] = _NODE.unpack_from(raw, offset)
        offset += _NODE.size
        centroids[i] = np.frombuffer(raw, dtype="<f4", count=DIM, offset=offset)
        offset += DIM * 4
    word_id = np.full(node_count, -1, dtype=np.int32)
    leaves = np.flatnonzero(child_count == 0)
    word_id[leaves] = np.arange(len(leaves), dtype=np.int32)
    if len(leaves) != word_count:
        raise FormatError(f"{path}: header claims {word_count} words, table holds {len(leaves)}")
    return VocabularyTree(
        branching=k, depth=depth, centroids=centroids, parent=parent,
        child_start=child_start, child_count=child_count, word_id=word_id,
    )
