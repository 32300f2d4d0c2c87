"""Undirected simple graphs in compressed sparse row form.

Neighbor lists are stored as one ``indices`` array sliced by ``indptr``, with
each slice sorted and duplicate free.  Graphs are immutable once built.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Graph",
    "GraphError",
    "SbmConfig",
    "from_edge_list",
    "neighbor_feature_sum",
    "neighbor_covariate_sum",
    "sbm_generate",
    "default_sbm_config",
    "validate_graph",
]


class GraphError(ValueError):
    """Raised for malformed edges: bad indices or self-loops."""


@dataclass(frozen=True)
class Graph:
    n: int
    indptr: np.ndarray
    indices: np.ndarray
    _matrix: sp.csr_matrix = field(repr=False, compare=False)

    @property
    def edge_count(self) -> int:
        return int(self.indices.size // 2)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def edges(self) -> np.ndarray:
        """Unordered edges as an ``(m, 2)`` array with ``i < j``, sorted."""
        rows = np.repeat(np.arange(self.n), self.degrees())
        keep = rows < self.indices
        return np.column_stack([rows[keep], self.indices[keep]])

    @property
    def adjacency(self) -> sp.csr_matrix:
        return self._matrix

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    def __hash__(self) -> int:
        return hash((self.n, self.indices.tobytes()))


def _from_pairs(n: int, rows: np.ndarray, cols: np.ndarray) -> Graph:
    # rows/cols hold each undirected edge once with rows != cols
    r = np.concatenate([rows, cols]).astype(np.int64)
    c = np.concatenate([cols, rows]).astype(np.int64)
    data = np.ones(r.size, dtype=np.int8)
    mat = sp.coo_matrix((data, (r, c)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    mat.data[:] = 1
    mat.sort_indices()
    indptr = mat.indptr.astype(np.int64)
    indices = mat.indices.astype(np.int64)
    indptr.setflags(write=False)
    indices.setflags(write=False)
    adj = sp.csr_matrix(
        (np.ones(indices.size), indices, indptr), shape=(n, n)
    )
    return Graph(n=n, indptr=indptr, indices=indices, _matrix=adj)


def from_edge_list(edges: Iterable[Sequence[int]], n: int) -> Graph:
    """Build a graph on ``n`` nodes from index pairs.

    Both orientations of an edge and repeated lines collapse to a single
    undirected edge.  Self-loops and out-of-range indices raise
    :class:`GraphError`.
    """
    if n < 0:
        raise GraphError(f"node count must be non-negative, got {n}")
    arr = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    if arr.size:
        bad = (arr < 0) | (arr >= n)
        if bad.any():
            k = int(np.argmax(bad.any(axis=1)))
            raise GraphError(
                f"edge {k} = {tuple(arr[k])} has an index outside [0, {n})"
            )
        loops = arr[:, 0] == arr[:, 1]
        if loops.any():
            k = int(np.argmax(loops))
            raise GraphError(f"edge {k} is a self-loop on node {arr[k, 0]}")
    return _from_pairs(n, arr[:, 0], arr[:, 1])


def validate_graph(g: Graph) -> None:
    """Check the structural invariants; raise :class:`GraphError` on failure."""
    if g.indptr.shape != (g.n + 1,) or g.indptr[0] != 0:
        raise GraphError("indptr has the wrong shape")
    if g.indptr[-1] != g.indices.size:
        raise GraphError("indptr does not cover indices")
    if g.indices.size and (g.indices.min() < 0 or g.indices.max() >= g.n):
        raise GraphError("neighbor index out of range")
    rows = np.repeat(np.arange(g.n), g.degrees())
    if np.any(rows == g.indices):
        raise GraphError("self-loop present")
    for i in range(g.n):
        nb = g.neighbors(i)
        if np.any(np.diff(nb) <= 0):
            raise GraphError(f"neighbor list of node {i} not strictly sorted")
    fwd = set(zip(rows.tolist(), g.indices.tolist()))
    if any((j, i) not in fwd for i, j in fwd):
        raise GraphError("adjacency is not symmetric")


def neighbor_feature_sum(g: Graph, X: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Return ``s`` with ``s[i]`` the sum of ``X[j] @ beta`` over neighbors j."""
    X = np.asarray(X, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if X.ndim != 2 or X.shape[0] != g.n:
        raise ValueError(f"X must have {g.n} rows, got shape {X.shape}")
    if beta.shape != (X.shape[1],):
        raise ValueError(
            f"beta must have {X.shape[1]} entries, got shape {beta.shape}"
        )
    return g.adjacency @ (X @ beta)


def neighbor_covariate_sum(g: Graph, X: np.ndarray) -> np.ndarray:
    """Row i is the sum of the covariate rows of i's neighbors."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != g.n:
        raise ValueError(f"X must have {g.n} rows, got shape {X.shape}")
    return np.asarray(g.adjacency @ X)


@dataclass(frozen=True)
class SbmConfig:
    block_sizes: tuple[int, ...]
    P: np.ndarray

    def __post_init__(self):
        sizes = tuple(int(b) for b in self.block_sizes)
        P = np.array(self.P, dtype=float)
        object.__setattr__(self, "block_sizes", sizes)
        object.__setattr__(self, "P", P)
        if not sizes or any(b <= 0 for b in sizes):
            raise ValueError("block sizes must be positive integers")
        K = len(sizes)
        if P.shape != (K, K):
            raise ValueError(f"P must be {K}x{K} to match block sizes, got {P.shape}")
        if not np.all(np.isfinite(P)) or P.min() < 0 or P.max() > 1:
            raise ValueError("P entries must lie in [0, 1]")
        if not np.array_equal(P, P.T):
            raise ValueError("P must be symmetric")

    @property
    def n(self) -> int:
        return sum(self.block_sizes)

    def membership(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.block_sizes)), self.block_sizes)

    def expected_edges(self) -> float:
        total = 0.0
        sizes = self.block_sizes
        for k in range(len(sizes)):
            for l in range(k, len(sizes)):
                pairs = sizes[k] * (sizes[k] - 1) / 2 if k == l else sizes[k] * sizes[l]
                total += pairs * self.P[k, l]
        return total

    def edge_count_variance(self) -> float:
        total = 0.0
        sizes = self.block_sizes
        for k in range(len(sizes)):
            for l in range(k, len(sizes)):
                pairs = sizes[k] * (sizes[k] - 1) / 2 if k == l else sizes[k] * sizes[l]
                p = self.P[k, l]
                total += pairs * p * (1 - p)
        return total


def default_sbm_config() -> SbmConfig:
    """Five communities of sizes (500, 500, 400, 400, 200), n = 2000."""
    P = np.full((5, 5), 1e-4)
    np.fill_diagonal(P, [0.01, 0.10, 0.05, 0.15, 0.10])
    return SbmConfig(block_sizes=(500, 500, 400, 400, 200), P=P)


def sbm_generate(cfg: SbmConfig, rng: np.random.Generator) -> Graph:
    """Draw a stochastic block model graph.

    For each block pair the number of edges is drawn from its binomial law and
    the edge set is then a uniform subset of that size, which is the same
    distribution as independent Bernoulli draws per pair.
    """
    sizes = cfg.block_sizes
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    rows, cols = [], []
    for k in range(len(sizes)):
        for l in range(k, len(sizes)):
            p = cfg.P[k, l]
            nk, nl = sizes[k], sizes[l]
            n_pairs = nk * (nk - 1) // 2 if k == l else nk * nl
            if n_pairs == 0 or p == 0.0:
                continue
            m = int(rng.binomial(n_pairs, p))
            if m == 0:
                continue
            flat = rng.choice(n_pairs, size=m, replace=False)
            if k == l:
                iu, ju = _triu_from_flat(flat, nk)
                rows.append(iu + offsets[k])
                cols.append(ju + offsets[k])
            else:
                rows.append(flat // nl + offsets[k])
                cols.append(flat % nl + offsets[l])
    if rows:
        r = np.concatenate(rows)
        c = np.concatenate(cols)
    else:
        r = c = np.empty(0, dtype=np.int64)
    return _from_pairs(cfg.n, r, c)


def _triu_from_flat(flat: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    # inverse of the row-major enumeration of pairs (i, j), i < j < m
    flat = np.asarray(flat, dtype=np.int64)
    row_start = np.arange(m) * (2 * m - np.arange(m) - 1) // 2
    i = np.searchsorted(row_start, flat, side="right") - 1
    j = flat - row_start[i] + i + 1
    return i, j
