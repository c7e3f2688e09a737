"""Undirected simple graphs: expected-degree generation, edge-list I/O, spectra."""

from __future__ import annotations

import logging
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError, EdgeListParseError

log = logging.getLogger(__name__)

DEFAULT_EIG_TOL = 1e-9
DEFAULT_EIG_MAXITER = 100_000


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable graph backed by a symmetric CSR adjacency with zero diagonal.

    ``weights`` is the generating vector for sampled graphs; ``node_ids`` maps
    compact indices back to the ids found in a loaded edge list.
    """

    n: int
    adjacency: sp.csr_matrix
    weights: np.ndarray | None = None
    node_ids: np.ndarray | None = None
    clamped_pairs: int = 0
    dropped_self_loops: int = 0

    @classmethod
    def from_edges(cls, n: int, rows, cols, **kw) -> "Graph":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        keep = rows != cols
        r = np.concatenate([rows[keep], cols[keep]])
        c = np.concatenate([cols[keep], rows[keep]])
        adj = sp.csr_matrix((np.ones(r.size), (r, c)), shape=(n, n))
        adj.sum_duplicates()
        adj.data[:] = 1.0
        adj.sort_indices()
        return cls(n=n, adjacency=adj, **kw)

    @property
    def num_edges(self) -> int:
        return int(self.adjacency.nnz // 2)

    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    def edges(self) -> np.ndarray:
        """(m, 2) array of edges with i < j, sorted lexicographically."""
        upper = sp.triu(self.adjacency, k=1).tocoo()
        order = np.lexsort((upper.col, upper.row))
        return np.column_stack([upper.row[order], upper.col[order]]).astype(np.int64)

    def to_dense(self) -> np.ndarray:
        return self.adjacency.toarray()

    def subgraph(self, keep: np.ndarray) -> "Graph":
        """Induced subgraph on the sorted node indices ``keep``."""
        keep = np.sort(np.asarray(keep, dtype=np.int64))
        adj = self.adjacency[keep][:, keep].tocsr()
        ids = self.node_ids[keep] if self.node_ids is not None else keep
        w = self.weights[keep] if self.weights is not None else None
        return Graph(n=keep.size, adjacency=adj, weights=w, node_ids=ids)


class _UniformStream:
    """Buffered scalar uniforms from a numpy Generator (keeps the hot loop cheap)."""

    def __init__(self, rng: np.random.Generator, block: int = 8192):
        self._rng = rng
        self._block = block
        self._buf = rng.random(block)
        self._i = 0

    def __call__(self) -> float:
        if self._i == self._block:
            self._buf = self._rng.random(self._block)
            self._i = 0
        u = self._buf[self._i]
        self._i += 1
        return u


def count_clamped_pairs(weights: np.ndarray) -> int:
    """Number of unordered pairs {i, j}, i != j, with w_i w_j / sum(w) > 1."""
    w = np.sort(np.asarray(weights, dtype=float))
    # for each i, partners j > i (sorted order) with w_j > sum(w) / w_i
    first = np.searchsorted(w, w.sum() / w, side="right")
    first = np.maximum(first, np.arange(1, w.size + 1))
    return int(np.sum(w.size - first))


def generate(weights, seed: int) -> Graph:
    """Expected-degree random graph: edge {i, j} w.p. min(1, w_i w_j / sum(w)).

    Pairs are visited in decreasing-weight order with geometric skipping, so
    the cost is O(n + m) rather than O(n^2).
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty vector")
    if not np.all(w > 0):
        raise ValueError("weights must be positive")
    n = w.size
    rho = 1.0 / w.sum()
    order = np.argsort(-w, kind="stable")
    ws = w[order].tolist()
    uniform = _UniformStream(np.random.default_rng(int(seed)))
    rows: list[int] = []
    cols: list[int] = []
    log_ = math.log
    for u in range(n - 1):
        factor = ws[u] * rho
        v = u + 1
        p = min(ws[v] * factor, 1.0)
        while v < n and p > 0:
            if p != 1.0:
                r = uniform()
                if r <= 0.0:
                    r = 5e-324
                v += int(math.floor(log_(r) / log_(1.0 - p))) if p < 1.0 else 0
            if v < n:
                q = min(ws[v] * factor, 1.0)
                if uniform() < q / p:
                    rows.append(u)
                    cols.append(v)
                p = q
                v += 1
    rows_a = order[np.asarray(rows, dtype=np.int64)] if rows else np.empty(0, np.int64)
    cols_a = order[np.asarray(cols, dtype=np.int64)] if cols else np.empty(0, np.int64)
    clamped = count_clamped_pairs(w)
    return Graph.from_edges(n, rows_a, cols_a, weights=w.copy(), clamped_pairs=clamped)


def load_edge_list(path) -> Graph:
    """Read a whitespace-separated edge list; '#' lines are comments.

    Directed edges are symmetrised, duplicates collapsed, self-loops dropped,
    and node ids compacted to 0..n-1 (``Graph.node_ids`` keeps the originals).
    """
    path = Path(path)
    src, dst = [], []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split()
            if len(parts) < 2:
                raise EdgeListParseError(path, lineno, line)
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError:
                raise EdgeListParseError(path, lineno, line) from None
            if a < 0 or b < 0:
                raise EdgeListParseError(path, lineno, line)
            src.append(a)
            dst.append(b)
    src_a = np.asarray(src, dtype=np.int64)
    dst_a = np.asarray(dst, dtype=np.int64)
    ids, inverse = np.unique(np.concatenate([src_a, dst_a]), return_inverse=True)
    m = src_a.size
    rows, cols = inverse[:m], inverse[m:]
    loops = int(np.count_nonzero(rows == cols))
    if loops:
        log.warning("%s: dropped %d self-loop(s)", path, loops)
    return Graph.from_edges(ids.size, rows, cols, node_ids=ids, dropped_self_loops=loops)


def write_edge_list(g: Graph, path, header: list[str] | None = None) -> None:
    """Write each edge once (smaller id first, sorted), atomically."""
    path = Path(path)
    edges = g.edges()
    if g.node_ids is not None:
        edges = np.sort(g.node_ids[edges], axis=1)
        edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    lines = [f"# {h}" for h in (header or [])]
    lines += [f"{a} {b}" for a, b in edges]
    text = "\n".join(lines) + ("\n" if lines else "")
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def spmv(g: Graph, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (g.n,):
        raise ValueError(f"vector has shape {x.shape}, graph has {g.n} nodes")
    return g.adjacency @ x


def spectral_radius(g: Graph, tol: float = DEFAULT_EIG_TOL,
                    max_iter: int = DEFAULT_EIG_MAXITER) -> float:
    """Largest adjacency eigenvalue by power iteration on A + I.

    The unit shift makes the Perron root strictly dominant in modulus even
    for bipartite graphs, where A alone has eigenvalues +/- lambda_max.  The
    loop stops once successive Rayleigh quotients of A differ by less than
    ``tol * max(1, lambda)``.
    """
    if g.n < 1:
        raise ValueError("graph has no nodes")
    if g.adjacency.nnz == 0:
        return 0.0
    A = g.adjacency
    idx = np.arange(g.n, dtype=float)
    x = 1.0 + 1e-3 * np.sin(idx + 1.0)
    x /= np.linalg.norm(x)
    lam_prev = math.inf
    lam = 0.0
    for _ in range(max_iter):
        y = A @ x
        lam = float(x @ y)
        if abs(lam - lam_prev) < tol * max(1.0, abs(lam)):
            return lam
        lam_prev = lam
        y += x
        x = y / np.linalg.norm(y)
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations", best_estimate=lam)
