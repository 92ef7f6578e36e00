"""Action-similarity graphs, their Laplacians, and quadratic-form kernels.

Graphs are simple and undirected with unit edge weights.  The kernel
``K = a_mu * alpha * X^T L X`` built here measures how roughly a linear
score ``<x_i, theta>`` varies across neighbouring actions and is shared
by both estimation stages.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Graph:
    """Undirected unit-weight graph on ``n`` nodes.

    Parameters
    ----------
    n : int
        Node count.
    edges : tuple of (int, int)
        Unordered pairs, stored as (i, j) with i < j, no self-loops.
    """

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"node count must be >= 1, got {self.n}")
        for i, j in self.edges:
            if not (0 <= i < j < self.n):
                raise ValueError(f"bad edge ({i}, {j}) for n={self.n}")

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        """Dense symmetric 0/1 adjacency matrix with zero diagonal."""
        w = np.zeros((self.n, self.n))
        for i, j in self.edges:
            w[i, j] = 1.0
            w[j, i] = 1.0
        return w


@dataclass(frozen=True)
class LaplacianKernel:
    """Laplacian ``L`` plus the quadratic-form kernel ``K`` for one action stack.

    Attributes
    ----------
    L : ndarray, shape (n, n)
        Graph Laplacian D - W.
    K : ndarray, shape (d, d)
        a_mu * alpha * X^T L X for the stack the kernel was built from.
    sigma_max_l : float
        Largest singular value of L.
    sigma_max_k : float
        Largest singular value of the unscaled X^T L X.
    a_mu, alpha : float
        Scaling constants baked into K.
    """

    L: np.ndarray
    K: np.ndarray
    sigma_max_l: float
    sigma_max_k: float
    a_mu: float
    alpha: float

    def quad(self, theta: np.ndarray) -> float:
        """Quadratic form theta^T K theta."""
        return float(theta @ self.K @ theta)


def _edges_from_pairs(n: int, pairs) -> Graph:
    canon = sorted((min(i, j), max(i, j)) for i, j in pairs)
    return Graph(n=n, edges=tuple(canon))


def er_graph(n: int, p: float, rng: np.random.Generator) -> Graph:
    """Erdos-Renyi graph: each of the n(n-1)/2 pairs kept with probability p.

    Parameters
    ----------
    n : int
        Node count, >= 1.
    p : float
        Edge probability in [0, 1].
    rng : numpy.random.Generator
        Seeded source; same seed gives the same edge set.
    """
    if n < 1:
        raise ValueError(f"node count must be >= 1, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"edge probability must lie in [0, 1], got {p}")
    iu, ju = np.triu_indices(n, k=1)
    mask = rng.random(iu.size) < p
    return _edges_from_pairs(n, zip(iu[mask].tolist(), ju[mask].tolist()))


def ba_graph(n: int, m: int, rng: np.random.Generator) -> Graph:
    """Barabasi-Albert preferential-attachment graph.

    Starts from the complete graph on ``m`` nodes; each later node attaches
    ``m`` edges to distinct existing nodes picked with probability
    proportional to current degree.

    Parameters
    ----------
    n : int
        Final node count.
    m : int
        Attachment count, 1 <= m < n.
    rng : numpy.random.Generator
        Seeded source.
    """
    if not 1 <= m < n:
        raise ValueError(f"attachment count must satisfy 1 <= m < n, got m={m}, n={n}")
    edges: list[tuple[int, int]] = [(i, j) for i in range(m) for j in range(i + 1, m)]
    degree = np.zeros(n)
    for i, j in edges:
        degree[i] += 1
        degree[j] += 1
    if m == 1:
        # a single isolated seed node has degree 0; first attachment is forced
        degree[0] = max(degree[0], 0.0)
    for v in range(m, n):
        weights = degree[:v].copy()
        if weights.sum() <= 0:
            weights[:] = 1.0  # degenerate seed (m=1): uniform first pick
        targets: set[int] = set()
        while len(targets) < m:
            w = weights.copy()
            if targets:
                w[list(targets)] = 0.0
            if w.sum() <= 0:
                w[: v] = 1.0
                w[list(targets)] = 0.0
            u = int(rng.choice(v, p=w / w.sum()))
            targets.add(u)
        for u in targets:
            edges.append((u, v))
            degree[u] += 1
            degree[v] += 1
    return _edges_from_pairs(n, edges)


def knn_graph(points: np.ndarray, k: int) -> Graph:
    """k-nearest-neighbour graph, symmetrized by union.

    Edge (i, j) is present iff j is among the k nearest of i by Euclidean
    distance or i among the k nearest of j.  Distance ties break toward the
    lower index.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-d array (one vector per row)")
    n = pts.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"neighbor count must satisfy 1 <= k < n, got k={k}, n={n}")
    sq = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    pairs = set()
    idx = np.arange(n)
    for i in range(n):
        order = np.lexsort((idx, sq[i]))  # distance first, index breaks ties
        picked = [j for j in order if j != i][:k]
        for j in picked:
            pairs.add((min(i, j), max(i, j)))
    return _edges_from_pairs(n, pairs)


def laplacian(g: Graph) -> np.ndarray:
    """Graph Laplacian L = D - W."""
    w = g.adjacency()
    return np.diag(w.sum(axis=1)) - w


def _sym_sigma_max(a: np.ndarray, tol: float = 1e-8, max_iters: int = 1000) -> float:
    """Largest singular value of a symmetric PSD matrix by power iteration."""
    n = a.shape[0]
    if n == 0 or not np.any(a):
        return 0.0
    v = np.arange(1.0, n + 1.0)
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iters):
        av = a @ v
        norm = np.linalg.norm(av)
        if norm == 0.0:
            return 0.0
        v_next = av / norm
        if abs(norm - sigma) <= tol * max(1.0, norm):
            return float(norm)
        sigma = norm
        v = v_next
    return float(sigma)


def quad_kernel(
    action_stack: np.ndarray,
    L: np.ndarray,
    a_mu: float,
    alpha: float,
) -> LaplacianKernel:
    """Build K = a_mu * alpha * X^T L X over a vectorized action stack.

    Parameters
    ----------
    action_stack : ndarray, shape (n, d)
        Row i is the vectorized i-th action.
    L : ndarray, shape (n, n)
        Laplacian of the action graph.
    a_mu : float
        Link-smoothness constant, > 0.
    alpha : float
        Laplacian weight, >= 0.
    """
    x = np.asarray(action_stack, dtype=float)
    L = np.asarray(L, dtype=float)
    if a_mu <= 0:
        raise ValueError(f"a_mu must be > 0, got {a_mu}")
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    if L.shape[0] != L.shape[1] or x.shape[0] != L.shape[0]:
        raise ValueError(
            f"dimension mismatch: stack {x.shape} vs Laplacian {L.shape}"
        )
    base = x.T @ L @ x
    base = 0.5 * (base + base.T)
    k = a_mu * alpha * base
    return LaplacianKernel(
        L=L,
        K=k,
        sigma_max_l=_sym_sigma_max(L),
        sigma_max_k=_sym_sigma_max(base),
        a_mu=float(a_mu),
        alpha=float(alpha),
    )


def alpha_max(lam: float, a_mu: float, n: int) -> float:
    """Admissible Laplacian weight (1 - lam) / (4 a_mu n (n-1)).

    Configurations above this bound warn but are not rejected.
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lam must lie in (0, 1], got {lam}")
    if a_mu <= 0:
        raise ValueError(f"a_mu must be > 0, got {a_mu}")
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    return (1.0 - lam) / (4.0 * a_mu * n * (n - 1))
