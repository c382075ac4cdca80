"""Graphs and left-stochastic combination matrices.

Convention: ``A[l, k]`` is the probability that agent ``k`` pulls from agent
``l``, so every *column* of ``A`` sums to one. Agents are 0-indexed in code;
config files and CSV outputs keep the same 0-based indices.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

COLUMN_SUM_TOL = 1e-12
POWER_MAXITER = 1_000_000


class NetworkError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on ``node_count`` nodes (0-indexed)."""

    node_count: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.node_count < 1:
            raise NetworkError("node_count must be positive")
        seen = set()
        canon = []
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise NetworkError(f"self-loop ({a}, {a}) not allowed in edge list")
            if not (0 <= a < self.node_count and 0 <= b < self.node_count):
                raise NetworkError(f"edge ({a}, {b}) out of range")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise NetworkError(f"duplicate edge {key}")
            seen.add(key)
            canon.append(key)
        object.__setattr__(self, "edges", tuple(canon))

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.node_count, dtype=int)
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.node_count, self.node_count), dtype=bool)
        for a, b in self.edges:
            adj[a, b] = adj[b, a] = True
        return adj

    def is_connected(self) -> bool:
        return _reachable(self.adjacency(), 0).all()


def ring_graph(K: int) -> Graph:
    if K == 1:
        return Graph(1, ())
    if K == 2:
        return Graph(2, ((0, 1),))
    return Graph(K, tuple((k, (k + 1) % K) for k in range(K)))


def paper_graph() -> Graph:
    """Benchmark 10-node, 12-edge graph: ring 1-2-...-10-1 plus chords {1,5}, {2,7}.

    Stated 1-based; stored 0-based.
    """
    ring = [(k, (k + 1) % 10) for k in range(10)]
    return Graph(10, tuple(ring + [(0, 4), (1, 6)]))


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "valid"
        return "; ".join(self.violations)


def _reachable(adj: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(adj[u]):
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    return seen


def validate(A) -> ValidationReport:
    """Check every combination-matrix condition; violations are collected, not raised."""
    A = np.asarray(A, dtype=float)
    problems = []
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        return ValidationReport(("matrix is not square",))
    if not np.all(np.isfinite(A)):
        return ValidationReport(("matrix has non-finite entries",))
    if np.any(A < 0):
        problems.append("negative entries")
    if np.any(A > 1):
        problems.append("entries greater than 1")
    sums = A.sum(axis=0)
    bad = np.flatnonzero(np.abs(sums - 1.0) > COLUMN_SUM_TOL)
    if bad.size:
        problems.append(
            "column sums differ from 1 at columns "
            + ", ".join(f"{k} ({sums[k]:.12g})" for k in bad)
        )
    # edge l -> k whenever k pulls from l
    support = A > 0
    if not (_reachable(support, 0).all() and _reachable(support.T, 0).all()):
        problems.append("not strongly connected")
    if not np.any(np.diag(A) > 0):
        problems.append("no positive self-loop")
    return ValidationReport(tuple(problems))


def check_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    report = validate(A)
    if not report:
        raise NetworkError(f"invalid combination matrix: {report}")
    return A


def lazy_metropolis(g: Graph) -> np.ndarray:
    """Lazy Metropolis combination matrix ``A = I/2 + B/2``.

    ``B[l, k] = 1 / max(deg(l), deg(k))`` on edges and the diagonal absorbs
    the remainder, so the result is symmetric and doubly stochastic.
    """
    if not g.is_connected():
        raise NetworkError("graph is not connected")
    K = g.node_count
    deg = g.degrees()
    B = np.zeros((K, K))
    for a, b in g.edges:
        B[a, b] = B[b, a] = 1.0 / max(deg[a], deg[b])
    B[np.diag_indices(K)] = 1.0 - B.sum(axis=0)
    return 0.5 * np.eye(K) + 0.5 * B


def perron_vector(A, tol: float = 1e-13, maxiter: int = POWER_MAXITER) -> np.ndarray:
    """Perron vector of a left-stochastic primitive matrix by power iteration.

    Starts from the uniform vector, renormalizes in l1 every step and stops
    once ``||A pi - pi||_1 <= tol``.
    """
    A = np.asarray(A, dtype=float)
    K = A.shape[0]
    pi = np.full(K, 1.0 / K)
    for _ in range(maxiter):
        nxt = A @ pi
        nxt /= nxt.sum()
        pi = nxt
        if np.abs(A @ pi - pi).sum() <= tol:
            return pi
    raise ConvergenceError(
        f"power iteration did not converge in {maxiter} iterations; is A primitive?"
    )


def effective_matrix(A, alphas, tol: float = 1e-13):
    """Heterogeneous-confidence matrix ``M = J + A (I - J)`` and its Perron vector.

    ``J = diag(alphas)``; with all ``alphas`` equal the Perron vector is that of ``A``.
    """
    A = np.asarray(A, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    if alphas.shape != (A.shape[0],):
        raise NetworkError("need one confidence weight per agent")
    if np.any(alphas < 0) or np.any(alphas >= 1):
        raise NetworkError("confidence weights must lie in [0, 1)")
    M = np.diag(alphas) + A * (1.0 - alphas)[None, :]
    return M, perron_vector(M, tol=tol)


def matrix_to_csv(A, path) -> None:
    np.savetxt(path, np.asarray(A, dtype=float), delimiter=",", fmt="%.17g")


def matrix_from_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float))
