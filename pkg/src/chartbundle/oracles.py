"""Independent reference routines for self-checks.

These deliberately avoid the code paths they validate: numerical Jacobians
by central differences (vs the analytic product chain), and random signed
multigraphs for exercising the coboundary test against exhaustive search.
"""

from __future__ import annotations

import numpy as np

from .cohomology import CocycleEdge, SignCocycle


def finite_difference_jacobian(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian of f at x."""
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2.0 * h))
    return np.stack(cols, axis=-1)


def random_sign_multigraph(
    rng: np.random.Generator, max_nodes: int = 8, max_edges: int = 16
) -> SignCocycle:
    """Random signed multigraph as a SignCocycle (parallel edges allowed)."""
    n = int(rng.integers(1, max_nodes + 1))
    n_edges = int(rng.integers(0, max_edges + 1))
    edges = []
    comp_counter: dict[tuple[int, int], int] = {}
    for _ in range(n_edges):
        if n < 2:
            break
        i, j = sorted(rng.choice(n, size=2, replace=False).tolist())
        cid = comp_counter.get((i, j), 0)
        comp_counter[(i, j)] = cid + 1
        edges.append(
            CocycleEdge(
                pair=(i, j),
                component_id=cid,
                sign=int(rng.choice([-1, 1])),
                agreement=1.0,
                n_points=1,
                degenerate=False,
            )
        )
    return SignCocycle(edges=edges, n_charts=n)
