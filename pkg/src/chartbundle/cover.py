"""Chart covers over point clouds and their overlap structure.

A cover assigns each point to one or more charts (index sets). Pairwise
overlaps are split into connected components with DBSCAN so that sign data
can be recorded per component; triple overlaps feed the cocycle checks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from sklearn.cluster import DBSCAN
from sklearn.neighbors import NearestNeighbors

from .geometry import PointCloud

# vertices of the regular tetrahedron inscribed in S^2
TETRA_VERTICES = np.array(
    [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64
) / np.sqrt(3.0)


class CoverError(ValueError):
    pass


class ConnectivityError(CoverError):
    def __init__(self, n_components: int):
        self.n_components = n_components
        super().__init__(
            f"kNN graph is disconnected ({n_components} components); "
            "increase k or the sample size"
        )


@dataclass
class Cover:
    """Chart membership as index sets into a PointCloud."""

    charts: list[np.ndarray]  # sorted int arrays
    method: str  # tetrahedral | slab | landmark
    landmarks: np.ndarray | None = None  # point indices, landmark covers only
    n_points: int = 0

    def __post_init__(self) -> None:
        self.charts = [np.asarray(c, dtype=np.intp) for c in self.charts]
        for i, c in enumerate(self.charts):
            if len(c) == 0:
                raise CoverError(f"chart {i} is empty")
        covered = np.unique(np.concatenate(self.charts))
        if self.n_points and len(covered) != self.n_points:
            raise CoverError(
                f"cover misses {self.n_points - len(covered)} of "
                f"{self.n_points} points"
            )

    @property
    def n_charts(self) -> int:
        return len(self.charts)


@dataclass
class OverlapComponent:
    """One connected component of a pairwise chart intersection."""

    pair: tuple[int, int]  # (i, j) with i < j
    component_id: int
    point_indices: np.ndarray


@dataclass
class TripleOverlap:
    triple: tuple[int, int, int]  # i < j < k
    point_indices: np.ndarray


@dataclass
class OverlapDecomposition:
    components: list[OverlapComponent]
    degenerate_pairs: list[tuple[int, int]] = field(default_factory=list)


def tetrahedral_cover(cloud: PointCloud, eps: float) -> Cover:
    """Four slightly enlarged hemispheres around the inscribed-tetrahedron
    vertices; chart i keeps the points with <x, v_i> > -eps."""
    if cloud.ambient_dim != 3:
        raise CoverError(f"need points in R^3, got R^{cloud.ambient_dim}")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must be in (0, 1), got {eps}")
    dots = cloud.points @ TETRA_VERTICES.T  # (n, 4)
    charts = [np.flatnonzero(dots[:, i] > -eps) for i in range(4)]
    return Cover(charts=charts, method="tetrahedral", n_points=len(cloud))


def slab_cover(cloud: PointCloud, axis: int, lo: float, hi: float) -> Cover:
    """Two half-space charts along one coordinate; their overlap is the slab
    lo < x[axis] < hi."""
    if lo >= hi:
        raise ValueError(f"need lo < hi, got {lo} >= {hi}")
    coord = cloud.points[:, axis]
    charts = [np.flatnonzero(coord > lo), np.flatnonzero(coord < hi)]
    return Cover(charts=charts, method="slab", n_points=len(cloud))


def knn_graph(points: np.ndarray, k: int):
    """Symmetric kNN graph with Euclidean edge weights as a sparse matrix.
    Raises ConnectivityError if the graph is disconnected."""
    n = len(points)
    if k >= n:
        raise ValueError(f"k={k} must be < n={n}")
    nn = NearestNeighbors(n_neighbors=k + 1).fit(points)
    dist, idx = nn.kneighbors(points)
    rows = np.repeat(np.arange(n), k)
    cols = idx[:, 1:].ravel()
    vals = dist[:, 1:].ravel()
    g = coo_matrix((vals, (rows, cols)), shape=(n, n))
    g = g.maximum(g.T).tocsr()  # symmetrize
    n_comp, _ = connected_components(g, directed=False)
    if n_comp > 1:
        raise ConnectivityError(n_comp)
    return g


def knn_geodesic_distances(
    points: np.ndarray, k: int, sources: np.ndarray | None = None
) -> np.ndarray:
    """Exact shortest-path distances on the kNN graph from the given source
    points (all points when sources is None)."""
    g = knn_graph(points, k)
    if sources is None:
        sources = np.arange(len(points))
    return dijkstra(g, directed=False, indices=sources)


def farthest_point_sample(dist_fn, n_points: int, n_select: int, first: int):
    """Greedy landmark selection: each new landmark maximizes the minimum
    geodesic distance to the ones already chosen (ties -> lowest index).

    dist_fn(i) must return the distance row from point i to all points.
    Returns (landmark indices, (n_select, n_points) distance matrix).
    """
    landmarks = [first]
    rows = [dist_fn(first)]
    min_dist = rows[0].copy()
    for _ in range(n_select - 1):
        nxt = int(np.argmax(min_dist))  # argmax takes the lowest index on ties
        landmarks.append(nxt)
        rows.append(dist_fn(nxt))
        np.minimum(min_dist, rows[-1], out=min_dist)
    return np.asarray(landmarks, dtype=np.intp), np.vstack(rows)


def landmark_cover(
    cloud: PointCloud, n_charts: int, k: int, percentile: float, seed: int
) -> Cover:
    """Charts are geodesic balls around farthest-point-sampled landmarks.

    The ball radius is the given quantile of the full landmark-to-point
    distance matrix. The first landmark is index 0 of the seeded permutation.
    Points outside every ball (possible for small percentiles) are assigned
    to the chart of their nearest landmark so the cover property holds.
    """
    if n_charts < 1:
        raise ValueError("n_charts must be >= 1")
    n = len(cloud)
    g = np.random.Generator(np.random.PCG64(seed))
    first = int(g.permutation(n)[0])
    graph = knn_graph(np.asarray(cloud.points), k)

    def dist_row(i: int) -> np.ndarray:
        return dijkstra(graph, directed=False, indices=i)

    landmarks, dmat = farthest_point_sample(dist_row, n, n_charts, first)
    radius = np.quantile(dmat, percentile)
    charts = [np.flatnonzero(dmat[i] < radius) for i in range(n_charts)]

    uncovered = np.setdiff1d(np.arange(n), np.concatenate(charts))
    if len(uncovered) > 0:
        nearest = np.argmin(dmat[:, uncovered], axis=0)
        for c, p in zip(nearest, uncovered):
            charts[c] = np.sort(np.append(charts[c], p))
    return Cover(
        charts=charts, method="landmark", landmarks=landmarks, n_points=n
    )


def decompose_overlaps(
    cloud: PointCloud, cover: Cover, eps_cluster: float, min_size: int
) -> OverlapDecomposition:
    """Split every nonempty pairwise intersection into density-connected
    components (DBSCAN in ambient coordinates).

    Clusters of size >= min_size become OverlapComponents; DBSCAN noise
    points are dropped from cocycle evaluation. A pair whose intersection is
    pure noise is recorded as degenerate.
    """
    if eps_cluster <= 0.0:
        raise ValueError("eps_cluster must be > 0")
    components: list[OverlapComponent] = []
    degenerate: list[tuple[int, int]] = []
    for i, j in combinations(range(cover.n_charts), 2):
        inter = np.intersect1d(cover.charts[i], cover.charts[j])
        if len(inter) == 0:
            continue
        labels = DBSCAN(eps=eps_cluster, min_samples=min_size).fit_predict(
            cloud.points[inter]
        )
        cid = 0
        for lab in np.unique(labels):
            if lab < 0:
                continue
            members = inter[labels == lab]
            if len(members) >= min_size:
                components.append(
                    OverlapComponent(
                        pair=(i, j), component_id=cid, point_indices=members
                    )
                )
                cid += 1
        if cid == 0:
            degenerate.append((i, j))
    return OverlapDecomposition(components=components, degenerate_pairs=degenerate)


def triple_overlaps(cover: Cover) -> list[TripleOverlap]:
    out = []
    for i, j, k in combinations(range(cover.n_charts), 3):
        inter = np.intersect1d(
            np.intersect1d(cover.charts[i], cover.charts[j]), cover.charts[k]
        )
        if len(inter) > 0:
            out.append(TripleOverlap(triple=(i, j, k), point_indices=inter))
    return out


def nerve_stats(cover: Cover) -> tuple[int, int, int, bool]:
    """(n_charts, n_pairwise, n_triple, single_chart_flag).

    A single-chart cover cannot carry a non-trivial sign cocycle, so the flag
    is surfaced as a topological-obstruction warning by callers.
    """
    n_pair = sum(
        1
        for i, j in combinations(range(cover.n_charts), 2)
        if len(np.intersect1d(cover.charts[i], cover.charts[j])) > 0
    )
    n_triple = len(triple_overlaps(cover))
    return cover.n_charts, n_pair, n_triple, cover.n_charts == 1


def cover_to_json(cover: Cover, decomp: OverlapDecomposition | None = None) -> str:
    obj = {
        "method": cover.method,
        "n_points": cover.n_points,
        "charts": [c.tolist() for c in cover.charts],
        "landmarks": None if cover.landmarks is None else cover.landmarks.tolist(),
    }
    if decomp is not None:
        obj["components"] = [
            {
                "pair": list(c.pair),
                "id": c.component_id,
                "indices": c.point_indices.tolist(),
            }
            for c in decomp.components
        ]
        obj["degenerate_pairs"] = [list(p) for p in decomp.degenerate_pairs]
    return json.dumps(obj)


def cover_from_json(text: str) -> Cover:
    obj = json.loads(text)
    return Cover(
        charts=[np.asarray(c, dtype=np.intp) for c in obj["charts"]],
        method=obj["method"],
        landmarks=None
        if obj.get("landmarks") is None
        else np.asarray(obj["landmarks"], dtype=np.intp),
        n_points=obj.get("n_points", 0),
    )
