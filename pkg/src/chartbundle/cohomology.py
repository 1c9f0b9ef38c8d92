"""Z/2 sign cocycle over overlap components and the coboundary test.

Charts are nodes; every connected overlap component contributes a parallel
edge labeled by the (majority) sign of the transition-Jacobian determinant
on that component. The cocycle is a coboundary exactly when the signed
multigraph admits a consistent 2-coloring nu with sign = nu_i * nu_j on every
edge; breadth-first propagation finds one or returns a cycle whose edge-sign
product is -1 as a witness.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .bundle import AtlasModel, DiagnosticsReport, TransitionSample, transition_jacobian_batch
from .cover import TripleOverlap
from .geometry import PointCloud


@dataclass
class CocycleEdge:
    pair: tuple[int, int]
    component_id: int
    sign: int  # majority sign on the component
    agreement: float  # fraction of samples voting for the majority sign
    n_points: int
    degenerate: bool  # agreement below the consistency threshold


@dataclass
class SignCocycle:
    edges: list[CocycleEdge]
    n_charts: int

    def degenerate_edges(self) -> list[CocycleEdge]:
        return [e for e in self.edges if e.degenerate]


@dataclass
class CoboundaryResult:
    is_coboundary: bool
    assignment: list[int] | None = None  # nu per chart (charts off the nerve get +1)
    witness_cycle: list[int] | None = None  # chart indices, closed (first == last)
    witness_edges: list[tuple[tuple[int, int], int, int]] | None = None
    # per nerve component: (sorted chart list, consistent flag)
    components: list[tuple[list[int], bool]] = field(default_factory=list)


@dataclass
class Gates:
    """Verdict gates; a trial failing any gate is reported inconclusive."""

    gap_min: float = 0.0  # strict: require gap > gap_min
    recon_sup_max: float = 0.15
    diff_err_max: float = 5.0


@dataclass
class Verdict:
    verdict: str  # orientable | non-orientable | inconclusive
    reasons: list[str]
    coboundary: CoboundaryResult | None
    cocycle_check: float
    gates: Gates


def compute_sign_cocycle(
    samples: list[TransitionSample], n_charts: int, consistency: float = 0.95
) -> SignCocycle:
    """Majority-vote sign per overlap component.

    Signs are provably constant per component for exact atlases, so learned
    ones must be nearly unanimous: a component whose majority fraction falls
    below `consistency` is flagged degenerate and excluded from the
    coboundary test. Zero determinants count as disagreeing votes.
    """
    groups: dict[tuple[tuple[int, int], int], list[TransitionSample]] = {}
    for s in samples:
        groups.setdefault((s.pair, s.component_id), []).append(s)
    edges = []
    for (pair, cid), group in sorted(groups.items()):
        votes = np.array([s.sign for s in group])
        n_pos = int(np.sum(votes > 0))
        n_neg = int(np.sum(votes < 0))
        if n_pos == 0 and n_neg == 0:
            raise ValueError(f"component {pair}/{cid} has no usable samples")
        sign = 1 if n_pos >= n_neg else -1
        agreement = max(n_pos, n_neg) / len(group)
        edges.append(
            CocycleEdge(
                pair=pair,
                component_id=cid,
                sign=sign,
                agreement=agreement,
                n_points=len(group),
                degenerate=agreement < consistency,
            )
        )
    return SignCocycle(edges=edges, n_charts=n_charts)


def verify_cocycle_condition(
    atlas: AtlasModel, cloud: PointCloud, triples: list[TripleOverlap]
) -> float:
    """Pointwise Cech check: fraction of triple-overlap points where
    sign(det g_ki) = sign(det g_kj) * sign(det g_ji), all three Jacobians
    evaluated at the same point. Returns 1.0 (vacuously) with no triples.
    """
    n_ok = 0
    n_total = 0
    for t in triples:
        i, j, k = t.triple
        pts = cloud.points[t.point_indices]
        s_ji = np.sign(np.linalg.det(transition_jacobian_batch(atlas, i, j, pts)))
        s_ki = np.sign(np.linalg.det(transition_jacobian_batch(atlas, i, k, pts)))
        s_kj = np.sign(np.linalg.det(transition_jacobian_batch(atlas, j, k, pts)))
        n_ok += int(np.sum(s_ki == s_kj * s_ji))
        n_total += len(pts)
    if n_total == 0:
        warnings.warn("no triple overlaps: cocycle condition holds vacuously")
        return 1.0
    return n_ok / n_total


def _bfs_two_coloring(n_charts: int, edges: list[CocycleEdge]) -> CoboundaryResult:
    adj: dict[int, list[tuple[int, CocycleEdge]]] = {i: [] for i in range(n_charts)}
    for e in edges:
        i, j = e.pair
        adj[i].append((j, e))
        adj[j].append((i, e))

    nu = [0] * n_charts  # 0 = unassigned
    parent: dict[int, tuple[int, CocycleEdge]] = {}
    components: list[tuple[list[int], bool]] = []
    witness_cycle = None
    witness_edges = None

    def path_to_root(node: int) -> list[int]:
        path = [node]
        while path[-1] in parent:
            path.append(parent[path[-1]][0])
        return path

    for root in range(n_charts):
        if nu[root] != 0:
            continue
        nu[root] = 1
        queue = [root]
        comp_nodes = [root]
        consistent = True
        while queue:
            u = queue.pop(0)
            for v, e in adj[u]:
                want = e.sign * nu[u]
                if nu[v] == 0:
                    nu[v] = want
                    parent[v] = (u, e)
                    queue.append(v)
                    comp_nodes.append(v)
                elif nu[v] != want and consistent:
                    # first conflict in this component: the tree paths
                    # u->root and v->root plus edge e close a cycle whose
                    # edge-sign product is -1
                    consistent = False
                    pu, pv = path_to_root(u), path_to_root(v)
                    common = set(pu) & set(pv)
                    lca = next(n for n in pu if n in common)
                    cycle = (
                        pu[: pu.index(lca) + 1]
                        + list(reversed(pv[: pv.index(lca)]))
                        + [u]
                    )
                    w_edges = [(e.pair, e.component_id, e.sign)]
                    for node in (u, v):
                        cur = node
                        while cur != lca:
                            p, pe = parent[cur]
                            w_edges.append((pe.pair, pe.component_id, pe.sign))
                            cur = p
                    if witness_cycle is None:
                        witness_cycle = cycle
                        witness_edges = w_edges
        components.append((sorted(comp_nodes), consistent))

    ok = all(c for _, c in components)
    return CoboundaryResult(
        is_coboundary=ok,
        assignment=nu if ok else None,
        witness_cycle=witness_cycle,
        witness_edges=witness_edges,
        components=components,
    )


def coboundary_test(cocycle: SignCocycle) -> CoboundaryResult:
    """Decide whether the sign cocycle is a coboundary (signed 2-coloring of
    the nerve's 1-skeleton, components as parallel edges).

    Degenerate edges must be gated out first; their sign is not trustworthy
    and silently dropping or keeping them could flip the verdict.
    """
    bad = cocycle.degenerate_edges()
    if bad:
        names = ", ".join(f"{e.pair}/{e.component_id}" for e in bad)
        raise ValueError(f"degenerate cocycle edges present: {names}")
    return _bfs_two_coloring(cocycle.n_charts, cocycle.edges)


def coboundary_test_bruteforce(cocycle: SignCocycle) -> bool:
    """Exhaustive reference: try all 2^n chart-sign assignments. Exponential;
    used as the oracle for the BFS implementation on small graphs."""
    n = cocycle.n_charts
    for signs in product((1, -1), repeat=n):
        if all(e.sign == signs[e.pair[0]] * signs[e.pair[1]] for e in cocycle.edges):
            return True
    return False


def check_assignment(cocycle: SignCocycle, assignment: list[int]) -> bool:
    return all(
        e.sign == assignment[e.pair[0]] * assignment[e.pair[1]]
        for e in cocycle.edges
    )


def orientability_report(
    diag: DiagnosticsReport,
    cocycle: SignCocycle,
    cocycle_check: float,
    gates: Gates,
) -> Verdict:
    """Gate the diagnostics, then decide orientability by the coboundary test.

    Gating exists because a plausible-looking sign cocycle from a bad atlas
    (huge latent differential error on one chart, or a determinant passing
    near zero) can represent the wrong cohomology class; such trials must
    come out inconclusive rather than mislabeled.
    """
    reasons = []
    if diag.gap is None or diag.gap <= gates.gap_min:
        reasons.append(f"nondegeneracy gap {diag.gap} <= {gates.gap_min}")
    if diag.recon_sup > gates.recon_sup_max:
        reasons.append(
            f"sup reconstruction error {diag.recon_sup:.4g} > {gates.recon_sup_max}"
        )
    bad_eta = [
        (i, e)
        for i, e in enumerate(diag.diff_err_per_chart)
        if e > gates.diff_err_max
    ]
    if bad_eta:
        worst = max(bad_eta, key=lambda t: t[1])
        reasons.append(
            f"chart {worst[0]} latent differential error {worst[1]:.4g} > "
            f"{gates.diff_err_max}"
        )
    if cocycle.degenerate_edges():
        names = ", ".join(
            f"{e.pair}/{e.component_id}" for e in cocycle.degenerate_edges()
        )
        reasons.append(f"degenerate sign components: {names}")
    if reasons:
        return Verdict(
            verdict="inconclusive",
            reasons=reasons,
            coboundary=None,
            cocycle_check=cocycle_check,
            gates=gates,
        )
    result = coboundary_test(cocycle)
    return Verdict(
        verdict="orientable" if result.is_coboundary else "non-orientable",
        reasons=[],
        coboundary=result,
        cocycle_check=cocycle_check,
        gates=gates,
    )
