"""Growth of intersecting manifolds by an EMA-guided depth-first traversal.

Inside one non-intersecting component, a manifold is grown from a root as a
DFS tree. A child is accepted when the angular gaps between its principal
directions and its parent's stay close to the exponential moving average of
the gaps seen along the root-to-parent path. A rejected child is given a
second chance: its neighborhood is pruned, largest ``mod_dis`` first, until
it passes or the neighborhood gets too small. When the tree cannot grow any
further the manifold is closed and the next one starts from a fresh root.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .components import build_knn_graph, count_components, laplacian, split_components
from .config import AcevConfig
from .errors import InvalidInputError
from .geometry import (
    LocalGeometry,
    NeighborSet,
    angle_profile,
    as_point_matrix,
    batch_geometry,
    geometry_of,
    knn_all,
    subspace_gaps,
)

log = logging.getLogger(__name__)


@dataclass
class TraversalNode:
    point: int
    parent: int | None
    ema: np.ndarray | None
    geometry: LocalGeometry
    depth: int = 0


@dataclass
class FilterResult:
    filtered: NeighborSet
    accepted: bool
    geometry: LocalGeometry
    ema: np.ndarray
    observed: np.ndarray
    removed: list = field(default_factory=list)


@dataclass
class ManifoldInfo:
    component: int
    manifold: int
    members: np.ndarray
    intrinsic_dim: int

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass
class ManifoldLabeling:
    """Final (component, manifold) assignment of every point.

    ``parent`` holds the inclusion edge of every point (``-1`` for roots), so
    the DFS forest can be inspected after the fact. ``node_dim`` is the
    intrinsic dimension of each point's neighborhood as used by the traversal,
    i.e. after any filtration.
    """

    component: np.ndarray
    manifold: np.ndarray
    parent: np.ndarray
    node_dim: np.ndarray
    manifolds: list
    n_components: int
    timings: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    @property
    def n_manifolds(self) -> int:
        return len(self.manifolds)

    def manifolds_per_component(self) -> list:
        counts = [0] * self.n_components
        for info in self.manifolds:
            counts[info.component] += 1
        return counts

    def global_labels(self) -> np.ndarray:
        """One dense id per (component, manifold) pair, in creation order."""
        out = np.empty(len(self.component), dtype=np.intp)
        for gid, info in enumerate(self.manifolds):
            out[info.members] = gid
        return out


def select_root(points, unlabelled) -> int:
    """Unlabelled point with the smallest first coordinate.

    Ties fall through to the next coordinates, then to the lower index.
    """
    idx = np.asarray(sorted(unlabelled), dtype=np.intp)
    if idx.size == 0:
        raise InvalidInputError("no unlabelled points to choose a root from")
    pts = np.asarray(points)[idx]
    # lexsort keys: last key is primary
    keys = [idx] + [pts[:, j] for j in range(pts.shape[1] - 1, -1, -1)]
    return int(idx[np.lexsort(keys)[0]])


def ema_update(prev, observed, alpha) -> np.ndarray:
    """One step of the moving average: ``alpha * observed + (1 - alpha) * prev``."""
    if not np.all((np.asarray(alpha) > 0) & (np.asarray(alpha) < 1)):
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha * np.asarray(observed, dtype=np.float64) + (1 - alpha) * np.asarray(prev, dtype=np.float64)


def observed_gaps(parent: LocalGeometry, child: LocalGeometry, matching="rank",
                  manifold_dim=None) -> np.ndarray:
    """Angular gaps between a parent and a child neighborhood.

    ``"rank"`` pairs directions by eigenvalue rank (:func:`angle_profile`);
    ``"subspace"`` compares each child direction with the parent's tangent or
    normal block, split at ``manifold_dim`` (:func:`subspace_gaps`).
    """
    if matching == "subspace":
        return subspace_gaps(parent, child, manifold_dim)
    return angle_profile(parent, child)


def inclusion_test(parent: TraversalNode, candidate: LocalGeometry, alpha, angle_tol, matching="rank",
                   manifold_dim=None, gate="update"):
    """Compare a candidate's angular gaps to the parent's EMA prediction.

    Returns ``(accepted, observed, new_ema)``. With ``gate="update"`` the
    candidate is accepted when the updated EMA is within ``angle_tol`` of the
    observed gap in every direction. Since that difference is
    ``(1 - alpha)`` times the prediction error, the effective window widens
    as ``alpha`` grows. ``gate="prediction"`` bounds the prediction error
    ``|parent.ema - observed|`` itself, which keeps the window at
    ``angle_tol`` for every ``alpha``.

    When ``manifold_dim`` is given, a candidate of higher intrinsic dimension
    is rejected outright: a neighborhood that gains a dimension straddles an
    intersection.
    """
    observed = observed_gaps(parent.geometry, candidate, matching, manifold_dim)
    new_ema = ema_update(parent.ema, observed, alpha)
    ref = parent.ema if gate == "prediction" else new_ema
    accepted = bool(np.all(np.abs(ref - observed) <= angle_tol))
    if manifold_dim is not None and candidate.intrinsic_dim > manifold_dim:
        accepted = False
    return accepted, observed, new_ema


def dist_line(x, anchor, direction) -> float:
    """Euclidean distance from ``x`` to the line ``anchor + t * direction``."""
    v = np.asarray(x, dtype=np.float64) - anchor
    u = direction / np.linalg.norm(direction)
    return float(np.linalg.norm(v - (v @ u) * u))


def eig_floor(parent_eigvals) -> float:
    return 1e-12 * max(float(np.max(parent_eigvals)), 1e-300)


def mod_dis(r_coords, parent: TraversalNode | LocalGeometry, r_geometry: LocalGeometry,
            distance="line") -> float:
    """Eigenvalue-weighted distance of a neighbor ``r`` to the parent's principal directions.

    Each principal direction ``e_w`` of the parent neighborhood contributes a
    distance scaled by ``lambda_w(r) / lambda_w(parent)``. With
    ``distance="line"`` that is the distance from ``r`` to the line through the
    parent centroid along ``e_w``; with ``"offset"`` it is the length of the
    component of ``r - centroid`` along ``e_w``. Parent eigenvalues are floored
    at ``1e-12`` times the largest one so flat directions do not divide by zero.
    """
    pg = parent.geometry if isinstance(parent, TraversalNode) else parent
    return float(_mod_dis_many(np.asarray(r_coords, dtype=np.float64)[None, :],
                               r_geometry.eigvals[None, :], pg, distance)[0])


def _mod_dis_many(coords, eigvals, pg: LocalGeometry, distance="line") -> np.ndarray:
    v = coords - pg.centroid
    proj = v @ pg.eigvecs  # (m, D) coordinates along each parent direction
    if distance == "offset":
        dist = np.abs(proj)
    else:
        sq = np.einsum("ij,ij->i", v, v)[:, None]
        dist = np.sqrt(np.clip(sq - proj**2, 0.0, None))
    denom = np.maximum(pg.eigvals, eig_floor(pg.eigvals))
    return np.sum(dist * (eigvals / denom), axis=1)


def filter_neighborhood(points, q, neigh: NeighborSet, parent: TraversalNode, cfg: AcevConfig,
                        neighbor_eigvals, first_geometry=None, manifold_dim=None) -> FilterResult:
    """Prune ``q``'s neighborhood until it passes the inclusion test against ``parent``.

    Neighbors are removed one at a time in decreasing ``mod_dis`` order and
    ``q``'s local geometry is recomputed after each removal. The loop gives up
    once another removal would leave fewer than the filtration floor.

    ``neighbor_eigvals`` maps a point index to the eigenvalues of that point's
    own (unfiltered) neighborhood.
    """
    pts = np.asarray(points, dtype=np.float64)
    d = parent.geometry.intrinsic_dim if manifold_dim is None else manifold_dim
    floor = cfg.filtration_floor(d)
    geom = first_geometry if first_geometry is not None else geometry_of(
        pts, q, neigh.neighbors, cfg.var_thresh)
    accepted, observed, new_ema = inclusion_test(parent, geom, cfg.alpha, cfg.angle_tol, cfg.matching, manifold_dim, cfg.ema_gate)
    if accepted:
        return FilterResult(neigh, True, geom, new_ema, observed)

    nbrs = np.asarray(neigh.neighbors, dtype=np.intp)
    lam = np.array([neighbor_eigvals(int(r)) for r in nbrs]).reshape(len(nbrs), -1)
    scores = _mod_dis_many(pts[nbrs], lam, parent.geometry, cfg.filter_distance)
    # stable sort on the negated score: equal scores drop the closer neighbor first
    removal = nbrs[np.argsort(-scores, kind="stable")]
    kept = len(nbrs)
    removed = []
    for r in removal:
        if kept - 1 < floor:
            break
        removed.append(int(r))
        kept -= 1
        reduced = neigh.without(removed)
        geom = geometry_of(pts, q, reduced.neighbors, cfg.var_thresh)
        accepted, observed, new_ema = inclusion_test(parent, geom, cfg.alpha, cfg.angle_tol, cfg.matching, manifold_dim, cfg.ema_gate)
        if accepted:
            return FilterResult(reduced, True, geom, new_ema, observed, removed)
    return FilterResult(neigh.without(removed), False, geom, new_ema, observed, removed)


class _ComponentGeometry:
    """k-NN lists and full-neighborhood PCA for the points of one component."""

    def __init__(self, sub_points, k, var_thresh):
        self.points = sub_points
        self.nbr_idx, self.nbr_dist = knn_all(sub_points, k)
        self.centroids, self.eigvals, self.eigvecs, self.dims = batch_geometry(
            sub_points, self.nbr_idx, var_thresh)

    def neighbors(self, i) -> NeighborSet:
        return NeighborSet(i, self.nbr_idx[i], self.nbr_dist[i])

    def geometry(self, i) -> LocalGeometry:
        return LocalGeometry(i, self.centroids[i], self.eigvals[i], self.eigvecs[i], int(self.dims[i]))


@dataclass
class ComponentSegmentation:
    """Per-member result of :func:`segment_component`, indexed like ``members``."""

    manifold: np.ndarray
    parent: np.ndarray
    node_dim: np.ndarray
    n_manifolds: int
    stats: dict


def _mode(values) -> int:
    vals, counts = np.unique(np.asarray(values, dtype=np.intp), return_counts=True)
    return int(vals[np.argmax(counts)])


def segment_component(points, members, cfg: AcevConfig, record=None) -> ComponentSegmentation:
    """Split one non-intersecting component into individual manifolds.

    ``parent`` in the result uses indices into ``members`` (``-1`` for roots).
    If ``record`` is a list, one dict per tested (parent, candidate) pair is
    appended to it.
    """
    members = np.asarray(members, dtype=np.intp)
    nc = len(members)
    if nc == 0:
        raise InvalidInputError("cannot segment an empty component")
    labels = np.full(nc, -1, dtype=np.intp)
    parents = np.full(nc, -1, dtype=np.intp)
    node_dim = np.zeros(nc, dtype=np.intp)
    stats = {"tests": 0, "rejections": 0, "filtrations": 0, "filter_accepts": 0, "removed": 0}
    sub = np.asarray(points, dtype=np.float64)[members]

    n_manifolds = 0
    geo = pool = None
    while True:
        unlabelled = np.flatnonzero(labels < 0)
        if unlabelled.size == 0:
            break
        if geo is None or cfg.refresh_neighborhoods:
            # neighborhoods over the points still unlabelled, so finished
            # manifolds no longer distort the geometry of the next one
            pool = unlabelled if cfg.refresh_neighborhoods else np.arange(nc)
            geo = _ComponentGeometry(sub[pool], cfg.k, cfg.var_thresh) if len(pool) > 1 else None
        mid = n_manifolds
        n_manifolds += 1
        root = select_root(sub, unlabelled)
        labels[root] = mid
        if geo is None:
            continue
        local = {int(p): j for j, p in enumerate(pool)}
        grown = _grow(geo, local[root], labels, pool, mid, cfg, stats, record, members,
                      warmup=max(1, math.ceil(cfg.warmup_frac * unlabelled.size)))
        for j, (par, dim) in grown.items():
            parents[pool[j]] = -1 if par is None else pool[par]
            node_dim[pool[j]] = dim
    stats["manifolds"] = n_manifolds
    return ComponentSegmentation(labels, parents, node_dim, n_manifolds, stats)


def _grow(geo, root, labels, pool, mid, cfg, stats, record, members, warmup):
    """Grow one manifold tree from ``root`` (an index into ``pool``); returns node -> (parent, dim)."""
    def eigvals_of(i):
        return geo.eigvals[i]

    def free(j):
        return labels[pool[j]] < 0

    root_geom = geo.geometry(root)
    # the manifold's intrinsic dimension, learned from the root neighborhood
    dims = np.concatenate(([geo.dims[root]], geo.dims[geo.nbr_idx[root]]))
    mdim = _mode(dims) if cfg.matching == "subspace" else None
    floor_dim = root_geom.intrinsic_dim if mdim is None else mdim
    nodes = {root: TraversalNode(root, None, None, root_geom, 0)}
    out = {root: (None, root_geom.intrinsic_dim)}
    stack = [root]
    while stack:
        s = stack.pop()
        pnode = nodes[s]
        for c in geo.nbr_idx[s]:
            c = int(c)
            if not free(c):
                continue
            cand = geo.geometry(c)
            neigh = geo.neighbors(c)
            stats["tests"] += 1
            removed = []
            geom = cand
            if warmup > 0 or pnode.ema is None:
                # unconditional inclusion while the EMA state is being seeded
                observed = observed_gaps(pnode.geometry, cand, cfg.matching, mdim)
                if pnode.ema is None:
                    pnode.ema = observed
                new_ema, accepted = observed, True
                warmup -= 1
            else:
                accepted, observed, new_ema = inclusion_test(
                    pnode, cand, cfg.alpha, cfg.angle_tol, cfg.matching, mdim, cfg.ema_gate)
                if not accepted:
                    stats["rejections"] += 1
                    if len(neigh) > cfg.filtration_floor(floor_dim):
                        stats["filtrations"] += 1
                        res = filter_neighborhood(geo.points, c, neigh, pnode, cfg, eigvals_of,
                                                  first_geometry=cand, manifold_dim=mdim)
                        accepted, observed, new_ema, geom = res.accepted, res.observed, res.ema, res.geometry
                        removed = res.removed
                        if accepted:
                            stats["filter_accepts"] += 1
                            stats["removed"] += len(removed)
            if record is not None:
                record.append({"point": int(members[pool[c]]), "parent": int(members[pool[s]]),
                               "prev_ema": None if pnode.ema is None else pnode.ema.copy(),
                               "observed": observed, "ema": new_ema, "accepted": accepted,
                               "removed": [int(members[pool[r]]) for r in removed], "manifold": mid})
            if not accepted:
                continue
            labels[pool[c]] = mid
            out[c] = (s, geom.intrinsic_dim)
            nodes[c] = TraversalNode(c, s, new_ema, geom, pnode.depth + 1)
            stack.append(c)
    return out


def segment(points, cfg: AcevConfig | None = None, record=None) -> ManifoldLabeling:
    """Run both stages: component split, then per-component manifold growth."""
    cfg = cfg or AcevConfig()
    pts = as_point_matrix(points)
    n = pts.shape[0]
    timings = {}
    if n == 1:
        comp = np.zeros(1, dtype=np.intp)
        timings.update(graph=0.0, spectrum=0.0, split=0.0, traversal=0.0)
        m = 1
    else:
        t0 = time.perf_counter()
        graph = build_knn_graph(pts, cfg.k, mutual=cfg.mutual_knn)
        lap = laplacian(graph)
        t1 = time.perf_counter()
        m = count_components(lap, cfg.zero_tol)
        t2 = time.perf_counter()
        comp = split_components(pts, graph, m, by_graph=cfg.components_by_graph)
        t3 = time.perf_counter()
        timings.update(graph=t1 - t0, spectrum=t2 - t1, split=t3 - t2)
        log.info("found %d non-intersecting component(s)", m)

    t4 = time.perf_counter()
    manifold = np.zeros(n, dtype=np.intp)
    parent = np.full(n, -1, dtype=np.intp)
    node_dim = np.zeros(n, dtype=np.intp)
    infos = []
    stats = {}
    for ci in range(m):
        members = np.flatnonzero(comp == ci)
        res = segment_component(pts, members, cfg, record=record)
        manifold[members] = res.manifold
        node_dim[members] = res.node_dim
        has_parent = res.parent >= 0
        parent[members[has_parent]] = members[res.parent[has_parent]]
        for mid in range(res.n_manifolds):
            local = res.manifold == mid
            infos.append(ManifoldInfo(ci, mid, members[local], _mode(res.node_dim[local])))
        for key, val in res.stats.items():
            stats[key] = stats.get(key, 0) + val
    timings["traversal"] = time.perf_counter() - t4
    return ManifoldLabeling(comp, manifold, parent, node_dim, infos, m, timings, stats)
