import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from acev.config import AcevConfig
from acev.errors import InvalidInputError
from acev.geometry import LocalGeometry, NeighborSet, batch_geometry, geometry_of, knn_all
from acev.synthetic import gen_plane, plane_plane, two_planes
from acev.traversal import (
    TraversalNode,
    dist_line,
    ema_update,
    filter_neighborhood,
    inclusion_test,
    mod_dis,
    segment,
    segment_component,
    select_root,
)

angles = arrays(np.float64, 3, elements=st.floats(0, np.pi / 2))
alphas = st.floats(0.01, 0.99)


def node(geom, ema):
    return TraversalNode(geom.center, None, None if ema is None else np.asarray(ema, float), geom)


def axis_geometry(eigvals, centroid=(0.0, 0.0, 0.0), dim=None, center=0):
    lam = np.asarray(eigvals, dtype=float)
    d = int(np.count_nonzero(lam / lam.sum() > 0.01)) if dim is None else dim
    return LocalGeometry(center, np.asarray(centroid, float), lam, np.eye(3), d)


@pytest.mark.parametrize("pts, unlabelled, expected", [
    ([[5, 0], [1, 9], [3, 3]], [0, 1, 2], 1),
    ([[5, 0], [1, 9], [3, 3]], [2], 2),
    ([[1, 2], [1, 2], [1, 3]], [0, 1, 2], 0),
    ([[1, 2], [1, 2], [1, 1]], [0, 1, 2], 2),
    ([[1, 2], [1, 2], [1, 3]], [1, 2], 1),
])
def test_select_root(pts, unlabelled, expected):
    assert select_root(np.array(pts, float), unlabelled) == expected


def test_select_root_empty():
    with pytest.raises(InvalidInputError):
        select_root(np.zeros((2, 2)), [])


def test_ema_update_examples():
    assert np.allclose(ema_update([0.3, 0.1], [0.3, 0.1], 0.6), [0.3, 0.1])
    assert ema_update([0.0], [1.0], 0.6)[0] == pytest.approx(0.6)
    with pytest.raises(InvalidInputError):
        ema_update([0.0], [1.0], 1.0)


@given(angles, angles, alphas)
def test_ema_contraction_identity(prev, observed, alpha):
    new = ema_update(prev, observed, alpha)
    assert np.allclose(np.abs(new - observed), (1 - alpha) * np.abs(prev - observed), atol=1e-12, rtol=0)
    # convex combination keeps angles in range
    assert np.all((new >= 0) & (new <= np.pi / 2 + 1e-15))


@pytest.mark.parametrize("gate", ["update", "prediction"])
def test_inclusion_matches_prediction(gate):
    g = axis_geometry([2.0, 1.0, 0.0])
    acc, obs, new = inclusion_test(node(g, np.zeros(3)), g, 0.6, 0.15, gate=gate)
    assert acc and np.all(obs == 0) and np.all(new == 0)


def test_inclusion_rejects_large_prediction_error():
    parent = node(axis_geometry([2.0, 1.0, 0.0]), [0.0, 0.0, 0.0])
    # candidate turned 60 degrees about the x axis: gaps (0, 60, 60) degrees
    c, s = math.cos(math.pi / 3), math.sin(math.pi / 3)
    turned = LocalGeometry(1, np.zeros(3), np.array([2.0, 1.0, 0.0]),
                           np.array([[1, 0, 0], [0, c, -s], [0, s, c]]), 2)
    acc, obs, _ = inclusion_test(parent, turned, 0.6, 0.15)
    assert obs[1] * (1 - 0.6) > 0.15
    assert not acc


@given(angles, angles, alphas, st.floats(0.01, 1.0))
def test_inclusion_gates_agree_with_their_windows(prev, observed, alpha, tol):
    g = axis_geometry([2.0, 1.0, 0.0])
    parent = node(g, prev)
    # build a candidate whose rank-matched gaps are the requested ones is awkward;
    # check the decision rule directly on the returned vectors instead
    acc_u, obs, new = inclusion_test(parent, g, alpha, tol, gate="update")
    assert acc_u == bool(np.all(np.abs(new - obs) <= tol))
    acc_p, obs, _ = inclusion_test(parent, g, alpha, tol, gate="prediction")
    assert acc_p == bool(np.all(np.abs(prev - obs) <= tol))


def test_inclusion_rejects_dimension_increase():
    parent = node(axis_geometry([2.0, 1.0, 0.0]), np.zeros(3))
    thick = axis_geometry([2.0, 1.0, 0.5])
    acc, _, _ = inclusion_test(parent, thick, 0.6, 0.15, matching="subspace", manifold_dim=2)
    assert not acc
    acc, _, _ = inclusion_test(parent, thick, 0.6, 0.15, matching="subspace", manifold_dim=3)
    assert acc


def test_adjacent_noiseless_plane_patches_accepted():
    pts = gen_plane(1000, sigma=0.0, seed=5).points
    idx, _ = knn_all(pts, 25)
    a = geometry_of(pts, 0, idx[0])
    b = geometry_of(pts, int(idx[0][0]), idx[idx[0][0]])
    parent = node(a, np.zeros(3))
    assert inclusion_test(parent, b, 0.6, 0.15, matching="subspace", manifold_dim=2)[0]


def test_dist_line():
    assert dist_line([0, 3, 4], np.zeros(3), np.array([1.0, 0, 0])) == pytest.approx(5.0)
    assert dist_line([7, 0, 0], np.zeros(3), np.array([2.0, 0, 0])) == 0.0


def mod_dis_by_hand(r, parent, r_eigvals, distance="line"):
    total = 0.0
    floor = 1e-12 * max(parent.eigvals.max(), 1e-300)
    for w in range(len(parent.eigvals)):
        e = parent.eigvecs[:, w]
        if distance == "line":
            dis = dist_line(r, parent.centroid, e)
        else:
            dis = abs(float((np.asarray(r) - parent.centroid) @ e))
        total += dis * r_eigvals[w] / max(parent.eigvals[w], floor)
    return total


def test_mod_dis_at_centroid_is_zero():
    parent = axis_geometry([2.0, 1.0, 0.5], centroid=[1.0, 2.0, 3.0])
    assert mod_dis([1.0, 2.0, 3.0], parent, axis_geometry([1.0, 1.0, 1.0])) == 0.0


def test_mod_dis_unit_ratios_sum_line_distances():
    parent = axis_geometry([2.0, 1.0, 0.5])
    r = np.array([1.0, 2.0, 2.0])
    expected = sum(dist_line(r, parent.centroid, parent.eigvecs[:, w]) for w in range(3))
    assert mod_dis(r, parent, axis_geometry([2.0, 1.0, 0.5])) == pytest.approx(expected)


def test_mod_dis_against_termwise_oracle(rng):
    for _ in range(50):
        pts = rng.normal(size=(12, 3)) * [3.0, 1.0, 0.2]
        parent = geometry_of(pts, 0, np.arange(1, 12))
        r_geom = geometry_of(pts, 5, [1, 2, 3, 4, 6])
        for distance in ("line", "offset"):
            assert mod_dis(pts[5], parent, r_geom, distance) == pytest.approx(
                mod_dis_by_hand(pts[5], parent, r_geom.eigvals, distance), rel=1e-12)


def test_mod_dis_flags_inflated_normal_eigenvalue():
    # a planar parent; two neighbors at the same spot, one sitting in a thick
    # (intersection) neighborhood with a large out-of-plane eigenvalue
    parent = axis_geometry([1.0, 1.0, 1e-4])
    r = np.array([0.3, 0.3, 0.0])
    on_plane = axis_geometry([1.0, 1.0, 1e-4])
    crossing = axis_geometry([1.0, 1.0, 0.5])
    assert mod_dis(r, parent, crossing) > mod_dis(r, parent, on_plane)


def test_mod_dis_zero_parent_eigenvalue_is_finite():
    parent = axis_geometry([1.0, 0.0, 0.0], dim=1)
    val = mod_dis([0.0, 0.0, 1.0], parent, axis_geometry([1.0, 1.0, 0.0]))
    assert np.isfinite(val) and val > 1e6


def _plane_plane_setup():
    sc = plane_plane(2000, sigma=0.0, seed=0)
    pts = sc.points
    idx, dist = knn_all(pts, 25)
    _, eigvals, _, dims = batch_geometry(pts, idx)
    return sc, pts, idx, dist, eigvals, dims


def test_filter_noop_when_passing():
    sc, pts, idx, dist, eigvals, _ = _plane_plane_setup()
    far = int(np.argmax(np.abs(pts[:, 0]) * (sc.truth == 0)))
    p = int(idx[far][0])
    parent = node(geometry_of(pts, p, idx[p]), np.zeros(3))
    neigh = NeighborSet(far, idx[far], dist[far])
    res = filter_neighborhood(pts, far, neigh, parent, AcevConfig(), lambda i: eigvals[i], manifold_dim=2)
    assert res.accepted and res.removed == []
    assert res.filtered is neigh


def test_filter_strips_the_other_plane():
    sc, pts, idx, dist, eigvals, dims = _plane_plane_setup()
    q, p = 4, 882  # q sits on plane 0 at 0.087 from the crossing line
    assert sc.truth[q] == sc.truth[p] == 0 and dims[q] == 3
    parent = node(geometry_of(pts, p, idx[p]), np.zeros(3))
    res = filter_neighborhood(pts, q, NeighborSet(q, idx[q], dist[q]), parent, AcevConfig(),
                              lambda i: eigvals[i], manifold_dim=2)
    assert res.accepted
    assert res.geometry.intrinsic_dim == 2
    assert res.removed and np.all(sc.truth[res.removed] == 1)


@pytest.mark.parametrize("cfg", [AcevConfig(), AcevConfig(min_neigh=7), AcevConfig.literal()])
def test_filter_stops_at_floor(cfg):
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(40, 3))
    idx, dist = knn_all(pts, 25)
    _, eigvals, _, _ = batch_geometry(pts, idx)
    # a parent whose EMA expects gaps no neighborhood of isotropic noise can match
    parent = TraversalNode(1, None, np.full(3, np.pi / 2),
                           LocalGeometry(1, np.zeros(3), np.array([1.0, 0.5, 1e-3]), np.eye(3), 2))
    res = filter_neighborhood(pts, 0, NeighborSet(0, idx[0], dist[0]), parent, cfg, lambda i: eigvals[i])
    assert not res.accepted
    assert len(res.filtered) == cfg.filtration_floor(2)
    assert len(res.removed) == 25 - cfg.filtration_floor(2)


@given(st.integers(0, 2**31 - 1), st.integers(0, 39), st.sampled_from([0.0, 0.4, 1.0]))
def test_filter_never_drops_the_candidate(seed, q, frac):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(40, 3)) * [1.0, 1.0, 0.05]
    idx, dist = knn_all(pts, 25)
    _, eigvals, _, _ = batch_geometry(pts, idx)
    cfg = AcevConfig(min_neigh_frac=frac)
    parent = TraversalNode(1, None, np.full(3, np.pi / 2),
                           LocalGeometry(1, np.zeros(3), np.array([1.0, 0.5, 1e-3]), np.eye(3), 2))
    res = filter_neighborhood(pts, q, NeighborSet(q, idx[q], dist[q]), parent, cfg, lambda i: eigvals[i])
    assert q not in res.removed and q not in res.filtered.neighbors
    assert set(res.filtered.neighbors) | set(res.removed) == set(idx[q])
    assert len(res.filtered) >= min(25, cfg.filtration_floor(2))


def test_single_plane_is_one_manifold():
    pts = gen_plane(800, sigma=0.0, seed=2).points
    res = segment_component(pts, np.arange(800), AcevConfig())
    assert res.n_manifolds == 1
    assert np.all(res.manifold == 0)


def test_singleton_component():
    res = segment_component(np.zeros((1, 3)), [0], AcevConfig())
    assert res.n_manifolds == 1 and res.manifold.tolist() == [0]
    with pytest.raises(InvalidInputError):
        segment_component(np.zeros((1, 3)), [], AcevConfig())


def test_two_far_planes():
    sc = two_planes(1000, sigma=0.0, seed=0, gap=5.0)
    lab = segment(sc.points, AcevConfig())
    assert lab.n_components == 2
    assert lab.manifolds_per_component() == [1, 1]
    assert np.array_equal(lab.component, sc.truth)


def test_single_point_dataset():
    lab = segment(np.array([[1.0, 2.0]]))
    assert lab.n_components == 1 and lab.n_manifolds == 1


@pytest.fixture(scope="module")
def crossing_run():
    sc = plane_plane(1000, sigma=0.01, seed=3)
    cfg = AcevConfig()
    record = []
    return sc, cfg, segment(sc.points, cfg, record=record), record


def test_labeling_complete_and_dense(crossing_run):
    sc, _, lab, _ = crossing_run
    assert np.all(lab.manifold >= 0)
    for c in range(lab.n_components):
        ids = np.unique(lab.manifold[lab.component == c])
        assert ids.tolist() == list(range(len(ids)))
    assert sum(m.size for m in lab.manifolds) == sc.n


def test_inclusion_edges_form_a_forest(crossing_run):
    _, _, lab, _ = crossing_run
    roots = 0
    for i in range(len(lab.parent)):
        seen = set()
        v = i
        while lab.parent[v] >= 0:
            assert v not in seen
            seen.add(v)
            assert lab.manifold[lab.parent[v]] == lab.manifold[v]
            v = lab.parent[v]
        roots += i == v
    assert roots == lab.n_manifolds


def test_accepted_nodes_obey_ema_contraction(crossing_run):
    _, cfg, _, record = crossing_run
    checked = 0
    for r in record:
        if r["accepted"] and r["prev_ema"] is not None and not np.array_equal(r["ema"], r["observed"]):
            lhs = np.abs(r["ema"] - r["observed"])
            rhs = (1 - cfg.alpha) * np.abs(r["prev_ema"] - r["observed"])
            assert np.allclose(lhs, rhs, atol=1e-12, rtol=0)
            checked += 1
    assert checked > 100


def test_segment_is_deterministic(crossing_run):
    sc, cfg, lab, _ = crossing_run
    again = segment(sc.points, cfg)
    assert np.array_equal(lab.manifold, again.manifold)
    assert np.array_equal(lab.parent, again.parent)


def test_literal_rules_run_to_completion():
    sc = plane_plane(600, sigma=0.01, seed=1)
    lab = segment(sc.points, AcevConfig.literal())
    assert np.all(lab.manifold >= 0)


@given(st.integers(0, 2**31 - 1), st.integers(2, 120), st.integers(2, 4))
def test_segment_total_dense_and_repeatable(seed, n, dim):
    pts = np.random.default_rng(seed).normal(size=(n, dim))
    cfg = AcevConfig(k=10)
    lab = segment(pts, cfg)
    labels = lab.global_labels()
    assert sorted(np.unique(labels).tolist()) == list(range(lab.n_manifolds))
    assert sum(m.size for m in lab.manifolds) == n
    for c in range(lab.n_components):
        ids = np.unique(lab.manifold[lab.component == c])
        assert ids.tolist() == list(range(len(ids)))
    assert np.array_equal(labels, segment(pts, cfg).global_labels())
