"""Per-point neighborhood primitives: exact k-NN, local PCA, eigenvector angles.

Every function here is a pure function of its inputs. Eigenvalues are always
returned in descending order, eigenvectors as the columns of a ``(D, D)``
array, so ``eigvecs[:, w]`` is the w-th principal direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateNeighborhoodError, InvalidInputError

#: A direction counts toward the intrinsic dimension when it carries more than
#: this fraction of the local variance.
DEFAULT_VAR_THRESH = 0.01

# Bytes of scratch space used per chunk when computing all-pairs distances.
_CHUNK_BYTES = 64 * 2**20


def as_point_matrix(data) -> np.ndarray:
    """Validate ``data`` as an ``(n, D)`` matrix of finite reals and return a float copy."""
    pts = np.array(data, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
        raise InvalidInputError(f"expected a non-empty (n, D) matrix, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("point matrix contains NaN or Inf")
    pts.setflags(write=False)
    return pts


@dataclass(frozen=True)
class NeighborSet:
    """The nearest neighbors of ``center``, closest first."""

    center: int
    neighbors: np.ndarray
    distances: np.ndarray

    def __len__(self):
        return len(self.neighbors)

    def without(self, drop) -> "NeighborSet":
        """Return a copy with the neighbor indices in ``drop`` removed."""
        keep = ~np.isin(self.neighbors, np.asarray(list(drop), dtype=np.intp))
        return NeighborSet(self.center, self.neighbors[keep], self.distances[keep])


@dataclass(frozen=True)
class LocalGeometry:
    """Local PCA of one point's neighborhood."""

    center: int
    centroid: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    intrinsic_dim: int

    @property
    def dim(self) -> int:
        return self.centroid.shape[0]


def _sq_dists_to(points, rows):
    diff = points[None, :, :] - points[rows][:, None, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def knn_all(points, k):
    """Exact k-NN of every point.

    Returns ``(indices, distances)``, both of shape ``(n, min(k, n - 1))``,
    sorted by ascending distance with ties broken by ascending index. A point
    is never its own neighbor, though exact duplicates of it can be.
    """
    pts = np.asarray(points, dtype=np.float64)
    n, dim = pts.shape
    if n == 0:
        raise InvalidInputError("k-NN query on an empty dataset")
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    kk = min(int(k), n - 1)
    idx = np.empty((n, kk), dtype=np.intp)
    dist = np.empty((n, kk), dtype=np.float64)
    if kk == 0:
        return idx, dist
    chunk = max(1, _CHUNK_BYTES // (8 * n * dim))
    for start in range(0, n, chunk):
        rows = np.arange(start, min(n, start + chunk))
        d2 = _sq_dists_to(pts, rows)
        d2[np.arange(len(rows)), rows] = np.inf
        part = np.argpartition(d2, kk - 1, axis=1)[:, :kk]
        cutoff = np.take_along_axis(d2, part, axis=1).max(axis=1)
        for j, row in enumerate(d2):
            # every index at or below the cutoff, so boundary ties resolve by index
            cand = np.flatnonzero(row <= cutoff[j])
            order = cand[np.argsort(row[cand], kind="stable")][:kk]
            idx[start + j] = order
            dist[start + j] = np.sqrt(row[order])
    return idx, dist


def knn_query(points, i, k) -> NeighborSet:
    """The ``min(k, n - 1)`` nearest points to point ``i``, excluding ``i`` itself."""
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n == 0:
        raise InvalidInputError("k-NN query on an empty dataset")
    if not 0 <= i < n:
        raise InvalidInputError(f"point index {i} out of range for n={n}")
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    d2 = _sq_dists_to(pts, np.array([i]))[0]
    d2[i] = np.inf
    order = np.argsort(d2, kind="stable")[: min(int(k), n - 1)]
    return NeighborSet(int(i), order, np.sqrt(d2[order]))


def _neighborhood(points, center, neighbors):
    return np.asarray(points, dtype=np.float64)[np.concatenate(([center], neighbors)).astype(np.intp)]


def local_covariance(points, neigh: NeighborSet) -> np.ndarray:
    """Sample covariance (divisor m - 1) of the center together with its neighbors."""
    local = _neighborhood(points, neigh.center, neigh.neighbors)
    m = local.shape[0]
    if m < 2:
        raise DegenerateNeighborhoodError(f"need at least 2 points for a covariance, got {m}")
    centered = local - local.mean(axis=0)
    cov = centered.T @ centered / (m - 1)
    return (cov + cov.T) / 2


def eig_sym(m, sym_tol=1e-8):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Backed by LAPACK via :func:`numpy.linalg.eigh`.
    """
    mat = np.asarray(m, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {mat.shape}")
    scale = max(1.0, float(np.max(np.abs(mat)))) if mat.size else 1.0
    if mat.size and np.max(np.abs(mat - mat.T)) > sym_tol * scale:
        raise InvalidInputError("matrix is not symmetric")
    vals, vecs = np.linalg.eigh((mat + mat.T) / 2)
    return vals[::-1].copy(), vecs[:, ::-1].copy()


def intrinsic_dimension(eigvals, var_thresh=DEFAULT_VAR_THRESH) -> int:
    """Count of directions whose share of the total variance exceeds ``var_thresh``."""
    lam = np.clip(np.asarray(eigvals, dtype=np.float64), 0.0, None)
    total = lam.sum()
    if total <= 0:
        return 0
    return int(np.count_nonzero(lam / total > var_thresh))


def geometry_of(points, center, neighbors, var_thresh=DEFAULT_VAR_THRESH) -> LocalGeometry:
    """Local PCA over ``center`` plus the given neighbor indices."""
    local = _neighborhood(points, center, neighbors)
    m = local.shape[0]
    if m < 2:
        raise DegenerateNeighborhoodError(f"need at least 2 points for a covariance, got {m}")
    centroid = local.mean(axis=0)
    centered = local - centroid
    cov = centered.T @ centered / (m - 1)
    vals, vecs = np.linalg.eigh((cov + cov.T) / 2)
    vals = np.clip(vals[::-1], 0.0, None)
    return LocalGeometry(int(center), centroid, vals, vecs[:, ::-1].copy(),
                         intrinsic_dimension(vals, var_thresh))


def local_geometry(points, i, neigh: NeighborSet, var_thresh=DEFAULT_VAR_THRESH) -> LocalGeometry:
    if neigh.center != i:
        raise InvalidInputError(f"neighbor set is centered on {neigh.center}, not {i}")
    return geometry_of(points, i, neigh.neighbors, var_thresh)


def batch_geometry(points, nbr_idx, var_thresh=DEFAULT_VAR_THRESH):
    """Local PCA for every row of a k-NN index table at once.

    Returns ``(centroids, eigvals, eigvecs, dims)`` with shapes ``(n, D)``,
    ``(n, D)``, ``(n, D, D)`` and ``(n,)``. Matches :func:`geometry_of` row by row.
    """
    pts = np.asarray(points, dtype=np.float64)
    n, dim = pts.shape
    nbr_idx = np.asarray(nbr_idx, dtype=np.intp)
    m = nbr_idx.shape[1] + 1
    if m < 2:
        raise DegenerateNeighborhoodError("need at least one neighbor per point")
    full = np.concatenate([np.arange(n)[:, None], nbr_idx], axis=1)
    centroids = np.empty((n, dim))
    eigvals = np.empty((n, dim))
    eigvecs = np.empty((n, dim, dim))
    chunk = max(1, _CHUNK_BYTES // (8 * max(m, dim) * dim))
    for start in range(0, n, chunk):
        sl = slice(start, min(n, start + chunk))
        local = pts[full[sl]]
        mean = local.mean(axis=1)
        centered = local - mean[:, None, :]
        cov = np.einsum("nmi,nmj->nij", centered, centered) / (m - 1)
        cov = (cov + np.swapaxes(cov, 1, 2)) / 2
        vals, vecs = np.linalg.eigh(cov)
        centroids[sl] = mean
        eigvals[sl] = np.clip(vals[:, ::-1], 0.0, None)
        eigvecs[sl] = vecs[:, :, ::-1]
    totals = eigvals.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(totals > 0, eigvals / totals, 0.0)
    dims = np.count_nonzero(frac > var_thresh, axis=1)
    return centroids, eigvals, eigvecs, dims


def angle_differ(a, b) -> float:
    """Angle in ``[0, pi/2]`` between the undirected lines spanned by ``a`` and ``b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"vector shapes differ: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise InvalidInputError("angle of a zero-norm vector is undefined")
    return float(angle_profile_vecs((a / na)[:, None], (b / nb)[:, None])[0])


def angle_profile_vecs(vecs1, vecs2) -> np.ndarray:
    """Column-wise :func:`angle_differ` for two matrices of unit columns."""
    # chord form: exact near 0, where arccos(|cos|) loses half the digits
    diff = np.linalg.norm(vecs1 - vecs2, axis=0)
    summ = np.linalg.norm(vecs1 + vecs2, axis=0)
    return np.minimum(2.0 * np.arcsin(np.minimum(np.minimum(diff, summ) / 2.0, 1.0)), np.pi / 2)


def angle_profile(g1: LocalGeometry, g2: LocalGeometry) -> np.ndarray:
    """Angular gap between same-rank principal directions of two neighborhoods."""
    if g1.eigvecs.shape != g2.eigvecs.shape:
        raise InvalidInputError(
            f"geometries live in different dimensions: {g1.eigvecs.shape} vs {g2.eigvecs.shape}")
    return angle_profile_vecs(g1.eigvecs, g2.eigvecs)


def subspace_gaps(parent: LocalGeometry, child: LocalGeometry, dim=None) -> np.ndarray:
    """Angle of each child direction to the matching eigen-block of the parent.

    The parent's directions split into a tangent block (the top ``dim``
    ones, by default the parent's intrinsic dimension) and a normal block (the
    rest). Entry ``g`` is the angle between the child's rank-``g`` direction
    and the parent block that rank ``g`` falls in.

    Unlike :func:`angle_profile` the result does not depend on how an
    eigensolver orients directions inside a degenerate eigenspace, such as the
    two in-plane directions of an isotropically sampled plane.
    """
    if parent.eigvecs.shape != child.eigvecs.shape:
        raise InvalidInputError(
            f"geometries live in different dimensions: {parent.eigvecs.shape} vs {child.eigvecs.shape}")
    d = parent.intrinsic_dim if dim is None else int(dim)
    ranks = np.arange(parent.dim)
    proj = parent.eigvecs.T @ child.eigvecs  # (parent dir, child dir)
    tangent = np.sqrt(np.sum(proj[:d] ** 2, axis=0))
    normal = np.sqrt(np.sum(proj[d:] ** 2, axis=0))
    inside = np.where(ranks < d, tangent, normal)
    outside = np.where(ranks < d, normal, tangent)
    return np.arctan2(outside, inside)
