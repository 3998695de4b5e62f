"""Seeded synthetic scenes of intersecting manifolds in 3-D.

All randomness comes from numpy's PCG64 bit generator seeded with the scene
seed, so a scene is reproducible bit for bit across runs and platforms.
Composite scenes seed part ``i`` with ``seed + i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from .errors import InvalidInputError


def rng_for(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass
class Surface:
    """Noiseless description of a part, in its own local coordinates."""

    kind: str
    params: dict
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def to_local(self, x):
        return (np.asarray(x, dtype=np.float64) - self.translation) @ self.rotation

    def distance(self, x) -> np.ndarray:
        """Euclidean distance from world points ``x`` to the noiseless manifold."""
        loc = self.to_local(x)
        if self.kind == "plane":
            hx, hy = self.params["half"]
            dx = np.maximum(np.abs(loc[:, 0]) - hx, 0.0)
            dy = np.maximum(np.abs(loc[:, 1]) - hy, 0.0)
            return np.sqrt(dx**2 + dy**2 + loc[:, 2] ** 2)
        if self.kind == "line":
            half = self.params["length"] / 2
            dx = np.maximum(np.abs(loc[:, 0]) - half, 0.0)
            return np.sqrt(dx**2 + loc[:, 1] ** 2 + loc[:, 2] ** 2)
        if self.kind == "scurve":
            return _scurve_tree(self.params["height"]).query(loc)[0]
        raise InvalidInputError(f"unknown surface kind {self.kind!r}")

    def placed(self, rotation, translation) -> "Surface":
        # world = R @ (R_old @ local + t_old) + t
        return Surface(self.kind, self.params, rotation @ self.rotation,
                       rotation @ self.translation + translation)


_SCURVE_CACHE = {}


def _scurve_surface(t, y):
    return np.column_stack([np.sin(t), y, np.sign(t) * (np.cos(t) - 1)])


def _scurve_tree(height):
    if height not in _SCURVE_CACHE:
        t = np.linspace(-1.5 * np.pi, 1.5 * np.pi, 3000)
        y = np.linspace(-height / 2, height / 2, max(2, int(300 * height)))
        tt, yy = np.meshgrid(t, y)
        _SCURVE_CACHE[height] = cKDTree(_scurve_surface(tt.ravel(), yy.ravel()))
    return _SCURVE_CACHE[height]


@dataclass
class SyntheticScene:
    points: np.ndarray
    truth: np.ndarray
    mask: np.ndarray
    descriptor: dict
    surfaces: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.points.shape[0]


def _single(points, sigma, rng, surface, descriptor):
    pts = points + (rng.normal(0.0, sigma, size=points.shape) if sigma > 0 else 0.0)
    n = pts.shape[0]
    return SyntheticScene(pts, np.zeros(n, dtype=np.intp), np.zeros(n, dtype=bool),
                          descriptor, [surface])


def _check(n, sigma):
    if n < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    if sigma < 0:
        raise InvalidInputError(f"noise sigma must be >= 0, got {sigma}")


def gen_plane(n, extent=2.0, sigma=0.0, seed=0) -> SyntheticScene:
    """Uniform samples of an ``extent``-sized rectangle in the z = 0 plane, centered at 0."""
    _check(n, sigma)
    ex, ey = (extent, extent) if np.isscalar(extent) else extent
    rng = rng_for(seed)
    xy = rng.uniform([-ex / 2, -ey / 2], [ex / 2, ey / 2], size=(n, 2))
    pts = np.column_stack([xy, np.zeros(n)])
    surface = Surface("plane", {"half": (ex / 2, ey / 2)})
    return _single(pts, sigma, rng, surface,
                   {"scene": "plane", "n": n, "extent": [ex, ey], "sigma": sigma, "seed": seed})


def gen_scurve(n, sigma=0.0, seed=0, height=2.0) -> SyntheticScene:
    """The S-shaped sheet ``(sin t, y, sign(t)(cos t - 1))``, t in [-3pi/2, 3pi/2].

    The curve has unit speed in ``t``, so uniform ``t`` gives uniform area density.
    """
    _check(n, sigma)
    rng = rng_for(seed)
    t = 3 * np.pi * (rng.uniform(size=n) - 0.5)
    y = height * (rng.uniform(size=n) - 0.5)
    surface = Surface("scurve", {"height": float(height)})
    return _single(_scurve_surface(t, y), sigma, rng, surface,
                   {"scene": "scurve", "n": n, "height": height, "sigma": sigma, "seed": seed})


def gen_line(n, sigma=0.0, seed=0, length=5.0) -> SyntheticScene:
    """Uniform samples of a segment of the x axis centered at the origin."""
    _check(n, sigma)
    rng = rng_for(seed)
    s = length * (rng.uniform(size=n) - 0.5)
    pts = np.column_stack([s, np.zeros(n), np.zeros(n)])
    surface = Surface("line", {"length": float(length)})
    return _single(pts, sigma, rng, surface,
                   {"scene": "line", "n": n, "length": length, "sigma": sigma, "seed": seed})


def rotation(axis, degrees) -> np.ndarray:
    """Rotation matrix about a coordinate axis ('x', 'y' or 'z')."""
    return Rotation.from_euler(axis, degrees, degrees=True).as_matrix()


def _plane_frame(surface):
    # world-space normal and a point of a placed plane
    return surface.rotation[:, 2], surface.translation


def _plane_plane_line_distance(s1, s2, x):
    n1, p1 = _plane_frame(s1)
    n2, p2 = _plane_frame(s2)
    direction = np.cross(n1, n2)
    norm = np.linalg.norm(direction)
    if norm < 1e-12:
        return None
    direction /= norm
    # a point on both planes: solve [n1; n2; dir] p = [n1.p1; n2.p2; 0]
    a = np.vstack([n1, n2, direction])
    anchor = np.linalg.solve(a, [n1 @ p1, n2 @ p2, 0.0])
    v = x - anchor
    return np.linalg.norm(v - np.outer(v @ direction, direction), axis=1)


def compose_scene(parts, placements=None, delta=None, name="composite") -> SyntheticScene:
    """Place several single-part scenes in one frame and mark intersection bands.

    ``placements`` holds one ``(rotation, translation)`` pair per part (identity
    when omitted). ``truth`` is the part index. A point is in the intersection
    mask when it lies within ``delta`` of the intersection locus with another
    part: the analytic line for two planes, otherwise the other part's
    noiseless surface. ``delta`` defaults to ``3 * sigma + 0.01 * extent``
    with ``extent`` the scene's bounding-box diagonal.
    """
    if not parts:
        raise InvalidInputError("no parts to compose")
    dims = {p.points.shape[1] for p in parts}
    if len(dims) != 1:
        raise InvalidInputError(f"parts have mismatched ambient dimensions: {sorted(dims)}")
    if placements is None:
        placements = [(np.eye(3), np.zeros(3))] * len(parts)
    if len(placements) != len(parts):
        raise InvalidInputError("need exactly one placement per part")

    placed_pts, surfaces, truth = [], [], []
    for i, (part, (rot, shift)) in enumerate(zip(parts, placements)):
        rot = np.asarray(rot, dtype=np.float64)
        shift = np.asarray(shift, dtype=np.float64)
        placed_pts.append(part.points @ rot.T + shift)
        surfaces.append(part.surfaces[0].placed(rot, shift) if part.surfaces else None)
        truth.append(np.full(part.n, i, dtype=np.intp))
    points = np.vstack(placed_pts)
    truth = np.concatenate(truth)

    sigma = max(float(p.descriptor.get("sigma", 0.0)) for p in parts)
    if delta is None:
        extent = float(np.linalg.norm(points.max(axis=0) - points.min(axis=0)))
        delta = 3 * sigma + 0.01 * extent

    mask = np.zeros(len(points), dtype=bool)
    for i, si in enumerate(surfaces):
        own = truth == i
        for j, sj in enumerate(surfaces):
            if i == j:
                continue
            x = points[own]
            if si is not None and sj is not None:
                near = sj.distance(x) <= delta
                if si.kind == "plane" and sj.kind == "plane":
                    line = _plane_plane_line_distance(si, sj, x)
                    if line is not None:
                        near &= line <= delta
            else:
                near = cKDTree(points[truth == j]).query(x)[0] < delta
            mask[own] |= near

    descriptor = {"scene": name, "delta": delta, "sigma": sigma,
                  "parts": [p.descriptor for p in parts]}
    return SyntheticScene(points, truth, mask, descriptor, surfaces)


def plane_plane(n=2000, sigma=0.01, seed=0, angle=90.0, extent=2.0, delta=None) -> SyntheticScene:
    """Two square plane patches crossing through their centers at ``angle`` degrees."""
    a = gen_plane(n // 2, extent, sigma, seed)
    b = gen_plane(n - n // 2, extent, sigma, seed + 1)
    scene = compose_scene([a, b], [(np.eye(3), np.zeros(3)), (rotation("y", angle), np.zeros(3))],
                          delta=delta, name="plane-plane")
    scene.descriptor.update(n=n, seed=seed, angle=angle, extent=extent)
    return scene


def plane_scurve(n=2000, sigma=0.01, seed=0, delta=None) -> SyntheticScene:
    """A vertical plane cutting an S-curve through its three vertical crossings."""
    n_curve = (3 * n) // 5
    curve = gen_scurve(n_curve, sigma, seed, height=2.0)
    plane = gen_plane(n - n_curve, (2.0, 5.0), sigma, seed + 1)
    # plane spans y and z at x = 0
    rot = rotation("y", 90.0) @ rotation("z", 90.0)
    scene = compose_scene([curve, plane], [(np.eye(3), np.zeros(3)), (rot, np.zeros(3))],
                          delta=delta, name="plane-scurve")
    scene.descriptor.update(n=n, seed=seed)
    return scene


def scurve_line(n=1500, sigma=0.01, seed=0, delta=None) -> SyntheticScene:
    """A straight line piercing an S-curve along the z axis."""
    n_line = n // 5
    curve = gen_scurve(n - n_line, sigma, seed, height=2.0)
    line = gen_line(n_line, sigma, seed + 1, length=5.0)
    scene = compose_scene([curve, line], [(np.eye(3), np.zeros(3)), (rotation("y", -90.0), np.zeros(3))],
                          delta=delta, name="scurve-line")
    scene.descriptor.update(n=n, seed=seed)
    return scene


def workflow_scene(n=3000, sigma=0.01, seed=0, gap=10.0, delta=None) -> SyntheticScene:
    """Plane-plane crossing placed far from an S-curve pierced by a line: 4 parts, 2 components."""
    n_pp = n // 2
    n_sl = n - n_pp
    n_line = n_sl // 5
    pa = gen_plane(n_pp // 2, 2.0, sigma, seed)
    pb = gen_plane(n_pp - n_pp // 2, 2.0, sigma, seed + 1)
    curve = gen_scurve(n_sl - n_line, sigma, seed + 2, height=2.0)
    line = gen_line(n_line, sigma, seed + 3, length=5.0)
    far = np.array([gap, 0.0, 0.0])
    placements = [
        (np.eye(3), np.zeros(3)),
        (rotation("y", 90.0), np.zeros(3)),
        (np.eye(3), far),
        (rotation("y", -90.0), far),
    ]
    scene = compose_scene([pa, pb, curve, line], placements, delta=delta, name="workflow")
    scene.descriptor.update(n=n, seed=seed, gap=gap)
    return scene


def two_planes(n=1000, sigma=0.0, seed=0, gap=5.0) -> SyntheticScene:
    """Two parallel, non-intersecting plane patches ``gap`` apart along z."""
    a = gen_plane(n // 2, 2.0, sigma, seed)
    b = gen_plane(n - n // 2, 2.0, sigma, seed + 1)
    scene = compose_scene([a, b], [(np.eye(3), np.zeros(3)), (np.eye(3), np.array([0.0, 0.0, gap]))],
                          name="two-planes")
    scene.descriptor.update(n=n, seed=seed, gap=gap)
    return scene


def gaussian_blobs(n=300, dim=5, centers=3, spread=1.0, gap=50.0, seed=0) -> SyntheticScene:
    """Isotropic Gaussian blobs whose centers sit ``gap`` apart on the first axis."""
    if n < centers:
        raise InvalidInputError("need at least one point per blob")
    rng = rng_for(seed)
    sizes = [n // centers + (1 if i < n % centers else 0) for i in range(centers)]
    pts, truth = [], []
    for i, size in enumerate(sizes):
        center = np.zeros(dim)
        center[0] = i * gap
        pts.append(center + rng.normal(0.0, spread, size=(size, dim)))
        truth.append(np.full(size, i, dtype=np.intp))
    return SyntheticScene(np.vstack(pts), np.concatenate(truth), np.zeros(n, dtype=bool),
                          {"scene": "blobs", "n": n, "dim": dim, "centers": centers,
                           "spread": spread, "gap": gap, "seed": seed})


SCENES = {
    "plane": lambda n, sigma, seed: gen_plane(n, 2.0, sigma, seed),
    "scurve": lambda n, sigma, seed: gen_scurve(n, sigma, seed),
    "line": lambda n, sigma, seed: gen_line(n, sigma, seed),
    "plane-plane": lambda n, sigma, seed: plane_plane(n, sigma, seed),
    "plane-scurve": lambda n, sigma, seed: plane_scurve(n, sigma, seed),
    "scurve-line": lambda n, sigma, seed: scurve_line(n, sigma, seed),
    "workflow": lambda n, sigma, seed: workflow_scene(n, sigma, seed),
    "two-planes": lambda n, sigma, seed: two_planes(n, sigma, seed),
    "blobs": lambda n, sigma, seed: gaussian_blobs(n, seed=seed),
}


def make_scene(name, n, sigma=0.0, seed=0) -> SyntheticScene:
    try:
        builder = SCENES[name]
    except KeyError:
        raise InvalidInputError(f"unknown scene {name!r}; choose from {', '.join(SCENES)}") from None
    return builder(n, sigma, seed)
