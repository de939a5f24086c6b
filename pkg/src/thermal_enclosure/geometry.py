"""Analytic domains and inclusions, their exact geometric functionals, and the
Cartesian cell grid shared by every volume solver.

Shapes are immutable.  All functionals (depth, support function, point
distance, enclosing radius) are closed form for balls; ellipse inclusions
fall back to a one-dimensional search over the boundary parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import ConfigurationError, NormalizationError, UnsupportedGeometryError

_UNIT_TOL = 1e-9


def _as_point(x, name="point"):
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.size not in (2, 3):
        raise ConfigurationError(f"{name} must have 2 or 3 coordinates, got {arr.size}")
    return arr


def unit_vector(omega):
    """Return ``omega`` as a float array, raising if it is not unit length."""
    w = np.asarray(omega, dtype=float).reshape(-1)
    norm = float(np.linalg.norm(w))
    if abs(norm - 1.0) > _UNIT_TOL:
        raise NormalizationError(f"direction must be a unit vector, |omega| = {norm:.12g}")
    return w


# --------------------------------------------------------------------------- shapes


@dataclass(frozen=True, eq=False)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _as_point(self.center, "ball center"))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise ConfigurationError(f"ball radius must be positive, got {self.radius}")

    @property
    def dim(self) -> int:
        return self.center.size

    @property
    def bbox(self):
        return self.center - self.radius, self.center + self.radius

    @property
    def volume(self) -> float:
        if self.dim == 2:
            return math.pi * self.radius**2
        return 4.0 / 3.0 * math.pi * self.radius**3

    @property
    def surface_measure(self) -> float:
        if self.dim == 2:
            return 2.0 * math.pi * self.radius
        return 4.0 * math.pi * self.radius**2

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.center, axis=-1) < self.radius

    def project_to_boundary(self, x):
        """Nearest boundary points and outward unit normals there."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        rel = x - self.center
        r = np.linalg.norm(rel, axis=-1, keepdims=True)
        r = np.where(r == 0.0, 1.0, r)
        nrm = rel / r
        return self.center + self.radius * nrm, nrm

    def support(self, omega) -> float:
        return float(self.center @ omega + self.radius)

    def farthest_distance(self, y) -> float:
        return float(np.linalg.norm(y - self.center) + self.radius)

    def nearest_distance(self, p) -> float:
        return max(float(np.linalg.norm(p - self.center) - self.radius), 0.0)

    def sample_points(self, count, rng):
        d = self.dim
        g = rng.standard_normal((count, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        rad = self.radius * rng.random(count) ** (1.0 / d)
        return self.center + g * rad[:, None]


@dataclass(frozen=True, eq=False)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = _as_point(self.lo, "box lo")
        hi = _as_point(self.hi, "box hi")
        if lo.size != hi.size:
            raise ConfigurationError("box lo and hi must have the same dimension")
        if not np.all(lo < hi):
            raise ConfigurationError(f"box requires lo < hi componentwise, got {lo} / {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def bbox(self):
        return self.lo.copy(), self.hi.copy()

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    @property
    def surface_measure(self) -> float:
        side = self.hi - self.lo
        if self.dim == 2:
            return float(2.0 * side.sum())
        return float(2.0 * (side[0] * side[1] + side[1] * side[2] + side[0] * side[2]))

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.all((x > self.lo) & (x < self.hi), axis=-1)

    def project_to_boundary(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        gap = np.concatenate([x - self.lo, self.hi - x], axis=1)
        k = np.argmin(gap, axis=1)
        d = self.dim
        axis = k % d
        side = np.where(k < d, -1.0, 1.0)
        pts = x.copy()
        rows = np.arange(len(x))
        pts[rows, axis] = np.where(side < 0, self.lo[axis], self.hi[axis])
        nrm = np.zeros_like(x)
        nrm[rows, axis] = side
        return pts, nrm

    def support(self, omega) -> float:
        corner = np.where(np.asarray(omega) >= 0, self.hi, self.lo)
        return float(corner @ omega)


@dataclass(frozen=True, eq=False)
class Ellipse:
    """Ellipse (2D) or ellipsoid (3D) ``{c + A u : |u| < 1}`` with ``A = R diag(a)``.

    ``rotation`` is an angle in radians in 2D, or a 3x3 rotation matrix in 3D
    (``None`` means axis aligned).
    """

    center: np.ndarray
    semi_axes: np.ndarray
    rotation: object = None
    matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        c = _as_point(self.center, "ellipse center")
        a = np.asarray(self.semi_axes, dtype=float).reshape(-1)
        if a.size != c.size:
            raise ConfigurationError("ellipse semi-axes must match the center dimension")
        if not np.all(a > 0):
            raise ConfigurationError("ellipse semi-axes must be positive")
        if c.size == 2:
            ang = 0.0 if self.rotation is None else float(self.rotation)
            rot = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
        else:
            rot = np.eye(3) if self.rotation is None else np.asarray(self.rotation, dtype=float)
            if rot.shape != (3, 3) or not np.allclose(rot @ rot.T, np.eye(3), atol=1e-10):
                raise ConfigurationError("3D ellipsoid rotation must be an orthogonal 3x3 matrix")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "semi_axes", a)
        object.__setattr__(self, "matrix", rot @ np.diag(a))

    @property
    def dim(self) -> int:
        return self.center.size

    @property
    def bbox(self):
        ext = np.linalg.norm(self.matrix, axis=1)
        return self.center - ext, self.center + ext

    @property
    def volume(self) -> float:
        unit = math.pi if self.dim == 2 else 4.0 / 3.0 * math.pi
        return float(unit * np.prod(self.semi_axes))

    def _reduced(self, x):
        inv = np.linalg.inv(self.matrix)
        return np.linalg.norm((np.asarray(x, dtype=float) - self.center) @ inv.T, axis=-1)

    def contains(self, x):
        return self._reduced(x) < 1.0

    def support(self, omega) -> float:
        return float(self.center @ omega + np.linalg.norm(self.matrix.T @ omega))

    def boundary_point(self, params):
        params = np.atleast_1d(params)
        if self.dim == 2:
            u = np.array([np.cos(params[0]), np.sin(params[0])])
        else:
            th, ph = params[0], params[1]
            u = np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
        return self.center + self.matrix @ u

    def _extremize(self, fn, sign):
        # fn maps a boundary point to a scalar; sign=+1 minimizes, -1 maximizes
        def obj(params):
            return sign * fn(self.boundary_point(params))

        if self.dim == 2:
            grid = np.linspace(0.0, 2 * math.pi, 1441)[:-1]
            vals = [obj([t]) for t in grid]
            k = int(np.argmin(vals))
            step = grid[1] - grid[0]
            res = optimize.minimize_scalar(
                lambda t: obj([t]),
                bounds=(grid[k] - step, grid[k] + step),
                method="bounded",
                options={"xatol": 1e-12},
            )
            return sign * min(res.fun, vals[k])
        th = np.linspace(0.0, math.pi, 91)
        ph = np.linspace(0.0, 2 * math.pi, 181)
        best = None
        for t in th:
            for p in ph:
                val = obj([t, p])
                if best is None or val < best[0]:
                    best = (val, t, p)
        res = optimize.minimize(
            obj, x0=[best[1], best[2]], method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14}
        )
        return sign * min(res.fun, best[0])

    def farthest_distance(self, y) -> float:
        y = np.asarray(y, dtype=float)
        return float(self._extremize(lambda x: np.linalg.norm(x - y), -1.0))

    def nearest_distance(self, p) -> float:
        p = np.asarray(p, dtype=float)
        if self.contains(p):
            return 0.0
        return float(self._extremize(lambda x: np.linalg.norm(x - p), 1.0))

    def sample_points(self, count, rng):
        d = self.dim
        g = rng.standard_normal((count, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        rad = rng.random(count) ** (1.0 / d)
        return self.center + (g * rad[:, None]) @ self.matrix.T


Domain = Ball | Box
Inclusion = Ball | Ellipse


@dataclass(frozen=True, eq=False)
class InclusionScene:
    """A body ``domain`` with one inclusion strictly inside it."""

    domain: Ball | Box
    inclusion: Ball | Ellipse

    def __post_init__(self):
        if not isinstance(self.domain, (Ball, Box)):
            raise UnsupportedGeometryError(f"unsupported domain type {type(self.domain).__name__}")
        if not isinstance(self.inclusion, (Ball, Ellipse)):
            raise UnsupportedGeometryError(f"unsupported inclusion type {type(self.inclusion).__name__}")
        if self.domain.dim != self.inclusion.dim:
            raise ConfigurationError("domain and inclusion dimensions differ")
        if not depth(self) > 0:
            raise ConfigurationError("inclusion closure must lie strictly inside the domain")

    @property
    def dim(self) -> int:
        return self.domain.dim


# --------------------------------------------------------------------------- functionals


def depth(scene: InclusionScene) -> float:
    """Distance between the inclusion and the domain boundary."""
    dom, inc = scene.domain, scene.inclusion
    if isinstance(dom, Ball) and isinstance(inc, (Ball, Ellipse)):
        return dom.radius - inc.farthest_distance(dom.center)
    if isinstance(dom, Box) and isinstance(inc, (Ball, Ellipse)):
        gaps = []
        for i in range(dom.dim):
            e = np.zeros(dom.dim)
            e[i] = 1.0
            gaps.append(dom.hi[i] - inc.support(e))
            gaps.append(-inc.support(-e) - dom.lo[i])
        return float(min(gaps))
    raise UnsupportedGeometryError(
        f"depth not available for {type(dom).__name__} / {type(inc).__name__}"
    )


def support_function(scene: InclusionScene, omega) -> float:
    """``sup_{x in D} x . omega`` for a unit vector ``omega``."""
    return scene.inclusion.support(unit_vector(omega))


def point_distance(scene: InclusionScene, p) -> float:
    """``inf_{x in D} |x - p|``."""
    return scene.inclusion.nearest_distance(_as_point(p))


def enclosing_radius(scene: InclusionScene, y) -> float:
    """``sup_{x in D} |x - y|``: the smallest ball about ``y`` containing D."""
    return scene.inclusion.farthest_distance(_as_point(y))


# --------------------------------------------------------------------------- cell fractions


def _cut_candidates(inclusion, centers, h):
    half_diag = 0.5 * float(np.linalg.norm(h))
    if isinstance(inclusion, Ball):
        r = np.linalg.norm(centers - inclusion.center, axis=1)
        inside = r + half_diag < inclusion.radius
        cut = np.abs(r - inclusion.radius) <= half_diag
        return inside, cut
    q = inclusion._reduced(centers)
    slack = half_diag / float(inclusion.semi_axes.min())
    return q + slack < 1.0, np.abs(q - 1.0) <= slack


def cell_fractions(inclusion, centers, h, s=4):
    """Volume fraction of each axis-aligned cell lying inside ``inclusion``.

    Cells that cannot intersect the boundary are classified exactly; the
    others are estimated with an ``s**d`` subsample of cell points.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    h = np.broadcast_to(np.asarray(h, dtype=float), (centers.shape[1],))
    d = centers.shape[1]
    inside, cut = _cut_candidates(inclusion, centers, h)
    frac = inside.astype(float)
    idx = np.flatnonzero(cut & ~inside)
    if idx.size:
        offs = (np.arange(s) + 0.5) / s - 0.5
        mesh = np.stack(np.meshgrid(*([offs] * d), indexing="ij"), axis=-1).reshape(-1, d) * h
        for chunk in np.array_split(idx, max(1, idx.size // 20000 + 1)):
            pts = centers[chunk, None, :] + mesh[None, :, :]
            frac[chunk] = inclusion.contains(pts).mean(axis=1)
    return frac


def cell_fraction_in(inclusion, center, h, s=4) -> float:
    """Fraction of a single cell (``center``, spacing ``h``) inside ``inclusion``."""
    return float(cell_fractions(inclusion, np.asarray(center, dtype=float)[None, :], h, s)[0])


# --------------------------------------------------------------------------- grid


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform cell grid of the domain's bounding box with staircase boundary.

    Active cells are those whose centers lie in the domain.  Boundary facets
    are faces between an active cell and an inactive (or missing) neighbour;
    their normals are the face axes.  For curved domains each facet measure is
    divided by ``|nu|_1`` of the true normal at the nearest boundary point, so
    that a boundary flux density integrates to its surface integral.
    """

    domain: Ball | Box
    n: int
    T: float
    n_t: int
    lo: np.ndarray
    h: np.ndarray
    active: np.ndarray
    index: np.ndarray
    ijk: np.ndarray
    centers: np.ndarray
    face_left: np.ndarray
    face_right: np.ndarray
    face_axis: np.ndarray
    facet_cell: np.ndarray
    facet_axis: np.ndarray
    facet_side: np.ndarray
    facet_center: np.ndarray
    facet_normal: np.ndarray
    facet_measure: np.ndarray
    facet_point: np.ndarray
    facet_true_normal: np.ndarray

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def n_cells(self) -> int:
        return self.centers.shape[0]

    @property
    def n_facets(self) -> int:
        return self.facet_cell.size

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def face_area(self) -> np.ndarray:
        """Area of a face normal to each axis."""
        return self.cell_volume / self.h

    @property
    def dt(self) -> float:
        return self.T / self.n_t

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_t + 1)

    @property
    def spacing(self) -> float:
        return float(self.h.max())

    def to_array(self, values, fill=np.nan):
        """Scatter cell values into a full ``n**d`` array (inactive = ``fill``)."""
        out = np.full(self.active.shape, fill, dtype=float)
        out[self.active] = values[self.index[self.active]]
        return out

    def locate(self, x):
        """Active cell index containing each point (-1 if none)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        k = np.floor((x - self.lo) / self.h).astype(int)
        ok = np.all((k >= 0) & (k < self.n), axis=1)
        out = np.full(len(x), -1, dtype=int)
        kk = np.clip(k, 0, self.n - 1)
        out[ok] = self.index[tuple(kk[ok].T)]
        return out


def build_grid(domain, n: int, T: float = 1.0, n_t: int = 256) -> Grid:
    """Discretize ``domain`` with ``n`` cells per axis over its bounding box."""
    if int(n) < 8:
        raise ConfigurationError(f"grid needs n >= 8 cells per axis, got {n}")
    if int(n_t) < 8:
        raise ConfigurationError(f"grid needs N_t >= 8 time steps, got {n_t}")
    if not T > 0:
        raise ConfigurationError(f"time horizon must be positive, got {T}")
    n, n_t = int(n), int(n_t)
    lo, hi = domain.bbox
    d = lo.size
    h = (hi - lo) / n
    shape = (n,) * d
    ijk_all = np.stack(np.meshgrid(*([np.arange(n)] * d), indexing="ij"), axis=-1).reshape(-1, d)
    centers_all = lo + (ijk_all + 0.5) * h
    active = domain.contains(centers_all).reshape(shape)
    index = np.full(shape, -1, dtype=np.int64)
    index[active] = np.arange(int(active.sum()))
    ijk = np.argwhere(active)
    centers = lo + (ijk + 0.5) * h

    fl, fr, fa = [], [], []
    bc, ba, bs = [], [], []
    for a in range(d):
        for side in (-1, 1):
            nb = ijk.copy()
            nb[:, a] += side
            inside = (nb[:, a] >= 0) & (nb[:, a] < n)
            nb_idx = np.full(len(ijk), -1, dtype=np.int64)
            nb_idx[inside] = index[tuple(nb[inside].T)]
            own = np.arange(len(ijk))
            if side == 1:
                m = nb_idx >= 0
                fl.append(own[m])
                fr.append(nb_idx[m])
                fa.append(np.full(int(m.sum()), a))
            m = nb_idx < 0
            bc.append(own[m])
            ba.append(np.full(int(m.sum()), a))
            bs.append(np.full(int(m.sum()), side))
    face_left = np.concatenate(fl)
    face_right = np.concatenate(fr)
    face_axis = np.concatenate(fa)
    facet_cell = np.concatenate(bc)
    facet_axis = np.concatenate(ba)
    facet_side = np.concatenate(bs).astype(float)
    order = np.lexsort((facet_side, facet_axis, facet_cell))
    facet_cell, facet_axis, facet_side = facet_cell[order], facet_axis[order], facet_side[order]

    rows = np.arange(facet_cell.size)
    facet_normal = np.zeros((facet_cell.size, d))
    facet_normal[rows, facet_axis] = facet_side
    facet_center = centers[facet_cell] + 0.5 * facet_normal * h
    area = np.prod(h) / h[facet_axis]
    if isinstance(domain, Box):
        facet_point = facet_center.copy()
        true_normal = facet_normal.copy()
        measure = area
    else:
        facet_point, true_normal = domain.project_to_boundary(facet_center)
        measure = area / np.abs(true_normal).sum(axis=1)

    return Grid(
        domain=domain,
        n=n,
        T=float(T),
        n_t=n_t,
        lo=lo,
        h=h,
        active=active,
        index=index,
        ijk=ijk,
        centers=centers,
        face_left=face_left,
        face_right=face_right,
        face_axis=face_axis,
        facet_cell=facet_cell,
        facet_axis=facet_axis,
        facet_side=facet_side,
        facet_center=facet_center,
        facet_normal=facet_normal,
        facet_measure=measure,
        facet_point=facet_point,
        facet_true_normal=true_normal,
    )
