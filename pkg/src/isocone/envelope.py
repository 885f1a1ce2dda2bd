"""Restricted convex envelopes with slopes constrained to a compact convex body.

Given samples of a function u on a region and a compact convex body K of
admissible slopes, the K-envelope is the supremum of affine functions with
slope in K lying below u.  Discretely, each sampled slope xi gets the best
intercept

    a(xi) = min over samples y of ( u(y) - xi . y ),

and the envelope is phi(x) = max over sampled slopes of a(xi) + xi . x.
The maximizing slope is the envelope's gradient wherever that argmax is
unique; ties break to the lowest slope index for determinism.

Slope bodies come in two flavors: polygons (vertex list, counterclockwise;
two vertices describe a segment) and sector-disks, i.e. the closure of
B_rho intersected with a cone (the full disk when the cone is the plane).
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy import ndimage
from scipy.optimize import linprog
from scipy.spatial import cKDTree

from .cone_weight import Cone, unit

_CHUNK = 16_000_000  # max scratch entries per block in the argmax sweeps


@dataclasses.dataclass(frozen=True)
class SlopeBody:
    """Compact convex slope constraint with a finite sample grid.

    Sector-disk bodies carry ``polar_shape = (n_radial, n_angular)``; their
    samples are ordered origin first, then radius-major over the angular
    grid, which the structured argmax in this module relies on.
    """

    kind: str  # "polygon" or "sector_disk"
    vertices: np.ndarray | None
    cone: Cone | None
    rho: float
    samples: np.ndarray
    spacing: float
    polar_shape: tuple | None = None

    # -- factories ----------------------------------------------------------

    @staticmethod
    def polygon(vertices, n_samples: int = 20_000) -> "SlopeBody":
        """Convex polygon from ccw vertices; a 2-point list gives a segment.

        Samples are a barycentric lattice on the fan triangulation about the
        centroid, so polygon vertices and edges are always sampled.
        """
        v = np.asarray(vertices, dtype=float)
        if len(v) < 2:
            raise ValueError("polygon needs at least two vertices")
        if len(v) >= 3:
            e = np.roll(v, -1, axis=0) - v
            cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
            if np.any(cross < -1e-12 * np.max(np.abs(v))):
                raise ValueError("vertices must be counterclockwise and convex")
        if len(v) == 2:
            seg = v[1] - v[0]
            k = max(3, int(math.sqrt(2 * n_samples)))
            k += 1 - k % 2  # odd count keeps the midpoint slope in the grid
            ts = np.linspace(0.0, 1.0, k)
            samples = v[0] + ts[:, None] * seg
            spacing = float(np.linalg.norm(seg)) / (k - 1)
            return SlopeBody("polygon", v, None, 0.0, samples, spacing)
        centroid = v.mean(axis=0)
        m = len(v)
        k = max(2, int(math.ceil(math.sqrt(2.0 * n_samples / m))))
        pts = []
        spacing = 0.0
        for i in range(m):
            va, vb = v[i], v[(i + 1) % m]
            ea, eb = va - centroid, vb - centroid
            spacing = max(
                spacing,
                np.linalg.norm(ea) / k,
                np.linalg.norm(eb) / k,
                np.linalg.norm(va - vb) / k,
            )
            for ii in range(k + 1):
                for jj in range(k + 1 - ii):
                    pts.append(centroid + (ii / k) * ea + (jj / k) * eb)
        samples = _dedupe(np.array(pts))
        return SlopeBody("polygon", v, None, 0.0, samples, float(spacing))

    @staticmethod
    def sector_disk(cone: Cone, rho: float = 1.0, n_radial: int = 256,
                    n_angular: int = 512) -> "SlopeBody":
        """closure(B_rho cap cone) sampled on a polar grid.

        Both boundary rays and the outer arc are included; the grid spacing
        reported is the larger of the radial and outer-arc steps.
        """
        thetas = cone.arc_grid(n_angular)
        radii = np.linspace(0.0, rho, n_radial)
        pts = (radii[1:, None, None] * unit(thetas)[None, :, :]).reshape(-1, 2)
        samples = np.vstack([[[0.0, 0.0]], pts])
        dr = radii[1] - radii[0]
        if cone.full_plane:
            darc = rho * (2.0 * math.pi / n_angular)
        else:
            darc = rho * (cone.opening / (n_angular - 1))
        return SlopeBody("sector_disk", None, cone, float(rho), samples,
                         float(max(dr, darc)), polar_shape=(n_radial, n_angular))

    @staticmethod
    def disk(rho: float = 1.0, n_radial: int = 256, n_angular: int = 512) -> "SlopeBody":
        return SlopeBody.sector_disk(Cone.plane(), rho, n_radial, n_angular)

    # -- geometry -----------------------------------------------------------

    def support(self, v) -> np.ndarray | float:
        """Support function sup{v . x : x in K}; exact, positively 1-homogeneous."""
        v = np.asarray(v, dtype=float)
        single = v.ndim == 1
        vv = np.atleast_2d(v)
        if self.kind == "polygon":
            out = np.max(vv @ self.vertices.T, axis=1)
        else:
            if self.cone.full_plane:
                out = self.rho * np.hypot(vv[:, 0], vv[:, 1])
            else:
                norm = np.hypot(vv[:, 0], vv[:, 1])
                phi = np.arctan2(vv[:, 1], vv[:, 0])
                lo, hi = self.cone.angle_lo, self.cone.angle_hi
                rel = np.mod(phi - lo, 2.0 * math.pi)
                inside = rel <= (hi - lo)
                gap = np.minimum(np.abs(_angdiff(phi, lo)), np.abs(_angdiff(phi, hi)))
                best = np.where(inside, 1.0, np.cos(gap))
                out = self.rho * norm * np.maximum(best, 0.0)
        return float(out[0]) if single else out

    def area(self) -> float:
        if self.kind == "polygon":
            v = self.vertices
            if len(v) == 2:
                return 0.0
            x, y = v[:, 0], v[:, 1]
            return 0.5 * float(np.abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
        return 0.5 * self.rho ** 2 * self.cone.opening

    def contains(self, pts, tol: float = 1e-9) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.kind == "sector_disk":
            r_ok = np.hypot(pts[:, 0], pts[:, 1]) <= self.rho + tol
            return r_ok & self.cone.contains(pts, tol=tol)
        v = self.vertices
        if len(v) == 2:
            seg = v[1] - v[0]
            L2 = float(seg @ seg)
            t = np.clip((pts - v[0]) @ seg / L2, 0.0, 1.0)
            proj = v[0] + t[:, None] * seg
            return np.linalg.norm(pts - proj, axis=1) <= tol
        ok = np.ones(len(pts), dtype=bool)
        for i in range(len(v)):
            e = v[(i + 1) % len(v)] - v[i]
            n = np.array([-e[1], e[0]])  # inward for ccw
            ok &= (pts - v[i]) @ n >= -tol * max(1.0, np.linalg.norm(e))
        return ok

    def normal_cone(self, xi, tol: float = 1e-9) -> np.ndarray:
        """Generators of the normal cone at xi (empty array means {0})."""
        xi = np.asarray(xi, dtype=float)
        if self.kind == "sector_disk":
            return self._normal_cone_sector(xi, tol)
        return self._normal_cone_polygon(xi, tol)

    def _normal_cone_sector(self, xi, tol):
        r = float(np.linalg.norm(xi))
        gens = []
        if r <= tol:
            if self.cone.full_plane:
                return np.zeros((0, 2))
            lo, hi = self.cone.angle_lo, self.cone.angle_hi
            return np.array([unit(lo - math.pi / 2.0), unit(hi + math.pi / 2.0)])
        on_arc = abs(r - self.rho) <= tol
        if not self.cone.full_plane:
            lo, hi = self.cone.angle_lo, self.cone.angle_hi
            phi = math.atan2(xi[1], xi[0])
            on_lo = abs(_angdiff(phi, lo)) * r <= tol
            on_hi = abs(_angdiff(phi, hi)) * r <= tol
            if on_lo:
                gens.append(np.array([math.sin(lo), -math.cos(lo)]))
            if on_hi:
                gens.append(np.array([-math.sin(hi), math.cos(hi)]))
        if on_arc:
            gens.append(xi / r)
        return np.array(gens) if gens else np.zeros((0, 2))

    def _normal_cone_polygon(self, xi, tol):
        v = self.vertices
        if len(v) == 2:
            seg = v[1] - v[0]
            n = np.array([-seg[1], seg[0]])
            n = n / np.linalg.norm(n)
            axis = seg / np.linalg.norm(seg)
            if np.linalg.norm(xi - v[0]) <= tol:
                return np.array([n, -n, -axis])
            if np.linalg.norm(xi - v[1]) <= tol:
                return np.array([n, -n, axis])
            return np.array([n, -n])
        m = len(v)
        outward = []
        for i in range(m):
            e = v[(i + 1) % m] - v[i]
            n = np.array([e[1], -e[0]])
            outward.append(n / np.linalg.norm(n))
        for i in range(m):
            if np.linalg.norm(xi - v[i]) <= tol:
                return np.array([outward[(i - 1) % m], outward[i]])
        for i in range(m):
            a, b = v[i], v[(i + 1) % m]
            e = b - a
            t = float((xi - a) @ e) / float(e @ e)
            if -tol <= t <= 1.0 + tol:
                d = np.linalg.norm(xi - (a + t * e))
                if d <= tol:
                    return np.array([outward[i]])
        return np.zeros((0, 2))

    def hull_gap(self) -> float:
        """Worst-case distance from K to the convex hull of the samples.

        Zero for polygons (vertices are sampled); for sector-disks it is the
        sagitta of one angular step of the outer arc.
        """
        if self.kind == "polygon":
            return 0.0
        _n_r, n_ang = self.polar_shape
        if self.cone.full_plane:
            dtheta = 2.0 * math.pi / n_ang
        else:
            dtheta = self.cone.opening / (n_ang - 1)
        return self.rho * (1.0 - math.cos(dtheta / 2.0))


def _angdiff(a, b):
    return (a - b + math.pi) % (2.0 * math.pi) - math.pi


def _dedupe(pts, decimals=12):
    _, idx = np.unique(np.round(pts, decimals), axis=0, return_index=True)
    return pts[np.sort(idx)]


def support_function(body: SlopeBody, v):
    """Module-level alias for :meth:`SlopeBody.support`."""
    return body.support(v)


@dataclasses.dataclass
class RestrictedConjugate:
    """Intercepts a(xi) = min_y (u(y) - xi . y) over the sampled region."""

    body: SlopeBody
    points: np.ndarray
    values: np.ndarray
    intercepts: np.ndarray
    argmin_index: np.ndarray

    def envelope_at(self, pts):
        """(phi, xi*, argmax slope index) at arbitrary points (exact argmax)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.body.polar_shape is not None:
            return _sector_argmax(self, pts)
        return _generic_argmax(self, pts)


def _generic_argmax(conj: "RestrictedConjugate", pts):
    """Chunked dense argmax over all slope samples (any body)."""
    S = conj.body.samples
    n, m = len(pts), len(S)
    best_val = np.full(n, -np.inf)
    best_idx = np.zeros(n, dtype=np.int64)
    block = max(1, _CHUNK // max(n, 1))
    for s0 in range(0, m, block):
        s1 = min(m, s0 + block)
        scores = pts @ S[s0:s1].T + conj.intercepts[s0:s1][None, :]
        loc = np.argmax(scores, axis=1)
        val = scores[np.arange(n), loc]
        better = val > best_val
        best_val = np.where(better, val, best_val)
        best_idx = np.where(better, loc + s0, best_idx)
    return best_val, S[best_idx], best_idx


def _sector_argmax(conj: "RestrictedConjugate", pts):
    """Structured argmax for sector-disk slope grids.

    Along each slope ray the intercept a(r * u(theta)) is a pointwise min of
    lines in r, hence concave; the optimal radius for a point x is found by
    a binary search on the (monotone) score differences.  Tie-breaking is
    deterministic: the origin sample wins all ties, otherwise the first
    maximizer in the ascending angle scan (lowest radius within an angle).
    """
    body = conj.body
    n_r, n_ang = body.polar_shape
    radii = np.linspace(0.0, body.rho, n_r)
    dr = radii[1] - radii[0]
    thetas = body.cone.arc_grid(n_ang)
    U = unit(thetas)
    a0 = conj.intercepts[0]
    A = conj.intercepts[1:].reshape(n_r - 1, n_ang)
    n = len(pts)
    best_val = np.full(n, a0)
    best_idx = np.zeros(n, dtype=np.int64)
    idx_all = np.arange(n)
    for j in range(n_ang):
        col = np.empty(n_r)
        col[0] = a0
        col[1:] = A[:, j]
        gain = np.maximum.accumulate((col[:-1] - col[1:]) / dr)
        c = pts @ U[j]
        pos = np.searchsorted(gain, c, side="right")
        cand = np.stack([np.clip(pos - 1, 0, n_r - 1),
                         np.clip(pos, 0, n_r - 1),
                         np.clip(pos + 1, 0, n_r - 1)])
        scores = col[cand] + radii[cand] * c[None, :]
        pick = np.argmax(scores, axis=0)
        k = cand[pick, idx_all]
        val = scores[pick, idx_all]
        better = val > best_val
        gidx = np.where(k == 0, 0, 1 + (k - 1) * n_ang + j)
        best_val = np.where(better, val, best_val)
        best_idx = np.where(better, gidx, best_idx)
    return best_val, body.samples[best_idx], best_idx


def restricted_conjugate(points, values, body: SlopeBody) -> RestrictedConjugate:
    """Best intercept per sampled slope so that a + xi . y <= u(y) at all samples."""
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(points) == 0:
        raise ValueError("conjugate needs at least one sample point")
    if body.polar_shape is not None and len(points) >= 16:
        intercepts, argmin = _sector_conjugate(points, values, body)
    else:
        intercepts, argmin = _dense_conjugate(points, values, body.samples)
    return RestrictedConjugate(body, points, values, intercepts, argmin)


def _dense_conjugate(points, values, S):
    m = len(S)
    intercepts = np.empty(m)
    argmin = np.empty(m, dtype=np.int64)
    block = max(1, _CHUNK // max(len(points), 1))
    for s0 in range(0, m, block):
        s1 = min(m, s0 + block)
        scores = values[None, :] - S[s0:s1] @ points.T
        loc = np.argmin(scores, axis=1)
        intercepts[s0:s1] = scores[np.arange(s1 - s0), loc]
        argmin[s0:s1] = loc
    return intercepts, argmin


def _sector_conjugate(points, values, body):
    """Per-angle conjugate via convex-hull reduction.

    For slopes r * u(theta) with fixed theta, the intercept minimizes the
    linear functional u(y) - r * (u(theta) . y) over the sample cloud, so
    only vertices of the convex hull of {(u(theta) . y, u(y))} can attain
    it; the dense minimum over all samples is recovered exactly.
    """
    from scipy.spatial import ConvexHull, QhullError

    n_r, n_ang = body.polar_shape
    radii = np.linspace(0.0, body.rho, n_r)[1:]
    thetas = body.cone.arc_grid(n_ang)
    dots = points @ unit(thetas).T  # (P, n_ang)
    m = len(body.samples)
    intercepts = np.empty(m)
    argmin = np.empty(m, dtype=np.int64)
    i0 = int(np.argmin(values))
    intercepts[0] = values[i0]
    argmin[0] = i0
    for j in range(n_ang):
        d = dots[:, j]
        try:
            hv = ConvexHull(np.column_stack([d, values])).vertices
        except (QhullError, ValueError):
            hv = np.unique([int(np.argmin(d)), int(np.argmax(d)), i0])
        scores = values[hv][None, :] - radii[:, None] * d[hv][None, :]
        loc = np.argmin(scores, axis=1)
        cols = slice(1 + j, m, n_ang)
        sel = np.arange(len(radii))
        intercepts[cols] = scores[sel, loc]
        argmin[cols] = hv[loc]
    return intercepts, argmin


@dataclasses.dataclass
class EnvelopeField:
    """The envelope evaluated on a regular grid, with slope and Hessian data."""

    xs: np.ndarray
    ys: np.ndarray
    phi: np.ndarray          # (ny, nx)
    xi: np.ndarray           # (ny, nx, 2) maximizing slope
    slope_index: np.ndarray  # (ny, nx)
    conj: RestrictedConjugate
    h: float

    @property
    def body(self) -> SlopeBody:
        return self.conj.body

    def grid_points(self) -> np.ndarray:
        gx, gy = np.meshgrid(self.xs, self.ys)
        return np.column_stack([gx.ravel(), gy.ravel()])

    def hessian_field(self, window: int = 3, mask: np.ndarray | None = None) -> np.ndarray:
        """(ny, nx, 2, 2) symmetrized derivative of the slope field.

        Each slope component is fit by a least-squares plane over an odd
        ``window`` of grid nodes; the plain central difference of the argmax
        slope is dominated by slope-grid quantization noise, so the window
        should cover a few slope cells (window ~ 2*spacing/h).  An optional
        boolean ``mask`` (ny, nx) restricts the fit to selected nodes, which
        removes the smearing bias where the window would straddle the set
        boundary; nodes whose window holds fewer than three usable points
        get a zero Hessian.
        """
        if window % 2 == 0 or window < 3:
            raise ValueError("window must be odd and at least 3")
        k = window // 2
        offs = np.arange(-k, k + 1) * self.h
        ox = np.tile(offs, (window, 1))
        oy = ox.T
        m = np.ones(self.phi.shape) if mask is None else mask.astype(float)

        def box(field, kernel):
            return ndimage.correlate(field, kernel, mode="constant", cval=0.0)

        one = np.ones((window, window))
        S = box(m, one)
        Sx = box(m, ox)
        Sy = box(m, oy)
        Sxx = box(m, ox * ox)
        Sxy = box(m, ox * oy)
        Syy = box(m, oy * oy)
        M = np.stack([
            np.stack([S, Sx, Sy], axis=-1),
            np.stack([Sx, Sxx, Sxy], axis=-1),
            np.stack([Sy, Sxy, Syy], axis=-1),
        ], axis=-2)
        det = np.linalg.det(M)
        good = (S >= 3) & (np.abs(det) > 1e-14 * np.maximum(S, 1.0) ** 3 * self.h ** 4)
        M_safe = np.where(good[..., None, None], M, np.eye(3))

        H = np.zeros(self.phi.shape + (2, 2))
        for comp in range(2):
            f = self.xi[:, :, comp] * m
            rhs = np.stack([box(f, one), box(f, ox), box(f, oy)], axis=-1)
            beta = np.linalg.solve(M_safe, rhs[..., None])[..., 0]
            H[:, :, comp, 0] = np.where(good, beta[..., 1], 0.0)
            H[:, :, comp, 1] = np.where(good, beta[..., 2], 0.0)
        return 0.5 * (H + np.swapaxes(H, 2, 3))

    def interp_xi(self, pts) -> np.ndarray:
        return _bilinear(self.xs, self.ys, self.xi, pts)

    def interp_hessian(self, hess, pts) -> np.ndarray:
        return _bilinear(self.xs, self.ys, hess.reshape(hess.shape[:2] + (4,)),
                         pts).reshape(-1, 2, 2)

    def convexity_violation(self) -> float:
        """Worst negative midpoint second difference (axes and diagonals)."""
        worst = 0.0
        p = self.phi
        for dd in (p[:, 2:] + p[:, :-2] - 2 * p[:, 1:-1],
                   p[2:, :] + p[:-2, :] - 2 * p[1:-1, :],
                   p[2:, 2:] + p[:-2, :-2] - 2 * p[1:-1, 1:-1],
                   p[2:, :-2] + p[:-2, 2:] - 2 * p[1:-1, 1:-1]):
            worst = min(worst, float(dd.min()))
        return -worst

    def dump_csv(self, path) -> None:
        pts = self.grid_points()
        rows = np.column_stack([pts, self.phi.ravel(),
                                self.xi[:, :, 0].ravel(), self.xi[:, :, 1].ravel()])
        np.savetxt(path, rows, delimiter=",", header="x,y,phi,xi1,xi2",
                   comments="", fmt="%.12g")


def _bilinear(xs, ys, F, pts):
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    hx = xs[1] - xs[0]
    hy = ys[1] - ys[0]
    fx = np.clip((pts[:, 0] - xs[0]) / hx, 0.0, len(xs) - 1.0 - 1e-12)
    fy = np.clip((pts[:, 1] - ys[0]) / hy, 0.0, len(ys) - 1.0 - 1e-12)
    ix = fx.astype(int)
    iy = fy.astype(int)
    tx = (fx - ix)[:, None]
    ty = (fy - iy)[:, None]
    vals = np.asarray(F, dtype=float)
    if vals.ndim == 2:
        vals = vals[:, :, None]
    f00 = vals[iy, ix]
    f10 = vals[iy, ix + 1]
    f01 = vals[iy + 1, ix]
    f11 = vals[iy + 1, ix + 1]
    out = (f00 * (1 - tx) * (1 - ty) + f10 * tx * (1 - ty)
           + f01 * (1 - tx) * ty + f11 * tx * ty)
    return out.squeeze()


def k_envelope(conj: RestrictedConjugate, eval_box, resolution: float) -> EnvelopeField:
    """Evaluate the envelope phi(x) = max_m (a_m + xi_m . x) on a regular grid.

    ``eval_box`` is ((x0, x1), (y0, y1)); ``resolution`` is the grid step.
    Ties in the argmax resolve to the lowest slope index.
    """
    (x0, x1), (y0, y1) = eval_box
    nx = int(math.ceil((x1 - x0) / resolution)) + 1
    ny = int(math.ceil((y1 - y0) / resolution)) + 1
    xs = x0 + resolution * np.arange(nx)
    ys = y0 + resolution * np.arange(ny)
    pts = np.column_stack([np.tile(xs, ny), np.repeat(ys, nx)])
    if conj.body.polar_shape is not None:
        best_val, xi_flat, best_idx = _sector_argmax(conj, pts)
    else:
        best_val, xi_flat, best_idx = _generic_argmax(conj, pts)
    if not np.all(np.isfinite(best_val)):
        raise RuntimeError("envelope argmax failed to exist at some node")
    phi = best_val.reshape(ny, nx)
    xi = xi_flat.reshape(ny, nx, 2)
    return EnvelopeField(xs, ys, phi, xi, best_idx.reshape(ny, nx), conj, resolution)


@dataclasses.dataclass
class Witness:
    feasible: bool
    lambdas: np.ndarray | None
    contact_indices: np.ndarray | None
    normal_part: np.ndarray | None
    hessian: np.ndarray | None


@dataclasses.dataclass
class ContactData:
    contact_indices: np.ndarray
    contact_points: np.ndarray
    normal_generators: np.ndarray
    witness: Witness | None


def contact_data(points, values, body: SlopeBody, xi, tol_contact: float | None = None,
                 x=None, hessians=None) -> ContactData:
    """Contact set, normal cone, and Hessian-bound witness for one slope.

    The contact set S_xi collects samples within ``tol_contact`` of the
    minimum of u - xi . y (default tolerance: 1e-8 times the value range).
    When an evaluation point ``x`` is supplied, a witness is sought: a
    convex combination of at most three contact points plus a normal-cone
    vector reproducing x.  The search is a small feasibility LP whose basic
    solution automatically touches at most three samples.  Infeasibility is
    reported on the witness (hypothesis failure), never raised.
    """
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if not bool(body.contains(xi)[0]):
        raise ValueError("slope must belong to the body")
    scores = values - points @ xi
    vmin = float(scores.min())
    if tol_contact is None:
        vrange = float(values.max() - values.min())
        tol_contact = 1e-8 * max(vrange, 1e-12)
    idx = np.nonzero(scores <= vmin + tol_contact)[0]
    contact = points[idx]
    gens = body.normal_cone(xi)

    witness = None
    if x is not None:
        x = np.asarray(x, dtype=float)
        nS, nG = len(contact), len(gens)
        A_eq = np.zeros((3, nS + nG))
        A_eq[0, :nS] = 1.0
        A_eq[1, :nS] = contact[:, 0]
        A_eq[2, :nS] = contact[:, 1]
        if nG:
            A_eq[1, nS:] = gens[:, 0]
            A_eq[2, nS:] = gens[:, 1]
        b_eq = np.array([1.0, x[0], x[1]])
        res = linprog(np.zeros(nS + nG), A_eq=A_eq, b_eq=b_eq,
                      bounds=[(0, None)] * (nS + nG), method="highs")
        if res.status == 0:
            lam = res.x[:nS]
            mu = res.x[nS:] if nG else np.zeros(0)
            keep = lam > 1e-10
            lam_k = lam[keep] / lam[keep].sum()
            H = None
            if hessians is not None:
                hs = np.asarray(hessians, dtype=float)
                H = np.einsum("i,ijk->jk", lam_k, hs[idx[keep]])
            normal_part = gens.T @ mu if nG else np.zeros(2)
            witness = Witness(True, lam_k, idx[keep], normal_part, H)
        else:
            witness = Witness(False, None, None, None, None)
    return ContactData(idx, contact, gens, witness)


@dataclasses.dataclass(frozen=True)
class C11Report:
    lip_grad: float
    range_hausdorff: float
    convexity_violation: float
    n_distinct_slopes: int


def check_c11(field: EnvelopeField) -> C11Report:
    """Discrete C^{1,1} diagnostics of an envelope field.

    lip_grad is the largest finite-difference Lipschitz quotient of the
    slope field between adjacent grid nodes; range_hausdorff measures how
    completely the achieved slopes cover the body's sample grid (the
    achieved slopes are sample points, so the distance is one-sided).
    """
    xi = field.xi
    h = field.h
    dx = np.linalg.norm(np.diff(xi, axis=1), axis=2) / h
    dy = np.linalg.norm(np.diff(xi, axis=0), axis=2) / h
    lip = float(max(dx.max(), dy.max()))
    cloud = np.unique(xi.reshape(-1, 2), axis=0)
    tree = cKDTree(cloud)
    d, _ = tree.query(field.body.samples)
    return C11Report(lip, float(d.max()), field.convexity_violation(), len(cloud))
