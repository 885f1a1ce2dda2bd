"""Star-shaped sets in a cone and their weighted measure-theoretic functionals.

A set is stored as a sampled radial function r(theta) over the cone's unit
arc.  In polar coordinates the weighted volume and perimeter of the region
{t*u(theta): 0 < t < r(theta)} are

    w(E)     = (1/D) * integral r^D * w(theta) dtheta,
    Per_w(E) = integral r^(D-1) * sqrt(1 + (r'/r)^2) * w(theta) dtheta,

with D the effective dimension carried by the weight.  Only the part of the
boundary inside the open cone contributes to the perimeter, which the polar
parametrization encodes automatically.  Quadrature is trapezoidal on the
uniform angular grid (periodic rectangle rule for full-plane sets).
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .cone_weight import Cone, HomWeight, unit


class ZeroVolumeError(ValueError):
    """The set has no weighted mass."""


class UnsupportedTranslationError(ValueError):
    """symdiff_with_ball needs the origin strictly inside the translated ball."""


@dataclasses.dataclass(frozen=True)
class StarSet:
    """Region of the cone sampled as radii over a uniform angular grid."""

    cone: Cone
    thetas: np.ndarray
    radii: np.ndarray
    radius_cap: float = 64.0

    def __post_init__(self):
        if len(self.thetas) != len(self.radii):
            raise ValueError("angular grid and radii lengths differ")
        if np.any(self.radii <= 0):
            raise ValueError("radii must be strictly positive")
        if np.any(self.radii > self.radius_cap):
            raise ValueError("radii exceed the declared cap")

    @property
    def n_theta(self) -> int:
        return len(self.thetas)

    @property
    def periodic(self) -> bool:
        return self.cone.full_plane

    def quad_weights(self) -> np.ndarray:
        return self.cone.arc_quad_weights(self.thetas)

    def radial_derivative(self) -> np.ndarray:
        """dr/dtheta by central differences (wrapping for full-plane sets)."""
        r = self.radii
        if self.periodic:
            h = self.thetas[1] - self.thetas[0]
            return (np.roll(r, -1) - np.roll(r, 1)) / (2.0 * h)
        return np.gradient(r, self.thetas, edge_order=2)

    def radius_at(self, theta):
        """Radial function at arbitrary angles (linear interpolation)."""
        if self.periodic:
            t = np.mod(theta, 2.0 * math.pi)
            th = np.concatenate([self.thetas, [self.thetas[0] + 2.0 * math.pi]])
            rr = np.concatenate([self.radii, [self.radii[0]]])
            return np.interp(t, th, rr)
        t = np.clip(theta, self.thetas[0], self.thetas[-1])
        return np.interp(t, self.thetas, self.radii)

    def boundary_points(self) -> np.ndarray:
        return self.radii[:, None] * unit(self.thetas)

    def contains(self, pts, tol: float = 1e-12) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        r = np.hypot(pts[:, 0], pts[:, 1])
        theta = np.arctan2(pts[:, 1], pts[:, 0])
        inside_cone = self.cone.contains(pts, tol=tol)
        return inside_cone & (r <= self.radius_at(theta) * (1.0 + 1e-12) + tol)

    def scaled(self, lam: float) -> "StarSet":
        return StarSet(self.cone, self.thetas.copy(), lam * self.radii,
                       radius_cap=max(self.radius_cap, lam * self.radii.max() * 1.5))

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.thetas, self.radii]),
                   delimiter=",", header="theta,r", comments="")

    @staticmethod
    def from_csv(path, cone: Cone) -> "StarSet":
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        return StarSet(cone, data[:, 0], data[:, 1])

    # -- factories ----------------------------------------------------------

    @staticmethod
    def ball(cone: Cone, n_theta: int, r: float = 1.0, center=(0.0, 0.0)) -> "StarSet":
        """B_r(center) cap cone; the center must satisfy |center| < r."""
        center = np.asarray(center, dtype=float)
        if np.linalg.norm(center) >= r:
            raise ValueError("ball star representation needs |center| < r")
        thetas = cone.arc_grid(n_theta)
        b = unit(thetas) @ center
        radii = b + np.sqrt(b * b + r * r - center @ center)
        return StarSet(cone, thetas, radii)

    @staticmethod
    def from_radial(cone: Cone, n_theta: int, fn) -> "StarSet":
        thetas = cone.arc_grid(n_theta)
        return StarSet(cone, thetas, np.asarray(fn(thetas), dtype=float))

    @staticmethod
    def perturbed_ball(cone: Cone, weight: HomWeight, n_theta: int, eps: float,
                       eta_fn, project: bool = True) -> "StarSet":
        """r = 1 + eps * eta with eta optionally projected to zero weighted mean.

        The projection uses the same trapezoidal quadrature as the volume so
        that the first-order volume variation cancels exactly in the discrete
        functionals as well.
        """
        thetas = cone.arc_grid(n_theta)
        eta = np.asarray(eta_fn(thetas), dtype=float)
        if project:
            qw = cone.arc_quad_weights(thetas)
            wv = weight.arc_values(thetas)
            total = float(qw @ wv)
            if total <= 0:
                raise ZeroVolumeError("weight has no mass on the arc")
            eta = eta - float(qw @ (wv * eta)) / total
        if np.max(np.abs(eta)) <= 1e-14:
            raise ValueError("perturbation profile vanishes after projection")
        return StarSet(cone, thetas, 1.0 + eps * eta)


@dataclasses.dataclass(frozen=True)
class MeasureReport:
    """Weighted volume, perimeter, isoperimetric deficit, equivalent radius."""

    w_volume: float
    w_perimeter: float
    deficit: float
    r_eq: float


def _require_weighted(star: StarSet, weight: HomWeight):
    if star.cone.full_plane:
        raise ValueError("weighted functionals need a wedge or half-plane cone")
    if not star.cone.same_as(weight.cone):
        raise ValueError("set and weight live on different cones")


def weighted_volume(star: StarSet, weight: HomWeight) -> float:
    """w(E) by polar quadrature of r^D * w(theta) / D."""
    _require_weighted(star, weight)
    qw = star.quad_weights()
    wv = weight.arc_values(star.thetas)
    return float(qw @ (star.radii ** weight.D * wv)) / weight.D


def weighted_perimeter(star: StarSet, weight: HomWeight) -> float:
    """Per_w(E) by polar quadrature with the radial-graph arc element."""
    _require_weighted(star, weight)
    qw = star.quad_weights()
    wv = weight.arc_values(star.thetas)
    r = star.radii
    dr = star.radial_derivative()
    integrand = r ** (weight.D - 1.0) * np.sqrt(1.0 + (dr / r) ** 2) * wv
    return float(qw @ integrand)


def unit_ball_volume(star_or_cone, weight: HomWeight, n_theta: int | None = None) -> float:
    """w(B1 cap cone) at a prescribed angular resolution (consistent quadrature)."""
    if isinstance(star_or_cone, StarSet):
        thetas = star_or_cone.thetas
        qw = star_or_cone.quad_weights()
    else:
        thetas = star_or_cone.arc_grid(n_theta)
        qw = star_or_cone.arc_quad_weights(thetas)
    return float(qw @ weight.arc_values(thetas)) / weight.D


def deficit(star: StarSet, weight: HomWeight) -> MeasureReport:
    """Scale-invariant weighted isoperimetric deficit report.

    delta = Per_w(E) / (c_star * w(E)^((D-1)/D)) - 1 with c_star evaluated at
    the set's own quadrature so that balls about the origin report exactly
    zero in floating point.
    """
    vol = weighted_volume(star, weight)
    if vol <= 0:
        raise ZeroVolumeError("set has zero weighted volume")
    per = weighted_perimeter(star, weight)
    w1 = unit_ball_volume(star, weight)
    c_star = weight.D * w1 ** (1.0 / weight.D)
    delta = per / (c_star * vol ** ((weight.D - 1.0) / weight.D)) - 1.0
    r_eq = (vol / w1) ** (1.0 / weight.D)
    return MeasureReport(vol, per, delta, r_eq)


def _ray_power_measure(lo, hi, D):
    """Weighted length integral t^(D-1) dt over [lo, hi] clipped to lo <= hi."""
    hi = np.maximum(hi, lo)
    return (hi ** D - lo ** D) / D


def _ball_ray_interval(thetas, x0, r):
    """Intersection (t-, t+) of each ray with the ball B_r(x0); empty -> t-=t+=0."""
    b = unit(thetas) @ np.asarray(x0, dtype=float)
    disc = b * b + r * r - float(np.dot(x0, x0))
    has = disc > 0
    root = np.sqrt(np.where(has, disc, 0.0))
    t_minus = np.where(has, np.maximum(b - root, 0.0), 0.0)
    t_plus = np.where(has, np.maximum(b + root, 0.0), 0.0)
    return t_minus, t_plus


def symdiff_with_ball(star: StarSet, weight: HomWeight, x0, r: float) -> float:
    """w(E symdiff (B_r(x0) cap cone)) for |x0| < r (per-ray segment formula).

    Each ray then meets the ball in a segment containing the origin, so the
    per-ray symmetric difference is the interval between r_E(theta) and the
    positive root t+ of t^2 - 2 t (u . x0) + |x0|^2 = r^2.
    """
    _require_weighted(star, weight)
    x0 = np.asarray(x0, dtype=float)
    if float(np.linalg.norm(x0)) >= r:
        raise UnsupportedTranslationError("need |x0| < r so every ray meets the ball")
    b = unit(star.thetas) @ x0
    t_plus = b + np.sqrt(b * b + r * r - float(x0 @ x0))
    lo = np.minimum(star.radii, t_plus)
    hi = np.maximum(star.radii, t_plus)
    qw = star.quad_weights()
    wv = weight.arc_values(star.thetas)
    return float(qw @ (wv * _ray_power_measure(lo, hi, weight.D)))


def _symdiff_ball_general(star: StarSet, weight: HomWeight, x0, r: float) -> float:
    """Per-ray interval algebra valid for any center (rays may miss the ball)."""
    D = weight.D
    t_minus, t_plus = _ball_ray_interval(star.thetas, x0, r)
    rE = star.radii
    m_e = rE ** D / D
    m_b = _ray_power_measure(t_minus, t_plus, D)
    inter_lo = t_minus
    inter_hi = np.minimum(rE, t_plus)
    m_i = _ray_power_measure(inter_lo, inter_hi, D)
    qw = star.quad_weights()
    wv = weight.arc_values(star.thetas)
    return float(qw @ (wv * (m_e + m_b - 2.0 * m_i)))


def asymmetry(star: StarSet, weight: HomWeight):
    """Asymmetry A_w(E) and the best translation along the cone's line subspace.

    A_w is the weighted symmetric difference to the equivalent-radius ball,
    normalized by w(E); translations range over the line subspace only.  For
    a half-plane the translation is located by a coarse scan followed by
    golden-section refinement on |t| <= 2 r_eq.
    """
    rep = deficit(star, weight)
    vol, r_eq = rep.w_volume, rep.r_eq
    if star.cone.k == 0:
        a = symdiff_with_ball(star, weight, (0.0, 0.0), r_eq) / vol
        return a, np.zeros(2)

    direction = star.cone.basis_L()[0]

    def objective(t):
        return _symdiff_ball_general(star, weight, t * direction, r_eq) / vol

    span = 2.0 * r_eq
    ts = np.linspace(-span, span, 65)
    vals = [objective(t) for t in ts]
    i = int(np.argmin(vals))
    lo = ts[max(i - 1, 0)]
    hi = ts[min(i + 1, len(ts) - 1)]
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = objective(c), objective(d)
    while b - a > 1e-6:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = objective(d)
    t_best = 0.5 * (a + b)
    return objective(t_best), t_best * direction


def boundary_weighted_integral(star: StarSet, weight: HomWeight, integrand) -> float:
    """integral over the boundary curve inside the cone of g * w dH^1.

    ``integrand`` is vectorized over an (n, 2) array of boundary points.  The
    arc-length element in polar form factors as r^(D-1) sqrt(1 + (r'/r)^2)
    times the angular weight.
    """
    _require_weighted(star, weight)
    qw = star.quad_weights()
    wv = weight.arc_values(star.thetas)
    r = star.radii
    dr = star.radial_derivative()
    g = np.asarray(integrand(star.boundary_points()), dtype=float)
    element = r ** (weight.D - 1.0) * np.sqrt(1.0 + (dr / r) ** 2) * wv
    return float(qw @ (g * element))


@dataclasses.dataclass(frozen=True)
class GridSet:
    """Cell-bitmask region; every occupied cell center lies in the closed cone."""

    cone: Cone
    origin: tuple
    h: float
    mask: np.ndarray

    def __post_init__(self):
        if not self.mask.any():
            raise ValueError("grid set is empty")
        centers = self.cell_centers()
        if not bool(np.all(self.cone.contains(centers, tol=1e-9))):
            raise ValueError("occupied cell centers must lie in the closed cone")

    def cell_centers(self) -> np.ndarray:
        iy, ix = np.nonzero(self.mask)
        x0, y0 = self.origin
        return np.column_stack([x0 + (ix + 0.5) * self.h, y0 + (iy + 0.5) * self.h])

    @property
    def n_cells(self) -> int:
        return int(self.mask.sum())

    @staticmethod
    def rasterize(star: StarSet, h: float, pad: float = 0.0) -> "GridSet":
        rmax = float(star.radii.max()) + pad
        xs = np.arange(-rmax, rmax + h, h)
        ys = np.arange(-rmax, rmax + h, h)
        cx = xs[:-1] + h / 2.0
        cy = ys[:-1] + h / 2.0
        gx, gy = np.meshgrid(cx, cy)
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        mask = star.contains(pts, tol=-1e-12).reshape(gy.shape)
        iy, ix = np.nonzero(mask)
        if len(ix) == 0:
            raise ValueError("rasterization produced no cells; decrease h")
        x_lo, x_hi = ix.min(), ix.max() + 1
        y_lo, y_hi = iy.min(), iy.max() + 1
        return GridSet(star.cone, (xs[x_lo], ys[y_lo]), h, mask[y_lo:y_hi, x_lo:x_hi])


def is_indecomposable(grid: GridSet) -> bool:
    """True iff the occupied cells form a single 4-connected component."""
    mask = grid.mask
    visited = np.zeros_like(mask, dtype=bool)
    iy, ix = np.nonzero(mask)
    stack = [(int(iy[0]), int(ix[0]))]
    visited[iy[0], ix[0]] = True
    count = 0
    ny, nx = mask.shape
    while stack:
        y, x = stack.pop()
        count += 1
        for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            yy, xx = y + dy, x + dx
            if 0 <= yy < ny and 0 <= xx < nx and mask[yy, xx] and not visited[yy, xx]:
                visited[yy, xx] = True
                stack.append((yy, xx))
    return count == grid.n_cells


def grid_midpoint_volume(grid: GridSet, weight: HomWeight) -> float:
    """Midpoint-rule weighted volume of the cell union (cross-check oracle)."""
    centers = grid.cell_centers()
    return float(np.sum(weight(centers))) * grid.h ** 2
