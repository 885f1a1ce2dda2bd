"""Planar convex cones, homogeneous weights, and concave 1-homogeneous calculus.

A cone is an open angular sector with vertex at the origin and opening at
most pi (a half-plane when the opening equals pi, in which case it contains
exactly one line).  Weights are alpha-homogeneous, nonnegative on the closed
cone, and admissible when their alpha-th root is concave.  The admission
criterion is sampled, not proved symbolically: for interior points x, z the
inequality

    alpha * (w(z)/w(x))^(1/alpha)  <=  grad w(x) . z / w(x)

characterizes concavity of w^(1/alpha).
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

TWO_PI = 2.0 * math.pi

ADMISSION_PAIRS = 10_000
ADMISSION_TOL = 1e-10


class OutsideConeError(ValueError):
    """A point that should lie in the closed cone does not."""


class DegeneratePointError(ValueError):
    """The weight vanishes where a strictly positive value is required."""


class InadmissibleWeightError(ValueError):
    """The weight fails homogeneity or the concavity admission check."""


class NotCompactlyContainedError(ValueError):
    """The inner cone's closed arc is not strictly inside the outer arc."""


def unit(theta):
    """Unit vector(s) at polar angle theta, shape (..., 2)."""
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


@dataclasses.dataclass(frozen=True)
class Cone:
    """Open convex planar cone {r*u(theta): r > 0, angle_lo < theta < angle_hi}.

    ``full_plane`` marks the degenerate all-of-R^2 case used only by the
    anisotropic (unweighted) pipeline; weighted functionals reject it.
    """

    angle_lo: float
    angle_hi: float
    full_plane: bool = False

    def __post_init__(self):
        if self.full_plane:
            return
        opening = self.angle_hi - self.angle_lo
        if not 0.0 < opening <= math.pi + 1e-12:
            raise ValueError(f"cone opening must lie in (0, pi], got {opening}")

    @property
    def opening(self) -> float:
        return TWO_PI if self.full_plane else self.angle_hi - self.angle_lo

    @property
    def k(self) -> int:
        """Number of independent line directions contained in the cone."""
        if self.full_plane:
            return 2
        return 1 if abs(self.opening - math.pi) <= 1e-12 else 0

    @property
    def is_half_plane(self) -> bool:
        return self.k == 1

    def basis_L(self) -> tuple[np.ndarray, ...]:
        """Orthonormal basis of the subspace of lines contained in the cone."""
        if self.full_plane:
            return (np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        if self.k == 0:
            return ()
        d = unit(self.angle_lo)
        if d[0] < 0 or (d[0] == 0 and d[1] < 0):
            d = -d
        return (d,)

    def inward_normals(self):
        """Inward unit normals of the two boundary rays (one pair per ray)."""
        lo, hi = self.angle_lo, self.angle_hi
        n_lo = np.array([-math.sin(lo), math.cos(lo)])
        n_hi = np.array([math.sin(hi), -math.cos(hi)])
        return n_lo, n_hi

    def boundary_distance(self, pts):
        """Signed distance to the cone boundary (positive inside)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.full_plane:
            return np.full(pts.shape[0], np.inf)
        n_lo, n_hi = self.inward_normals()
        return np.minimum(pts @ n_lo, pts @ n_hi)

    def contains(self, pts, tol: float = 1e-12):
        """Membership in the closed cone, with absolute slack ``tol``."""
        return self.boundary_distance(pts) >= -tol

    def arc_grid(self, n: int) -> np.ndarray:
        """Uniform angular grid on the unit arc.

        Wedges include both endpoints; the full plane uses a periodic grid
        on [0, 2pi) without the duplicate endpoint.
        """
        if self.full_plane:
            return np.linspace(0.0, TWO_PI, n, endpoint=False)
        return np.linspace(self.angle_lo, self.angle_hi, n)

    def arc_quad_weights(self, thetas: np.ndarray) -> np.ndarray:
        """Trapezoidal weights matching :meth:`arc_grid`."""
        n = len(thetas)
        if self.full_plane:
            return np.full(n, TWO_PI / n)
        h = (self.angle_hi - self.angle_lo) / (n - 1)
        w = np.full(n, h)
        w[0] = w[-1] = h / 2.0
        return w

    def same_as(self, other: "Cone", tol: float = 1e-12) -> bool:
        if self.full_plane or other.full_plane:
            return self.full_plane == other.full_plane
        return (
            abs(self.angle_lo - other.angle_lo) <= tol
            and abs(self.angle_hi - other.angle_hi) <= tol
        )

    @staticmethod
    def quadrant() -> "Cone":
        return Cone(0.0, math.pi / 2.0)

    @staticmethod
    def half_plane() -> "Cone":
        return Cone(0.0, math.pi)

    @staticmethod
    def sector(opening: float, angle_lo: float = 0.0) -> "Cone":
        return Cone(angle_lo, angle_lo + opening)

    @staticmethod
    def plane() -> "Cone":
        return Cone(0.0, TWO_PI, full_plane=True)


class HomWeight:
    """Alpha-homogeneous weight on a cone with concave alpha-th root.

    Two forms are supported.  Monomial weights ``x^a1 * y^a2`` are evaluated
    analytically.  Spherical-profile weights carry samples of the angular
    profile p with ``w(r*u(theta)) = r^alpha * p(theta)``; the profile is
    interpolated linearly in angle and differentiated by central differences
    with step equal to one grid cell.

    Carries the effective dimension ``D = 2 + alpha`` and the isoperimetric
    constant ``c_star = D * w(B1 cap cone)^(1/D)`` (reference quadrature at
    8192 angular nodes; measure-level code recomputes the unit-ball volume
    at its own resolution so that discrete identities hold exactly).
    """

    _REF_N_THETA = 8192

    def __init__(self, cone, alpha, exponents=None, profile_thetas=None,
                 profile_values=None, validate=True):
        if alpha <= 0:
            raise InadmissibleWeightError("homogeneity degree must be positive")
        if cone.full_plane:
            raise InadmissibleWeightError("weights require a wedge or half-plane cone")
        self.cone = cone
        self.alpha = float(alpha)
        self.exponents = None if exponents is None else tuple(float(a) for a in exponents)
        if profile_thetas is not None:
            self.profile_thetas = np.asarray(profile_thetas, dtype=float)
            self.profile_values = np.asarray(profile_values, dtype=float)
            self._profile_slopes = np.gradient(self.profile_values, self.profile_thetas)
        else:
            self.profile_thetas = None
            self.profile_values = None
            self._profile_slopes = None
        self.D = 2.0 + self.alpha
        thetas = cone.arc_grid(self._REF_N_THETA)
        qw = cone.arc_quad_weights(thetas)
        self.unit_ball_volume = float(qw @ self.arc_values(thetas)) / self.D
        self.c_star = self.D * self.unit_ball_volume ** (1.0 / self.D)
        if validate:
            self._check_admissible()

    @staticmethod
    def monomial(cone, a1, a2, validate=True) -> "HomWeight":
        """Weight x^a1 * y^a2 with a1, a2 >= 0, not both zero."""
        if a1 < 0 or a2 < 0 or a1 + a2 <= 0:
            raise InadmissibleWeightError("monomial exponents must be >= 0 with positive sum")
        return HomWeight(cone, a1 + a2, exponents=(a1, a2), validate=validate)

    @staticmethod
    def from_profile(cone, thetas, values, alpha, validate=True) -> "HomWeight":
        """Weight r^alpha * p(theta) from samples of the angular profile p."""
        return HomWeight(cone, alpha, profile_thetas=thetas, profile_values=values,
                         validate=validate)

    # -- evaluation ---------------------------------------------------------

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        p = np.atleast_2d(pts)
        if self.exponents is not None:
            a1, a2 = self.exponents
            x = np.clip(p[:, 0], 0.0, None)
            y = np.clip(p[:, 1], 0.0, None)
            vals = _safe_pow(x, a1) * _safe_pow(y, a2)
        else:
            r = np.hypot(p[:, 0], p[:, 1])
            theta = np.arctan2(p[:, 1], p[:, 0])
            vals = _safe_pow(r, self.alpha) * self._profile(theta)
        return float(vals[0]) if single else vals

    def arc_values(self, thetas) -> np.ndarray:
        """Profile w(u(theta)) on the unit arc."""
        if self.exponents is not None:
            a1, a2 = self.exponents
            c = np.clip(np.cos(thetas), 0.0, None)
            s = np.clip(np.sin(thetas), 0.0, None)
            return _safe_pow(c, a1) * _safe_pow(s, a2)
        return self._profile(np.asarray(thetas, dtype=float))

    def _profile(self, theta):
        t = np.clip(theta, self.profile_thetas[0], self.profile_thetas[-1])
        return np.interp(t, self.profile_thetas, self.profile_values)

    def _profile_slope(self, theta):
        t = np.clip(theta, self.profile_thetas[0], self.profile_thetas[-1])
        return np.interp(t, self.profile_thetas, self._profile_slopes)

    def grad(self, pts):
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        p = np.atleast_2d(pts)
        if self.exponents is not None:
            a1, a2 = self.exponents
            x = np.clip(p[:, 0], 0.0, None)
            y = np.clip(p[:, 1], 0.0, None)
            gx = a1 * _safe_pow(x, a1 - 1.0) * _safe_pow(y, a2) if a1 > 0 else np.zeros(len(p))
            gy = _safe_pow(x, a1) * a2 * _safe_pow(y, a2 - 1.0) if a2 > 0 else np.zeros(len(p))
            g = np.stack([gx, gy], axis=-1)
        else:
            r = np.hypot(p[:, 0], p[:, 1])
            theta = np.arctan2(p[:, 1], p[:, 0])
            pr = self._profile(theta)
            ps = self._profile_slope(theta)
            u_r = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
            u_t = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
            rad = _safe_pow(r, self.alpha - 1.0)
            g = rad[:, None] * (self.alpha * pr[:, None] * u_r + ps[:, None] * u_t)
        return g[0] if single else g

    # -- admission ----------------------------------------------------------

    def _interior_samples(self, n, rng):
        margin = 0.02 * self.cone.opening
        thetas = rng.uniform(self.cone.angle_lo + margin, self.cone.angle_hi - margin, n)
        radii = rng.uniform(0.3, 2.5, n)
        return radii[:, None] * unit(thetas)

    def _check_admissible(self):
        rng = np.random.default_rng(0)
        pts = self._interior_samples(256, rng)
        base = self(pts)
        if np.any(base < 0):
            raise InadmissibleWeightError("weight is negative inside the cone")
        if np.all(base <= 0):
            raise InadmissibleWeightError("weight vanishes identically")
        for t in (0.5, 2.0, 7.0):
            scaled = self(t * pts)
            ref = t ** self.alpha * base
            if np.max(np.abs(scaled - ref)) > 1e-12 * max(1.0, np.max(np.abs(ref))):
                raise InadmissibleWeightError("weight is not alpha-homogeneous")
        x = self._interior_samples(ADMISSION_PAIRS, rng)
        z = self._interior_samples(ADMISSION_PAIRS, rng)
        wx = self(x)
        ok = wx > 0
        lhs = self.alpha * (self(z)[ok] / wx[ok]) ** (1.0 / self.alpha)
        rhs = np.einsum("ij,ij->i", self.grad(x[ok]), z[ok]) / wx[ok]
        worst = np.min(rhs - lhs)
        tol = ADMISSION_TOL
        if self.profile_thetas is not None:
            # linear interpolation is only quadratically concave between nodes
            tol = max(tol, float(np.max(np.diff(self.profile_thetas))) ** 2)
        if worst < -tol * max(1.0, np.max(np.abs(rhs))):
            raise InadmissibleWeightError(
                f"concavity condition fails at sampled pairs (worst residual {worst:.3e})"
            )

    def root_profile(self, n_theta: int = 512) -> "ConcaveHomFn":
        """The 1-homogeneous function w^(1/alpha), sampled on the unit arc."""
        thetas = self.cone.arc_grid(n_theta)
        vals = self.arc_values(thetas) ** (1.0 / self.alpha)
        return ConcaveHomFn(self.cone, thetas, vals)


def _safe_pow(base, expo):
    """base**expo for base >= 0 with the conventions 0**0 = 1, 0**p = 0 (p > 0)."""
    if expo == 0.0:
        return np.ones_like(base)
    return np.power(base, expo)


def weight_eval_grad(weight: HomWeight, x):
    """Value and gradient of the weight at a point of the closed cone.

    The gradient satisfies Euler's relation grad w(x) . x = alpha * w(x).
    """
    x = np.asarray(x, dtype=float)
    if not bool(weight.cone.contains(x, tol=1e-12)[0]):
        raise OutsideConeError(f"point {x} lies outside the closed cone")
    return float(weight(x)), weight.grad(x)


def check_concavity_condition(weight: HomWeight, x, z) -> float:
    """Residual (RHS - LHS) of the concave-root criterion at interior x, z.

    Nonnegative for admissible weights; a negative residual flags a weight
    whose alpha-th root is not concave.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    wx, gx = float(weight(x)), weight.grad(x)
    if wx <= 0.0:
        raise DegeneratePointError("w(x) = 0: the criterion needs an interior point")
    lhs = weight.alpha * (float(weight(z)) / wx) ** (1.0 / weight.alpha)
    rhs = float(gx @ z) / wx
    return rhs - lhs


@dataclasses.dataclass(frozen=True)
class ConcaveHomFn:
    """A 1-homogeneous function given by samples on the cone's unit arc."""

    cone: Cone
    thetas: np.ndarray
    values: np.ndarray

    def __call__(self, theta):
        t = np.clip(theta, self.thetas[0], self.thetas[-1])
        return np.interp(t, self.thetas, self.values)

    def minimum_with(self, other: "ConcaveHomFn") -> "ConcaveHomFn":
        if not np.allclose(self.thetas, other.thetas):
            raise ValueError("pointwise minimum needs matching angular grids")
        return ConcaveHomFn(self.cone, self.thetas, np.minimum(self.values, other.values))

    def rotated(self, angle: float) -> "ConcaveHomFn":
        """Precompose with the rotation mapping the rotated cone onto this one."""
        new_cone = Cone(self.cone.angle_lo + angle, self.cone.angle_hi + angle)
        return ConcaveHomFn(new_cone, self.thetas + angle, self.values.copy())


@dataclasses.dataclass(frozen=True)
class SubspaceBases:
    """Orthonormal bases of the line / constancy / remaining subspaces."""

    basis_L: tuple
    basis_C: tuple
    basis_E: tuple


def _canonical_direction(d):
    d = d / np.linalg.norm(d)
    if d[0] < 0 or (abs(d[0]) < 1e-15 and d[1] < 0):
        d = -d
    return d


def decompose_subspaces(cone: Cone, weight: HomWeight) -> SubspaceBases:
    """Split the plane into line directions, weight-constancy directions, and the rest.

    The line subspace is nontrivial exactly for the half-plane.  Constancy
    directions (orthogonal to the line subspace) are detected from the null
    space of sampled weight gradients and then verified by a direct sampled
    constancy test at tolerance 1e-10.
    """
    if not cone.same_as(weight.cone):
        raise ValueError("cone and weight disagree")
    rng = np.random.default_rng(1)
    pts = weight._interior_samples(128, rng)
    base = weight(pts)
    for t in (0.5, 2.0, 7.0):
        if np.max(np.abs(weight(t * pts) - t ** weight.alpha * base)) > 1e-12 * max(
            1.0, float(np.max(np.abs(base)))
        ):
            raise InadmissibleWeightError("weight is not alpha-homogeneous")

    basis_L = cone.basis_L()
    grads = weight.grad(pts)
    _, svals, vt = np.linalg.svd(grads, full_matrices=False)
    candidates = [vt[i] for i in range(len(svals)) if svals[i] <= 1e-10 * max(svals[0], 1e-300)]

    basis_C = []
    for d in candidates:
        if basis_L and abs(float(d @ basis_L[0])) > 1e-8:
            continue
        if _constancy_holds(cone, weight, d):
            basis_C.append(_canonical_direction(d))

    span = list(basis_L) + basis_C
    basis_E = []
    if len(span) == 0:
        basis_E = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    elif len(span) == 1:
        v = span[0]
        basis_E = [_canonical_direction(np.array([-v[1], v[0]]))]
    return SubspaceBases(tuple(basis_L), tuple(basis_C), tuple(basis_E))


def _constancy_holds(cone, weight, direction, tol=1e-10):
    thetas = np.linspace(cone.angle_lo + 0.05, cone.angle_hi - 0.05, 17)
    pts = np.concatenate([r * unit(thetas) for r in (0.5, 1.0, 1.9)])
    vals = weight(pts)
    scale = max(1.0, float(np.max(np.abs(vals))))
    for t in (-0.3, 0.11, 0.4):
        shifted = pts + t * direction
        inside = cone.contains(shifted, tol=0.0)
        if not np.any(inside):
            continue
        if np.max(np.abs(weight(shifted[inside]) - vals[inside])) > tol * scale:
            return False
    return True


def zero_trace_extension(v: ConcaveHomFn, inner_cone: Cone,
                         n_directions: int = 512) -> ConcaveHomFn:
    """Concave 1-homogeneous extension vanishing on the outer cone's boundary.

    Returns the pointwise infimum over nonnegative concave 1-homogeneous
    majorants of v restricted to the inner cone, computed as a minimization
    over supporting slopes: a unit direction d in the dual cone supports an
    admissible linear majorant t*d.x once t >= max over the inner arc of
    v / (d . u); the extension is the infimum of those linear functions.
    """
    cone = v.cone
    tol = 1e-9
    if not (inner_cone.angle_lo > cone.angle_lo + tol
            and inner_cone.angle_hi < cone.angle_hi - tol):
        raise NotCompactlyContainedError("inner arc must be compactly inside the outer arc")
    if np.any(v.values < -1e-12):
        raise ValueError("extension requires a nonnegative function")

    psi = np.linspace(cone.angle_hi - math.pi / 2.0, cone.angle_lo + math.pi / 2.0,
                      n_directions)
    dirs = unit(psi)
    inner_thetas = v.thetas[
        (v.thetas >= inner_cone.angle_lo - 1e-15) & (v.thetas <= inner_cone.angle_hi + 1e-15)
    ]
    if len(inner_thetas) < 2:
        inner_thetas = inner_cone.arc_grid(64)
    inner_vals = v(inner_thetas)
    dots_inner = dirs @ unit(inner_thetas).T
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dots_inner > 1e-14, inner_vals[None, :] / dots_inner, np.inf)
        ratio = np.where(inner_vals[None, :] <= 1e-300, 0.0, ratio)
    t_min = np.max(ratio, axis=1)
    usable = np.isfinite(t_min)
    dots_outer = dirs[usable] @ unit(v.thetas).T
    ext = np.min(t_min[usable, None] * dots_outer, axis=0)
    return ConcaveHomFn(cone, v.thetas.copy(), np.maximum(ext, 0.0))


def spherical_concavity_check(v: ConcaveHomFn, n_triples: int = 4096,
                              seed: int = 0) -> float:
    """Worst violation of the chordal concavity criterion on the unit arc.

    For angles theta - s < theta < theta + t on the arc with s + t < pi, a
    concave 1-homogeneous function satisfies

        v(theta) >= [sin(t) v(theta - s) + sin(s) v(theta + t)] / sin(s + t),

    with equality for restrictions of linear functions.  Returns the largest
    sampled value of RHS - LHS (nonpositive up to tolerance iff concave).
    """
    n = len(v.thetas)
    if n < 16:
        raise ValueError("angular grid resolution must be at least 16")
    if n <= 64 and math.comb(n, 3) <= 4 * n_triples:
        idx = np.array([(i, j, k) for i in range(n) for j in range(i + 1, n)
                        for k in range(j + 1, n)])
    else:
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.integers(0, n, size=(n_triples, 3)), axis=1)
        idx = idx[(idx[:, 0] < idx[:, 1]) & (idx[:, 1] < idx[:, 2])]
    th = v.thetas
    s = th[idx[:, 1]] - th[idx[:, 0]]
    t = th[idx[:, 2]] - th[idx[:, 1]]
    keep = (s > 1e-12) & (t > 1e-12) & (s + t < math.pi - 1e-9)
    idx, s, t = idx[keep], s[keep], t[keep]
    if len(idx) == 0:
        return 0.0
    lhs = v.values[idx[:, 1]]
    rhs = (np.sin(t) * v.values[idx[:, 0]] + np.sin(s) * v.values[idx[:, 2]]) / np.sin(s + t)
    return float(np.max(rhs - lhs))
