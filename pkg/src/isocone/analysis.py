"""Supporting quantitative lemmas: AM-GM, 1-D stability, translation and
Cheeger/trace/Poincare toolkit.

The one-dimensional pieces work on the weighted half-line (0, infinity) with
weight t^alpha; effective dimension is D = 1 + alpha there.  The convention
for the measure-theoretic boundary of an interval set excludes an endpoint
sitting exactly at 0 (a set containing [0, delta) has density 1 at the
origin relative to the half-line).
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .cone_weight import Cone, HomWeight
from .geometry import (
    GridSet,
    StarSet,
    boundary_weighted_integral,
    deficit,
    symdiff_with_ball,
    unit_ball_volume,
    weighted_volume,
)


class InadmissibleInputError(ValueError):
    """Input violates the hypothesis of the inequality being checked."""


class HypothesisFailure(ValueError):
    """A proposition's hypothesis fails, so its conclusion is not tested."""


# ---------------------------------------------------------------------------
# Quantitative AM-GM
# ---------------------------------------------------------------------------

def quantitative_amgm_check(lambdas, xs, c: float):
    """Check the quantitative weighted AM-GM bound.

    With s = sum(lambda_i) >= 1 and sum(lambda_i x_i) <= c s, the weighted
    variance around c is controlled by the AM-GM gap:

        sum lambda_i (x_i - c)^2
            <= (8/3) * c^(2-s) * s^3 / min(lambda)^2 * (c^s - prod x_i^lambda_i).

    Returns (lhs, rhs, holds).
    """
    lam = np.asarray(lambdas, dtype=float)
    x = np.asarray(xs, dtype=float)
    if np.any(lam <= 0) or np.any(x < 0) or c <= 0:
        raise InadmissibleInputError("need lambda_i > 0, x_i >= 0, c > 0")
    s = float(lam.sum())
    if s < 1.0 - 1e-15:
        raise InadmissibleInputError(f"need sum(lambda) >= 1, got {s}")
    if float(lam @ x) > c * s * (1.0 + 1e-15):
        raise InadmissibleInputError("hypothesis sum(lambda_i x_i) <= c*s fails")
    lhs = float(lam @ (x - c) ** 2)
    geo = float(np.prod(x ** lam))
    rhs = (8.0 / 3.0) * c ** (2.0 - s) * s ** 3 / float(lam.min()) ** 2 * (c ** s - geo)
    holds = lhs <= rhs + 1e-12 * max(1.0, rhs)
    return lhs, rhs, holds


def quantitative_amgm_batch(n: int, seed: int = 0, max_m: int = 6):
    """Vectorized random audit of the AM-GM bound; returns worst relative slack.

    Draws admissible (lambda, x, c) tuples with m <= max_m and s in [1, 10]
    and reports max(lhs - rhs) normalized by max(1, rhs); nonpositive (up to
    1e-12) when the inequality holds throughout.
    """
    rng = np.random.default_rng(seed)
    worst = -np.inf
    per_m = n // max_m + 1
    for m in range(1, max_m + 1):
        lam = rng.uniform(0.05, 3.0, size=(per_m, m))
        scale = rng.uniform(1.0, 10.0, size=per_m) / lam.sum(axis=1)
        lam *= scale[:, None]
        s = lam.sum(axis=1)
        c = rng.uniform(0.2, 5.0, size=per_m)
        x = rng.uniform(0.0, 2.0, size=(per_m, m))
        cap = c * s / np.maximum((lam * x).sum(axis=1), 1e-300)
        x *= (cap * rng.uniform(0.0, 1.0, size=per_m))[:, None]
        lhs = (lam * (x - c[:, None]) ** 2).sum(axis=1)
        geo = np.prod(x ** lam, axis=1)
        rhs = (8.0 / 3.0) * c ** (2.0 - s) * s ** 3 / lam.min(axis=1) ** 2 * (c ** s - geo)
        rel = (lhs - rhs) / np.maximum(1.0, rhs)
        worst = max(worst, float(rel.max()))
    return worst


# ---------------------------------------------------------------------------
# Interval sets on the half-line
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class IntervalSet:
    """Disjoint sorted intervals in [0, infinity), at most 16 of them."""

    intervals: tuple

    def __post_init__(self):
        iv = tuple((float(a), float(b)) for a, b in self.intervals)
        object.__setattr__(self, "intervals", iv)
        if len(iv) > 16:
            raise ValueError("at most 16 intervals supported")
        prev = -np.inf
        for a, b in iv:
            if a < 0 or b <= a:
                raise ValueError("intervals must be positive-length subsets of [0, inf)")
            if a < prev:
                raise ValueError("intervals must be sorted and disjoint")
            prev = b

    def measure(self, power: float = 0.0) -> float:
        """integral over E of t^power dt."""
        p = power + 1.0
        return sum((b ** p - a ** p) / p for a, b in self.intervals)

    def boundary(self, include_origin: bool = False):
        """Sorted endpoint multiset; an endpoint at 0 is excluded by default."""
        pts = []
        for a, b in self.intervals:
            if a > 0 or include_origin:
                pts.append(a)
            pts.append(b)
        return sorted(pts)

    def complement_measure_in(self, lo: float, hi: float, power: float = 0.0) -> float:
        """integral of t^power over [lo, hi] minus E."""
        p = power + 1.0
        total = (hi ** p - lo ** p) / p
        for a, b in self.intervals:
            aa, bb = max(a, lo), min(b, hi)
            if bb > aa:
                total -= (bb ** p - aa ** p) / p
        return total

    def symdiff_measure_with(self, lo: float, hi: float, power: float = 0.0) -> float:
        """integral of t^power over E symdiff [lo, hi]."""
        p = power + 1.0
        inter = 0.0
        for a, b in self.intervals:
            aa, bb = max(a, lo), min(b, hi)
            if bb > aa:
                inter += (bb ** p - aa ** p) / p
        return self.measure(power) + (hi ** p - lo ** p) / p - 2.0 * inter


def one_dim_stability_check(E: IntervalSet, l: float, gamma: float,
                            include_origin: bool = False):
    """One-dimensional stability of [0, l] under the weight t^gamma.

    Returns (lhs, denominator, ratio) where

        lhs          = integral over E symdiff [0, l] of t^gamma dt,
        denominator  = integral over [0, 1/2] \\ E of t^gamma dt
                       + sum over boundary points t of t^gamma |l - t|,

    all in closed form per interval.  The constant-free ratio is bounded
    uniformly over interval sets for each gamma.
    """
    if not 0.75 <= l <= 1.25:
        raise InadmissibleInputError("l must lie in [3/4, 5/4]")
    if gamma < 0:
        raise InadmissibleInputError("gamma must be nonnegative")
    lhs = E.symdiff_measure_with(0.0, l, gamma)
    den = E.complement_measure_in(0.0, 0.5, gamma)
    den += sum(t ** gamma * abs(l - t) for t in E.boundary(include_origin))
    ratio = 0.0 if lhs == 0.0 else (math.inf if den == 0.0 else lhs / den)
    return lhs, den, ratio


def one_dim_stability_batch(endpoints: np.ndarray, l: float, gamma: float):
    """Vectorized (lhs, denominator) for arrays of interval-set endpoints.

    ``endpoints`` has shape (n, 2k) with columns (a1, b1, ..., ak, bk),
    sorted and disjoint per row; rows describe interval sets with k pieces.
    """
    p = gamma + 1.0
    a = endpoints[:, 0::2]
    b = endpoints[:, 1::2]
    measure = ((b ** p - a ** p) / p).sum(axis=1)
    inter = np.where(a < l, (np.minimum(b, l) ** p - np.minimum(a, l) ** p) / p, 0.0)
    lhs = measure + l ** p / p - 2.0 * inter.sum(axis=1)
    covered = np.where(a < 0.5, (np.minimum(b, 0.5) ** p - np.minimum(a, 0.5) ** p) / p, 0.0)
    den = 0.5 ** p / p - covered.sum(axis=1)
    bd_a = np.where(a > 0, np.where(a > 0, a, 1.0) ** gamma * np.abs(l - a), 0.0)
    bd_b = b ** gamma * np.abs(l - b)
    den = den + bd_a.sum(axis=1) + bd_b.sum(axis=1)
    return lhs, den


# ---------------------------------------------------------------------------
# Shift lower bound for scalar functions
# ---------------------------------------------------------------------------

def shift_lower_bound(eta_breaks, eta_values, a: float, b: float, eps: float):
    """Both sides of the shift inequality for a piecewise-linear function.

    Returns (lhs, rhs) with

        lhs = integral over [a, b] of |eta(t + eps) - eta(t)| dt,
        rhs = eps * ( inf over |t-b| <= eps of eta  -  sup over |t-a| <= eps of eta ),

    computed exactly from the breakpoint representation.
    """
    if eps <= 0 or b <= a:
        raise InadmissibleInputError("need eps > 0 and a < b")
    xb = np.asarray(eta_breaks, dtype=float)
    yb = np.asarray(eta_values, dtype=float)

    def eta(t):
        return np.interp(t, xb, yb)

    knots = set()
    for x in xb:
        if a <= x <= b:
            knots.add(float(x))
        if a <= x - eps <= b:
            knots.add(float(x - eps))
    knots.update((a, b))
    grid = np.array(sorted(knots))
    lhs = 0.0
    for lo, hi in zip(grid[:-1], grid[1:]):
        d_lo = eta(lo + eps) - eta(lo)
        d_hi = eta(hi + eps) - eta(hi)
        if d_lo * d_hi < 0:
            t_cross = lo + (hi - lo) * abs(d_lo) / (abs(d_lo) + abs(d_hi))
            lhs += 0.5 * abs(d_lo) * (t_cross - lo) + 0.5 * abs(d_hi) * (hi - t_cross)
        else:
            lhs += 0.5 * (abs(d_lo) + abs(d_hi)) * (hi - lo)

    def extremum(center, sign):
        lo, hi = center - eps, center + eps
        cand = [eta(lo), eta(hi)]
        cand.extend(eta(x) for x in xb if lo <= x <= hi)
        return max(cand) if sign > 0 else min(cand)

    rhs = eps * (extremum(b, -1) - extremum(a, +1))
    return lhs, rhs


# ---------------------------------------------------------------------------
# Translation diagnostics (ball growth and weight-shift separation)
# ---------------------------------------------------------------------------

def _interval_weight_integral(weight: HomWeight, x: float, ylo: float, yhi: float) -> float:
    """integral of w(x, y) dy over [ylo, yhi]; closed form for monomials."""
    if yhi <= ylo:
        return 0.0
    if weight.exponents is not None:
        a1, a2 = weight.exponents
        if x <= 0 and a1 > 0:
            return 0.0
        fx = x ** a1 if a1 > 0 else 1.0
        p = a2 + 1.0
        return fx * (yhi ** p - ylo ** p) / p
    nodes, gw = np.polynomial.legendre.leggauss(8)
    ys = 0.5 * (yhi + ylo) + 0.5 * (yhi - ylo) * nodes
    pts = np.column_stack([np.full_like(ys, x), ys])
    return 0.5 * (yhi - ylo) * float(gw @ weight(pts))


def _cone_vertical_slice(cone: Cone, x: float):
    """The y-interval of the vertical line {x} x R inside the closed cone."""
    lo, hi = -np.inf, np.inf
    for n in cone.inward_normals():
        if abs(n[1]) < 1e-15:
            if n[0] * x < 0:
                return 0.0, 0.0
            continue
        bound = -n[0] * x / n[1]
        if n[1] > 0:
            lo = max(lo, bound)
        else:
            hi = min(hi, bound)
    return lo, hi


def shifted_ball_volume(cone: Cone, weight: HomWeight, center, r: float = 1.0,
                        h: float = 1e-3) -> float:
    """w(B_r(center) cap cone) by column quadrature (midpoint in x, exact in y).

    The shifted ball is generally not star-shaped about the origin, so the
    polar formulas do not apply; each vertical slab contributes an interval
    in y on which the weight integrates in closed form.
    """
    cx, cy = float(center[0]), float(center[1])
    xs = np.arange(cx - r + h / 2.0, cx + r, h)
    total = 0.0
    for x in xs:
        dx2 = r * r - (x - cx) ** 2
        if dx2 <= 0:
            continue
        half = math.sqrt(dx2)
        ylo, yhi = cy - half, cy + half
        clo, chi = _cone_vertical_slice(cone, x)
        lo, hi = max(ylo, clo), min(yhi, chi)
        if hi > lo:
            total += _interval_weight_integral(weight, x, lo, hi)
    return total * h


def ball_volume_growth(cone: Cone, weight: HomWeight, xi, h: float = 1e-3) -> float:
    """w(B_1(xi) cap cone) - w(B_1 cap cone), both by the same column quadrature."""
    xi = np.asarray(xi, dtype=float)
    if float(np.linalg.norm(xi)) > 0.5 + 1e-12:
        raise InadmissibleInputError("growth is probed only for |xi| <= 0.5")
    if not np.any(xi):
        return 0.0
    return (shifted_ball_volume(cone, weight, xi, 1.0, h)
            - shifted_ball_volume(cone, weight, (0.0, 0.0), 1.0, h))


def shifted_weight_separation(weight: HomWeight, box, xi, h: float = 2e-3) -> float:
    """integral over the box Q of |w^(1/a)(x + xi) - w^(1/a)(x)| dx (midpoint rule).

    Zero exactly when xi points along a constancy direction of the weight;
    otherwise grows linearly in |xi| for small shifts.
    """
    (x0, x1), (y0, y1) = box
    xi = np.asarray(xi, dtype=float)
    cone = weight.cone
    corners = np.array([[x0, y0], [x0, y1], [x1, y0], [x1, y1]])
    if not bool(np.all(cone.contains(corners, tol=0.0))):
        raise InadmissibleInputError("box must lie inside the cone")
    if not bool(np.all(cone.contains(corners + xi, tol=0.0))):
        raise InadmissibleInputError("translated box exits the cone")
    d_box = float(np.min(cone.boundary_distance(corners)))
    if float(np.linalg.norm(xi)) > 0.5 * d_box + 1e-12:
        raise InadmissibleInputError("|xi| must be at most dist(Q, boundary)/2")
    xs = np.arange(x0 + h / 2.0, x1, h)
    ys = np.arange(y0 + h / 2.0, y1, h)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    inv_alpha = 1.0 / weight.alpha
    vals = np.abs(weight(pts + xi) ** inv_alpha - weight(pts) ** inv_alpha)
    return float(vals.sum()) * h * h


def translated_ball_control_check(star: StarSet, weight: HomWeight, x0):
    """Compare w(E symdiff B_1(x0)) with the boundary integral of ||x-x0|-1| w.

    Requires w(E cap B_1/2) >= w(B_1/2 cap cone)/2 and |x0| <= 0.2.  Returns
    (lhs, rhs, ratio); the ratio is reported as inf when rhs vanishes (the
    exact-ball degenerate case).
    """
    x0 = np.asarray(x0, dtype=float)
    if float(np.linalg.norm(x0)) > 0.2 + 1e-12:
        raise InadmissibleInputError("|x0| must be at most 0.2")
    capped = StarSet(star.cone, star.thetas, np.minimum(star.radii, 0.5))
    w_half = unit_ball_volume(star, weight) * 0.5 ** weight.D
    if weighted_volume(capped, weight) < 0.5 * w_half - 1e-12:
        raise HypothesisFailure("set holds less than half the small ball's mass")
    lhs = symdiff_with_ball(star, weight, x0, 1.0)
    rhs = boundary_weighted_integral(
        star, weight, lambda p: np.abs(np.hypot(p[:, 0] - x0[0], p[:, 1] - x0[1]) - 1.0)
    )
    ratio = math.inf if rhs <= 1e-14 else lhs / rhs
    return lhs, rhs, ratio


# ---------------------------------------------------------------------------
# Cheeger constants
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class CheegerResult:
    tau: float
    best_subset: object
    tau_minus_one: float


def _cheeger_ratio_1d(F_endpoints, E: IntervalSet, alpha: float):
    """(w(F), Per_w(F), shared boundary weight) for one candidate subset."""
    p = alpha + 1.0
    e_bound = set()
    for t in E.boundary():
        e_bound.add(round(t, 12))
    vol = per = shared = 0.0
    for a, b in F_endpoints:
        vol += (b ** p - a ** p) / p
        for t in (a, b):
            if t <= 1e-14:
                continue
            per += t ** alpha
            if round(t, 12) in e_bound:
                shared += t ** alpha
    return vol, per, shared


def _cheeger_1d(E: IntervalSet, alpha: float, n_grid: int = 48,
                max_components: int = 2, refine: int = 2):
    """Brute force over interval subsets with endpoints on per-interval grids."""
    p = alpha + 1.0
    wE = E.measure(alpha)
    half = wE / 2.0

    def grid_for(a, b, n):
        return np.linspace(a, b, n)

    def evaluate(candidates):
        best = (math.inf, None)
        for cand in candidates:
            vol, per, shared = _cheeger_ratio_1d(cand, E, alpha)
            if vol <= 1e-14 or vol > half * (1.0 + 1e-12):
                continue
            if shared <= 0:
                continue
            ratio = per / shared
            if ratio < best[0]:
                best = (ratio, cand)
        return best

    atoms = []
    for a, b in E.intervals:
        g = grid_for(a, b, n_grid)
        for i in range(len(g)):
            for j in range(i + 1, len(g)):
                atoms.append(((g[i], g[j]),))
    candidates = list(atoms)
    if max_components >= 2:
        singles = [c[0] for c in atoms]
        for i in range(len(singles)):
            for j in range(i + 1, len(singles)):
                a1, b1 = singles[i]
                a2, b2 = singles[j]
                if b1 < a2 - 1e-14:
                    candidates.append(((a1, b1), (a2, b2)))
                elif b2 < a1 - 1e-14:
                    candidates.append(((a2, b2), (a1, b1)))
    best_ratio, best = evaluate(candidates)

    step = max(b - a for a, b in E.intervals) / (n_grid - 1)
    for _ in range(refine):
        if best is None:
            break
        step /= 32.0
        locked = {round(t, 12) for iv in E.intervals for t in iv}
        variants = [()]
        for a, b in best:
            opts_a = [a] if round(a, 12) in locked else list(
                np.linspace(a - 32 * step, a + 32 * step, 65))
            opts_b = [b] if round(b, 12) in locked else list(
                np.linspace(b - 32 * step, b + 32 * step, 65))
            pairs = [(aa, bb) for aa in opts_a for bb in opts_b if bb > aa + 1e-14]
            variants = [v + (pq,) for v in variants for pq in pairs]
        inside = []
        for cand in variants:
            ok = all(
                any(iv[0] - 1e-12 <= a and b <= iv[1] + 1e-12 for iv in E.intervals)
                for a, b in cand
            )
            disjoint = all(cand[i][1] < cand[i + 1][0] + 1e-14 for i in range(len(cand) - 1))
            if ok and disjoint:
                inside.append(cand)
        r2, b2 = evaluate(inside)
        if r2 < best_ratio:
            best_ratio, best = r2, b2
    _ = p
    return CheegerResult(best_ratio, best, best_ratio - 1.0)


def _edge_weight_integral(weight: HomWeight, p, q) -> float:
    """integral of w over the straight cell edge [p, q]; exact for monomials."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if weight.exponents is not None:
        a1, a2 = weight.exponents
        if abs(p[0] - q[0]) < 1e-15:
            if p[0] <= 0 and a1 > 0:
                return 0.0
            fx = p[0] ** a1 if a1 > 0 else 1.0
            e = a2 + 1.0
            ylo, yhi = sorted((p[1], q[1]))
            return fx * (yhi ** e - ylo ** e) / e
        if abs(p[1] - q[1]) < 1e-15:
            if p[1] <= 0 and a2 > 0:
                return 0.0
            fy = p[1] ** a2 if a2 > 0 else 1.0
            e = a1 + 1.0
            xlo, xhi = sorted((p[0], q[0]))
            return fy * (xhi ** e - xlo ** e) / e
    mid = 0.5 * (p + q)
    return float(weight(mid)) * float(np.linalg.norm(q - p))


def _enumerate_connected_subsets(adj):
    """All connected subsets of a small graph, each yielded exactly once.

    Standard fixed-root extension enumeration: subsets are grown from their
    minimum vertex; at each step the first extension vertex is either banned
    or included (which may add new extension vertices above the root).
    """
    n = len(adj)
    for root in range(n):
        stack = [(1 << root, adj[root] & ~((1 << (root + 1)) - 1), 0)]
        while stack:
            subset, ext, banned = stack.pop()
            yield subset
            avail = ext & ~banned
            while avail:
                u = (avail & -avail).bit_length() - 1
                u_bit = 1 << u
                avail &= ~u_bit
                banned |= u_bit
                new_ext = (ext | adj[u]) & ~((1 << (root + 1)) - 1) & ~(subset | u_bit)
                stack.append((subset | u_bit, new_ext & ~banned, banned))


def _cheeger_2d(grid: GridSet, weight: HomWeight):
    """Exhaustive Cheeger constant over 4-connected cell subsets (<= 24 cells)."""
    if grid.n_cells > 24:
        raise InadmissibleInputError("2-D brute force limited to 24 cells")
    iy, ix = np.nonzero(grid.mask)
    cells = list(zip(iy.tolist(), ix.tolist()))
    index = {c: i for i, c in enumerate(cells)}
    n = len(cells)
    h = grid.h
    x0, y0 = grid.origin
    adj = [0] * n
    for i, (cy, cx) in enumerate(cells):
        for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            j = index.get((cy + dy, cx + dx))
            if j is not None:
                adj[i] |= 1 << j

    def cell_edges(cy, cx):
        xl, yl = x0 + cx * h, y0 + cy * h
        return (
            ((cy, cx, "S"), (xl, yl), (xl + h, yl), (cy - 1, cx)),
            ((cy, cx, "N"), (xl, yl + h), (xl + h, yl + h), (cy + 1, cx)),
            ((cy, cx, "W"), (xl, yl), (xl, yl + h), (cy, cx - 1)),
            ((cy, cx, "E"), (xl + h, yl), (xl + h, yl + h), (cy, cx + 1)),
        )

    def on_cone_boundary(p, q):
        mid = 0.5 * (np.asarray(p) + np.asarray(q))
        return abs(float(grid.cone.boundary_distance(mid[None, :])[0])) < 1e-9

    edge_w = {}
    edge_neighbor = {}
    edge_on_e_boundary = {}
    for i, (cy, cx) in enumerate(cells):
        for key, p, q, nb in cell_edges(cy, cx):
            if on_cone_boundary(p, q):
                w = 0.0
            else:
                w = _edge_weight_integral(weight, p, q)
            edge_w[key] = w
            edge_neighbor[key] = index.get(nb)
            edge_on_e_boundary[key] = index.get(nb) is None

    centers = grid.cell_centers()
    cell_vol = weight(centers) * h * h
    wE = float(cell_vol.sum())
    half = wE / 2.0

    best = (math.inf, None)
    for subset in _enumerate_connected_subsets(adj):
        vol = 0.0
        for i in range(n):
            if subset >> i & 1:
                vol += cell_vol[i]
        if vol <= 0 or vol > half * (1.0 + 1e-12):
            continue
        per = shared = 0.0
        for i in range(n):
            if not subset >> i & 1:
                continue
            cy, cx = cells[i]
            for key, _p, _q, _nb in cell_edges(cy, cx):
                nb = edge_neighbor[key]
                if nb is not None and subset >> nb & 1:
                    continue
                per += edge_w[key]
                if edge_on_e_boundary[key]:
                    shared += edge_w[key]
        if shared <= 0:
            continue
        ratio = per / shared
        if ratio < best[0]:
            best = (ratio, subset)
    return CheegerResult(best[0], best[1], best[0] - 1.0)


def cheeger_bruteforce(E, weight, **kwargs) -> CheegerResult:
    """Cheeger constant tau(E) = inf Per_w(F) / H_w(dF cap dE) by brute force.

    One-dimensional interval sets take ``weight`` as the exponent alpha of
    t^alpha on (0, infinity); two-dimensional grid sets take a HomWeight.
    The infimum runs over subsets F with 0 < w(F) <= w(E)/2; candidates
    whose boundary shares nothing with the boundary of E have ratio
    infinity.
    """
    if isinstance(E, IntervalSet):
        return _cheeger_1d(E, float(weight), **kwargs)
    if isinstance(E, GridSet):
        return _cheeger_2d(E, weight)
    raise TypeError("E must be an IntervalSet or a GridSet")


# ---------------------------------------------------------------------------
# Psi / k(D) constants
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class FmpConstants:
    """Effective dimension D, the constant k(D), and a sample table of Psi."""

    D: float
    k: float
    t_samples: np.ndarray
    psi_samples: np.ndarray

    def psi(self, t):
        e = (self.D - 1.0) / self.D
        t = np.asarray(t, dtype=float)
        return t ** e + (1.0 - t) ** e - 1.0


def psi_k(D: float, n_samples: int = 1001) -> FmpConstants:
    """k(D) = (2 - 2^((D-1)/D)) / 3 and the concave profile Psi on [0, 1].

    Psi(t) = t^((D-1)/D) + (1-t)^((D-1)/D) - 1 satisfies Psi(0) = Psi(1) = 0,
    Psi(1/2) = 2^(1/D) - 1, and Psi(t) >= 3 k(D) t^((D-1)/D) on [0, 1/2].
    """
    if D <= 1:
        raise InadmissibleInputError("effective dimension must exceed 1")
    e = (D - 1.0) / D
    k = (2.0 - 2.0 ** e) / 3.0
    t = np.linspace(0.0, 1.0, n_samples)
    psi = t ** e + (1.0 - t) ** e - 1.0
    return FmpConstants(D, k, t, psi)


# ---------------------------------------------------------------------------
# Removal of critical sector subsets
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class RemovalReport:
    applicable: bool
    hypothesis_margin: float
    volume_ok: bool | None
    perimeter_ok: bool | None
    deficit_ok: bool | None
    details: dict


def _sector_cut_weight(star: StarSet, weight: HomWeight, theta: float) -> float:
    """H^1_w of the radial segment {t*u(theta): 0 < t < r(theta)}."""
    r = float(star.radius_at(theta))
    w_arc = float(weight.arc_values(np.array([theta]))[0])
    return w_arc * r ** (weight.D - 1.0) / (weight.D - 1.0)


def _arc_mask(star: StarSet, theta_a: float, theta_b: float):
    return (star.thetas >= theta_a - 1e-14) & (star.thetas <= theta_b + 1e-14)


def _partial_quadrature(star: StarSet, weight: HomWeight, mask):
    """(volume, outer-boundary weight) of the star restricted to masked angles."""
    thetas = star.thetas[mask]
    if len(thetas) < 2:
        return 0.0, 0.0
    sub_qw = np.gradient(thetas)
    sub_qw[0] = (thetas[1] - thetas[0]) / 2.0
    sub_qw[-1] = (thetas[-1] - thetas[-2]) / 2.0
    r = star.radii[mask]
    dr = star.radial_derivative()[mask]
    wv = weight.arc_values(thetas)
    vol = float(sub_qw @ (r ** weight.D * wv)) / weight.D
    outer = float(sub_qw @ (r ** (weight.D - 1.0) * np.sqrt(1.0 + (dr / r) ** 2) * wv))
    return vol, outer


def removal_lemma_check(star: StarSet, weight: HomWeight, theta_a: float,
                        theta_b: float) -> RemovalReport:
    """Removal estimates for the sector subset F = E cap {theta in [a, b]}.

    Hypothesis: 0 < w(F) < w(E)/2 and Per_w(F) <= (1 + k(D)) H_w(dE cap dF),
    where dF consists of the shared outer boundary plus the two radial cuts.
    When it holds, the conclusions are checked:

        (i)   w(F) <= (delta(E)/k(D))^(D/(D-1)) w(E),
        (ii)  Per_w(E \\ F) <= Per_w(E),
        (iii) delta(E \\ F) <= (3/k(D)) delta(E)   [only when delta(E) <= k(D)].
    """
    cone = star.cone
    if not (cone.angle_lo - 1e-12 <= theta_a < theta_b <= cone.angle_hi + 1e-12):
        raise ValueError("sector must lie within the cone's arc")
    D = weight.D
    k = psi_k(D).k
    rep = deficit(star, weight)
    w_E, per_E, delta_E = rep.w_volume, rep.w_perimeter, rep.deficit

    mask = _arc_mask(star, theta_a, theta_b)
    vol_F, outer_F = _partial_quadrature(star, weight, mask)
    cuts = 0.0
    for theta in (theta_a, theta_b):
        if cone.angle_lo + 1e-12 < theta < cone.angle_hi - 1e-12:
            cuts += _sector_cut_weight(star, weight, theta)
    per_F = outer_F + cuts
    shared = outer_F

    hyp_volume = 0.0 < vol_F < w_E / 2.0
    hyp_margin = (1.0 + k) * shared - per_F
    applicable = hyp_volume and hyp_margin >= 0.0
    details = {
        "w_E": w_E, "per_E": per_E, "delta_E": delta_E,
        "w_F": vol_F, "per_F": per_F, "shared": shared, "cuts": cuts,
        "k": k,
    }
    if not applicable:
        return RemovalReport(False, hyp_margin, None, None, None, details)

    vol_bound = (max(delta_E, 0.0) / k) ** (D / (D - 1.0)) * w_E
    volume_ok = vol_F <= vol_bound + 1e-12 * max(1.0, vol_bound)

    vol_rest = w_E - vol_F
    per_rest = (per_E - outer_F) + cuts
    perimeter_ok = per_rest <= per_E + 1e-12 * max(1.0, per_E)
    details["per_E_minus_F"] = per_rest

    deficit_ok = None
    if delta_E <= k:
        w1 = unit_ball_volume(star, weight)
        c_star = D * w1 ** (1.0 / D)
        delta_rest = per_rest / (c_star * vol_rest ** ((D - 1.0) / D)) - 1.0
        deficit_ok = delta_rest <= (3.0 / k) * delta_E + 1e-12
        details["delta_E_minus_F"] = delta_rest
    return RemovalReport(True, hyp_margin, volume_ok, perimeter_ok, deficit_ok, details)


# ---------------------------------------------------------------------------
# Trace and Sobolev-Poincare inequalities on the weighted half-line
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class TracePoincareReport:
    median: float
    lhs: float
    trace_rhs: float
    poincare_rhs: float

    @property
    def trace_holds(self) -> bool:
        return self.lhs >= self.trace_rhs - 1e-12 * max(1.0, self.trace_rhs)

    @property
    def poincare_holds(self) -> bool:
        return self.lhs >= self.poincare_rhs - 1e-12 * max(1.0, self.poincare_rhs)


def trace_poincare_check_1d(E: IntervalSet, pieces, alpha: float,
                            tau: float) -> TracePoincareReport:
    """Trace and Poincare inequalities for a piecewise-constant f on E.

    ``pieces`` is a list of ((lo, hi), value) covering E.  With weight
    t^alpha, D = 1 + alpha, and c the weighted median of f on E:

        lhs          = sum over interior jumps of |jump| * w(t),
        trace rhs    = (tau - 1) * sum over dE of |trace f - c| * w(t),
        poincare rhs = D (1 - 1/tau) * ( integral |f-c|^(D/(D-1)) w )^((D-1)/D).
    """
    D = 1.0 + alpha
    p = alpha + 1.0

    def wmass(lo, hi):
        return (hi ** p - lo ** p) / p

    items = sorted(((iv, v) for iv, v in pieces), key=lambda t: t[0][0])
    total = sum(wmass(lo, hi) for (lo, hi), _v in items)
    by_value = {}
    for (lo, hi), v in items:
        by_value[v] = by_value.get(v, 0.0) + wmass(lo, hi)
    acc = 0.0
    median = items[-1][1]
    for v in sorted(by_value):
        acc += by_value[v]
        if acc >= total / 2.0 - 1e-15:
            median = v
            break

    lhs = 0.0
    for ((_lo1, hi1), v1), ((lo2, _hi2), v2) in zip(items[:-1], items[1:]):
        if abs(hi1 - lo2) > 1e-12:
            continue
        interior = any(a + 1e-12 < hi1 < b - 1e-12 for a, b in E.intervals)
        if interior:
            lhs += abs(v2 - v1) * hi1 ** alpha

    def piece_value_at(t):
        # one-sided value from inside E at a boundary point
        for (lo, hi), v in items:
            if lo - 1e-12 <= t <= hi + 1e-12:
                return v
        return None

    trace_sum = 0.0
    for t in E.boundary():
        val = piece_value_at(t)
        if val is not None:
            trace_sum += abs(val - median) * t ** alpha
    trace_rhs = (tau - 1.0) * trace_sum

    q = D / (D - 1.0)
    integral = sum(abs(v - median) ** q * wmass(lo, hi) for (lo, hi), v in items)
    poincare_rhs = D * (1.0 - 1.0 / tau) * integral ** ((D - 1.0) / D)
    return TracePoincareReport(median, lhs, trace_rhs, poincare_rhs)
