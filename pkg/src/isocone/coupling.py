"""Convex coupling between a set and the minimizing ball sector, with checks.

The pipeline solves the Neumann problem on the set, takes the restricted
convex envelope of the solution with slopes in K (the closed unit ball
sector in weighted mode, a given convex body in anisotropic mode), and
measures every quantity the coupling is supposed to control:

  * the pointwise bound  tr(D2 phi) + alpha (w(grad phi)/w)^(1/alpha) <= b_E
    (anisotropic: tr(D2 phi) <= b_E), reported as a sup of violations;
  * the L1 Hessian defect  integral |D2 phi - id| w;
  * the boundary defect    integral (1 - |grad phi|) w over the free boundary;
  * the weight-shift term  integral over E cap Q of |w(grad phi)^(1/a) - w^(1/a)|;
  * the chain  w(grad-image) <= int det+ (D2 phi) w(grad phi)
               <= int ((tr+ + alpha (w(grad phi)/w)^(1/a)) / D)^D w
               <= (1 + deficit)^D w(B1 cap cone).

Evaluation nodes within one band of the cone's boundary rays are excluded
from sup and chain quantities (the weight may vanish there) and reported
separately.  The Hessian of the envelope is the windowed least-squares
derivative of the maximizing-slope field; see EnvelopeField.hessian_field.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .cone_weight import HomWeight
from .envelope import EnvelopeField, SlopeBody, k_envelope, restricted_conjugate
from .geometry import StarSet, deficit, unit_ball_volume
from .pde import (
    AnisotropicProblem,
    NodalField,
    TriMesh,
    WeightedProblem,
    fan_triangulate,
    solve_neumann,
)


class MinimizerDegenerateError(ValueError):
    """Deficit too small: coupling ratios are undefined on exact minimizers."""


@dataclasses.dataclass(frozen=True)
class WeightedMode:
    weight: HomWeight


@dataclasses.dataclass(frozen=True)
class AnisotropicMode:
    body: SlopeBody


@dataclasses.dataclass
class Resolutions:
    """Discretization knobs: mesh size, slope grid (radial, angular), eval grid.

    The radial slope count is cheap (the structured argmax is logarithmic in
    it) and controls how closely the gradient image reaches the outer arc;
    the angular count sets the reported slope spacing.
    """

    mesh_h: float = 0.02
    n_slope: tuple = (512, 192)
    eval_h: float = 0.006
    hess_window: int = 5
    min_angle_deg: float = 20.0
    boundary_band: float | None = None  # defaults to eval_h

    @property
    def band(self) -> float:
        return self.eval_h if self.boundary_band is None else self.boundary_band


@dataclasses.dataclass
class CouplingReport:
    mode: str
    star: StarSet | None
    weight: HomWeight | None
    body: SlopeBody
    mesh: TriMesh
    u: NodalField
    field: EnvelopeField
    hessians: np.ndarray
    delta: float
    b_E: float
    sup_violation: float
    sup_violation_band: float
    hessian_l1: float
    boundary_term: float
    grad_range_hausdorff: float
    lip_grad: float
    convexity_violation: float
    slope_spacing: float
    resolutions: Resolutions
    reference_volume: float


def anisotropic_perimeter(star: StarSet, body: SlopeBody) -> float:
    """Per_K(E) of a full-plane star set from its boundary polyline.

    Each polyline edge contributes the support function of its unnormalized
    outward normal, so polygonal sets whose corners sit on the angular grid
    (the Wulff shape among them) are measured exactly.
    """
    if not star.periodic:
        raise ValueError("anisotropic perimeter expects a full-plane star set")
    pts = star.boundary_points()
    nxt = np.roll(pts, -1, axis=0)
    edges = nxt - pts
    normals = np.column_stack([edges[:, 1], -edges[:, 0]])  # outward for ccw
    return float(np.sum(body.support(normals)))


def star_area(star: StarSet) -> float:
    """Area of the boundary polyline (shoelace over the origin fan)."""
    pts = star.boundary_points()
    nxt = np.roll(pts, -1, axis=0)
    if not star.periodic:
        return 0.5 * float(star.quad_weights() @ star.radii ** 2)
    return 0.5 * float(np.sum(pts[:, 0] * nxt[:, 1] - pts[:, 1] * nxt[:, 0]))


def anisotropic_deficit(star: StarSet, body: SlopeBody) -> float:
    """Per_K(E) / (n |K|^(1/n) |E|^((n-1)/n)) - 1 in the plane (n = 2)."""
    per = anisotropic_perimeter(star, body)
    area = star_area(star)
    return per / (2.0 * math.sqrt(body.area()) * math.sqrt(area)) - 1.0


def _positive_part_eigen(H):
    """Eigenvalues of symmetric 2x2 fields clamped at zero: (l1+, l2+)."""
    a = H[..., 0, 0]
    b = H[..., 0, 1]
    c = H[..., 1, 1]
    mean = 0.5 * (a + c)
    rad = np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b ** 2, 0.0))
    return np.maximum(mean + rad, 0.0), np.maximum(mean - rad, 0.0)


def _poly_weighted_measure(vertices, weight: HomWeight) -> float:
    """Weighted area of a convex polygon by fan triangulation + midpoint refinement."""
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return 0.0
    centroid = v.mean(axis=0)
    total = 0.0
    for i in range(len(v)):
        tri = np.array([centroid, v[i], v[(i + 1) % len(v)]])
        total += _tri_weighted_measure(tri, weight, depth=2)
    return total


def _tri_weighted_measure(tri, weight, depth):
    if depth == 0:
        area = 0.5 * abs(
            (tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1])
            - (tri[1, 1] - tri[0, 1]) * (tri[2, 0] - tri[0, 0])
        )
        mids = 0.5 * np.array([tri[1] + tri[2], tri[0] + tri[2], tri[0] + tri[1]])
        vals = np.clip(weight(mids), 0.0, None)
        return area / 3.0 * float(vals.sum())
    m01 = 0.5 * (tri[0] + tri[1])
    m12 = 0.5 * (tri[1] + tri[2])
    m02 = 0.5 * (tri[0] + tri[2])
    return (
        _tri_weighted_measure(np.array([tri[0], m01, m02]), weight, depth - 1)
        + _tri_weighted_measure(np.array([m01, tri[1], m12]), weight, depth - 1)
        + _tri_weighted_measure(np.array([m02, m12, tri[2]]), weight, depth - 1)
        + _tri_weighted_measure(np.array([m01, m12, m02]), weight, depth - 1)
    )


def build_coupling(star: StarSet | None, mode, res: Resolutions | None = None,
                   mesh: TriMesh | None = None) -> CouplingReport:
    """Run the full coupling pipeline and measure its control quantities.

    ``star`` may be omitted in anisotropic mode when a prebuilt ``mesh`` is
    supplied (the deficit is then computed from mesh quadrature alone).
    """
    if res is None:
        res = Resolutions()
    weighted = isinstance(mode, WeightedMode)
    if weighted and star is None:
        raise ValueError("weighted mode needs the star-shaped set")

    if mesh is None:
        mesh = fan_triangulate(star, res.mesh_h, min_angle_deg=res.min_angle_deg)
    if weighted:
        weight = mode.weight
        problem = WeightedProblem(weight)
        body = SlopeBody.sector_disk(weight.cone, 1.0, *res.n_slope)
        rep = deficit(star, weight)
        delta = rep.deficit
        ref_volume = unit_ball_volume(star, weight)
    else:
        weight = None
        problem = AnisotropicProblem(mode.body)
        body = mode.body
        if star is not None:
            delta = anisotropic_deficit(star, body)
        else:
            delta = None  # filled from mesh data below
        ref_volume = body.area()

    u = solve_neumann(mesh, problem)
    if not weighted and delta is None:
        per_mesh = u.b_E * float(mesh.areas().sum())
        area = float(mesh.areas().sum())
        delta = per_mesh / (2.0 * math.sqrt(body.area()) * math.sqrt(area)) - 1.0

    conj = restricted_conjugate(mesh.vertices, u.values, body)
    vmin = mesh.vertices.min(axis=0)
    vmax = mesh.vertices.max(axis=0)
    margin = 3.0 * res.eval_h
    box = ((vmin[0] - margin, vmax[0] + margin), (vmin[1] - margin, vmax[1] + margin))
    field = k_envelope(conj, box, res.eval_h)

    nodes = field.grid_points()
    if star is not None:
        in_E = star.contains(nodes)
    else:
        tree = cKDTree(mesh.vertices)
        d, _ = tree.query(nodes)
        in_E = d <= 2.0 * res.mesh_h
    cone = weight.cone if weighted else None
    if weighted:
        band_dist = cone.boundary_distance(nodes)
        in_E &= band_dist > 1e-12  # the set lives in the open cone
    else:
        band_dist = np.full(len(nodes), np.inf)
    interior = in_E & (band_dist > res.band)
    near_boundary = in_E & ~interior

    hess = field.hessian_field(res.hess_window, mask=in_E.reshape(field.phi.shape))

    lam1, lam2 = _positive_part_eigen(hess.reshape(-1, 2, 2))
    tr_plus = lam1 + lam2
    xi_nodes = field.xi.reshape(-1, 2)
    if weighted:
        alpha = weight.alpha
        w_nodes = np.clip(weight(nodes), 1e-300, None)
        w_xi = np.clip(weight(xi_nodes), 0.0, None)
        ratio_term = alpha * (w_xi / w_nodes) ** (1.0 / alpha)
        violation = tr_plus + ratio_term - u.b_E
    else:
        violation = tr_plus - u.b_E
    sup_violation = float(violation[interior].max()) if interior.any() else -math.inf
    sup_violation_band = float(violation[near_boundary].max()) if near_boundary.any() \
        else -math.inf

    # L1 Hessian defect over E by mesh quadrature; envelope data interpolated
    mids = mesh.edge_midpoints().reshape(-1, 2)
    areas3 = np.repeat(mesh.areas() / 3.0, 3)
    H_mid = field.interp_hessian(hess, mids)
    dev = H_mid - np.eye(2)[None, :, :]
    frob = np.sqrt(np.einsum("ijk,ijk->i", dev, dev))
    if weighted:
        w_mid = weight(mids)
    else:
        w_mid = np.ones(len(mids))
    hessian_l1 = float(np.sum(areas3 * w_mid * frob))

    boundary_term = 0.0
    if weighted:
        pa = mesh.vertices[mesh.free_edges[:, 0]]
        pb = mesh.vertices[mesh.free_edges[:, 1]]
        lengths = np.linalg.norm(pb - pa, axis=1)
        t_lo = 0.5 - 0.5 / math.sqrt(3.0)
        gauss = np.vstack([pa + t_lo * (pb - pa), pa + (1.0 - t_lo) * (pb - pa)])
        _phi_g, xi_g, _idx_g = conj.envelope_at(gauss)
        w_g = weight(gauss)
        boundary_term = float(np.sum(
            0.5 * np.tile(lengths, 2) * w_g * (1.0 - np.linalg.norm(xi_g, axis=1))))

    cloud = np.unique(xi_nodes[in_E], axis=0)
    tree = cKDTree(cloud)
    d, _ = tree.query(body.samples)
    grad_range_hausdorff = float(d.max())

    dxi_x = np.linalg.norm(np.diff(field.xi, axis=1), axis=2) / field.h
    dxi_y = np.linalg.norm(np.diff(field.xi, axis=0), axis=2) / field.h
    lip = float(max(dxi_x.max(), dxi_y.max()))

    return CouplingReport(
        mode="weighted" if weighted else "anisotropic",
        star=star, weight=weight, body=body, mesh=mesh, u=u, field=field,
        hessians=hess, delta=float(delta), b_E=u.b_E,
        sup_violation=sup_violation, sup_violation_band=sup_violation_band,
        hessian_l1=hessian_l1, boundary_term=boundary_term,
        grad_range_hausdorff=grad_range_hausdorff, lip_grad=lip,
        convexity_violation=field.convexity_violation(),
        slope_spacing=body.spacing, resolutions=res, reference_volume=ref_volume,
    )


def weight_shift_term(report: CouplingReport, Q) -> float:
    """integral over E cap Q of |w(grad phi)^(1/a) - w^(1/a)| (Lebesgue measure)."""
    if report.mode != "weighted":
        raise ValueError("the weight-shift term exists only in weighted mode")
    weight = report.weight
    (x0, x1), (y0, y1) = Q
    corners = np.array([[x0, y0], [x0, y1], [x1, y0], [x1, y1]])
    if float(np.min(weight.cone.boundary_distance(corners))) <= 0:
        raise ValueError("Q must be compactly inside the cone")
    mesh = report.mesh
    mids = mesh.edge_midpoints().reshape(-1, 2)
    areas3 = np.repeat(mesh.areas() / 3.0, 3)
    inside = ((mids[:, 0] >= x0) & (mids[:, 0] <= x1)
              & (mids[:, 1] >= y0) & (mids[:, 1] <= y1))
    if not inside.any():
        return 0.0
    xi_m = report.field.interp_xi(mids[inside])
    inv_a = 1.0 / weight.alpha
    vals = np.abs(np.clip(weight(xi_m), 0.0, None) ** inv_a
                  - weight(mids[inside]) ** inv_a)
    return float(np.sum(areas3[inside] * vals))


def verify_coupling_estimates(report: CouplingReport, Q=None) -> dict:
    """Deficit-normalized ratios of the measured coupling quantities.

    Weighted mode returns {hessian_ratio, boundary_ratio, weight_ratio};
    anisotropic mode reports the Hessian defect against the datum scale.
    Raises MinimizerDegenerateError when the deficit is below 1e-10.
    """
    if report.mode != "weighted":
        return {"hessian_l1": report.hessian_l1, "b_E": report.b_E}
    if report.delta <= 1e-10:
        raise MinimizerDegenerateError("deficit below threshold: ratios undefined")
    if Q is None:
        raise ValueError("weighted ratios need the compact box Q")
    sqrt_d = math.sqrt(report.delta)
    return {
        "hessian_ratio": report.hessian_l1 / sqrt_d,
        "boundary_ratio": report.boundary_term / report.delta,
        "weight_ratio": weight_shift_term(report, Q) / sqrt_d,
    }


@dataclasses.dataclass
class ChainRecord:
    """Numbers along the area-formula/AM-GM chain and their link violations."""

    image_volume: float
    jacobian_integral: float
    amgm_integral: float
    terminal: float
    tol_chain: float
    link_violations: tuple
    amgm_field_violation: float
    n_precondition_failures: int

    @property
    def ordered(self) -> bool:
        return all(v <= self.tol_chain for v in self.link_violations)

    def values(self):
        return (self.image_volume, self.jacobian_integral, self.amgm_integral,
                self.terminal)


def abp_chain_check(report: CouplingReport, chain_constant: float = 4.0) -> ChainRecord:
    """Evaluate each link of the chain on the band-interior part of E.

    The gradient-image measure is the weighted area of the convex hull of
    the achieved slopes (the image of a valid coupling is the convex body
    K up to negligible sets, so the hull is a faithful surrogate).  The
    link tolerance is chain_constant * (mesh_h + slope spacing) relative
    to the terminal value.
    """
    if report.mode != "weighted":
        raise ValueError("the chain check applies to weighted mode")
    weight = report.weight
    alpha = weight.alpha
    D = weight.D
    res = report.resolutions
    mesh = report.mesh

    mids = mesh.edge_midpoints().reshape(-1, 2)
    areas3 = np.repeat(mesh.areas() / 3.0, 3)
    band_ok = weight.cone.boundary_distance(mids) > res.band
    mids_b = mids[band_ok]
    areas_b = areas3[band_ok]

    H_mid = report.field.interp_hessian(report.hessians, mids_b)
    lam1, lam2 = _positive_part_eigen(H_mid)
    xi_m = report.field.interp_xi(mids_b)
    w_m = np.clip(weight(mids_b), 1e-300, None)
    w_xi = np.clip(weight(xi_m), 0.0, None)
    t_term = (w_xi / w_m) ** (1.0 / alpha)

    jacobian_integral = float(np.sum(areas_b * lam1 * lam2 * w_xi))
    amgm_integrand = ((lam1 + lam2 + alpha * t_term) / D) ** D * w_m
    amgm_integral = float(np.sum(areas_b * amgm_integrand))
    terminal = (1.0 + max(report.delta, 0.0)) ** D * report.reference_volume

    nodes = report.field.grid_points()
    in_E = report.star.contains(nodes)
    band_nodes = weight.cone.boundary_distance(nodes) > res.band
    cloud = np.unique(report.field.xi.reshape(-1, 2)[in_E & band_nodes], axis=0)
    try:
        hull = ConvexHull(cloud)
        image_volume = _poly_weighted_measure(cloud[hull.vertices], weight)
    except (QhullError, IndexError):
        image_volume = 0.0

    # fieldwise quantitative AM-GM audit where the pointwise bound holds
    lam_vec = np.array([1.0, 1.0, alpha])
    s = float(lam_vec.sum())
    c = report.b_E / D
    x_stack = np.stack([lam1, lam2, t_term], axis=1)
    pre_ok = (x_stack @ lam_vec) <= c * s * (1.0 + 1e-12)
    n_pre_fail = int(np.sum(~pre_ok))
    xs = x_stack[pre_ok]
    lhs_f = ((xs - c) ** 2 @ lam_vec)
    geo = np.prod(xs ** lam_vec[None, :], axis=1)
    rhs_f = (8.0 / 3.0) * c ** (2.0 - s) * s ** 3 / float(lam_vec.min()) ** 2 \
        * (c ** s - geo)
    amgm_violation = float(np.max(lhs_f - rhs_f)) if len(xs) else 0.0

    tol = chain_constant * (res.mesh_h + report.slope_spacing) * terminal
    violations = (
        max(0.0, image_volume - jacobian_integral),
        max(0.0, jacobian_integral - amgm_integral),
        max(0.0, amgm_integral - terminal),
    )
    return ChainRecord(image_volume, jacobian_integral, amgm_integral, terminal,
                       tol, violations, amgm_violation, n_pre_fail)
