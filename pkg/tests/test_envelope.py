"""Slope bodies, restricted conjugates, envelopes, contact sets."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isocone.cone_weight import Cone
from isocone.envelope import (
    SlopeBody,
    check_c11,
    contact_data,
    k_envelope,
    restricted_conjugate,
    support_function,
)

DISK = SlopeBody.disk(1.0, 128, 256)
SQUARE = SlopeBody.polygon([(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)])


def quad_cloud(radius=2.0, n_ang=180, n_rad=81):
    th = np.linspace(0.0, 2.0 * math.pi, n_ang, endpoint=False)
    rr = np.linspace(0.0, radius, n_rad)[1:]
    pts = (rr[:, None, None] * np.stack([np.cos(th), np.sin(th)], -1)[None]).reshape(-1, 2)
    return np.vstack([[[0.0, 0.0]], pts])


class TestSupportFunction:
    def test_disk(self):
        assert support_function(DISK, (3.0, 4.0)) == pytest.approx(5.0)

    def test_square_is_l1_norm(self):
        assert support_function(SQUARE, (3.0, 4.0)) == pytest.approx(7.0)

    def test_segment(self):
        seg = SlopeBody.polygon([(0.0, 0.0), (1.0, 0.0)])
        assert support_function(seg, (-2.0, 5.0)) == pytest.approx(0.0)

    def test_sector_disk_matches_vertex_enumeration_oracle(self):
        body = SlopeBody.sector_disk(Cone.quadrant(), 1.0, 64, 129)
        rng = np.random.default_rng(5)
        vs = rng.normal(size=(200, 2))
        got = body.support(vs)
        oracle = np.max(vs @ body.samples.T, axis=1)  # dense max over samples
        assert np.all(got >= oracle - 1e-12)
        assert np.max(got - oracle) <= 1e-4  # sample-hull gap

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 5.0))
    def test_homogeneity_and_subadditivity(self, vx, vy, t):
        v = np.array([vx, vy])
        w = np.array([0.7, -1.3])
        for body in (DISK, SQUARE):
            assert body.support(t * v) == pytest.approx(t * body.support(v), rel=1e-12, abs=1e-12)
            assert body.support(v + w) <= body.support(v) + body.support(w) + 1e-12

    def test_polygon_ccw_required(self):
        with pytest.raises(ValueError):
            SlopeBody.polygon([(0, 0), (0, 1), (1, 0)])  # clockwise

    def test_hull_gap_scales(self):
        assert SQUARE.hull_gap() == 0.0
        fine = SlopeBody.sector_disk(Cone.quadrant(), 1.0, 64, 4097)
        coarse = SlopeBody.sector_disk(Cone.quadrant(), 1.0, 64, 65)
        assert fine.hull_gap() < coarse.hull_gap()
        assert fine.hull_gap() <= 2e-8


class TestRestrictedConjugate:
    def test_single_point(self):
        conj = restricted_conjugate([[0.0, 0.0]], [0.0], DISK)
        assert np.allclose(conj.intercepts, 0.0)

    def test_linear_function(self):
        pts = quad_cloud()
        xi0 = np.array([0.4, 0.2])
        conj = restricted_conjugate(pts, pts @ xi0, DISK)
        # at xi = xi0 the best intercept is 0
        i_near = np.argmin(np.linalg.norm(DISK.samples - xi0, axis=1))
        assert conj.intercepts[i_near] == pytest.approx(0.0, abs=2e-2)

    def test_quadratic_conjugate(self):
        pts = quad_cloud()
        vals = 0.5 * np.einsum("ij,ij->i", pts, pts)
        conj = restricted_conjugate(pts, vals, DISK)
        r = np.linalg.norm(DISK.samples, axis=1)
        assert np.max(np.abs(conj.intercepts + 0.5 * r ** 2)) <= 1e-3

    def test_intercepts_concave_along_rays(self):
        pts = quad_cloud()
        vals = pts[:, 0] ** 4 + pts[:, 1] ** 2
        body = SlopeBody.sector_disk(Cone.plane(), 1.0, 64, 32)
        conj = restricted_conjugate(pts, vals, body)
        A = conj.intercepts[1:].reshape(63, 32)
        mid = A[1:-1]
        assert np.all(A[:-2] + A[2:] <= 2.0 * mid + 1e-10)

    def test_structured_matches_dense(self):
        pts = quad_cloud(n_ang=60, n_rad=21)
        vals = 0.5 * np.einsum("ij,ij->i", pts, pts) + 0.3 * pts[:, 0]
        body = SlopeBody.sector_disk(Cone.quadrant(), 1.0, 48, 33)
        conj = restricted_conjugate(pts, vals, body)
        from isocone.envelope import _dense_conjugate
        dense_a, _ = _dense_conjugate(pts, vals, body.samples)
        assert np.max(np.abs(conj.intercepts - dense_a)) <= 1e-12

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            restricted_conjugate(np.zeros((0, 2)), np.zeros(0), DISK)


class TestKEnvelope:
    def test_quadratic_saturation(self):
        pts = quad_cloud()
        vals = 0.5 * np.einsum("ij,ij->i", pts, pts)
        conj = restricted_conjugate(pts, vals, DISK)
        phi, xi, _ = conj.envelope_at(np.array([[2.0, 0.0], [0.5, 0.0]]))
        assert phi[0] == pytest.approx(1.5, abs=2e-3)
        assert phi[1] == pytest.approx(0.125, abs=2e-3)

    def test_structured_argmax_matches_dense_on_grid(self):
        pts = quad_cloud(n_ang=90, n_rad=31)
        vals = 0.5 * np.einsum("ij,ij->i", pts, pts)
        body = SlopeBody.sector_disk(Cone.quadrant(), 1.0, 64, 65)
        conj = restricted_conjugate(pts, vals, body)
        probe = np.array([[0.3, 0.4], [1.5, 0.2], [0.05, 0.9], [-0.5, -0.5]])
        phi_s, xi_s, _ = conj.envelope_at(probe)
        dense = probe @ body.samples.T + conj.intercepts[None, :]
        assert np.allclose(phi_s, dense.max(axis=1), atol=1e-12)

    def test_linear_function_recovered(self):
        pts = quad_cloud()
        xi0 = np.array([0.4, 0.2])
        vals = pts @ xi0
        conj = restricted_conjugate(pts, vals, DISK)
        field = k_envelope(conj, ((-1.0, 1.0), (-1.0, 1.0)), 0.1)
        # probe strictly inside the sample hull: at its boundary the argmax
        # ties along a ray of slopes and any of them is a valid maximizer
        probe = pts[np.hypot(pts[:, 0], pts[:, 1]) < 1.9][::37]
        probe_vals, xi, _ = conj.envelope_at(probe)
        assert np.max(np.abs(probe_vals - probe @ xi0)) <= 2e-2
        assert np.max(np.linalg.norm(xi - xi0, axis=1)) <= 2e-2
        assert field.convexity_violation() <= 1e-12

    def test_double_well_flat_bottom(self):
        seg = SlopeBody.polygon([(-1.0, 0.0), (1.0, 0.0)], n_samples=800)
        xs = np.linspace(-2.0, 2.0, 1601)
        pts = np.column_stack([xs, np.zeros_like(xs)])
        vals = xs ** 4 - xs ** 2
        conj = restricted_conjugate(pts, vals, seg)
        phi0, _, _ = conj.envelope_at(np.array([[0.0, 0.0]]))
        assert phi0[0] == pytest.approx(-0.25, abs=1e-5)

    def test_phi_below_samples(self):
        pts = quad_cloud()
        vals = np.abs(pts[:, 0]) + 0.5 * pts[:, 1] ** 2
        conj = restricted_conjugate(pts, vals, DISK)
        phi, _, _ = conj.envelope_at(pts)
        assert np.all(phi <= vals + 1e-12)

    def test_slopes_live_in_body(self):
        pts = quad_cloud()
        vals = 0.5 * np.einsum("ij,ij->i", pts, pts)
        conj = restricted_conjugate(pts, vals, DISK)
        field = k_envelope(conj, ((-1.5, 1.5), (-1.5, 1.5)), 0.05)
        flat = field.xi.reshape(-1, 2)
        assert bool(np.all(DISK.contains(flat)))

    def test_monotone_in_body_with_nested_grids(self):
        pts = quad_cloud()
        vals = 0.5 * np.einsum("ij,ij->i", pts, pts)
        small = SlopeBody.disk(0.5, 65, 64)
        large = SlopeBody.disk(1.0, 129, 64)  # radial grid contains the small one
        phi_small, _, _ = restricted_conjugate(pts, vals, small).envelope_at(pts[::29])
        phi_large, _, _ = restricted_conjugate(pts, vals, large).envelope_at(pts[::29])
        assert np.all(phi_small <= phi_large + 1e-12)

    def test_recovery_of_convex_quadratics(self):
        pts = quad_cloud()
        A = np.array([[0.8, 0.2], [0.2, 0.6]])
        vals = 0.5 * np.einsum("ij,jk,ik->i", pts, A, pts)
        body = SlopeBody.disk(2.0, 256, 256)
        conj = restricted_conjugate(pts, vals, body)
        phi, _, _ = conj.envelope_at(pts)
        h_pts = 2.0 / 80
        assert np.max(np.abs(phi - vals)) <= 2.0 * (h_pts + body.spacing)


class TestContactData:
    @staticmethod
    def grid_samples():
        xs = np.linspace(-1.5, 1.5, 61)
        gx, gy = np.meshgrid(xs, xs)
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        vals = 0.5 * np.einsum("ij,ij->i", pts, pts)
        hess = np.tile(np.eye(2), (len(pts), 1, 1))
        return pts, vals, hess

    def test_interior_slope(self):
        pts, vals, hess = self.grid_samples()
        cd = contact_data(pts, vals, DISK, (0.3, 0.4), x=(0.3, 0.4), hessians=hess)
        assert len(cd.contact_points) == 1
        assert np.linalg.norm(cd.contact_points[0] - [0.3, 0.4]) <= 0.05
        assert len(cd.normal_generators) == 0  # interior: N = {0}
        assert np.allclose(cd.witness.hessian, np.eye(2))

    def test_boundary_slope_with_normal_ray(self):
        pts, vals, hess = self.grid_samples()
        cd = contact_data(pts, vals, DISK, (1.0, 0.0), x=(2.0, 0.0), hessians=hess)
        assert np.allclose(cd.contact_points[0], [1.0, 0.0], atol=0.05)
        assert np.allclose(cd.normal_generators, [[1.0, 0.0]])
        assert cd.witness.feasible
        assert np.allclose(cd.witness.normal_part, [1.0, 0.0], atol=0.05)
        assert cd.witness.lambdas[0] == pytest.approx(1.0)

    def test_double_well_symmetric_pair(self):
        seg = SlopeBody.polygon([(-1.0, 0.0), (1.0, 0.0)], n_samples=800)
        xs = np.linspace(-2.0, 2.0, 1601)
        pts = np.column_stack([xs, np.zeros_like(xs)])
        vals = xs ** 4 - xs ** 2
        hess = np.zeros((len(pts), 2, 2))
        hess[:, 0, 0] = 12 * xs ** 2 - 2.0
        cd = contact_data(pts, vals, seg, (0.0, 0.0), x=(0.0, 0.0), hessians=hess,
                          tol_contact=1e-9)
        touched = np.sort(cd.contact_points[:, 0])
        assert touched[0] == pytest.approx(-1.0 / math.sqrt(2.0), abs=2e-3)
        assert touched[-1] == pytest.approx(1.0 / math.sqrt(2.0), abs=2e-3)
        assert cd.witness.feasible
        assert np.allclose(np.sort(cd.witness.lambdas), [0.5, 0.5], atol=1e-6)

    def test_hypothesis_failure_reported_not_raised(self):
        # linear u: for slopes other than xi0 the contact sits on the far
        # boundary of the sample cloud and no witness reproduces interior x
        pts, _, hess = self.grid_samples()
        vals = pts @ np.array([0.4, 0.0])
        cd = contact_data(pts, vals, DISK, (0.0, 0.5), x=(0.0, 0.0), hessians=hess)
        assert cd.witness is not None
        assert not cd.witness.feasible

    def test_slope_outside_body_rejected(self):
        pts, vals, _ = self.grid_samples()
        with pytest.raises(ValueError):
            contact_data(pts, vals, DISK, (2.0, 0.0))


class TestCheckC11:
    def test_quadratic_lipschitz_bound(self):
        # analytic envelope has Lipschitz gradient constant 1; a fine slope
        # grid keeps the discrete quotient within the 1 + 5h budget
        pts = quad_cloud(radius=2.0, n_ang=240, n_rad=101)
        vals = 0.5 * np.einsum("ij,ij->i", pts, pts)
        body = SlopeBody.disk(1.0, 512, 2048)
        conj = restricted_conjugate(pts, vals, body)
        h = 0.1
        field = k_envelope(conj, ((-1.8, 1.8), (-1.8, 1.8)), h)
        rep = check_c11(field)
        assert rep.lip_grad <= 1.0 + 5.0 * h
        assert rep.range_hausdorff <= 2.0 * max(body.spacing, h)
        assert rep.convexity_violation <= 1e-12

    def test_linear_degenerate_range_flagged(self):
        pts = quad_cloud()
        vals = pts @ np.array([0.3, 0.1])
        conj = restricted_conjugate(pts, vals, DISK)
        field = k_envelope(conj, ((-1.0, 1.0), (-1.0, 1.0)), 0.1)
        rep = check_c11(field)
        assert rep.n_distinct_slopes <= 4
        # single-point gradient range: distance to the far side of the disk
        assert rep.range_hausdorff >= 0.5

    def test_field_dump_columns(self, tmp_path):
        pts = quad_cloud(n_ang=40, n_rad=11)
        vals = 0.5 * np.einsum("ij,ij->i", pts, pts)
        conj = restricted_conjugate(pts, vals, SlopeBody.disk(1.0, 16, 16))
        field = k_envelope(conj, ((-0.5, 0.5), (-0.5, 0.5)), 0.25)
        out = tmp_path / "field.csv"
        field.dump_csv(out)
        header = out.read_text().splitlines()[0]
        assert header == "x,y,phi,xi1,xi2"
