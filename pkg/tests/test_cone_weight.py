"""Cones, homogeneous weights, and the concave 1-homogeneous calculus."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isocone.cone_weight import (
    Cone,
    ConcaveHomFn,
    DegeneratePointError,
    HomWeight,
    InadmissibleWeightError,
    NotCompactlyContainedError,
    OutsideConeError,
    check_concavity_condition,
    decompose_subspaces,
    spherical_concavity_check,
    unit,
    weight_eval_grad,
    zero_trace_extension,
)

QUADRANT = Cone.quadrant()
HALF = Cone.half_plane()
W_XY = HomWeight.monomial(QUADRANT, 1, 1)
W_X = HomWeight.monomial(QUADRANT, 1, 0)
W_Y_HALF = HomWeight.monomial(HALF, 0, 1)


class TestCone:
    def test_opening_bounds(self):
        with pytest.raises(ValueError):
            Cone(0.0, 4.0)
        with pytest.raises(ValueError):
            Cone(1.0, 1.0)

    def test_line_count(self):
        assert QUADRANT.k == 0
        assert HALF.k == 1
        assert Cone.sector(1e-3).k == 0

    def test_half_plane_line_direction(self):
        (d,) = HALF.basis_L()
        assert np.allclose(d, [1.0, 0.0])

    def test_membership(self):
        pts = np.array([[1.0, 1.0], [1.0, 0.0], [-0.1, 1.0], [0.0, 0.0]])
        assert QUADRANT.contains(pts).tolist() == [True, True, False, True]

    def test_boundary_distance_inside(self):
        assert QUADRANT.boundary_distance(np.array([[0.3, 0.5]]))[0] == pytest.approx(0.3)


class TestHomWeight:
    def test_homogeneity_sampled(self):
        rng = np.random.default_rng(3)
        thetas = rng.uniform(0.05, math.pi / 2 - 0.05, 100)
        pts = rng.uniform(0.3, 2.0, 100)[:, None] * unit(thetas)
        base = W_XY(pts)
        for t in (0.5, 2.0, 7.0):
            assert np.max(np.abs(W_XY(t * pts) - t ** 2 * base)) <= 1e-12 * np.max(np.abs(base)) * t ** 2

    def test_monomial_values(self):
        val, grad = weight_eval_grad(W_XY, (2.0, 3.0))
        assert val == pytest.approx(6.0)
        assert np.allclose(grad, [3.0, 2.0])

    def test_boundary_zero_gradient(self):
        val, grad = weight_eval_grad(W_X, (0.0, 1.0))
        assert val == 0.0
        assert np.allclose(grad, [1.0, 0.0])

    def test_scaling_value(self):
        val, _ = weight_eval_grad(W_XY, (1.0, 1.5))
        assert val == pytest.approx(0.25 * 6.0)

    def test_outside_cone_rejected(self):
        with pytest.raises(OutsideConeError):
            weight_eval_grad(W_XY, (-0.5, 1.0))

    def test_euler_relation_random(self):
        rng = np.random.default_rng(7)
        for weight in (W_XY, W_X, W_Y_HALF):
            lo, hi = weight.cone.angle_lo, weight.cone.angle_hi
            thetas = rng.uniform(lo + 0.02, hi - 0.02, 100)
            pts = rng.uniform(0.2, 3.0, 100)[:, None] * unit(thetas)
            vals = weight(pts)
            grads = weight.grad(pts)
            euler = np.einsum("ij,ij->i", grads, pts)
            assert np.max(np.abs(euler - weight.alpha * vals)) <= 1e-9 * max(1.0, vals.max())

    def test_profile_weight_matches_monomial(self):
        thetas = QUADRANT.arc_grid(2048)
        prof = HomWeight.from_profile(QUADRANT, thetas, W_XY.arc_values(thetas), alpha=2.0)
        pts = np.array([[0.3, 0.7], [1.2, 0.4]])
        assert np.allclose(prof(pts), W_XY(pts), rtol=1e-6)
        euler = np.einsum("ij,ij->i", prof.grad(pts), pts)
        assert np.allclose(euler, 2.0 * prof(pts), rtol=1e-9)

    def test_inadmissible_rejected(self):
        thetas = QUADRANT.arc_grid(512)
        # (cos^2 + sin^2) = 1 profile with alpha=2: sqrt(w) = r, fine; make it wavy
        values = 1.0 + 0.5 * np.cos(8 * thetas)
        with pytest.raises(InadmissibleWeightError):
            HomWeight.from_profile(QUADRANT, thetas, values, alpha=2.0)

    def test_negative_exponents_rejected(self):
        with pytest.raises(InadmissibleWeightError):
            HomWeight.monomial(QUADRANT, -1, 2)

    def test_c_star_reference(self):
        # c* = D * w(B1)^(1/D); quadrant xy has w(B1) = 1/8, D = 4
        assert W_XY.c_star == pytest.approx(4.0 * 0.125 ** 0.25, rel=1e-6)


class TestConcavityCondition:
    def test_equality_at_same_point(self):
        assert check_concavity_condition(W_XY, (1.0, 1.0), (1.0, 1.0)) == pytest.approx(0.0, abs=1e-12)

    def test_strict_slack(self):
        res = check_concavity_condition(W_XY, (1.0, 1.0), (2.0, 0.5))
        assert res == pytest.approx(0.5)

    def test_rejects_nonconcave_root(self):
        thetas = QUADRANT.arc_grid(1024)
        sphere = HomWeight.from_profile(QUADRANT, thetas, np.ones_like(thetas),
                                        alpha=2.0, validate=False)  # w = x^2 + y^2
        res = check_concavity_condition(sphere, (1.0, 0.01), (0.01, 1.0))
        assert res < -1.0

    def test_degenerate_point(self):
        with pytest.raises(DegeneratePointError):
            check_concavity_condition(W_X, (0.0, 1.0), (1.0, 1.0))

    def test_residual_nonnegative_random_pairs(self):
        rng = np.random.default_rng(11)
        for weight in (W_XY, HomWeight.monomial(QUADRANT, 0.5, 1.5)):
            thetas = rng.uniform(0.02, math.pi / 2 - 0.02, (10_000, 2))
            radii = rng.uniform(0.2, 3.0, (10_000, 2))
            worst = 0.0
            x = radii[:, 0, None] * unit(thetas[:, 0])
            z = radii[:, 1, None] * unit(thetas[:, 1])
            wx = weight(x)
            lhs = weight.alpha * (weight(z) / wx) ** (1.0 / weight.alpha)
            rhs = np.einsum("ij,ij->i", weight.grad(x), z) / wx
            worst = float(np.min(rhs - lhs))
            assert worst >= -1e-12


class TestDecomposeSubspaces:
    def test_quadrant_xy(self):
        b = decompose_subspaces(QUADRANT, W_XY)
        assert b.basis_L == () and b.basis_C == ()
        assert len(b.basis_E) == 2

    def test_quadrant_x(self):
        b = decompose_subspaces(QUADRANT, W_X)
        assert b.basis_L == ()
        assert len(b.basis_C) == 1 and np.allclose(b.basis_C[0], [0.0, 1.0])
        assert len(b.basis_E) == 1 and np.allclose(np.abs(b.basis_E[0]), [1.0, 0.0])

    def test_half_plane_y(self):
        b = decompose_subspaces(HALF, W_Y_HALF)
        assert len(b.basis_L) == 1 and np.allclose(b.basis_L[0], [1.0, 0.0])
        assert b.basis_C == ()
        assert len(b.basis_E) == 1 and np.allclose(np.abs(b.basis_E[0]), [0.0, 1.0])

    def test_orthonormal_span(self):
        for cone, weight in ((QUADRANT, W_XY), (QUADRANT, W_X), (HALF, W_Y_HALF)):
            b = decompose_subspaces(cone, weight)
            vecs = list(b.basis_L) + list(b.basis_C) + list(b.basis_E)
            M = np.array(vecs)
            assert M.shape == (2, 2)
            assert np.allclose(M @ M.T, np.eye(2), atol=1e-12)


class TestZeroTraceExtension:
    INNER = Cone(0.15, math.pi / 2 - 0.15)

    def test_zero_stays_zero(self):
        v = ConcaveHomFn(QUADRANT, QUADRANT.arc_grid(256), np.zeros(256))
        ext = zero_trace_extension(v, self.INNER)
        assert np.max(np.abs(ext.values)) == 0.0

    def test_linear_is_pulled_to_zero_on_boundary(self):
        th = QUADRANT.arc_grid(256)
        v = ConcaveHomFn(QUADRANT, th, np.cos(th - math.pi / 4))
        ext = zero_trace_extension(v, self.INNER)
        assert abs(ext.values[0]) <= 1e-12
        assert abs(ext.values[-1]) <= 1e-12
        assert ext.values[2] < v.values[2]  # strictly below near the boundary
        mask = (th >= self.INNER.angle_lo) & (th <= self.INNER.angle_hi)
        # brute-force oracle: a denser supporting-slope family can only agree
        dense = zero_trace_extension(v, self.INNER, n_directions=8192)
        assert np.max(np.abs(ext.values - dense.values)) <= 2e-3
        assert np.all(ext.values[mask] >= v.values[mask] - 1e-12)
        assert np.max(np.abs(ext.values - v.values)[mask]) <= 3e-3

    def test_already_zero_trace_is_fixed_on_inner_cone(self):
        # For concave v vanishing on the rays the extension reproduces v on the
        # inner arc and never exceeds it (the minimal concave extension may dip
        # below a strictly concave profile between the inner arc and the rays).
        th = QUADRANT.arc_grid(256)
        v = ConcaveHomFn(QUADRANT, th, W_XY.arc_values(th) ** 0.5)  # zero on both rays
        ext = zero_trace_extension(v, self.INNER, n_directions=4096)
        mask = (th >= self.INNER.angle_lo) & (th <= self.INNER.angle_hi)
        assert np.max(np.abs(ext.values - v.values)[mask]) <= 2e-3
        assert np.all(ext.values <= v.values + 1e-9)
        assert abs(ext.values[0]) <= 1e-12 and abs(ext.values[-1]) <= 1e-12

    def test_not_compactly_contained(self):
        v = ConcaveHomFn(QUADRANT, QUADRANT.arc_grid(64), np.zeros(64))
        with pytest.raises(NotCompactlyContainedError):
            zero_trace_extension(v, Cone(0.0, 1.0))


class TestSphericalConcavity:
    def test_linear_restriction_zero(self):
        th = QUADRANT.arc_grid(64)
        v = ConcaveHomFn(QUADRANT, th, 1.3 * np.cos(th - 0.4))
        assert abs(spherical_concavity_check(v, 5000)) <= 1e-12

    def test_root_of_admissible_weight(self):
        v = W_XY.root_profile(256)
        assert spherical_concavity_check(v, 20000) <= 1e-9

    def test_oscillatory_profile_flagged(self):
        th = QUADRANT.arc_grid(128)
        v = ConcaveHomFn(QUADRANT, th, 1.0 + 0.5 * np.cos(8 * th))
        assert spherical_concavity_check(v, 20000) > 1e-3

    def test_resolution_precondition(self):
        v = ConcaveHomFn(QUADRANT, QUADRANT.arc_grid(8), np.ones(8))
        with pytest.raises(ValueError):
            spherical_concavity_check(v)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.tuples(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0)),
                    min_size=2, max_size=5))
    def test_min_closure(self, slopes):
        # min of linear restrictions stays concave on the arc
        th = QUADRANT.arc_grid(96)
        vals = [a * np.cos(th) + b * np.sin(th) for a, b in slopes]
        v = ConcaveHomFn(QUADRANT, th, np.min(vals, axis=0))
        assert spherical_concavity_check(v, 4000) <= 1e-10

    def test_rotation_closure(self):
        v = W_XY.root_profile(128)
        assert spherical_concavity_check(v.rotated(0.7), 5000) <= 1e-9

    def test_min_with_linear_restriction(self):
        v = W_XY.root_profile(128)
        linear = ConcaveHomFn(v.cone, v.thetas, 0.45 * np.cos(v.thetas - 0.9))
        vmin = v.minimum_with(linear)
        assert spherical_concavity_check(vmin, 5000) <= 1e-9
