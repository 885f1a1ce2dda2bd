"""Pinned empirical regression values.

Every number here is an EMPIRICAL pilot constant measured by this package
at the default resolutions, frozen so later runs can detect drift.  None of
them is ground truth from theory; theory only asserts that the matching
quantities are finite or bounded.  Regenerate by rerunning the pilot
measurements in the test suite if resolutions change.
"""

EXPECTATIONS = {
    # sup of the pointwise coupling violation <= C * (mesh_h + slope_spacing);
    # the exact quarter-ball at default resolutions measures C ~ 15.6, frozen
    # here with a 2.5x safety factor.
    "coupling_sup_violation_C": 40.0,
    # chain link tolerance factor (relative to the terminal chain value)
    "coupling_chain_C": 4.0,
    # max A_w / sqrt(delta_w) over the default 30-member corpus
    # (quadrant, w = x*y, n_theta = 4096)
    "stability_Cmax_quadrant_xy": 2.1919,
    # bounds for the deficit-normalized coupling ratios on the eps-family
    # (quadrant, w = x*y, Q = [0.2, 0.6]^2); measured maxima were
    # 0.242 / 0.024 / 0.026, frozen with ~2x headroom
    "ratio_bounds": {"hessian": 0.5, "boundary": 0.06, "weight": 0.06},
    # empirical uniform constants for the 1-D stability ratio per gamma,
    # maximized over the exhaustive endpoint families of the acceptance suite
    "one_dim_Cgamma": {"0": 2.272727, "1": 4.166667, "2": 12.942884},
    # weight-shift separation slope per unit |xi| at the default diagnostics
    # box, quadrant w = x*y, axis directions
    "separation_eps_emp_quadrant_xy": 0.0115,
    # ball-growth slope for the constancy direction (0,1), quadrant, w = x
    "ball_growth_c1_quadrant_x": 0.4908,
    # translated-ball control ratio bound (pilot; measured ~1.1 on the ball
    # family at n_theta = 8192)
    "translated_ball_ratio_bound": 10.0,
}
