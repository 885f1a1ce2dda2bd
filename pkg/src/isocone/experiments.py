"""Experiment drivers: sharpness and stability sweeps, translation diagnostics.

All drivers are deterministic given (config, seed) and emit rows sorted by
their parameter key; CSV formatting keeps 12 significant digits so repeated
runs are byte-identical.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import math
import os

import numpy as np

from .analysis import ball_volume_growth, shifted_weight_separation
from .cone_weight import Cone, HomWeight, decompose_subspaces
from .geometry import StarSet, asymmetry, deficit


class FitRejectedError(ValueError):
    """Too few sweep points for a meaningful least-squares exponent fit."""


@dataclasses.dataclass
class SweepResult:
    columns: tuple
    rows: list
    manifest: dict

    def column(self, name):
        j = self.columns.index(name)
        return np.array([row[j] for row in self.rows], dtype=float)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, float) and math.isnan(v):
        return ""
    return f"{v:.12g}"


def _n_workers() -> int:
    raw = os.environ.get("ISOCONE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _evaluate_members(members, fn):
    workers = _n_workers()
    if workers == 1:
        results = [fn(m) for m in members]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, members))
    return results


def eta_fourier_cos(cone: Cone, mode: int):
    """Angular profile cos(m * (theta - angle_lo)) used for perturbed balls."""
    lo = 0.0 if cone.full_plane else cone.angle_lo

    def eta(thetas):
        return np.cos(mode * (np.asarray(thetas) - lo))

    return eta


def sharpness_sweep(cone: Cone, weight: HomWeight, eta_fn, eps_list,
                    n_theta: int = 4096):
    """Deficit/asymmetry scaling of the perturbed-ball family r = 1 + eps*eta.

    eta is projected to zero weighted mean with the volume quadrature, so
    w(E_eps) and Per_w(E_eps) deviate from the ball only at second order
    while the asymmetry is first order; the fitted slope of log A_w against
    log delta_w is 1/2 for smooth nonvanishing profiles.

    Returns (SweepResult, fitted slope).
    """
    eps_list = sorted(float(e) for e in eps_list)
    if len(eps_list) < 3:
        raise FitRejectedError("need at least 3 epsilon values for the fit")
    if max(eps_list) > 0.25:
        raise ValueError("epsilon must stay at or below 0.25")

    def one(eps):
        star = StarSet.perturbed_ball(cone, weight, n_theta, eps, eta_fn, project=True)
        rep = deficit(star, weight)
        a, _x0 = asymmetry(star, weight)
        ratio = a / math.sqrt(rep.deficit) if rep.deficit > 1e-9 else float("nan")
        return (eps, rep.deficit, a, ratio)

    rows = _evaluate_members(eps_list, one)
    rows.sort(key=lambda r: r[0])
    deltas = np.array([r[1] for r in rows])
    asyms = np.array([r[2] for r in rows])
    if np.any(deltas <= 0) or np.any(asyms <= 0):
        raise FitRejectedError("degenerate sweep values; increase eps or resolution")
    slope = float(np.polyfit(np.log(deltas), np.log(asyms), 1)[0])
    result = SweepResult(
        ("param", "delta_w", "asym", "ratio"), rows,
        {"slope": slope, "n_theta": n_theta, "eps_list": eps_list},
    )
    return result, slope


def default_corpus(cone: Cone, weight: HomWeight, n_theta: int = 4096):
    """Thirty deterministic star sets: perturbed, dilated, and bumped balls."""
    members = []
    for mode in (2, 3, 4, 5, 6):
        for eps in (0.02, 0.05, 0.1, 0.2):
            star = StarSet.perturbed_ball(cone, weight, n_theta, eps,
                                          eta_fourier_cos(cone, mode), project=True)
            members.append((f"fourier_m{mode}_e{eps}", star))
    for r in (0.5, 1.0, 2.0):
        members.append((f"ball_r{r}", StarSet.ball(cone, n_theta, r=r)))
    opening = cone.opening
    lo = cone.angle_lo
    bumps = [(0.25, 0.06, 0.10), (0.50, 0.06, 0.10), (0.75, 0.06, 0.10),
             (0.35, 0.10, 0.15), (0.65, 0.10, 0.15), (0.50, 0.15, 0.05),
             (0.50, 0.04, 0.20)]
    for c, s, amp in bumps:

        def r_fn(thetas, c=c, s=s, amp=amp):
            t_hat = (np.asarray(thetas) - lo) / opening
            return 1.0 + amp * np.exp(-(((t_hat - c) / s) ** 2))

        members.append((f"bump_c{c}_s{s}_a{amp}", StarSet.from_radial(cone, n_theta, r_fn)))
    return members


def stability_sweep(corpus, weight: HomWeight):
    """Max asymmetry-over-root-deficit ratio across a corpus of sets.

    Rows are sorted by label; the ratio column is filled only where the
    deficit exceeds 1e-9.  The manifest records the max ratio and the
    minimizer probe (every member with deficit <= 1e-8 must have asymmetry
    <= 1e-4).
    """
    def one(item):
        label, star = item
        rep = deficit(star, weight)
        a, _x0 = asymmetry(star, weight)
        ratio = a / math.sqrt(rep.deficit) if rep.deficit > 1e-9 else float("nan")
        return (label, rep.deficit, a, ratio)

    rows = _evaluate_members(list(corpus), one)
    rows.sort(key=lambda r: r[0])
    ratios = [r[3] for r in rows if not math.isnan(r[3])]
    probe_ok = all(r[2] <= 1e-4 for r in rows if r[1] <= 1e-8)
    manifest = {
        "max_ratio": max(ratios) if ratios else float("nan"),
        "probe_ok": probe_ok,
        "n_members": len(rows),
    }
    return SweepResult(("param", "delta_w", "asym", "ratio"), rows, manifest)


def translation_diagnostics(cone: Cone, weight: HomWeight, t_list, box=None,
                            growth_h: float = 1e-3, separation_h: float = 2e-3):
    """Ball-growth and weight-shift columns for the constancy/rest directions.

    For each basis direction d of the constancy and remaining subspaces and
    each magnitude t, reports w(B1(t d) cap cone) - w(B1 cap cone) and the
    weight-shift separation over the box.  Constancy directions give exact
    zeros in the separation column; directions near the cone give
    nonnegative, approximately linear growth.
    """
    bases = decompose_subspaces(cone, weight)
    directions = [("C", d) for d in bases.basis_C] + [("E", d) for d in bases.basis_E]
    if box is None:
        # deep enough inside the cone that shifts up to max(t_list) stay
        # admissible (|xi| <= dist(Q, boundary) / 2)
        mid = 0.5 * (cone.angle_lo + cone.angle_hi)
        t_max = max(t_list)
        depth = max(0.35, (2.0 * t_max + 0.13) / math.sin(cone.opening / 2.0))
        center = depth * np.array([math.cos(mid), math.sin(mid)])
        box = ((center[0] - 0.08, center[0] + 0.08), (center[1] - 0.08, center[1] + 0.08))
    rows = []
    fits = {}
    for tag, d in directions:
        name = f"{tag}({d[0]:+.6f},{d[1]:+.6f})"
        growths, seps = [], []
        for t in sorted(t_list):
            g = ball_volume_growth(cone, weight, t * d, h=growth_h) if t > 0 else 0.0
            try:
                sep = shifted_weight_separation(weight, box, t * d, h=separation_h) \
                    if t > 0 else 0.0
            except Exception:
                sep = float("nan")
            rows.append((name, t, g, sep))
            growths.append(g)
            seps.append(sep)
        ts = np.array(sorted(t_list), dtype=float)
        if len(ts) >= 2 and ts[-1] > 0:
            fits[name] = {
                "growth_slope": float(np.polyfit(ts, growths, 1)[0]),
                "separation_slope": float(np.polyfit(ts, seps, 1)[0])
                if not any(math.isnan(s) for s in seps) else float("nan"),
            }
    rows.sort(key=lambda r: (r[0], r[1]))
    return SweepResult(("direction", "t", "growth", "separation"), rows,
                       {"fits": fits, "box": box})
