"""Piecewise-linear finite elements for the Neumann problems seeding the coupling.

Weighted form on a set E inside the cone (outer normal nu):

    div(w grad u) = w * b_E  in E,   w du/dnu = w on dE inside the cone,
                                     w du/dnu = 0 on dE on the cone boundary,

with b_E = Per_w(E)/w(E).  The anisotropic form replaces the weight by 1 and
the boundary datum by the support function of the outer normal.  In both
cases b_E is recomputed from the mesh's own quadrature so the discrete
right-hand side is orthogonal to constants to solver precision; solutions
are gauge-fixed to weighted mean zero.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy import sparse

from .cone_weight import Cone, HomWeight, unit
from .geometry import StarSet


class MeshQualityError(RuntimeError):
    """The requested resolution cannot meet the minimum-angle bound."""


class CompatibilityError(RuntimeError):
    """The assembled right-hand side is not orthogonal to constants."""


class SolverError(RuntimeError):
    """Conjugate gradients failed to reach the requested residual."""


_GAUSS2 = ((0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0)))


@dataclasses.dataclass
class TriMesh:
    """Conforming triangle mesh with tagged boundary edges.

    ``free_edges`` lie on the part of the boundary inside the open cone;
    ``cone_edges`` lie on the cone's boundary rays (empty for full-plane
    sets).  ``rings`` records the structured vertex layout of fan meshes
    (list of vertex-id arrays, innermost first) when available.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    free_edges: np.ndarray
    cone_edges: np.ndarray
    h: float
    cone: Cone | None = None
    rings: list | None = None

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edge_midpoints(self) -> np.ndarray:
        """(T, 3, 2) midpoints of the edges opposite each local vertex."""
        p = self.vertices[self.triangles]
        return 0.5 * np.stack([p[:, 1] + p[:, 2], p[:, 0] + p[:, 2], p[:, 0] + p[:, 1]],
                              axis=1)

    def min_angle_deg(self) -> float:
        p = self.vertices[self.triangles]
        angles = []
        for i in range(3):
            a = p[:, (i + 1) % 3] - p[:, i]
            b = p[:, (i + 2) % 3] - p[:, i]
            na = np.linalg.norm(a, axis=1)
            nb = np.linalg.norm(b, axis=1)
            cosang = np.clip(np.einsum("ij,ij->i", a, b) / (na * nb), -1.0, 1.0)
            angles.append(np.degrees(np.arccos(cosang)))
        return float(np.min(angles))

    def max_diameter(self) -> float:
        p = self.vertices[self.triangles]
        e = [np.linalg.norm(p[:, (i + 1) % 3] - p[:, i], axis=1) for i in range(3)]
        return float(np.max(e))

    def boundary_outward_normals(self, edges: np.ndarray) -> np.ndarray:
        """Unit outward normals for the given boundary edges."""
        edge_map = {}
        for t, tri in enumerate(self.triangles):
            for i in range(3):
                key = tuple(sorted((int(tri[i]), int(tri[(i + 1) % 3]))))
                edge_map.setdefault(key, []).append(t)
        normals = np.empty((len(edges), 2))
        for i, (a, b) in enumerate(edges):
            pa, pb = self.vertices[a], self.vertices[b]
            t = pb - pa
            n = np.array([t[1], -t[0]])
            n /= np.linalg.norm(n)
            tri = self.triangles[edge_map[tuple(sorted((int(a), int(b))))][0]]
            third = [v for v in tri if v not in (a, b)][0]
            if (self.vertices[third] - 0.5 * (pa + pb)) @ n > 0:
                n = -n
            normals[i] = n
        return normals

    def dump_csv(self, directory, values=None, prefix: str = "mesh") -> None:
        import os

        np.savetxt(os.path.join(directory, f"{prefix}_vertices.csv"), self.vertices,
                   delimiter=",", header="x,y", comments="", fmt="%.12g")
        np.savetxt(os.path.join(directory, f"{prefix}_triangles.csv"), self.triangles,
                   delimiter=",", header="v0,v1,v2", comments="", fmt="%d")
        if values is not None:
            np.savetxt(os.path.join(directory, f"{prefix}_values.csv"), values,
                       delimiter=",", header="u", comments="", fmt="%.12g")


def _strip_triangles(inner, outer, n_wedges, ring, periodic):
    """Mirror-symmetric triangulation of the strip between rings ``ring`` and
    ``ring + 1`` of a graded fan mesh (the outer ring carries one extra node
    per super-wedge).  Within each wedge the pattern pairs inner node j with
    outer nodes j and j+1, which maps onto itself under angular reflection,
    so symmetric data produce symmetric discrete solutions.
    """
    tris = []
    i = ring
    n_in = len(inner)
    n_out = len(outer)
    for s in range(n_wedges):
        a = [inner[(s * i + j) % n_in] for j in range(i + 1)]
        b = [outer[(s * (i + 1) + j) % n_out] for j in range(i + 2)]
        for j in range(i + 1):
            tris.append((a[j], b[j], b[j + 1]))
        for j in range(i):
            tris.append((a[j], b[j + 1], a[j + 1]))
    _ = periodic
    return tris


def fan_triangulate(star: StarSet, target_h: float, min_angle_deg: float = 20.0) -> TriMesh:
    """Graded fan/annular triangulation of a star-shaped set from the origin.

    Ring i carries proportionally more angular nodes, which keeps cells
    roughly isotropic all the way to the vertex.  Boundary edges on the
    outer polar curve are tagged FREE; for wedge cones the two radial
    chains are tagged CONE (they lie on the boundary rays exactly).
    """
    cone = star.cone
    r_max = float(star.radii.max())
    periodic = star.periodic
    qw = star.quad_weights()
    dr_b = star.radial_derivative()
    arc_len = float(qw @ np.sqrt(star.radii ** 2 + dr_b ** 2))

    scale = 1.0
    last_error = None
    for _attempt in range(4):
        n_r = max(2, int(math.ceil(math.sqrt(2.0) * scale * r_max / target_h)))
        n0 = max(3 if periodic else 2,
                 int(math.ceil(math.sqrt(2.0) * scale * arc_len / (target_h * n_r))))
        verts = [np.zeros(2)]
        rings = [np.array([0])]
        vid = 1
        for i in range(1, n_r + 1):
            count = n0 * i
            if periodic:
                angles = 2.0 * math.pi * np.arange(count) / count
            else:
                angles = np.linspace(cone.angle_lo, cone.angle_hi, count + 1)
            rad = (i / n_r) * star.radius_at(angles)
            pts = rad[:, None] * unit(angles)
            ids = np.arange(vid, vid + len(angles))
            verts.append(pts)
            rings.append(ids)
            vid += len(angles)
        vertices = np.vstack([verts[0][None, :], *verts[1:]])

        tris = []
        first = rings[1]
        if periodic:
            for j in range(len(first)):
                tris.append((0, first[j], first[(j + 1) % len(first)]))
        else:
            for j in range(len(first) - 1):
                tris.append((0, first[j], first[j + 1]))
        for i in range(1, n_r):
            tris.extend(_strip_triangles(rings[i], rings[i + 1], n0, i, periodic))
        triangles = np.array(tris, dtype=np.int64)

        p = vertices[triangles]
        signed = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                        - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
        flip = signed < 0
        triangles[flip] = triangles[flip][:, [0, 2, 1]]

        outer = rings[-1]
        if periodic:
            free = np.column_stack([outer, np.roll(outer, -1)])
            cone_edges = np.zeros((0, 2), dtype=np.int64)
        else:
            free = np.column_stack([outer[:-1], outer[1:]])
            lo_chain = [0] + [rings[i][0] for i in range(1, n_r + 1)]
            hi_chain = [0] + [rings[i][-1] for i in range(1, n_r + 1)]
            cone_edges = np.array(
                [(lo_chain[i], lo_chain[i + 1]) for i in range(n_r)]
                + [(hi_chain[i], hi_chain[i + 1]) for i in range(n_r)], dtype=np.int64)

        mesh = TriMesh(vertices, triangles, free.astype(np.int64), cone_edges,
                       target_h, cone, rings)
        if mesh.max_diameter() <= target_h * (1.0 + 1e-9):
            if mesh.min_angle_deg() >= min_angle_deg:
                return mesh
            last_error = MeshQualityError(
                f"min angle {mesh.min_angle_deg():.2f} deg below {min_angle_deg}")
        scale *= 1.2
    if last_error is not None:
        raise last_error
    raise MeshQualityError("could not satisfy the diameter bound")


def triangulate_polygon(vertices, target_h: float) -> TriMesh:
    """Uniform lattice mesh of a convex polygon (fan about the centroid).

    Every fan triangle is split into a barycentric lattice, so element
    quality equals the fan triangles' own quality.  All boundary edges are
    tagged FREE.
    """
    v = np.asarray(vertices, dtype=float)
    centroid = v.mean(axis=0)
    m = len(v)
    k = max(1, int(math.ceil(max(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1).max(),
                                 np.linalg.norm(v - centroid, axis=1).max()) / target_h)))
    key_to_id = {}
    verts = []

    def vertex_id(p):
        key = (round(p[0], 12), round(p[1], 12))
        if key not in key_to_id:
            key_to_id[key] = len(verts)
            verts.append(p)
        return key_to_id[key]

    tris = []
    free = set()
    for s in range(m):
        va, vb = v[s], v[(s + 1) % m]
        ea, eb = va - centroid, vb - centroid

        def node(i, j):
            return vertex_id(centroid + (i / k) * ea + (j / k) * eb)

        for i in range(k):
            for j in range(k - i):
                n00 = node(i, j)
                n10 = node(i + 1, j)
                n01 = node(i, j + 1)
                tris.append((n00, n10, n01))
                if i + j < k - 1:
                    n11 = node(i + 1, j + 1)
                    tris.append((n10, n11, n01))
        for t in range(k):
            a = vertex_id(va + (t / k) * (vb - va))
            b = vertex_id(va + ((t + 1) / k) * (vb - va))
            free.add((a, b))
    vertices_arr = np.array(verts)
    triangles = np.array(tris, dtype=np.int64)
    p = vertices_arr[triangles]
    signed = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                    - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    triangles[signed < 0] = triangles[signed < 0][:, [0, 2, 1]]
    free_edges = np.array(sorted(free), dtype=np.int64)
    return TriMesh(vertices_arr, triangles, free_edges, np.zeros((0, 2), dtype=np.int64),
                   target_h, None, None)


@dataclasses.dataclass(frozen=True)
class WeightedProblem:
    weight: HomWeight


@dataclasses.dataclass(frozen=True)
class AnisotropicProblem:
    body: object  # SlopeBody


@dataclasses.dataclass
class NodalField:
    """P1 solution values (weighted mean zero) and the datum it solved."""

    mesh: TriMesh
    values: np.ndarray
    b_E: float
    iterations: int
    residual: float


def _p1_gradients(mesh: TriMesh):
    p = mesh.vertices[mesh.triangles]
    areas = mesh.areas()
    grads = np.empty((len(mesh.triangles), 3, 2))
    for i in range(3):
        e = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
        grads[:, i, 0] = -e[:, 1]
        grads[:, i, 1] = e[:, 0]
    grads /= (2.0 * areas)[:, None, None]
    return grads, areas


def solve_neumann(mesh: TriMesh, problem) -> NodalField:
    """Galerkin P1 solve of the weighted or anisotropic Neumann problem.

    Triangle quadrature is the 3-point edge-midpoint rule (exact for
    quadratics); free-edge data uses 2-point Gauss.  The datum b_E is the
    ratio of the assembled boundary and volume weights, which forces the
    discrete compatibility identity.  Conjugate gradients with a Jacobi
    preconditioner run in the complement of constants.
    """
    weighted = isinstance(problem, WeightedProblem)
    grads, areas = _p1_gradients(mesh)
    mids = mesh.edge_midpoints()
    if weighted:
        w_mid = problem.weight(mids.reshape(-1, 2)).reshape(-1, 3)
    else:
        w_mid = np.ones((len(mesh.triangles), 3))
    tri_wq = (areas / 3.0)[:, None] * w_mid  # quadrature weights per midpoint

    nv = mesh.n_vertices
    gg = np.einsum("tid,tjd->tij", grads, grads)
    k_loc = gg * tri_wq.sum(axis=1)[:, None, None]
    rows = np.repeat(mesh.triangles, 3, axis=1).reshape(-1)
    cols = np.tile(mesh.triangles, (1, 3)).reshape(-1)
    A = sparse.coo_matrix((k_loc.reshape(-1), (rows, cols)), shape=(nv, nv)).tocsr()

    # midpoint m_i (opposite vertex i) carries phi_j = 1/2 for j != i
    mass_vec = np.zeros(nv)
    load_loc = 0.5 * (tri_wq.sum(axis=1)[:, None] - tri_wq)
    np.add.at(mass_vec, mesh.triangles.reshape(-1), load_loc.reshape(-1))

    free_vec = np.zeros(nv)
    if weighted:
        edges = mesh.free_edges
        boundary_edges = edges
        for a, b in boundary_edges:
            pa, pb = mesh.vertices[a], mesh.vertices[b]
            length = float(np.linalg.norm(pb - pa))
            for t in _GAUSS2:
                g = pa + t * (pb - pa)
                wg = float(problem.weight(g))
                free_vec[a] += 0.5 * length * wg * (1.0 - t)
                free_vec[b] += 0.5 * length * wg * t
    else:
        edges = np.vstack([mesh.free_edges, mesh.cone_edges]) if len(mesh.cone_edges) \
            else mesh.free_edges
        normals = mesh.boundary_outward_normals(edges)
        for (a, b), n in zip(edges, normals):
            pa, pb = mesh.vertices[a], mesh.vertices[b]
            length = float(np.linalg.norm(pb - pa))
            datum = float(problem.body.support(n))
            free_vec[a] += 0.5 * length * datum
            free_vec[b] += 0.5 * length * datum

    total_mass = float(mass_vec.sum())
    total_free = float(free_vec.sum())
    b_E = total_free / total_mass
    rhs = free_vec - b_E * mass_vec
    if abs(rhs.sum()) > 1e-10 * np.abs(rhs).sum():
        raise CompatibilityError("right-hand side is not orthogonal to constants")

    diag = A.diagonal()
    if np.any(diag <= 0):
        raise SolverError("stiffness diagonal degenerate (disconnected weighted mesh?)")
    u, iters, res = _pcg(A, rhs, 1.0 / diag, tol=1e-10, maxiter=40 * nv)
    u -= float(mass_vec @ u) / total_mass
    return NodalField(mesh, u, b_E, iters, res)


def _pcg(A, b, inv_diag, tol, maxiter):
    n = len(b)
    x = np.zeros(n)
    r = b.copy()
    r -= r.mean()
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0:
        return x, 0, 0.0
    for it in range(1, maxiter + 1):
        Ap = A @ p
        Ap -= Ap.mean()
        curv = float(p @ Ap)
        if not curv > 0.0:
            raise SolverError("system singular beyond the constant gauge "
                              "(disconnected mesh?)")
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        r -= r.mean()
        res = float(np.linalg.norm(r))
        if res <= tol * b_norm:
            return x, it, res / b_norm
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"PCG did not converge within {maxiter} iterations")


def weighted_h1_error(field: NodalField, grad_exact, weight: HomWeight | None = None) -> float:
    """Weighted H1-seminorm distance between the P1 field and an exact gradient.

    ``grad_exact`` maps an (n, 2) array of points to exact gradients; the
    comparison uses one value per triangle at the three edge midpoints.
    """
    mesh = field.mesh
    grads, areas = _p1_gradients(mesh)
    gu = np.einsum("tid,ti->td", grads, field.values[mesh.triangles])
    mids = mesh.edge_midpoints()
    ge = grad_exact(mids.reshape(-1, 2)).reshape(-1, 3, 2)
    if weight is not None:
        w_mid = weight(mids.reshape(-1, 2)).reshape(-1, 3)
    else:
        w_mid = np.ones((len(mesh.triangles), 3))
    diff = np.linalg.norm(gu[:, None, :] - ge, axis=2) ** 2
    return math.sqrt(float(np.sum((areas / 3.0)[:, None] * w_mid * diff)))
