"""Geodesic triangulation of an inset subdomain.

The construction has two stages.  `build_segment_net` lays a structured
lattice of vertices over the domain inset by a band at distance ~1.5/n from
the boundary (the inset boundary stays between 1/n and 2/n from the domain
boundary), connected by segments of length between c/n and C/n with angles
bounded away from 0 and pi.  `lift_to_geodesic` replaces every segment edge
by the autoparallel curve of the twisted connection between its endpoints
and measures corner angles from the curve tangents; for a flat connection
the three corner angles of every triangle sum to pi, which `audit` checks
along with the length/angle/band bounds.

Lattice layouts are per-fixture: an offset equilateral lattice for
Cartesian flat charts, a structured polar lattice for annular charts, and a
chart-rectangle lattice for periodic charts cut along coordinate lines.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import geodesy as gd
from . import surface as sf
from .surface import ChartSurface

__all__ = [
    "SegmentNet",
    "GeodesicTriangulation",
    "TriangulationStats",
    "build_segment_net",
    "lift_to_geodesic",
    "audit",
    "triangle_area_g",
    "domain_volume",
]


@dataclass
class SegmentNet:
    """Vertices and straight (segment) edges of the inset lattice."""

    n: int
    vertices: np.ndarray  # (V, 2) chart coordinates
    triangles: np.ndarray  # (T, 3) CCW in the chart
    inset: float  # band-center distance from the domain boundary
    boundary_vertices: np.ndarray = field(default=None)  # (B,) indices, ordered loop

    @property
    def edges(self) -> np.ndarray:
        return _unique_edges(self.triangles)


@dataclass
class GeodesicTriangulation:
    """Triangulation whose edges are autoparallel curves of the connection."""

    n: int
    vertices: np.ndarray  # (V, 2)
    triangles: np.ndarray  # (T, 3)
    edge_keys: np.ndarray  # (E, 2) sorted vertex pairs
    edge_lengths: np.ndarray  # (E,)
    edge_vel_a: np.ndarray  # (E, 2) unit velocity leaving edge_keys[e, 0]
    edge_vel_b: np.ndarray  # (E, 2) unit velocity arriving at edge_keys[e, 1]
    edge_polylines: np.ndarray  # (E, S, 2) sampled curve points
    tri_edges: np.ndarray  # (T, 3) edge index opposite each corner
    angles: np.ndarray  # (T, 3) corner angle at vertex triangles[t, i]
    inset: float
    boundary_vertices: np.ndarray
    surface_name: str = ""

    @property
    def edge_index(self) -> dict:
        if not hasattr(self, "_eidx"):
            self._eidx = {(int(a), int(b)): i for i, (a, b) in enumerate(self.edge_keys)}
        return self._eidx

    def edge_id(self, a: int, b: int) -> int:
        return self.edge_index[(min(a, b), max(a, b))]

    def tri_side_lengths(self) -> np.ndarray:
        return self.edge_lengths[self.tri_edges]

    def neighbors(self) -> np.ndarray:
        """(T, 3) neighbor triangle per side (opposite corner i), -1 on boundary."""
        owner: dict = {}
        out = -np.ones(self.triangles.shape, dtype=int)
        for t, es in enumerate(self.tri_edges):
            for s, e in enumerate(es):
                if e in owner:
                    t2, s2 = owner[e]
                    out[t, s] = t2
                    out[t2, s2] = t
                else:
                    owner[e] = (t, s)
        return out

    def to_json(self, path, polyline_stride: int = 4) -> None:
        data = {
            "n": int(self.n),
            "surface": self.surface_name,
            "vertices": self.vertices.tolist(),
            "triangles": self.triangles.tolist(),
            "edges": [
                {
                    "v": [int(a), int(b)],
                    "length": float(self.edge_lengths[i]),
                    "polyline": self.edge_polylines[i, ::polyline_stride].tolist(),
                }
                for i, (a, b) in enumerate(self.edge_keys)
            ],
            "angles": self.angles.tolist(),
        }
        with open(path, "w") as f:
            json.dump(data, f)


@dataclass
class TriangulationStats:
    """Audited regularity constants, normalized to be n-independent."""

    L_lower: float  # min edge length * n
    L_upper: float  # max edge length * n
    delta: float  # min corner angle (also pi - max angle)
    r_margin: float  # min vertex-to-opposite-edge distance * n
    angle_sum_residual: float  # max |alpha + beta + gamma - pi|
    vertex_count: int
    triangle_count: int
    band_range: tuple  # (min, max) of boundary-vertex distance * n
    uncovered_area: float  # Vol(N) - sum of triangle volumes
    coverage_bound: float  # perimeter * 3/n
    passed: bool = True
    violations: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# lattice builders


def _unique_edges(triangles: np.ndarray) -> np.ndarray:
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e = np.sort(e, axis=1)
    return np.unique(e, axis=0)


def _orient_ccw(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = vertices[triangles]
    area2 = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 2, 0] - p[:, 0, 0]
    ) * (p[:, 1, 1] - p[:, 0, 1])
    flip = area2 < 0
    out = triangles.copy()
    out[flip] = out[flip][:, [0, 2, 1]]
    return out


def _flat_equilateral(surf: ChartSurface, n: int):
    t = 1.5 / n
    u0, u1, v0, v1 = surf.domain
    W, H = (u1 - u0) - 2 * t, (v1 - v0) - 2 * t
    k = max(int(round(W * n)), 3)
    s_u = W / k
    J = max(int(round(H / (math.sqrt(3) / 2 / n))), 3)
    s_v = H / J
    rows = []
    for j in range(J + 1):
        if j % 2 == 0:
            us = u0 + t + s_u * np.arange(k + 1)
        else:
            us = u0 + t + s_u * (0.5 + np.arange(k))
        rows.append(np.stack([us, np.full_like(us, v0 + t + j * s_v)], axis=-1))
    offsets = np.cumsum([0] + [len(r) for r in rows])
    verts = np.concatenate(rows)
    tris = []
    for j in range(J):
        a, b = offsets[j], offsets[j + 1]
        na, nb = len(rows[j]), len(rows[j + 1])
        if na > nb:  # even row below, odd above
            for i in range(nb):
                tris.append((a + i, a + i + 1, b + i))
            for i in range(nb - 1):
                tris.append((b + i, a + i + 1, b + i + 1))
        else:  # odd below, even above
            for i in range(na):
                tris.append((a + i, b + i + 1, b + i))
            for i in range(na - 1):
                tris.append((a + i, a + i + 1, b + i + 1))
    return verts, np.asarray(tris, dtype=int), t


def _polar_lattice(surf: ChartSurface, n: int):
    # chart (r, theta); inset boundary curves theta = asin(t/r) keep the
    # boundary distance exactly t along the straight domain sides
    t = 1.5 / n
    r_in, r_out, th0, th1 = surf.domain
    target = 0.95 / n
    J = max(int(round(((r_out - r_in) - 2 * t) / target)), 3)
    s_r = ((r_out - r_in) - 2 * t) / J
    r_mid = 0.5 * (r_in + r_out)
    span_mid = (th1 - th0) - 2 * math.asin(t / r_mid)
    k = max(int(round(span_mid * r_mid / target)), 3)
    rows = []
    for j in range(J + 1):
        r = r_in + t + j * s_r
        lo = th0 + math.asin(t / r)
        hi = th1 - math.asin(t / r)
        ths = lo + (hi - lo) * np.arange(k + 1) / k
        rows.append(np.stack([np.full_like(ths, r), ths], axis=-1))
    return _stitch_rows(rows, k, J), t


def _chart_rect_lattice(surf: ChartSurface, n: int):
    # periodic chart cut along coordinate lines; offsets scaled by the local
    # metric so the inset band sits at distance ~t from the cuts
    t = 1.5 / n
    u0, u1, v0, v1 = surf.domain
    g_mid = sf.metric_at(surf, np.array([0.5 * (u0 + u1), 0.5 * (v0 + v1)]))
    target = 0.95 / n
    su_len = math.sqrt(float(g_mid[1, 1]))  # v-direction arc scale
    J = max(int(round(((v1 - v0) * su_len - 2 * t) / target)), 3)
    vs = None
    # v-offset from metric scale at the cut
    dv = t / su_len
    vs = np.linspace(v0 + dv, v1 - dv, J + 1)
    # column count from the mid-row u arc length
    g_rows = sf.metric_at(surf, np.stack([np.full_like(vs, 0.5 * (u0 + u1)), vs], axis=-1))
    u_scale = np.sqrt(g_rows[:, 0, 0])
    k = max(int(round(((u1 - u0) * float(np.median(u_scale)) - 2 * t) / target)), 3)
    rows = []
    for j, v in enumerate(vs):
        du = t / u_scale[j]
        us = np.linspace(u0 + du, u1 - du, k + 1)
        rows.append(np.stack([us, np.full_like(us, v)], axis=-1))
    return _stitch_rows(rows, k, J), t


def _stitch_rows(rows, k: int, J: int):
    offsets = np.cumsum([0] + [len(r) for r in rows])
    verts = np.concatenate(rows)
    tris = []
    for j in range(J):
        a, b = offsets[j], offsets[j + 1]
        for i in range(k):
            if (i + j) % 2 == 0:
                tris.append((a + i, a + i + 1, b + i + 1))
                tris.append((a + i, b + i + 1, b + i))
            else:
                tris.append((a + i, a + i + 1, b + i))
                tris.append((a + i + 1, b + i + 1, b + i))
    return verts, np.asarray(tris, dtype=int)


def _boundary_loop(triangles: np.ndarray) -> np.ndarray:
    """Ordered cycle of boundary vertices (edges used by a single triangle)."""
    count: dict = {}
    for tri in triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(a, b), max(a, b))
            count[key] = count.get(key, 0) + 1
    bnd = [k for k, c in count.items() if c == 1]
    adj: dict = {}
    for a, b in bnd:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    start = bnd[0][0]
    loop = [start]
    prev = None
    cur = start
    for _ in range(len(bnd)):
        nxts = [x for x in adj[cur] if x != prev]
        if not nxts:
            break
        prev, cur = cur, nxts[0]
        if cur == start:
            break
        loop.append(cur)
    return np.asarray(loop, dtype=int)


def build_segment_net(surf: ChartSurface, n: int) -> SegmentNet:
    """Structured segment net over the inset domain at refinement n."""
    if n < surf.n0:
        raise ValueError(f"n={n} is below the feasibility threshold n0={surf.n0} "
                         f"for the {surf.name} surface")
    if surf.lattice == "equilateral":
        verts, tris, t = _flat_equilateral(surf, n)
    elif surf.lattice == "polar":
        (verts, tris), t = _polar_lattice(surf, n)
    elif surf.lattice == "chart_rect":
        (verts, tris), t = _chart_rect_lattice(surf, n)
    else:
        raise ValueError(f"unknown lattice strategy {surf.lattice!r}")
    tris = _orient_ccw(verts, tris)
    net = SegmentNet(n=n, vertices=verts, triangles=tris, inset=t)
    net.boundary_vertices = _boundary_loop(tris)
    return net


# ---------------------------------------------------------------------------
# lifting


def lift_to_geodesic(surf: ChartSurface, net: SegmentNet,
                     samples_per_edge: int = 33, tol: float = 1e-9) -> GeodesicTriangulation:
    """Replace each net edge by the connecting autoparallel curve.

    A failed two-point solve aborts with the offending vertex pair.
    """
    edges = net.edges
    P = net.vertices[edges[:, 0]]
    Q = net.vertices[edges[:, 1]]
    out = gd.connect_batch(surf, "nabla", P, Q, tol=tol)
    if not out["converged"].all():
        bad = int(np.argmax(~out["converged"]))
        raise gd.ShootingError(
            f"geodesic edge solve failed for vertex pair {tuple(edges[bad])} "
            f"({P[bad]} -> {Q[bad]}), residual {out['residual'][bad]:.3e}"
        )
    dirs = sf.vector_from_angle(surf, P, out["angle"])
    rec = gd.shoot_batch(surf, "nabla", P, dirs, out["length"], record=True)
    m = rec["points"].shape[1]
    keep = np.unique(np.linspace(0, m - 1, samples_per_edge).astype(int))
    polylines = rec["points"][:, keep]
    vel_a = rec["vels"][:, 0]
    vel_b = rec["vels"][:, -1]

    eidx = {(int(a), int(b)): i for i, (a, b) in enumerate(edges)}
    T = len(net.triangles)
    tri_edges = np.empty((T, 3), dtype=int)
    angles = np.empty((T, 3))
    for ti, (i0, i1, i2) in enumerate(net.triangles):
        vv = (int(i0), int(i1), int(i2))
        for s in range(3):
            a, b = vv[(s + 1) % 3], vv[(s + 2) % 3]
            tri_edges[ti, s] = eidx[(min(a, b), max(a, b))]
    # corner angles from curve tangents (g-inner products of unit velocities)
    for ti, (i0, i1, i2) in enumerate(net.triangles):
        vv = (int(i0), int(i1), int(i2))
        for c in range(3):
            v = vv[c]
            others = [vv[(c + 1) % 3], vv[(c + 2) % 3]]
            vecs = []
            for w in others:
                e = eidx[(min(v, w), max(v, w))]
                if edges[e, 0] == v:
                    vecs.append(vel_a[e])
                else:
                    vecs.append(-vel_b[e])
            p = net.vertices[v]
            cosang = sf.inner(surf, p, vecs[0], vecs[1]) / (
                sf.norm_g(surf, p, vecs[0]) * sf.norm_g(surf, p, vecs[1])
            )
            angles[ti, c] = math.acos(min(1.0, max(-1.0, float(cosang))))
    return GeodesicTriangulation(
        n=net.n,
        vertices=net.vertices,
        triangles=net.triangles,
        edge_keys=edges,
        edge_lengths=out["length"],
        edge_vel_a=vel_a,
        edge_vel_b=vel_b,
        edge_polylines=polylines,
        tri_edges=tri_edges,
        angles=angles,
        inset=net.inset,
        boundary_vertices=net.boundary_vertices,
        surface_name=surf.name,
    )


# ---------------------------------------------------------------------------
# areas and audit


_BARY_CACHE: dict = {}


def _bary_grid(m: int = 6):
    if m not in _BARY_CACHE:
        pts = []
        for i in range(m):
            for j in range(m - i):
                k = m - 1 - i - j
                pts.append(((i + 1 / 3) / m, (j + 1 / 3) / m, (k + 1 / 3) / m))
        _BARY_CACHE[m] = np.asarray(pts)
    return _BARY_CACHE[m]


def triangle_area_g(surf: ChartSurface, corners: np.ndarray, m: int = 6) -> np.ndarray:
    """Metric area of chart triangles (..., 3, 2) by barycentric midpoint rule."""
    corners = np.asarray(corners, float)
    bary = _bary_grid(m)  # (B, 3)
    pts = np.einsum("bk,...kj->...bj", bary, corners)
    dens = sf.sqrt_det_g(surf, pts)
    p = corners
    chart_area2 = np.abs(
        (p[..., 1, 0] - p[..., 0, 0]) * (p[..., 2, 1] - p[..., 0, 1])
        - (p[..., 2, 0] - p[..., 0, 0]) * (p[..., 1, 1] - p[..., 0, 1])
    )
    return 0.5 * chart_area2 * dens.mean(axis=-1)


def domain_volume(surf: ChartSurface, resolution: int = 400) -> float:
    u0, u1, v0, v1 = surf.domain
    us = np.linspace(u0, u1, resolution + 1)
    vs = np.linspace(v0, v1, resolution + 1)
    uc = 0.5 * (us[:-1] + us[1:])
    vc = 0.5 * (vs[:-1] + vs[1:])
    U, V = np.meshgrid(uc, vc, indexing="ij")
    dens = sf.sqrt_det_g(surf, np.stack([U, V], axis=-1))
    cell = (us[1] - us[0]) * (vs[1] - vs[0])
    return float(dens.sum() * cell)


def _perimeter(surf: ChartSurface, resolution: int = 400) -> float:
    u0, u1, v0, v1 = surf.domain
    total = 0.0
    for fixed_axis, val, lo, hi in (
        (1, v0, u0, u1), (1, v1, u0, u1), (0, u0, v0, v1), (0, u1, v0, v1),
    ):
        s = np.linspace(lo, hi, resolution + 1)
        pts = np.empty((resolution + 1, 2))
        pts[:, 1 - fixed_axis] = s
        pts[:, fixed_axis] = val
        g = sf.metric_at(surf, pts)
        comp = g[:, 1 - fixed_axis, 1 - fixed_axis]
        speeds = np.sqrt(0.5 * (comp[:-1] + comp[1:]))
        total += float(np.sum(speeds * np.diff(s)))
    return total


def _vertex_edge_margin(surf: ChartSurface, tri: GeodesicTriangulation) -> float:
    worst = math.inf
    for ti, corners in enumerate(tri.triangles):
        for c in range(3):
            v = tri.vertices[corners[c]]
            e = tri.tri_edges[ti, c]
            dist = gd._polyline_min_dist(surf, v, tri.edge_polylines[e])
            worst = min(worst, dist)
    return worst


def audit(surf_or_name, tri: GeodesicTriangulation,
          delta_min: float = 0.3, r_min: float = 0.2,
          band_slack: float = 1e-9) -> TriangulationStats:
    """Measure the regularity constants and check them against floors.

    Degenerate input (coincident vertices, zero-length edges) fails with an
    explicit violation record rather than raising.
    """
    surf = surf_or_name
    n = tri.n
    violations = []
    lens = tri.edge_lengths
    if np.any(lens <= 1e-14):
        violations.append("zero-length edge (coincident vertices)")
    L_lower = float(lens.min() * n)
    L_upper = float(lens.max() * n)
    ang = tri.angles
    delta = float(min(ang.min(), math.pi - ang.max()))
    res = float(np.abs(ang.sum(axis=1) - math.pi).max())
    margin = _vertex_edge_margin(surf, tri) * n if len(tri.triangles) else 0.0

    if surf.boundary_distance is not None:
        bd = np.asarray(surf.boundary_distance(tri.vertices[tri.boundary_vertices]))
        band = (float(bd.min() * n), float(bd.max() * n))
        if band[0] < 1.0 - 1e-6 or band[1] > 2.0 + 1e-6:
            violations.append(f"inset boundary outside the [1/n, 2/n] band: {band}")
        interior_bd = np.asarray(surf.boundary_distance(tri.vertices))
        if np.any(interior_bd < (1.0 - band_slack) / n):
            violations.append("vertex closer than 1/n to the domain boundary")
    else:
        band = (math.nan, math.nan)

    vol = domain_volume(surf)
    covered = float(np.sum(triangle_area_g(surf, tri.vertices[tri.triangles])))
    uncovered = vol - covered
    cov_bound = _perimeter(surf) * 3.0 / n
    if uncovered > cov_bound:
        violations.append(
            f"uncovered area {uncovered:.3e} exceeds the 3/n band bound {cov_bound:.3e}"
        )
    if delta < delta_min:
        violations.append(f"angle margin {delta:.3f} below the floor {delta_min}")
    if margin < r_min:
        violations.append(f"vertex-edge margin {margin:.3f}/n below the floor {r_min}/n")
    return TriangulationStats(
        L_lower=L_lower,
        L_upper=L_upper,
        delta=delta,
        r_margin=float(margin),
        angle_sum_residual=res,
        vertex_count=len(tri.vertices),
        triangle_count=len(tri.triangles),
        band_range=band,
        uncovered_area=uncovered,
        coverage_bound=cov_bound,
        passed=not violations,
        violations=violations,
    )
