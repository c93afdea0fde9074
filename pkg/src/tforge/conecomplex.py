"""Glued piecewise-Euclidean surfaces built from dislocated triangles.

A cone complex is a list of planar polygon patches together with an edge
gluing: every interior edge of the underlying triangulation is identified
isometrically with its partner, and the seam edges inside each dislocated
triangle are glued so that the two cone points of the dipole are the only
curvature carriers.  Crossing a gluing applies a rigid motion between patch
frames; the composition of those motions around a loop is the holonomy of
the loop (pure rotation part).  Around a full dipole and around every
triangulation vertex the rotation vanishes, which is what makes a global
parallel frame possible.

Distances are computed on a Steiner graph (nodes on glued edges, complete
chords inside each patch) followed by an unfold-and-straighten refinement
that is exact within the homotopy sleeve discovered by the graph.
Excising a small tube around each dislocation edge turns the complex into
a smooth flat surface with boundary circles of total length
2 |EF| + 2 pi rho per dipole.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from . import dislocate as dl
from .triangulate import GeodesicTriangulation

__all__ = [
    "Patch",
    "ConeComplex",
    "PathGraph",
    "GluingError",
    "assemble",
    "excise_dislocations",
    "shortest_path",
    "holonomy",
    "parallel_frame",
    "FrameField",
    "loop_around_vertex",
    "loop_around_cone",
    "loop_around_dipole",
    "loop_across_edge",
    "gauss_bonnet_audit",
]

_SEAM_ROLES = ("seam_axis_f", "seam_jog", "seam_axis_e")


class GluingError(RuntimeError):
    """Inconsistent edge identification while assembling the complex."""


@dataclass
class Patch:
    verts: np.ndarray  # (k, 2), CCW in the patch frame
    roles: list  # edge i: verts[i] -> verts[i+1]
    tri: int
    kind: str  # 'upper' | 'lower' | 'plain'

    def nedges(self) -> int:
        return len(self.verts)

    def edge_points(self, i: int):
        return self.verts[i], self.verts[(i + 1) % len(self.verts)]

    def edge_length(self, i: int) -> float:
        a, b = self.edge_points(i)
        return float(np.linalg.norm(b - a))

    def interior_angle(self, i: int) -> float:
        p = self.verts[i]
        prv = self.verts[i - 1]
        nxt = self.verts[(i + 1) % len(self.verts)]
        a1 = math.atan2(*(prv - p)[::-1])
        a2 = math.atan2(*(nxt - p)[::-1])
        return (a1 - a2) % (2 * math.pi)


@dataclass
class ConeComplex:
    n: int
    theta: float
    patches: list
    glue: dict  # (pid, ei) -> (qid, fj); involution
    boundary: dict  # (pid, ei) -> 'outer' | 'hole'
    cones: list  # dicts: name, tri, total_angle, deficit, refs [(pid, vidx)], point
    vertex_refs: dict  # triangulation vertex id -> [(pid, vidx), ...]
    side_cover: dict  # (u, w) sorted -> [(pid, ei, s0, s1)] covering [0, L] canonically
    tri_patches: dict  # tri index -> (pid_upper, pid_lower or None)
    excised: dict  # tri index -> {'rho': float, 'ef': float}
    dislocated: dict  # tri index -> DislocatedTriangle
    surface_name: str = ""
    _iso_cache: dict = field(default_factory=dict)

    # -- gluing isometries ---------------------------------------------------

    def iso(self, pid: int, ei: int):
        """Rigid motion (R, t) with  x_partner = R @ x_here + t  across edge ei."""
        key = (pid, ei)
        if key in self._iso_cache:
            return self._iso_cache[key]
        qid, fj = self.glue[key]
        x0, x1 = self.patches[pid].edge_points(ei)
        y0, y1 = self.patches[qid].edge_points(fj)
        # endpoint correspondence is reversed: x0 <-> y1, x1 <-> y0
        a = math.atan2(*(y0 - y1)[::-1]) - math.atan2(*(x1 - x0)[::-1])
        R = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
        t = y1 - R @ x0
        self._iso_cache[key] = (R, t)
        return R, t

    def iso_rotation(self, pid: int, ei: int) -> float:
        R, _ = self.iso(pid, ei)
        return math.atan2(R[1, 0], R[0, 0])

    # -- bookkeeping -----------------------------------------------------------

    def glued_pairs(self):
        seen = set()
        for key, val in self.glue.items():
            if val not in seen:
                seen.add(key)
                yield key, val

    def euler_characteristic(self) -> int:
        F = len(self.patches)
        E_glued = sum(1 for _ in self.glued_pairs())
        E_free = len(self.boundary)
        E = E_glued + E_free
        # vertices: union-find over patch corners through gluings
        parent: dict = {}

        def find(x):
            while parent.setdefault(x, x) != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(x, y):
            parent[find(x)] = find(y)

        for pid, patch in enumerate(self.patches):
            for v in range(len(patch.verts)):
                find((pid, v))
        for (pid, ei), (qid, fj) in self.glue.items():
            k1 = len(self.patches[pid].verts)
            k2 = len(self.patches[qid].verts)
            union((pid, ei), (qid, (fj + 1) % k2))
            union((pid, (ei + 1) % k1), (qid, fj))
        V = len({find(x) for x in list(parent)})
        return V - E + F

    def vertex_angle_sums(self) -> dict:
        out = {}
        for gv, refs in self.vertex_refs.items():
            out[gv] = sum(self.patches[pid].interior_angle(v) for pid, v in refs)
        return out

    def contains(self, pid: int, pts: np.ndarray) -> np.ndarray:
        """Point-in-patch test (winding rule), vectorized over pts (..., 2)."""
        poly = self.patches[pid].verts
        x, y = pts[..., 0], pts[..., 1]
        inside = np.zeros(x.shape, dtype=bool)
        k = len(poly)
        for i in range(k):
            x0, y0 = poly[i]
            x1, y1 = poly[(i + 1) % k]
            crosses = (y0 <= y) != (y1 <= y)
            xi = x0 + (y - y0) * (x1 - x0) / np.where(np.abs(y1 - y0) < 1e-300, 1e-300,
                                                      (y1 - y0))
            inside ^= crosses & (x < xi)
        return inside

    # -- serialization -----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "theta": self.theta,
            "surface": self.surface_name,
            "patches": [
                {"id": i, "tri": p.tri, "kind": p.kind, "vertices": p.verts.tolist(),
                 "roles": p.roles}
                for i, p in enumerate(self.patches)
            ],
            "gluings": [[k[0], k[1], v[0], v[1]] for k, v in self.glued_pairs()],
            "boundary": [[k[0], k[1], tag] for k, tag in self.boundary.items()],
            "cones": [
                {"name": c["name"], "tri": c["tri"], "total_angle": c["total_angle"],
                 "deficit": c["deficit"]}
                for c in self.cones
            ],
            "excised": {str(k): v for k, v in self.excised.items()},
        }

    def dump_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    def dump_obj(self, path) -> None:
        """Wavefront export of a developed layout (spanning-tree placement)."""
        placed = {0: (np.eye(2), np.zeros(2))}
        order = [0]
        stack = [0]
        while stack:
            pid = stack.pop()
            Rp, tp = placed[pid]
            for ei in range(self.patches[pid].nedges()):
                nxt = self.glue.get((pid, ei))
                if nxt is None or nxt[0] in placed:
                    continue
                qid = nxt[0]
                R, t = self.iso(pid, ei)
                # q-frame -> p-frame -> world
                Rq = Rp @ R.T
                tq = tp - Rq @ t
                placed[qid] = (Rq, tq)
                order.append(qid)
                stack.append(qid)
        lines = []
        offset = 1
        faces = []
        for pid in order:
            R, t = placed[pid]
            verts = self.patches[pid].verts @ R.T + t
            for v in verts:
                lines.append(f"v {v[0]:.9g} {v[1]:.9g} 0")
            for tri in _ear_clip(verts):
                faces.append("f " + " ".join(str(offset + i) for i in tri))
            offset += len(verts)
        with open(path, "w") as f:
            f.write("\n".join(lines + faces) + "\n")


def _ear_clip(poly: np.ndarray):
    """Triangulate a simple polygon (indices); small inputs only."""
    idx = list(range(len(poly)))
    out = []
    guard = 0
    while len(idx) > 3 and guard < 10000:
        guard += 1
        n = len(idx)
        for k in range(n):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % n]
            a, b, c = poly[i0], poly[i1], poly[i2]
            if np.cross(b - a, c - b) <= 1e-16:
                continue
            ok = True
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = poly[j]
                s1 = np.cross(b - a, p - a)
                s2 = np.cross(c - b, p - b)
                s3 = np.cross(a - c, p - c)
                if s1 >= 0 and s2 >= 0 and s3 >= 0:
                    ok = False
                    break
            if ok:
                out.append((i0, i1, i2))
                idx.pop(k)
                break
        else:
            break
    if len(idx) == 3:
        out.append(tuple(idx))
    return out


# ---------------------------------------------------------------------------
# assembly


def _reflected(verts: np.ndarray, roles: list):
    """Mirror a CCW polygon across the x-axis and restore CCW order."""
    v = verts.copy()
    v[:, 1] *= -1.0
    v = v[::-1].copy()
    rr = list(reversed(roles))
    rr = rr[1:] + rr[:1]
    return v, rr


def _perm_parity_even(perm) -> bool:
    p = list(perm)
    swaps = 0
    for i in range(3):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            swaps += 1
    return swaps % 2 == 0


def _carve_dislocation(verts: np.ndarray, roles: list, rho: float, arc_pts: int = 5):
    """Cut the open rho-tube around the dislocation edge out of one piece.

    Replaces the corner path (axis edge end) -> jog -> (axis edge start) near
    the jog with an inscribed polygonal offset arc at distance rho.  Returns
    the new polygon and roles; the jog edge disappears, both adjacent seam
    axis edges are shortened by rho at the cone end.
    """
    k = len(verts)
    j = roles.index("seam_jog")
    p1, p2 = verts[j], verts[(j + 1) % k]
    prev_pt = verts[j - 1]
    next_pt = verts[(j + 2) % k]
    u_prev = (prev_pt - p1) / np.linalg.norm(prev_pt - p1)
    u_next = (next_pt - p2) / np.linalg.norm(next_pt - p2)
    if np.linalg.norm(prev_pt - p1) <= 2 * rho or np.linalg.norm(next_pt - p2) <= 2 * rho:
        raise GluingError("dislocation tube reaches a seam foot; refine or shrink rho")
    jog = p2 - p1
    n_left = np.array([-jog[1], jog[0]]) / np.linalg.norm(jog)

    def arc(center, a_from, a_to, m):
        # clockwise sweep from a_from down to a_to
        sweep = (a_from - a_to) % (2 * math.pi)
        angles = a_from - sweep * np.arange(1, m + 1) / (m + 1)
        return [center + rho * np.array([math.cos(a), math.sin(a)]) for a in angles]

    q1 = p1 + rho * u_prev
    q2 = p2 + rho * u_next
    a1_from = math.atan2(u_prev[1], u_prev[0])
    a_mid = math.atan2(n_left[1], n_left[0])
    a2_to = math.atan2(u_next[1], u_next[0])
    pts = [q1]
    pts += arc(p1, a1_from, a_mid, arc_pts)
    pts += [p1 + rho * n_left, p2 + rho * n_left]
    pts += arc(p2, a_mid, a2_to, arc_pts)
    pts += [q2]
    # vertices j (= p1) and j+1 (= p2) are replaced by the carved path; the
    # previous axis edge now ends at q1 and the next one starts at q2
    out_verts = []
    out_roles = []
    for i in range(k):
        if i == j:
            out_verts += pts
            out_roles += ["hole"] * (len(pts) - 1) + [roles[(j + 1) % k]]
        elif i == (j + 1) % k:
            continue
        else:
            out_verts.append(verts[i])
            out_roles.append(roles[i])
    return np.asarray(out_verts), out_roles


def assemble(tri: GeodesicTriangulation, triangles: list, theta: float,
             excise: bool = False, rho: Optional[float] = None,
             length_tol: float = 1e-9) -> ConeComplex:
    """Glue per-triangle dislocated pieces along the triangulation adjacency.

    ``triangles`` is a list of DislocatedTriangle, one per triangulation
    triangle, whose targets must match the triangulation edge lengths and
    angles within ``length_tol``.  With ``excise`` the open rho-tube around
    each dislocation edge is removed first (default rho = 1/n^2, clamped
    per-triangle so the tube stays clear of the patch boundary).
    """
    n = tri.n
    rho0 = rho if rho is not None else 1.0 / n**2
    patches: list = []
    glue: dict = {}
    boundary: dict = {}
    cones: list = []
    vertex_refs: dict = {}
    side_cover: dict = {}
    tri_patches: dict = {}
    excised: dict = {}
    dislocated: dict = {}

    # registry of side coverage entries before splitting:
    # (u, w) -> list of (pid, role, s_at_start, s_at_end) in canonical arclength
    cover_raw: dict = {}
    corner_raw: list = []  # (gv, pid, coords) to resolve after splitting

    for t_idx in range(len(tri.triangles)):
        gv = [int(x) for x in tri.triangles[t_idx]]
        dt = triangles[t_idx]
        dislocated[t_idx] = dt
        a, b, c, al, be, ga = dt.target
        # consistency with the triangulation record
        L = tri.edge_lengths[tri.tri_edges[t_idx]]
        for want, got in zip((a, b, c), L):
            if abs(want - got) > length_tol * max(1.0, got):
                raise GluingError(
                    f"triangle {t_idx}: patch side {want:.12f} does not match "
                    f"the triangulation edge length {got:.12f}"
                )
        perm = dt.dipole.vertex_order
        even = _perm_parity_even(perm)
        pieces = {}
        for name, piece in (("upper", dt.upper), ("lower", dt.lower)):
            if piece is None:
                continue
            verts, roles = piece.verts.copy(), list(piece.roles)
            pieces[name] = (verts, roles, dict(piece.corners))
        f_pts = {"upper": dt.f_point, "lower": dt.f_point_lower}
        e_pts = {"upper": dt.e_point, "lower": dt.e_point_lower}
        flip_s = not even
        if flip_s:
            for name in pieces:
                verts, roles, corners = pieces[name]
                k = len(verts)
                verts, roles = _reflected(verts, roles)
                corners = {lab: (k - 1 - vi) for lab, vi in corners.items()}
                pieces[name] = (verts, roles, corners)
            refl = np.array([1.0, -1.0])
            f_pts = {k2: (v * refl if v is not None else None) for k2, v in f_pts.items()}
            e_pts = {k2: (v * refl if v is not None else None) for k2, v in e_pts.items()}

        ef_len = dt.ef_length
        rho_t = None
        if excise and not dt.is_trivial:
            margin = dl._dislocation_margin(dt)
            rho_t = min(rho0, 0.45 * margin)
            for piece_name in pieces:
                verts, roles, corners = pieces[piece_name]
                ja = roles.index("seam_axis_f")
                jb = roles.index("seam_axis_e")
                la = np.linalg.norm(verts[(ja + 1) % len(verts)] - verts[ja])
                lb = np.linalg.norm(verts[(jb + 1) % len(verts)] - verts[jb])
                rho_t = min(rho_t, 0.4 * la, 0.4 * lb)
            if rho_t <= 0:
                raise GluingError(f"triangle {t_idx}: no room to excise the dislocation")
            for piece_name in pieces:
                verts, roles, corners = pieces[piece_name]
                new_verts, new_roles = _carve_dislocation(verts, roles, rho_t)
                # corner indices survive: original vertices other than the jog
                # pair keep order, so rebuild corner map by coordinate match
                new_corners = {}
                for lab, vi in corners.items():
                    tgt = verts[vi]
                    hits = np.where(np.linalg.norm(new_verts - tgt, axis=1) < 1e-12)[0]
                    new_corners[lab] = int(hits[0])
                pieces[piece_name] = (new_verts, new_roles, new_corners)
            excised[t_idx] = {"rho": float(rho_t), "ef": float(ef_len)}

        pid_of = {}
        for name in pieces:
            verts, roles, corners = pieces[name]
            pid = len(patches)
            patches.append(Patch(verts=np.asarray(verts), roles=list(roles),
                                 tri=t_idx, kind=name if not dt.is_trivial else "plain"))
            pid_of[name] = pid
        tri_patches[t_idx] = (pid_of.get("upper"), pid_of.get("lower"))

        # seam gluings within the triangle
        if not dt.is_trivial:
            up, lo = pid_of["upper"], pid_of["lower"]
            seam_roles = ["seam_axis_f", "seam_axis_e"]
            if t_idx not in excised:
                seam_roles.append("seam_jog")
            for role in seam_roles:
                i1 = patches[up].roles.index(role)
                i2 = patches[lo].roles.index(role)
                glue[(up, i1)] = (lo, i2)
                glue[(lo, i2)] = (up, i1)
            if t_idx in excised:
                for pid in (up, lo):
                    for ei, r_ in enumerate(patches[pid].roles):
                        if r_ == "hole":
                            boundary[(pid, ei)] = "hole"
            # cone records
            for cname, pts_map in (("F", f_pts), ("E", e_pts)):
                refs = []
                if t_idx not in excised:
                    for name in pieces:
                        verts = patches[pid_of[name]].verts
                        tgt = pts_map[name]
                        hits = np.where(np.linalg.norm(verts - tgt, axis=1) < 1e-12)[0]
                        if len(hits):
                            refs.append((pid_of[name], int(hits[0])))
                total = 2 * math.pi - 2 * theta if cname == "F" else 2 * math.pi + 2 * theta
                cones.append({
                    "name": cname, "tri": t_idx, "total_angle": total,
                    "deficit": 2 * math.pi - total, "refs": refs,
                    "point": pts_map["upper"],
                })

        # corner registry and side coverage
        g_of_label = {"A": gv[perm[0]], "B": gv[perm[1]], "C": gv[perm[2]]}
        for name in pieces:
            _, roles_, corners_ = pieces[name]
            for lab, vi in corners_.items():
                corner_raw.append((g_of_label[lab], pid_of[name], vi))
        side_ends = {"a": ("C", "B"), "b": ("C", "A"), "c": ("A", "B")}
        lengths = {"a": dt.dipole.ordered[0], "b": dt.dipole.ordered[1],
                   "c": dt.dipole.ordered[2]}
        for lab, entries in dt.side_splits.items():
            gfirst = g_of_label[side_ends[lab][0]]
            gsecond = g_of_label[side_ends[lab][1]]
            key = (min(gfirst, gsecond), max(gfirst, gsecond))
            Ltot = lengths[lab]
            for piece_name, role, s_start, s_end in entries:
                if flip_s:
                    s_start, s_end = s_end, s_start
                if gfirst != key[0]:
                    s_start, s_end = Ltot - s_start, Ltot - s_end
                cover_raw.setdefault(key, []).append(
                    (pid_of[piece_name], role, float(s_start), float(s_end))
                )

    vertex_maps = _split_and_glue(tri, patches, glue, boundary, cover_raw,
                                  side_cover, length_tol=length_tol)

    for gvid, pid, vi in corner_raw:
        vertex_refs.setdefault(gvid, []).append((pid, int(vertex_maps[pid][vi])))
    for cone in cones:
        cone["refs"] = [(pid, int(vertex_maps[pid][vi])) for pid, vi in cone["refs"]]

    return ConeComplex(
        n=n, theta=theta, patches=patches, glue=glue, boundary=boundary,
        cones=cones, vertex_refs=vertex_refs, side_cover=side_cover,
        tri_patches=tri_patches, excised=excised, dislocated=dislocated,
        surface_name=tri.surface_name,
    )


def _split_and_glue(tri, patches, glue, boundary, cover_raw, side_cover,
                    length_tol) -> dict:
    """Split patch side edges at partner breakpoints and pair the sub-edges.

    Returns the old -> new vertex index map per patch.
    """
    # collect split fractions per (pid, role)
    splits: dict = {}
    tol = 1e-11
    for key, entries in cover_raw.items():
        bps = set()
        for _, _, s0, s1 in entries:
            bps.add(min(s0, s1))
            bps.add(max(s0, s1))
        bps = sorted(bps)
        for pid, role, s0, s1 in entries:
            lo, hi = min(s0, s1), max(s0, s1)
            inner = [s for s in bps if lo + tol < s < hi - tol]
            if inner:
                # local fraction along the edge (straight, uniform speed)
                fr = [(s - s0) / (s1 - s0) for s in inner]
                splits.setdefault((pid, role), []).extend(fr)

    # rebuild polygons with inserted vertices; record sub-edge indices and
    # the old -> new vertex index map of every patch
    sub_edges: dict = {}  # (pid, role) -> list of (new_eidx, f0, f1) ordered by f
    vertex_maps: dict = {}
    for pid, patch in enumerate(patches):
        frs_per_edge = []
        for ei, role in enumerate(patch.roles):
            frs = sorted(set(splits.get((pid, role), []))) if role.startswith("side_") else []
            frs_per_edge.append(frs)
        if not any(frs_per_edge):
            vertex_maps[pid] = np.arange(len(patch.verts))
            for ei, role in enumerate(patch.roles):
                if role.startswith("side_"):
                    sub_edges[(pid, role)] = [(ei, 0.0, 1.0)]
            continue
        new_verts = []
        new_roles = []
        idx_map = []  # per original edge: starting new edge index
        for ei in range(len(patch.verts)):
            idx_map.append(len(new_verts))
            v0 = patch.verts[ei]
            v1 = patch.verts[(ei + 1) % len(patch.verts)]
            new_verts.append(v0)
            new_roles.append(patch.roles[ei])
            for f in frs_per_edge[ei]:
                new_verts.append(v0 + f * (v1 - v0))
                new_roles.append(patch.roles[ei])
        patch.verts = np.asarray(new_verts)
        patch.roles = new_roles
        vertex_maps[pid] = np.asarray(idx_map)
        for ei, frs in enumerate(frs_per_edge):
            role = new_roles[idx_map[ei]]
            if not role.startswith("side_"):
                continue
            bounds = [0.0] + frs + [1.0]
            subs = [(idx_map[ei] + j, bounds[j], bounds[j + 1]) for j in range(len(bounds) - 1)]
            sub_edges[(pid, role)] = subs

    # splitting shifted edge indices; seam gluings were recorded with
    # pre-split indices, so rebuild them from the (unique-per-patch) roles
    glue.clear()
    seam_glue: dict = {}
    for pid, patch in enumerate(patches):
        for r_ in _SEAM_ROLES:
            if r_ in patch.roles:
                seam_glue.setdefault((patch.tri, r_), []).append((pid, patch.roles.index(r_)))
    for (_, r_), members in seam_glue.items():
        if len(members) == 2:
            (p1, e1), (p2, e2) = members
            glue[(p1, e1)] = (p2, e2)
            glue[(p2, e2)] = (p1, e1)
    # hole boundaries
    boundary.clear()
    for pid, patch in enumerate(patches):
        for ei, r_ in enumerate(patch.roles):
            if r_ == "hole":
                boundary[(pid, ei)] = "hole"

    # pair side sub-edges across triangles: group by near-equal intervals
    for key, entries in cover_raw.items():
        subs_all = []
        for pid, role, s0, s1 in entries:
            for eidx, f0, f1 in sub_edges[(pid, role)]:
                a = s0 + f0 * (s1 - s0)
                b = s0 + f1 * (s1 - s0)
                subs_all.append((pid, eidx, min(a, b), max(a, b)))
        subs_all.sort(key=lambda r: (r[2], r[3]))
        groups = [[subs_all[0]]] if subs_all else []
        for sub in subs_all[1:]:
            prev = groups[-1][0]
            if abs(prev[2] - sub[2]) < 1e-9 and abs(prev[3] - sub[3]) < 1e-9:
                groups[-1].append(sub)
            else:
                groups.append([sub])
        ordered = []
        for members in groups:
            if len(members) == 2:
                (p1, e1, lo, hi), (p2, e2, *_rest) = members
                l1 = patches[p1].edge_length(e1)
                l2 = patches[p2].edge_length(e2)
                if abs(l1 - l2) > length_tol * max(1.0, l1):
                    raise GluingError(
                        f"edge {key} sub-interval [{lo:.6f},{hi:.6f}]: glued lengths "
                        f"differ by {l1 - l2:.3e}"
                    )
                glue[(p1, e1)] = (p2, e2)
                glue[(p2, e2)] = (p1, e1)
                ordered.append((p1, e1, lo, hi))
            elif len(members) == 1:
                pid, eidx, lo, hi = members[0]
                boundary[(pid, eidx)] = "outer"
                ordered.append((pid, eidx, lo, hi))
            else:
                raise GluingError(f"edge {key}: {len(members)} patches share one interval")
        side_cover[key] = ordered
    return vertex_maps


def excise_dislocations(cmplx: ConeComplex, tri: GeodesicTriangulation,
                        rho: Optional[float] = None) -> ConeComplex:
    """Remove the open tube of radius ~1/n^2 around every dislocation edge.

    Returns a new complex built from the same per-triangle pieces; the input
    complex is unchanged.  rho defaults to 1/n^2 and is clamped per triangle
    so the tube stays inside the pieces.
    """
    dts = [cmplx.dislocated[t] for t in range(len(tri.triangles))]
    return assemble(tri, dts, cmplx.theta, excise=True, rho=rho)


# ---------------------------------------------------------------------------
# holonomy and frames


def holonomy(cmplx: ConeComplex, loop) -> float:
    """Net rotation (radians, wrapped to (-pi, pi]) around a crossing loop.

    ``loop`` is a sequence of directed crossings (pid, edge_index); each
    crossing moves from the named patch into its gluing partner.
    """
    total = 0.0
    for pid, ei in loop:
        if (pid, ei) not in cmplx.glue:
            raise GluingError(f"loop crossing ({pid}, {ei}) is not a glued edge")
        total += cmplx.iso_rotation(pid, ei)
    return float((total + math.pi) % (2 * math.pi) - math.pi)


def loop_around_vertex(cmplx: ConeComplex, gvid: int):
    """Crossing sequence of the patch umbrella around a triangulation vertex.

    Returns None for boundary vertices (their umbrella is not a cycle).
    """
    refs = cmplx.vertex_refs.get(gvid)
    if not refs:
        raise KeyError(f"vertex {gvid} has no patch corners")
    start_pid, start_vi = refs[0]
    crossings = []
    pid, vi = start_pid, start_vi
    for _ in range(len(refs) + 1):
        # leave across the outgoing edge at this corner
        ei = vi
        nxt = cmplx.glue.get((pid, ei))
        if nxt is None:
            return None  # boundary vertex
        crossings.append((pid, ei))
        qid, fj = nxt
        # the corner at the same vertex in the partner patch is the far end
        # of the glued edge: our edge start vi maps to partner edge end fj+1
        pid, vi = qid, (fj + 1) % cmplx.patches[qid].nedges()
        if (pid, vi) == (start_pid, start_vi):
            return crossings
    raise GluingError(f"umbrella walk around vertex {gvid} did not close")


def loop_around_cone(cmplx: ConeComplex, cone: dict):
    """Two-crossing loop around one cone point (unexcised complexes)."""
    up, lo = cmplx.tri_patches[cone["tri"]]
    role = "seam_axis_f" if cone["name"] == "F" else "seam_axis_e"
    e1 = cmplx.patches[up].roles.index(role)
    e2 = cmplx.patches[lo].roles.index("seam_jog")
    return [(up, e1), (lo, e2)]


def loop_around_dipole(cmplx: ConeComplex, tri_index: int):
    """Loop around the whole dislocation (both cones, or the excised tube)."""
    up, lo = cmplx.tri_patches[tri_index]
    if lo is None:
        return None
    e1 = cmplx.patches[up].roles.index("seam_axis_f")
    e2 = cmplx.patches[lo].roles.index("seam_axis_e")
    return [(up, e1), (lo, e2)]


def loop_across_edge(cmplx: ConeComplex, pid: int, ei: int):
    """Degenerate two-crossing loop through one gluing and straight back."""
    qid, fj = cmplx.glue[(pid, ei)]
    return [(pid, ei), (qid, fj)]


def gauss_bonnet_audit(cmplx: ConeComplex, loop, enclosed_deficit: float) -> float:
    """Residual of the polygonal flat-surface angle identity around a loop.

    Develops the loop's patch chain, takes the crossing-edge midpoints as a
    closed polyline, and checks that the sum of exterior turning angles
    (with the closure leg rotated by the loop holonomy) equals
    2 pi - enclosed_deficit.  Returns the absolute residual.
    """
    M_R = np.eye(2)
    M_t = np.zeros(2)
    pts = []
    for pid, ei in loop:
        a, b = cmplx.patches[pid].edge_points(ei)
        mid = 0.5 * (a + b)
        pts.append(M_R @ mid + M_t)
        R, t = cmplx.iso(pid, ei)
        # partner-frame coords y develop as M_new(y) = M(R^T (y - t))
        M_R, M_t = M_R @ R.T, M_t - M_R @ R.T @ t
    pts = np.asarray(pts)
    k = len(pts)
    if k < 2:
        raise ValueError("loop needs at least two crossings")
    closure = M_R @ pts[0] + M_t
    hol_R = M_R
    segs = [pts[i + 1] - pts[i] for i in range(k - 1)]
    segs.append(closure - pts[-1])  # wrap leg back to the start
    turning = 0.0
    for i in range(k):
        # the wrap leg re-enters the start rotated by the loop holonomy
        u = segs[i - 1] if i > 0 else hol_R @ segs[-1]
        v = segs[i]
        turning += math.atan2(u[0] * v[1] - u[1] * v[0], u[0] * v[0] + u[1] * v[1])
    residual = (turning - (2 * math.pi - enclosed_deficit) + math.pi) % (2 * math.pi) - math.pi
    return abs(float(residual))


@dataclass
class FrameField:
    """Per-patch angle of a parallel unit frame against each patch's x-axis."""

    angles: np.ndarray  # (num_patches,)
    seed: tuple  # (pid, angle)

    def vector(self, pid: int, which: int = 0) -> np.ndarray:
        a = self.angles[pid] + (0.0 if which == 0 else math.pi / 2)
        return np.array([math.cos(a), math.sin(a)])


def parallel_frame(cmplx: ConeComplex, seed_pid: int = 0, seed_angle: float = 0.0,
                   tol: float = 1e-12) -> FrameField:
    """Propagate a parallel frame across all gluings; requires trivial holonomy.

    The frame angle in a neighboring patch is the local angle plus the
    gluing rotation.  Any closed-loop inconsistency above ``tol`` aborts.
    """
    k = len(cmplx.patches)
    angles = np.full(k, np.nan)
    angles[seed_pid] = seed_angle
    stack = [seed_pid]
    worst = 0.0
    while stack:
        pid = stack.pop()
        for ei in range(cmplx.patches[pid].nedges()):
            nxt = cmplx.glue.get((pid, ei))
            if nxt is None:
                continue
            qid = nxt[0]
            cand = angles[pid] + cmplx.iso_rotation(pid, ei)
            if np.isnan(angles[qid]):
                angles[qid] = cand
                stack.append(qid)
            else:
                diff = abs((angles[qid] - cand + math.pi) % (2 * math.pi) - math.pi)
                worst = max(worst, diff)
                if diff > tol:
                    raise GluingError(
                        f"holonomy is not trivial: frame mismatch {diff:.3e} at "
                        f"patch {qid}"
                    )
    if np.any(np.isnan(angles)):
        raise GluingError("complex is not connected")
    ff = FrameField(angles=angles, seed=(seed_pid, seed_angle))
    ff.consistency = worst
    return ff


# ---------------------------------------------------------------------------
# distances: Steiner graph + unfold straightening


@dataclass
class PathGraph:
    node_frames: list  # node -> {pid: xy}
    patch_nodes: dict  # pid -> list of (node, xy)
    matrix: object  # csr adjacency
    density: float

    def node_count(self) -> int:
        return len(self.node_frames)


def build_path_graph(cmplx: ConeComplex, density: float = 20.0) -> PathGraph:
    """Steiner graph: shared nodes on glued edges, complete chords per patch.

    ``density`` is in points per unit length (Steiner count per edge is
    ceil(length * density)).  Chords crossing an excised tube are reweighted
    by the exact detour around the nearer cap disk.
    """
    # unify patch corners across gluings
    parent: dict = {}

    def find(x):
        root = x
        while parent.setdefault(root, root) != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(x, y):
        parent[find(x)] = find(y)

    for pid, patch in enumerate(cmplx.patches):
        for v in range(len(patch.verts)):
            find((pid, v))
    for (pid, ei), (qid, fj) in cmplx.glue.items():
        k1 = len(cmplx.patches[pid].verts)
        k2 = len(cmplx.patches[qid].verts)
        union((pid, ei), (qid, (fj + 1) % k2))
        union((pid, (ei + 1) % k1), (qid, fj))

    node_of: dict = {}
    node_frames: list = []
    for pid, patch in enumerate(cmplx.patches):
        for v in range(len(patch.verts)):
            root = find((pid, v))
            if root not in node_of:
                node_of[root] = len(node_frames)
                node_frames.append({})
            node_frames[node_of[root]][pid] = patch.verts[v]
    corner_node = {key: node_of[find(key)] for key in parent}

    # Steiner points per glued pair and per boundary edge
    seen = set()
    for (pid, ei), partner in list(cmplx.glue.items()) + [
        (key, None) for key in cmplx.boundary
    ]:
        if (pid, ei) in seen:
            continue
        seen.add((pid, ei))
        if partner is not None:
            seen.add(partner)
        a, b = cmplx.patches[pid].edge_points(ei)
        length = float(np.linalg.norm(b - a))
        m = int(math.ceil(length * density))
        for i in range(1, m + 1):
            f = i / (m + 1)
            node = len(node_frames)
            frames = {pid: a + f * (b - a)}
            if partner is not None:
                qid, fj = partner
                qa, qb = cmplx.patches[qid].edge_points(fj)
                frames[qid] = qb + f * (qa - qb)  # reversed orientation
            node_frames.append(frames)

    patch_nodes: dict = {pid: [] for pid in range(len(cmplx.patches))}
    for node, frames in enumerate(node_frames):
        for pid, xy in frames.items():
            patch_nodes[pid].append((node, xy))

    rows, cols, vals = [], [], []
    for pid, entries in patch_nodes.items():
        if len(entries) < 2:
            continue
        ids = np.array([e[0] for e in entries])
        xy = np.array([e[1] for e in entries])
        diff = xy[:, None, :] - xy[None, :, :]
        W = np.sqrt((diff**2).sum(-1))
        hole = cmplx.excised.get(cmplx.patches[pid].tri)
        if hole is not None:
            W = _hole_reweight(cmplx, pid, xy, W, hole)
        iu = np.triu_indices(len(ids), k=1)
        rows.append(ids[iu[0]])
        cols.append(ids[iu[1]])
        vals.append(W[iu])
    mat = coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(node_frames), len(node_frames)),
    ).tocsr()
    g = PathGraph(node_frames=node_frames, patch_nodes=patch_nodes, matrix=mat,
                  density=density)
    g.corner_node = corner_node
    return g


def _hole_reweight(cmplx, pid, xy, W, hole):
    """Replace chord weights crossing the excised tube by cap-disk detours."""
    dt = cmplx.dislocated[cmplx.patches[pid].tri]
    piece = cmplx.patches[pid]
    f_pt = dt._in_piece("F", dt.upper if piece.kind == "upper" else dt.lower)
    e_pt = dt._in_piece("E", dt.upper if piece.kind == "upper" else dt.lower)
    rho = hole["rho"]
    n = len(xy)
    for c_pt in ():
        pass
    # chord-versus-segment clearance test against the tube core EF
    a = np.asarray(f_pt)
    b = np.asarray(e_pt)
    for i in range(n):
        for j in range(i + 1, n):
            if _segments_clear(xy[i], xy[j], a, b, rho):
                continue
            W[i, j] = W[j, i] = min(
                _disk_detour(xy[i], xy[j], a, rho),
                _disk_detour(xy[i], xy[j], b, rho),
            )
    return W


def _segments_clear(p, q, a, b, rho) -> bool:
    """True when segment pq stays at distance >= rho from segment ab."""
    return _seg_seg_dist(p, q, a, b) >= rho


def _seg_seg_dist(p, q, a, b) -> float:
    d1 = q - p
    d2 = b - a
    r = p - a
    A = d1 @ d1
    B = d1 @ d2
    C = d2 @ d2
    D = d1 @ r
    E = d2 @ r
    den = A * C - B * B
    s = np.clip((B * E - C * D) / den, 0, 1) if den > 1e-300 else 0.0
    t = np.clip((A * E - B * D) / C, 0, 1) if C > 1e-300 else 0.0
    # one refinement pass of coordinate descent
    s = np.clip((B * t - D) / A, 0, 1) if A > 1e-300 else 0.0
    t = np.clip((B * s + E) / C, 0, 1) if C > 1e-300 else 0.0
    diff = (p + s * d1) - (a + t * d2)
    return float(np.hypot(diff[0], diff[1]))


def _disk_detour(p, q, center, rho) -> float:
    """Shortest path length from p to q around a disk of radius rho."""
    dp = p - center
    dq = q - center
    rp, rq = np.linalg.norm(dp), np.linalg.norm(dq)
    if rp <= rho or rq <= rho:
        return float(np.linalg.norm(q - p))  # endpoint inside tube: fall back
    ang = math.atan2(np.cross(dp, dq), dp @ dq)
    wrap = abs(ang) - math.acos(min(1.0, rho / rp)) - math.acos(min(1.0, rho / rq))
    if wrap <= 0:
        return float(np.linalg.norm(q - p))
    return float(math.sqrt(rp**2 - rho**2) + math.sqrt(rq**2 - rho**2) + rho * wrap)


def _aug_connect(cmplx: ConeComplex, graph: PathGraph, pid: int, xy: np.ndarray):
    """Chord weights from an interior point to the nodes of its patch."""
    entries = graph.patch_nodes[pid]
    ids = np.array([e[0] for e in entries])
    pts = np.array([e[1] for e in entries])
    w = np.linalg.norm(pts - xy, axis=1)
    hole = cmplx.excised.get(cmplx.patches[pid].tri)
    if hole is not None:
        dt = cmplx.dislocated[cmplx.patches[pid].tri]
        piece = dt.upper if cmplx.patches[pid].kind == "upper" else dt.lower
        a = np.asarray(dt._in_piece("F", piece))
        b = np.asarray(dt._in_piece("E", piece))
        rho = hole["rho"]
        for i in range(len(ids)):
            if not _segments_clear(xy, pts[i], a, b, rho):
                w[i] = min(_disk_detour(xy, pts[i], a, rho),
                           _disk_detour(xy, pts[i], b, rho))
    return ids, w


def graph_distances(cmplx: ConeComplex, graph: PathGraph, sources, targets=None,
                    return_predecessors: bool = False):
    """Dijkstra distances from interior source points to all graph nodes.

    ``sources`` is a list of (pid, xy).  Returns (dist, aug, predecessors?)
    where dist has shape (len(sources), node_count + len(sources)); the
    augmented matrix appends one virtual node per source.
    """
    n0 = graph.node_count()
    k = len(sources)
    rows, cols, vals = [], [], []
    for s, (pid, xy) in enumerate(sources):
        ids, w = _aug_connect(cmplx, graph, pid, np.asarray(xy, float))
        rows.append(np.full(len(ids), n0 + s))
        cols.append(ids)
        vals.append(w)
    aug = coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n0 + k, n0 + k),
    ).tocsr()
    full = graph.matrix.copy()
    full.resize((n0 + k, n0 + k))
    full = full + aug
    out = dijkstra(full, directed=False, indices=np.arange(n0, n0 + k),
                   return_predecessors=return_predecessors)
    if return_predecessors:
        return out[0], full, out[1]
    return out, full


def _node_patches(cmplx, graph, node, sources):
    n0 = graph.node_count()
    if node >= n0:
        return {sources[node - n0][0]}
    return set(graph.node_frames[node].keys())


def _node_xy(cmplx, graph, node, pid, sources):
    n0 = graph.node_count()
    if node >= n0:
        return np.asarray(sources[node - n0][1], float)
    return graph.node_frames[node][pid]


def _chain_to_crossings(cmplx, graph, chain, sources):
    """Turn a node chain into (start, crossings, end) with patch bookkeeping.

    Crossings are glued (pid, edge) pairs; chain nodes lying on gluings
    become crossing parameters, vertex nodes become fixed waypoints (the
    chain is split there and each piece straightened independently).
    """
    pieces = []
    cur = []
    for node in chain:
        n0 = graph.node_count()
        if node < n0 and len(graph.node_frames[node]) > 2:
            # vertex node: fixed waypoint, split the chain
            cur.append(node)
            pieces.append(cur)
            cur = [node]
        else:
            cur.append(node)
    pieces.append(cur)
    return [p for p in pieces if len(p) >= 2]


def _straighten_piece(cmplx, graph, nodes, sources, iters: int = 60,
                      tol: float = 1e-13):
    """Exact geodesic length within the sleeve of a node chain."""
    # identify the patch sequence and crossing segments
    n0 = graph.node_count()
    patches_of = [
        _node_patches(cmplx, graph, node, sources) for node in nodes
    ]
    # current patch for each step
    crossings = []  # (pid, ei) glued edges crossed, in order
    step_patch = []
    cur = None
    for i in range(len(nodes) - 1):
        shared = patches_of[i] & patches_of[i + 1]
        if not shared:
            raise GluingError("path chain has consecutive nodes with no shared patch")
        if cur is None or cur not in shared:
            cur = sorted(shared)[0]
        step_patch.append(cur)
    # crossings happen where the step patch changes
    segs = []  # developed crossing segment endpoints
    D_R, D_t = np.eye(2), np.zeros(2)
    dev_pts = [D_R @ _node_xy(cmplx, graph, nodes[0], step_patch[0], sources) + D_t]
    transforms = [(D_R.copy(), D_t.copy())]
    for i in range(1, len(nodes) - 1):
        p_prev, p_next = step_patch[i - 1], step_patch[i]
        if p_prev == p_next:
            segs.append(None)  # interior node kept fixed (rare: collinear chords)
            dev_pts.append(D_R @ _node_xy(cmplx, graph, nodes[i], p_prev, sources) + D_t)
            transforms.append((D_R.copy(), D_t.copy()))
            continue
        # nodes[i] sits on the gluing between p_prev and p_next: find the edge
        node = nodes[i]
        eidx = None
        for ei in range(cmplx.patches[p_prev].nedges()):
            nxt = cmplx.glue.get((p_prev, ei))
            if nxt is not None and nxt[0] == p_next:
                a, b = cmplx.patches[p_prev].edge_points(ei)
                xy = _node_xy(cmplx, graph, node, p_prev, sources)
                # the node must lie on this edge
                t = np.dot(xy - a, b - a) / max(float(np.dot(b - a, b - a)), 1e-300)
                if -1e-9 <= t <= 1 + 1e-9 and np.linalg.norm(a + t * (b - a) - xy) < 1e-9:
                    eidx = ei
                    break
        if eidx is None:
            raise GluingError("could not locate the crossing edge for a path node")
        a, b = cmplx.patches[p_prev].edge_points(eidx)
        segs.append((D_R @ a + D_t, D_R @ b + D_t))
        dev_pts.append(D_R @ _node_xy(cmplx, graph, nodes[i], p_prev, sources) + D_t)
        R, t = cmplx.iso(p_prev, eidx)
        # partner-frame point y has p_prev coords R^T (y - t)
        D_R, D_t = D_R @ R.T, D_t - D_R @ R.T @ t
        transforms.append((D_R.copy(), D_t.copy()))
    dev_pts.append(D_R @ _node_xy(cmplx, graph, nodes[-1], step_patch[-1], sources) + D_t)
    P = np.asarray(dev_pts)
    # straighten: project interior crossing points toward the chord
    for _ in range(iters):
        moved = 0.0
        for i in range(1, len(P) - 1):
            seg = segs[i - 1]
            if seg is None:
                continue
            a, b = seg
            prv, nxt = P[i - 1], P[i + 1]
            d_ab = b - a
            d_pn = nxt - prv
            den = d_ab[0] * d_pn[1] - d_ab[1] * d_pn[0]
            if abs(den) < 1e-300:
                t = np.dot(P[i] - a, d_ab) / np.dot(d_ab, d_ab)
            else:
                r = prv - a
                t = (r[0] * d_pn[1] - r[1] * d_pn[0]) / den
            t = min(1.0, max(0.0, float(t)))
            new = a + t * d_ab
            moved = max(moved, float(np.linalg.norm(new - P[i])))
            P[i] = new
        if moved < tol:
            break
    length = float(np.sum(np.linalg.norm(np.diff(P, axis=0), axis=1)))
    return length, len(segs)


def refined_distance(cmplx, graph, dist_row, predecessors_row, target_node, sources):
    """Straightened distance from the virtual source to a target node."""
    if not np.isfinite(dist_row[target_node]):
        raise GluingError("disconnected distance query (assembly bug)")
    chain = []
    node = target_node
    while node >= 0:
        chain.append(int(node))
        node = predecessors_row[node]
    chain.reverse()
    if len(chain) == 1:
        return 0.0, 0
    total = 0.0
    crossings = 0
    for piece in _chain_to_crossings(cmplx, graph, chain, sources):
        L, k = _straighten_piece(cmplx, graph, piece, sources)
        total += L
        crossings += k
    return total, crossings


def shortest_path(cmplx: ConeComplex, graph: PathGraph, p, q):
    """Distance between two points (pid, xy) on the complex.

    Dijkstra on the Steiner graph finds the sleeve; unfolding straightens
    the path inside it.  Returns dict with ``distance`` (refined),
    ``graph_distance`` (upper bound before refinement) and ``crossings``.
    The pair is canonicalized so the result is exactly symmetric.
    """
    a, b = p, q
    key_a = (a[0], float(a[1][0]), float(a[1][1]))
    key_b = (b[0], float(b[1][0]), float(b[1][1]))
    if key_b < key_a:
        a, b = b, a
    sources = [(a[0], np.asarray(a[1], float)), (b[0], np.asarray(b[1], float))]
    dist, full, pred = graph_distances(cmplx, graph, sources, return_predecessors=True)
    n0 = graph.node_count()
    gd = float(dist[0, n0 + 1])
    refined, crossings = refined_distance(cmplx, graph, dist[0], pred[0], n0 + 1, sources)
    return {"distance": min(refined, gd), "graph_distance": gd, "crossings": crossings}
