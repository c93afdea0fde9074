"""Locally-Euclidean triangles enclosing an edge dislocation.

Given target edge lengths (a, b, c) and angles (alpha, beta, gamma) with
alpha + beta + gamma = pi that are *not* Euclidean-compatible (the law of
sines fails), no flat triangle realizes them.  They are realized instead by
a pair of planar polygons glued along an interior seam; the seam carries a
cone-point dipole: a deficit cone F of total angle 2 pi - 2 theta and an
excess cone E of total angle 2 pi + 2 theta, joined by the dislocation edge
EF.  The seam runs from one side of the triangle to another along a
straight axis, with a jog of length |EF| between F and E; crossing the far
axis edge is a pure translation by the dipole vector (magnitude
|eps| = 2 |EF| sin theta), so a loop around the whole dipole has trivial
rotation.

`solve_dipole` computes the axis angle phi and the signed magnitude eps
from the target data after the canonical vertex ordering
(tan phi = (b - a cos gamma - c cos alpha) / (a sin gamma - c sin alpha),
eps = (c sin alpha - a sin gamma) / cos phi, phi in (0, gamma)),
`build_triangle` produces the two polygons with explicit coordinates, and
`verify_triangle` audits every construction invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "DipoleSolution",
    "PlanarPiece",
    "DislocatedTriangle",
    "DipoleError",
    "solve_dipole",
    "build_triangle",
    "verify_triangle",
]

_ROLES = ("side_a", "side_b", "side_c", "seam_axis_f", "seam_jog", "seam_axis_e")


class DipoleError(ValueError):
    """The dipole equations have no admissible solution for the input."""


@dataclass(frozen=True)
class DipoleSolution:
    """Axis angle phi against side b, signed magnitude eps, and the ordering."""

    phi: float
    eps: float
    elongated_edge: str  # 'opposite_gamma' (eps > 0), 'opposite_alpha' (eps < 0), 'none'
    vertex_order: tuple  # input corner index playing (A, B, C)
    trivial: bool
    ordered: tuple  # (a, b, c, alpha, beta, gamma) in the canonical labeling

    @property
    def jog_length(self):
        """|EF| for a disclination angle theta: |eps| / (2 sin theta)."""
        return abs(self.eps)


@dataclass
class PlanarPiece:
    """A convex-or-reflex planar polygon piece of the glued triangle.

    ``roles[i]`` labels the edge verts[i] -> verts[i+1]; corners is a map
    from ordered corner labels ('A', 'B', 'C') to vertex indices.
    """

    verts: np.ndarray  # (k, 2), CCW
    roles: list
    corners: dict

    def edge(self, i: int):
        return self.verts[i], self.verts[(i + 1) % len(self.verts)]

    def role_index(self, role: str) -> int:
        return self.roles.index(role)

    def interior_angle(self, i: int) -> float:
        p = self.verts[i]
        prv = self.verts[i - 1]
        nxt = self.verts[(i + 1) % len(self.verts)]
        a1 = math.atan2(*(prv - p)[::-1])
        a2 = math.atan2(*(nxt - p)[::-1])
        return (a1 - a2) % (2 * math.pi)

    def signed_area(self) -> float:
        x, y = self.verts[:, 0], self.verts[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass
class DislocatedTriangle:
    """The glued pair of planar pieces realizing the target triangle data.

    Both pieces are laid out in one development frame in which the seam-F
    axis gluing is the identity and the seam-E axis gluing is translation by
    ``dipole_vector``.  F is the deficit cone (total angle 2 pi - 2 theta),
    E the excess cone (2 pi + 2 theta); both are seam corners shared by the
    two pieces.
    """

    target: tuple  # (a, b, c, alpha, beta, gamma) as requested (input labeling)
    theta: float
    dipole: DipoleSolution
    upper: PlanarPiece  # contains corners A and C and all of side b
    lower: Optional[PlanarPiece]  # contains corner B; None for the trivial case
    f_point: Optional[np.ndarray]  # deficit cone coords (upper frame)
    e_point: Optional[np.ndarray]
    f_point_lower: Optional[np.ndarray]  # the same cones in the lower frame
    e_point_lower: Optional[np.ndarray]
    dipole_vector: Optional[np.ndarray]  # translation of the seam-E axis gluing
    side_splits: dict = field(default_factory=dict)
    # side label ('a'|'b'|'c') -> list of (piece_name, edge_role, t0, t1); t is
    # arclength from the side's first canonical endpoint (a: C->B, b: C->A, c: A->B)

    @property
    def is_trivial(self) -> bool:
        return self.lower is None

    @property
    def ef_length(self) -> float:
        return 0.0 if self.is_trivial else float(np.linalg.norm(self.f_point - self.e_point))

    def cone_angles(self) -> dict:
        """Total angle around each cone point, summed over both pieces."""
        if self.is_trivial:
            return {}
        out = {}
        for name in ("F", "E"):
            total = 0.0
            for piece in (self.upper, self.lower):
                ref = self._in_piece(name, piece)
                for i, v in enumerate(piece.verts):
                    if np.linalg.norm(v - ref) < 1e-12:
                        total += piece.interior_angle(i)
            out[name] = total
        return out

    def _in_piece(self, name: str, piece: PlanarPiece) -> np.ndarray:
        if piece is self.lower:
            return self.f_point_lower if name == "F" else self.e_point_lower
        return self.f_point if name == "F" else self.e_point


# ---------------------------------------------------------------------------


def _rot90(v):
    return np.array([-v[1], v[0]])


def solve_dipole(a, b, c, alpha, beta, gamma,
                 trivial_tol: float = 1e-12, angle_sum_tol: float = 1e-7) -> DipoleSolution:
    """Solve the dipole equations after the canonical monotone vertex ordering.

    The three corners are relabeled so that side/sin(angle) is monotone and
    the numerator/denominator signs make tan(phi) positive.  Euclidean-
    compatible input returns the trivial solution eps = 0.  Angle sums are
    renormalized to pi exactly (inputs carry solver tolerance); sums off by
    more than ``angle_sum_tol`` are rejected.
    """
    sides = np.array([a, b, c], float)
    angs = np.array([alpha, beta, gamma], float)
    if np.any(sides <= 0):
        raise DipoleError("side lengths must be positive")
    if (sides.sum() - 2 * sides.max()) <= 0:
        raise DipoleError("triangle inequality violated")
    res = angs.sum() - math.pi
    if abs(res) > angle_sum_tol:
        raise DipoleError(f"angle sum off pi by {res:.3e}")
    angs = angs - res / 3.0

    s = sides / np.sin(angs)
    scale = sides.sum()
    if (s.max() - s.min()) <= trivial_tol * scale:
        return DipoleSolution(
            phi=0.0, eps=0.0, elongated_edge="none",
            vertex_order=(0, 1, 2), trivial=True,
            ordered=(a, b, c, *angs),
        )
    order = np.argsort(s)  # increasing
    dec = (int(order[2]), int(order[1]), int(order[0]))  # s_A > s_B > s_C
    inc = (int(order[0]), int(order[1]), int(order[2]))

    def parts(perm):
        ia, ib, ic = perm
        aa, bb, cc = sides[ia], sides[ib], sides[ic]
        al, be, ga = angs[ia], angs[ib], angs[ic]
        N = bb - aa * math.cos(ga) - cc * math.cos(al)
        D = aa * math.sin(ga) - cc * math.sin(al)
        return (aa, bb, cc, al, be, ga), N, D

    _, N, _ = parts(dec)
    perm = dec if N > 0 else inc
    labels, N, D = parts(perm)
    if abs(D) <= trivial_tol * scale:
        raise DipoleError(
            f"law-of-sines denominator vanishes under both orderings (N={N:.3e}); "
            "no admissible dipole axis"
        )
    tanphi = N / D
    if tanphi <= 0:
        raise DipoleError(f"ordering failed to make tan(phi) positive (N={N:.3e}, D={D:.3e})")
    phi = math.atan(tanphi)
    ga = labels[5]
    if not (0.0 < phi < ga):
        raise DipoleError(f"axis angle phi={phi:.4f} outside (0, gamma={ga:.4f})")
    eps = -D / math.cos(phi)
    return DipoleSolution(
        phi=phi, eps=eps,
        elongated_edge="opposite_gamma" if eps > 0 else "opposite_alpha",
        vertex_order=perm, trivial=False, ordered=labels,
    )


def build_triangle(a, b, c, alpha, beta, gamma, theta,
                   dipole: Optional[DipoleSolution] = None) -> DislocatedTriangle:
    """Construct the glued planar pieces for the target triangle data.

    The dislocation edge EF is centered at the incenter of the comparison
    triangle; the seam axis meets two sides of the triangle.  Raises
    DipoleError when theta is degenerate or the seam does not fit.
    """
    if not (0.0 < theta < math.pi / 2):
        raise DipoleError("disclination angle must lie in (0, pi/2)")
    dip = dipole if dipole is not None else solve_dipole(a, b, c, alpha, beta, gamma)
    target = (a, b, c, alpha, beta, gamma)
    if dip.trivial:
        return _trivial_triangle(target, theta, dip)
    aa, bb, cc, al, be, ga = dip.ordered

    C = np.zeros(2)
    A = np.array([bb, 0.0])
    u_AB = np.array([-math.cos(al), math.sin(al)])
    u_CB = np.array([math.cos(ga), math.sin(ga)])
    B = A + cc * u_AB
    N = bb - aa * math.cos(ga) - cc * math.cos(al)
    D = aa * math.sin(ga) - cc * math.sin(al)
    t_glue = np.array([-N, D])
    nrm = float(np.linalg.norm(t_glue))
    n_hat = t_glue / nrm
    ax = np.array([D, N]) / nrm
    ef = abs(dip.eps) / (2.0 * math.sin(theta))
    incenter = (aa * A + bb * B + cc * C) / (aa + bb + cc)
    # the seam line must separate B from A and C: its offset along the axis
    # normal has to lie strictly between B's projection and the nearer of
    # A, C; slide the hub off the incenter into the middle of that band
    # when needed (the dislocation line may be shifted freely)
    s_A, s_B, s_C = (float(np.dot(n_hat, X)) for X in (A, B, C))
    lo, hi = (max(s_A, s_C), s_B) if s_B > max(s_A, s_C) else (s_B, min(s_A, s_C))
    if hi <= lo:
        raise DipoleError("no seam line separates corner B from corners A and C")
    w = hi - lo
    s_hub = min(max(float(np.dot(n_hat, incenter)), lo + 0.25 * w), hi - 0.25 * w)
    hub = incenter + (s_hub - float(np.dot(n_hat, incenter))) * n_hat

    def line_hit(p0, d0, q0, d1, seg_len, what):
        # p0 + s d0 = q0 + t d1 with t interior to the side segment
        M = np.array([d0, -d1]).T
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        if abs(det) < 1e-300:
            raise DipoleError(f"seam axis parallel to {what}")
        rhs = q0 - p0
        s = (M[1, 1] * rhs[0] - M[0, 1] * rhs[1]) / det
        t = (-M[1, 0] * rhs[0] + M[0, 0] * rhs[1]) / det
        if not (1e-12 < t < seg_len - 1e-12):
            raise DipoleError(f"seam foot falls outside {what} (t={t:.3e})")
        return s, t

    # orient the axis from the side-c foot toward the side-a foot
    s_c, _ = line_hit(hub, ax, A, u_AB, cc, "side c")
    s_a, _ = line_hit(hub, ax, C, u_CB, aa, "side a")
    if s_c * s_a >= 0:
        raise DipoleError("seam hub does not lie between sides c and a")
    if s_a < 0:
        ax = -ax
    # re-anchor the frame at the hub so the short dislocation edge is not
    # computed as a difference of large nearly-equal coordinates
    A, B, C, incenter = A - hub, B - hub, C - hub, incenter - hub
    jog = ef * (math.cos(theta) * ax + math.sin(theta) * n_hat)
    P1 = -jog / 2.0  # seam corner toward side c
    P2 = +jog / 2.0  # seam corner toward side a
    s1, t_c = line_hit(P1, -ax, A, u_AB, cc, "side c")
    s2, t_a = line_hit(P2, ax, C, u_CB, aa, "side a")
    if s1 <= 0 or s2 <= 0:
        raise DipoleError("seam jog crosses a triangle side")
    D_pt = P1 - s1 * ax
    G_pt = P2 + s2 * ax

    upper = PlanarPiece(
        verts=np.array([A, D_pt, P1, P2, G_pt, C]),
        roles=["side_c", "seam_axis_c", "seam_jog", "seam_axis_a", "side_a", "side_b"],
        corners={"A": 0, "C": 5},
    )
    lower = PlanarPiece(
        verts=np.array([B, G_pt - t_glue, P2 - t_glue, P1, D_pt]),
        roles=["side_a", "seam_axis_a", "seam_jog", "seam_axis_c", "side_c"],
        corners={"B": 0},
    )
    if upper.signed_area() < 0 or lower.signed_area() < 0:
        raise DipoleError("degenerate seam: a glued piece is not positively oriented")

    # deficit cone F: adjacent to side c when eps > 0, to side a when eps < 0;
    # P1 keeps its coordinates in the lower frame, P2 is translated by -t_glue
    if dip.eps > 0:
        f_pt, e_pt = P1, P2
        f_lo, e_lo = P1, P2 - t_glue
    else:
        f_pt, e_pt = P2, P1
        f_lo, e_lo = P2 - t_glue, P1
    # relabel seam axis roles relative to the cones
    rename = {"seam_axis_c": "seam_axis_f" if dip.eps > 0 else "seam_axis_e",
              "seam_axis_a": "seam_axis_e" if dip.eps > 0 else "seam_axis_f"}
    for piece in (upper, lower):
        piece.roles = [rename.get(r, r) for r in piece.roles]

    splits = {
        "c": [("upper", "side_c", 0.0, t_c), ("lower", "side_c", t_c, cc)],
        "a": [("upper", "side_a", 0.0, t_a), ("lower", "side_a", t_a, aa)],
        "b": [("upper", "side_b", 0.0, bb)],
    }
    return DislocatedTriangle(
        target=target, theta=theta, dipole=dip,
        upper=upper, lower=lower,
        f_point=np.asarray(f_pt), e_point=np.asarray(e_pt),
        f_point_lower=np.asarray(f_lo), e_point_lower=np.asarray(e_lo),
        dipole_vector=t_glue, side_splits=splits,
    )


def _trivial_triangle(target, theta, dip) -> DislocatedTriangle:
    a, b, c, al, be, ga = dip.ordered
    C = np.zeros(2)
    A = np.array([b, 0.0])
    B = A + c * np.array([-math.cos(al), math.sin(al)])
    piece = PlanarPiece(
        verts=np.array([C, A, B]),
        roles=["side_b", "side_c", "side_a"],
        corners={"C": 0, "A": 1, "B": 2},
    )
    splits = {
        "c": [("upper", "side_c", 0.0, c)],
        "a": [("upper", "side_a", 0.0, a)],
        "b": [("upper", "side_b", 0.0, b)],
    }
    return DislocatedTriangle(
        target=target, theta=theta, dipole=dip, upper=piece, lower=None,
        f_point=None, e_point=None, f_point_lower=None, e_point_lower=None,
        dipole_vector=None, side_splits=splits,
    )


# ---------------------------------------------------------------------------
# audit


def _ray_angle(u, v):
    d = float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))
    return math.acos(min(1.0, max(-1.0, d)))


def verify_triangle(dt: DislocatedTriangle, length_tol: float = 1e-9,
                    cone_tol: float = 1e-12) -> dict:
    """Measure the construction invariants; returns a record with pass flags.

    Checks: glued edge pairs have equal lengths, the assembled boundary
    reproduces the target side lengths and corner angles, seam ray angles
    are pi - theta, cone angles are 2 pi -+ 2 theta, |eps| = 2 |EF| sin
    theta, the dislocation sits in the interior with positive margin, and
    the pieces are simple polygons.
    """
    rec: dict = {"violations": []}
    a, b, c, al, be, ga = dt.dipole.ordered
    th = dt.theta
    up = dt.upper

    def fail(msg):
        rec["violations"].append(msg)

    if dt.is_trivial:
        vA, vB, vC = (up.verts[up.corners[k]] for k in ("A", "B", "C"))
        rec["sides"] = {
            "a": float(np.linalg.norm(vB - vC)),
            "b": float(np.linalg.norm(vA - vC)),
            "c": float(np.linalg.norm(vB - vA)),
        }
        rec["angles"] = {
            "alpha": _ray_angle(vB - vA, vC - vA),
            "beta": _ray_angle(vA - vB, vC - vB),
            "gamma": _ray_angle(vA - vC, vB - vC),
        }
        rec["eps"] = 0.0
        rec["cone_angles"] = {}
    else:
        lo = dt.lower
        t = dt.dipole_vector
        vA = up.verts[up.corners["A"]]
        vC = up.verts[up.corners["C"]]
        vB = lo.verts[lo.corners["B"]]
        iD_up = up.role_index("side_c")  # edge A -> D
        D_up = up.verts[(iD_up + 1) % len(up.verts)]
        iG_up = up.role_index("side_a")  # edge G -> C
        G_up = up.verts[iG_up]
        iD_lo = lo.role_index("side_c")  # edge D' -> B
        D_lo = lo.verts[iD_lo]
        iG_lo = lo.role_index("side_a")  # edge B -> G'
        G_lo = lo.verts[(iG_lo + 1) % len(lo.verts)]
        # glued lengths
        for role in ("seam_axis_f", "seam_jog", "seam_axis_e"):
            e1 = up.edge(up.role_index(role))
            e2 = lo.edge(lo.role_index(role))
            l1 = np.linalg.norm(e1[1] - e1[0])
            l2 = np.linalg.norm(e2[1] - e2[0])
            if abs(l1 - l2) > 1e-12 * max(1.0, l1):
                fail(f"glued pair {role} length mismatch {l1 - l2:.3e}")
        # assembled sides
        sides = {
            "a": float(np.linalg.norm(G_up - vC) + np.linalg.norm(vB - G_lo)),
            "b": float(np.linalg.norm(vA - vC)),
            "c": float(np.linalg.norm(D_up - vA) + np.linalg.norm(vB - D_lo)),
        }
        rec["sides"] = sides
        for key, tgt in zip(("a", "b", "c"), (a, b, c)):
            if abs(sides[key] - tgt) > length_tol * max(1.0, tgt):
                fail(f"side {key} off target by {sides[key] - tgt:.3e}")
        # straightness across the seam feet
        d1 = (D_up - vA) / np.linalg.norm(D_up - vA)
        d2 = (vB - D_lo) / np.linalg.norm(vB - D_lo)
        if np.linalg.norm(d1 - d2) > 1e-9:
            fail("side c bends at the seam foot")
        g1 = (vC - G_up) / np.linalg.norm(vC - G_up)
        g2 = (G_lo - vB) / np.linalg.norm(G_lo - vB)
        if np.linalg.norm(g1 - g2) > 1e-9:
            fail("side a bends at the seam foot")
        rec["angles"] = {
            "alpha": _ray_angle(D_up - vA, vC - vA),
            "beta": _ray_angle(D_lo - vB, G_lo - vB),
            "gamma": _ray_angle(vA - vC, G_up - vC),
        }
        for key, tgt in zip(("alpha", "beta", "gamma"), (al, be, ga)):
            if abs(rec["angles"][key] - tgt) > length_tol:
                fail(f"angle {key} off target by {rec['angles'][key] - tgt:.3e}")
        # seam ray angles pi - theta at both seam corners in both pieces
        for piece in (up, lo):
            jog_i = piece.role_index("seam_jog")
            for corner in (jog_i, (jog_i + 1) % len(piece.verts)):
                p = piece.verts[corner]
                prv = piece.verts[corner - 1]
                nxt = piece.verts[(corner + 1) % len(piece.verts)]
                angle = _ray_angle(prv - p, nxt - p)
                if abs(angle - (math.pi - th)) > 1e-9:
                    fail(f"seam ray angle off pi - theta by {angle - (math.pi - th):.3e}")
        # cone angles
        cones = {"F": 0.0, "E": 0.0}
        for name in cones:
            for piece in (up, lo):
                ref = dt._in_piece(name, piece)
                hit = [i for i, v in enumerate(piece.verts)
                       if np.linalg.norm(v - ref) < 1e-12]
                if len(hit) != 1:
                    fail(f"cone {name} not matched to one corner of a piece")
                    continue
                cones[name] += piece.interior_angle(hit[0])
        rec["cone_angles"] = cones
        if abs(cones.get("F", 0.0) - (2 * math.pi - 2 * th)) > cone_tol:
            fail(f"deficit cone angle off 2pi-2theta by {cones['F'] - 2 * math.pi + 2 * th:.3e}")
        if abs(cones.get("E", 0.0) - (2 * math.pi + 2 * th)) > cone_tol:
            fail(f"excess cone angle off 2pi+2theta by {cones['E'] - 2 * math.pi - 2 * th:.3e}")
        # dipole magnitude
        rec["eps"] = dt.dipole.eps
        if abs(abs(dt.dipole.eps) - 2.0 * dt.ef_length * math.sin(th)) > 1e-12 * max(
            1.0, abs(dt.dipole.eps)
        ):
            fail("|eps| != 2 |EF| sin theta")
        if abs(np.linalg.norm(dt.dipole_vector) - abs(dt.dipole.eps)) > 1e-9 * max(
            1.0, abs(dt.dipole.eps)
        ):
            fail("gluing translation differs from the dipole magnitude")
        # interior margin of the dislocation (distance to the outer boundary)
        margin = _dislocation_margin(dt)
        rec["margin"] = margin
        if margin <= 0:
            fail("dislocation touches the boundary")
        # simple polygons
        try:
            from shapely.geometry import Polygon

            for piece, nm in ((up, "upper"), (lo, "lower")):
                if not Polygon(piece.verts).is_valid:
                    fail(f"{nm} piece polygon is not simple")
        except ImportError:
            pass
    rec["passed"] = not rec["violations"]
    return rec


def _dislocation_margin(dt: DislocatedTriangle) -> float:
    """Distance of the dislocation segment to the piece boundaries."""
    worst = math.inf
    for piece in (dt.upper, dt.lower):
        pts = [dt._in_piece("F", piece), dt._in_piece("E", piece)]
        k = len(piece.verts)
        for i in range(k):
            if piece.roles[i] in ("seam_axis_f", "seam_jog", "seam_axis_e"):
                continue
            a_, b_ = piece.edge(i)
            ab = b_ - a_
            denom = float(ab @ ab)
            for p in pts:
                tt = min(1.0, max(0.0, float((p - a_) @ ab) / denom))
                worst = min(worst, float(np.linalg.norm(a_ + tt * ab - p)))
    return worst
