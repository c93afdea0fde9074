"""Geodesic integration and comparison bounds.

Two kinds of autoparallel curves are integrated on a ChartSurface:

* ``"levi_civita"`` -- locally length-minimizing curves of the metric
  (called *segments* throughout), and
* ``"nabla"`` -- autoparallel curves of the V-twisted metric connection
  (called *geodesics*); they carry metric curvature kappa with
  kappa^2 = |V|^2 - g(V, gamma')^2 / |gamma'|^2, so kappa <= |V|.

The integrator is a fixed-step classical RK4 on batched states; two-point
problems are solved by shooting over the departure angle and length with a
damped Newton iteration seeded from the chord.  The module also provides
the explicit length-vs-distance comparison bound: a unit-speed curve with
curvature at most lam on a surface with Gaussian curvature at most k_upper
and endpoint distance d has length ell with d <= ell <= bound(d), where
bound is the closed form returned by `length_bound_from_distance`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from . import surface as sf
from .surface import ChartSurface, DomainError

__all__ = [
    "GeodesicPath",
    "ComparisonThresholds",
    "ShootingError",
    "shoot",
    "shoot_batch",
    "connect",
    "connect_batch",
    "exp_map",
    "exp_map_batch",
    "lc_distance",
    "curve_curvature",
    "length_threshold",
    "length_bound_from_distance",
    "distance_from_length_bound",
    "verify_length_bound",
    "hausdorff_geodesic_segment",
    "verify_angle_bound",
    "radial_profile_closed_form",
    "get_bounds",
]


class ShootingError(RuntimeError):
    """The boundary-value solver failed to converge; carries the residual."""


@dataclass
class GeodesicPath:
    """A sampled autoparallel curve in arclength parametrization."""

    kind: str
    ts: np.ndarray  # (m,)
    points: np.ndarray  # (m, 2)
    velocities: np.ndarray  # (m, 2), unit g-norm
    length: float
    exited: bool = False

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    @property
    def endpoints(self):
        return self.points[0], self.points[-1]

    def velocity_at(self, t: float) -> np.ndarray:
        i = int(np.clip(np.searchsorted(self.ts, t), 0, len(self.ts) - 1))
        return self.velocities[i]

    def point_at(self, t: float) -> np.ndarray:
        t = float(np.clip(t, self.ts[0], self.ts[-1]))
        i = int(np.clip(np.searchsorted(self.ts, t) - 1, 0, len(self.ts) - 2))
        w = (t - self.ts[i]) / (self.ts[i + 1] - self.ts[i])
        return (1 - w) * self.points[i] + w * self.points[i + 1]


# ---------------------------------------------------------------------------
# integration


def _rhs(surf: ChartSurface, kind: str, y: np.ndarray) -> np.ndarray:
    pts = y[..., :2]
    vel = y[..., 2:]
    if kind == "nabla":
        gamma = sf.connection_coefficients(surf, pts)
    elif kind == "levi_civita":
        gamma = sf.levi_civita(surf, pts)
    else:
        raise ValueError(f"unknown curve kind {kind!r}")
    acc = -np.einsum("...kij,...i,...j->...k", gamma, vel, vel)
    return np.concatenate([vel, acc], axis=-1)


def _num_steps(lengths: np.ndarray, step_target: float, min_steps: int = 100) -> int:
    """Step count: per-curve step = min(step_target, length / min_steps)."""
    lmax = float(np.max(lengths)) if np.size(lengths) else 0.0
    if lmax <= 0:
        return 1
    return max(int(math.ceil(lmax / step_target)), min_steps)


def shoot_batch(
    surf: ChartSurface,
    kind: str,
    starts: np.ndarray,
    dirs: np.ndarray,
    lengths: np.ndarray,
    step_target: float = 1e-3,
    record: bool = False,
    min_steps: int = 100,
):
    """Integrate a batch of curves; dirs are normalized to unit g-norm.

    Returns dict with ``end`` (N, 2), ``end_vel`` (N, 2) and, when recording,
    ``ts`` (m+1,) fractional times, ``points`` (N, m+1, 2), ``vels``.
    """
    p0 = np.atleast_2d(np.asarray(starts, dtype=float))
    d0 = np.atleast_2d(np.asarray(dirs, dtype=float))
    L = np.atleast_1d(np.asarray(lengths, dtype=float))
    nrm = sf.norm_g(surf, p0, d0)
    d0 = d0 / nrm[..., None]
    m = _num_steps(L, step_target, min_steps)
    dt = (L / m)[:, None]
    y = np.concatenate([p0, d0], axis=-1)
    if record:
        traj = np.empty((p0.shape[0], m + 1, 4))
        traj[:, 0] = y
    for i in range(m):
        k1 = _rhs(surf, kind, y)
        k2 = _rhs(surf, kind, y + 0.5 * dt * k1)
        k3 = _rhs(surf, kind, y + 0.5 * dt * k2)
        k4 = _rhs(surf, kind, y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if record:
            traj[:, i + 1] = y
    out = {"end": y[:, :2], "end_vel": y[:, 2:], "steps": m}
    if record:
        out["ts"] = np.linspace(0.0, 1.0, m + 1)
        out["points"] = traj[:, :, :2]
        out["vels"] = traj[:, :, 2:]
    return out


def shoot(
    surf: ChartSurface,
    kind: str,
    start,
    direction,
    length: float,
    step_target: float = 1e-3,
    max_samples: int = 257,
) -> GeodesicPath:
    """Single curve of the requested kind and length from a start direction.

    If the curve leaves the chart domain the returned path is truncated at
    the first outside sample and flagged ``exited``.
    """
    surf.require_in_domain(np.asarray(start, float))
    if length <= 0:
        p = np.asarray(start, float)
        d = np.asarray(direction, float)
        d = d / sf.norm_g(surf, p, d)
        return GeodesicPath(kind, np.zeros(1), p[None, :], d[None, :], 0.0)
    res = shoot_batch(surf, kind, [start], [direction], [length], step_target, record=True)
    pts = res["points"][0]
    vels = res["vels"][0]
    ts = res["ts"] * length
    inside = surf.in_domain(pts, tol=1e-9)
    exited = not bool(np.all(inside))
    if exited:
        cut = int(np.argmin(inside))  # first False
        cut = max(cut, 1)
        pts, vels, ts = pts[:cut], vels[:cut], ts[:cut]
        length = float(ts[-1])
    stride = max(1, (len(ts) - 1) // (max_samples - 1)) if len(ts) > 1 else 1
    keep = np.unique(np.r_[np.arange(0, len(ts), stride), len(ts) - 1])
    return GeodesicPath(kind, ts[keep], pts[keep], vels[keep], float(length), exited)


def exp_map_batch(surf: ChartSurface, starts, vecs, step_target: float = 1e-3,
                  min_steps: int = 100):
    """Endpoints (and end velocities) of nabla-geodesics with initial vectors."""
    p0 = np.atleast_2d(np.asarray(starts, float))
    v = np.atleast_2d(np.asarray(vecs, float))
    L = sf.norm_g(surf, p0, v)
    safe = np.where(L > 0, L, 1.0)
    res = shoot_batch(surf, "nabla", p0, v / safe[..., None], L, step_target,
                      min_steps=min_steps)
    end = np.where((L > 0)[..., None], res["end"], p0)
    return end, res["end_vel"]


def exp_map(surf: ChartSurface, p, v, step_target: float = 1e-3) -> np.ndarray:
    """Exponential map of the V-twisted connection at p applied to v."""
    surf.require_in_domain(np.asarray(p, float))
    end, _ = exp_map_batch(surf, [p], [v], step_target)
    if not np.all(surf.in_domain(end)):
        raise DomainError("exp_map target left the chart domain")
    return end[0]


# ---------------------------------------------------------------------------
# two-point problems


def _wrap_diff(surf: ChartSurface, delta: np.ndarray) -> np.ndarray:
    out = np.array(delta, dtype=float, copy=True)
    u0, u1, v0, v1 = surf.domain
    for ax, per in enumerate(surf.periodic):
        if per:
            span = (u1 - u0) if ax == 0 else (v1 - v0)
            out[..., ax] = (out[..., ax] + span / 2) % span - span / 2
    return out


def _initial_guess(surf: ChartSurface, P: np.ndarray, Q: np.ndarray):
    delta = _wrap_diff(surf, Q - P)
    mid = P + 0.5 * delta
    ell = sf.norm_g(surf, mid, delta)
    ang = sf.angle_of(surf, P, delta)
    return ang, np.maximum(ell, 1e-14)


def _newton_connect(surf, kind, P, Q, ang0, ell0, tol, max_iter, step_target):
    """Damped Newton on (departure angle, length); frozen once converged."""
    n = P.shape[0]
    ang = np.array(ang0, float, copy=True)
    ell = np.array(ell0, float, copy=True)
    conv = np.zeros(n, dtype=bool)
    res_norm = np.full(n, np.inf)
    da, dl = 1e-7, 1e-7
    for _ in range(max_iter):
        idx = np.where(~conv)[0]
        if idx.size == 0:
            break
        Pa, Qa = P[idx], Q[idx]
        a0, l0 = ang[idx], ell[idx]
        stacked_a = np.concatenate([a0, a0 + da, a0])
        stacked_l = np.concatenate([l0, l0, l0 + dl])
        stacked_P = np.concatenate([Pa, Pa, Pa])
        dirs = sf.vector_from_angle(surf, stacked_P, stacked_a)
        out = shoot_batch(surf, kind, stacked_P, dirs, stacked_l, step_target)
        ends = out["end"].reshape(3, len(idx), 2)
        r0 = _wrap_diff(surf, ends[0] - Qa)
        ra = _wrap_diff(surf, ends[1] - Qa)
        rl = _wrap_diff(surf, ends[2] - Qa)
        rn = sf.norm_g(surf, Qa, r0)
        res_norm[idx] = rn
        newly = rn <= tol
        conv[idx[newly]] = True
        upd = ~newly
        if not upd.any():
            continue
        J = np.empty((int(upd.sum()), 2, 2))
        J[:, :, 0] = (ra[upd] - r0[upd]) / da
        J[:, :, 1] = (rl[upd] - r0[upd]) / dl
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        det = np.where(np.abs(det) > 1e-300, det, 1e-300)
        rhs = r0[upd]
        delta = np.empty_like(rhs)
        delta[:, 0] = (J[:, 1, 1] * rhs[:, 0] - J[:, 0, 1] * rhs[:, 1]) / det
        delta[:, 1] = (-J[:, 1, 0] * rhs[:, 0] + J[:, 0, 0] * rhs[:, 1]) / det
        iu = idx[upd]
        ang[iu] -= np.clip(delta[:, 0], -0.5, 0.5)
        ell[iu] = np.maximum(ell[iu] - np.clip(delta[:, 1], -0.5 * ell[iu], 0.5 * ell[iu]),
                             1e-14)
    return ang, ell, res_norm, conv


def connect_batch(
    surf: ChartSurface,
    kind: str,
    P,
    Q,
    tol: float = 1e-9,
    max_iter: int = 30,
    step_target: float = 1e-3,
    multi_start: int = 5,
):
    """Solve the two-point problem for each row of P, Q by angle/length shooting.

    Returns dict with ``angle`` (departure angle), ``length``, ``residual``
    (g-norm endpoint miss) and ``converged``.  Items that fail from the chord
    guess are retried from a fan of nearby departure angles.
    """
    P = np.atleast_2d(np.asarray(P, float))
    Q = np.atleast_2d(np.asarray(Q, float))
    ang0, ell0 = _initial_guess(surf, P, Q)
    ang, ell, res_norm, conv = _newton_connect(surf, kind, P, Q, ang0, ell0,
                                               tol, max_iter, step_target)
    if not conv.all() and multi_start > 1:
        for off in np.linspace(-0.8, 0.8, multi_start):
            bad = np.where(~conv)[0]
            if bad.size == 0:
                break
            a2, l2, r2, c2 = _newton_connect(
                surf, kind, P[bad], Q[bad], ang0[bad] + off, ell0[bad],
                tol, max_iter, step_target,
            )
            hit = np.where(c2)[0]
            ang[bad[hit]] = a2[hit]
            ell[bad[hit]] = l2[hit]
            conv[bad[hit]] = True
            res_norm[bad] = np.minimum(res_norm[bad], r2)
    return {"angle": ang, "length": ell, "residual": res_norm, "converged": conv}


def connect(
    surf: ChartSurface,
    kind: str,
    p,
    q,
    tol: float = 1e-9,
    step_target: float = 1e-3,
    max_samples: int = 129,
) -> GeodesicPath:
    """The short curve of the requested kind from p to q (endpoint error <= tol)."""
    out = connect_batch(surf, kind, [p], [q], tol=tol, step_target=step_target)
    if not out["converged"][0]:
        raise ShootingError(
            f"two-point {kind} solve failed from {p} to {q}: residual {out['residual'][0]:.3e}"
        )
    d0 = sf.vector_from_angle(surf, np.asarray(p, float), out["angle"][0])
    return shoot(surf, kind, p, d0, float(out["length"][0]), step_target, max_samples)


_BOUNDS_CACHE: dict = {}


def get_bounds(surf: ChartSurface, resolution: int = 200) -> sf.Bounds:
    key = (id(surf), resolution)
    if key not in _BOUNDS_CACHE:
        _BOUNDS_CACHE[key] = sf.global_bounds(surf, resolution)
    return _BOUNDS_CACHE[key]


def lc_distance(surf: ChartSurface, p, q, tol: float = 1e-9) -> np.ndarray:
    """Levi-Civita distance by the two-point solver (desk-scale separations)."""
    P = np.atleast_2d(np.asarray(p, float))
    Q = np.atleast_2d(np.asarray(q, float))
    out = connect_batch(surf, "levi_civita", P, Q, tol=tol)
    if not out["converged"].all():
        bad = int(np.argmax(~out["converged"]))
        raise ShootingError(
            f"distance solve failed for pair {P[bad]} -> {Q[bad]}: "
            f"residual {out['residual'][bad]:.3e}"
        )
    L = out["length"]
    return L if np.asarray(p).ndim > 1 else float(L[0])


# ---------------------------------------------------------------------------
# curvature of sampled curves


def curve_curvature(surf: ChartSurface, path: GeodesicPath, t: Optional[float] = None):
    """Metric curvature |nabla^g_{gamma'} gamma'| / |gamma'|^2 along the path.

    Accelerations come from centered differences of the stored velocity
    samples.  Returns the curvature at parameter t, or the full sample array
    when t is None.
    """
    pts, vels, ts = path.points, path.velocities, path.ts
    if len(ts) < 3:
        return 0.0 if t is not None else np.zeros(len(ts))
    acc = np.gradient(vels, ts, axis=0)
    gamma = sf.levi_civita(surf, pts)
    cov = acc + np.einsum("...kij,...i,...j->...k", gamma, vels, vels)
    speed2 = sf.inner(surf, pts, vels, vels)
    kappa = sf.norm_g(surf, pts, cov) / speed2
    if t is None:
        return kappa
    i = int(np.clip(np.searchsorted(ts, t), 1, len(ts) - 2))
    return float(kappa[i])


# ---------------------------------------------------------------------------
# comparison thresholds


@dataclass(frozen=True)
class ComparisonThresholds:
    """Admissible geodesic length L, its curvature part L1, and the profiles."""

    k_upper: float
    lam: float
    L: float
    L1: float

    def bound(self, x):
        """Length bound: a curve with endpoint distance x has length <= bound(x)."""
        return length_bound_from_distance(self.k_upper, self.lam, x)

    def bound_inv(self, y):
        return distance_from_length_bound(self.k_upper, self.lam, y)

    def psi(self, rr):
        rr = np.asarray(rr, float)
        K = self.k_upper
        if K > 0:
            k = math.sqrt(K)
            return np.sin(k * rr) / k
        if K < 0:
            k = math.sqrt(-K)
            return np.sinh(k * rr) / k
        return rr

    def Psi(self, rr):
        rr = np.asarray(rr, float)
        K = self.k_upper
        if K > 0:
            k = math.sqrt(K)
            return (1.0 - np.cos(k * rr)) / K
        if K < 0:
            k = math.sqrt(-K)
            return (np.cosh(k * rr) - 1.0) / k**2
        return rr**2 / 2.0


def length_threshold(k_upper: float, lam: float, inj: float,
                     cap: float = math.inf) -> ComparisonThresholds:
    """Admissible length L = min(inj/2, L1); L1 keeps radial speed positive.

    ``cap`` bounds L1 when the curvature condition is vacuous (for instance
    lam -> 0 with negative curvature); pass the chart diameter there.
    """
    if inj <= 0:
        raise ValueError("injectivity lower bound must be positive")
    K = k_upper
    if K > 0:
        k = math.sqrt(K)
        L1 = (2.0 / k) * (math.atan(k / lam) if lam > 0 else math.pi / 2)
    elif K == 0:
        L1 = (2.0 / lam) if lam > 0 else math.inf
    else:
        k = math.sqrt(-K)
        L1 = (2.0 / k) * math.atanh(k / lam) if lam > k else math.inf
    L1 = min(L1, cap)
    L = min(0.5 * inj, L1)
    return ComparisonThresholds(k_upper=K, lam=lam, L=L, L1=L1)


def length_bound_from_distance(k_upper: float, lam: float, x):
    """Closed-form monotone bound: endpoint distance x -> maximal curve length.

    Increasing, >= x, and = x + O(x^3) near zero.  Raises when x is beyond
    the range where the bound applies (arcsine argument above one).
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("distance must be nonnegative")
    K = k_upper
    if K > 0:
        k = math.sqrt(K)
        arg = math.sqrt(1.0 + lam**2 / K) * np.sin(k * x / 2.0)
        if np.any(x > math.pi / k) or np.any(arg > 1.0 + 1e-15):
            raise ValueError("distance outside the domain of the length bound")
        out = 2.0 / math.sqrt(lam**2 + K) * np.arcsin(np.clip(arg, -1.0, 1.0))
    elif K == 0:
        if lam == 0:
            out = x.copy()
        else:
            arg = lam * x / 2.0
            if np.any(arg > 1.0 + 1e-15):
                raise ValueError("distance outside the domain of the length bound")
            out = 2.0 / lam * np.arcsin(np.clip(arg, -1.0, 1.0))
    else:
        k = math.sqrt(-K)
        s = np.sinh(k * x / 2.0)
        if lam < k:
            c = math.sqrt(1.0 - lam**2 / k**2)
            out = 2.0 / math.sqrt(k**2 - lam**2) * np.arcsinh(c * s)
        elif lam == k:
            out = 2.0 / k * s
        else:
            c = math.sqrt(lam**2 / k**2 - 1.0)
            arg = c * s
            if np.any(arg > 1.0 + 1e-15):
                raise ValueError("distance outside the domain of the length bound")
            out = 2.0 / math.sqrt(lam**2 - k**2) * np.arcsin(np.clip(arg, -1.0, 1.0))
    return float(out) if out.ndim == 0 else out


def distance_from_length_bound(k_upper: float, lam: float, y):
    """Inverse of `length_bound_from_distance` in its admissible range."""
    y = np.asarray(y, dtype=float)
    K = k_upper
    if K > 0:
        k = math.sqrt(K)
        inner_ = np.sin(math.sqrt(lam**2 + K) * y / 2.0) / math.sqrt(1.0 + lam**2 / K)
        out = 2.0 / k * np.arcsin(np.clip(inner_, -1.0, 1.0))
    elif K == 0:
        out = y.copy() if lam == 0 else 2.0 / lam * np.sin(np.minimum(lam * y / 2.0, math.pi / 2))
    else:
        k = math.sqrt(-K)
        if lam < k:
            c = math.sqrt(1.0 - lam**2 / k**2)
            out = 2.0 / k * np.arcsinh(np.sinh(math.sqrt(k**2 - lam**2) * y / 2.0) / c)
        elif lam == k:
            out = 2.0 / k * np.arcsinh(k * y / 2.0)
        else:
            c = math.sqrt(lam**2 / k**2 - 1.0)
            out = 2.0 / k * np.arcsinh(np.sin(np.minimum(math.sqrt(lam**2 - k**2) * y / 2.0,
                                                         math.pi / 2)) / c)
    return float(out) if out.ndim == 0 else out


def thresholds_for(surf: ChartSurface) -> ComparisonThresholds:
    b = get_bounds(surf)
    return length_threshold(b.k_upper, b.lambda_, b.inj_lower, cap=surf.diameter)


# ---------------------------------------------------------------------------
# verification operations


def verify_length_bound(surf: ChartSurface, path: GeodesicPath, n_checks: int = 12,
                        tol: float = 1e-8) -> dict:
    """Check d <= ell <= bound(d) and monotone growth of d(start, gamma(t))."""
    th = thresholds_for(surf)
    p, q = path.endpoints
    d = float(np.asarray(surf.distance(p, q)))
    ell = path.length
    if ell >= th.L:
        raise ValueError(f"path length {ell:.4f} is not below the admissible bound {th.L:.4f}")
    bound = float(th.bound(d))
    ok_len = (d <= ell + tol) and (ell <= bound + tol)
    idx = np.unique(np.linspace(0, len(path.ts) - 1, n_checks).astype(int))[1:]
    dists = np.asarray(
        surf.distance(np.broadcast_to(p, (len(idx), 2)).copy(), path.points[idx])
    ).ravel()
    monotone = bool(np.all(np.diff(dists) > -tol))
    return {"d": d, "ell": ell, "bound": bound, "monotone": monotone,
            "passed": bool(ok_len and monotone)}


def _polyline_min_dist(surf: ChartSurface, x: np.ndarray, poly: np.ndarray) -> float:
    """Distance from x to a sampled curve, in development coords when exact."""
    if surf.development is not None:
        X = surf.development(x)
        Pl = surf.development(poly)
    else:
        # local isometric coordinates at x via a metric square root
        g = sf.metric_at(surf, x)
        w, Vv = np.linalg.eigh(g)
        S = Vv @ np.diag(np.sqrt(w)) @ Vv.T
        X = S @ x
        Pl = _wrap_diff(surf, poly - x) @ S.T + X
    a, b = Pl[:-1], Pl[1:]
    ab = b - a
    tt = np.clip(np.einsum("ij,ij->i", X - a, ab) / np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300), 0, 1)
    proj = a + tt[:, None] * ab
    return float(np.min(np.linalg.norm(proj - X, axis=1)))


def hausdorff_geodesic_segment(surf: ChartSurface, p, q) -> dict:
    """One-sided Hausdorff gap between the geodesic and the segment p -> q.

    Returns the sampled gap, the endpoint distance d, and gap / d^2 (the
    quantity that stabilizes under refinement).
    """
    geo = connect(surf, "nabla", p, q)
    seg = connect(surf, "levi_civita", p, q)
    d = float(np.asarray(surf.distance(np.asarray(p, float), np.asarray(q, float))))
    gap = max(_polyline_min_dist(surf, x, seg.points) for x in geo.points)
    return {"value": gap, "d": d, "ratio": gap / d**2 if d > 0 else 0.0}


def verify_angle_bound(surf: ChartSurface, p, q, slack: float = 1.0) -> dict:
    """Angle at p between geodesic and segment to q, against lam * bound(d)."""
    geo = connect(surf, "nabla", p, q)
    seg = connect(surf, "levi_civita", p, q)
    a1 = float(sf.angle_of(surf, geo.start, geo.velocities[0]))
    a2 = float(sf.angle_of(surf, seg.start, seg.velocities[0]))
    theta = abs((a1 - a2 + math.pi) % (2 * math.pi) - math.pi)
    th = thresholds_for(surf)
    d = float(np.asarray(surf.distance(np.asarray(p, float), np.asarray(q, float))))
    bound = th.lam * float(th.bound(d)) + slack * d**3
    return {"theta": theta, "bound": bound, "passed": theta <= bound + 1e-12}


# ---------------------------------------------------------------------------
# closed-form radial profile


def radial_profile_closed_form(k: Callable, xi1: Callable, t: float,
                               nodes: int = 4001) -> float:
    """Distance-to-start profile of a curve with curvature k and phase error xi1.

    Evaluates r(t)^2 = (int_0^t cos xi)^2 + (int_0^t sin xi)^2 with
    xi = int_0^s k + xi1(s) by dense quadrature.  With xi1 = 0 this is the
    Euclidean chord length of the curvature-k curve.
    """
    if t == 0:
        return 0.0
    s = np.linspace(0.0, float(t), nodes)
    ks = np.broadcast_to(np.asarray(k(s), float), s.shape)
    xi = cumulative_trapezoid(ks, s, initial=0.0) + np.broadcast_to(
        np.asarray(xi1(s), float), s.shape
    )
    return float(np.hypot(trapezoid(np.cos(xi), s), trapezoid(np.sin(xi), s)))
