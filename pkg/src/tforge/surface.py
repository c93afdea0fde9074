"""Smooth surface with a metric and a flat metric connection, in one chart.

A surface is described on a coordinate rectangle by a metric field g(u, v)
(2x2 symmetric positive definite) and a contravariant vector field V that
encodes the non-symmetric part of the connection,

    nabla_X Y = nabla^g_X Y + g(X, Y) V - g(V, Y) X,

where nabla^g is the Levi-Civita connection of g.  The connection nabla is
metric.  It is flat precisely when the scalar curl of V (the density of
d*V^flat against the area form, with the star mapping e1 -> -e2, e2 -> e1)
equals the Gaussian curvature of g; `verify_flatness` checks this identity
on a grid.

All field evaluators are vectorized: points are arrays of shape (..., 2)
and results carry the leading batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ChartSurface",
    "Bounds",
    "DomainError",
    "metric_at",
    "metric_inverse",
    "sqrt_det_g",
    "inner",
    "norm_g",
    "orthonormal_frame",
    "angle_of",
    "vector_from_angle",
    "levi_civita",
    "connection_coefficients",
    "torsion",
    "gauss_curvature_lc",
    "curl_v",
    "verify_flatness",
    "global_bounds",
    "v_from_parallel_frame",
]


class DomainError(ValueError):
    """A chart point lies outside the surface domain."""


class SingularMetricError(ValueError):
    """The metric failed to be positive definite at a sampled point."""


@dataclass(frozen=True)
class ChartSurface:
    """A surface (metric + connection field V) on a single coordinate chart.

    Derivative closures are optional; centered finite differences with step
    `fd_step` are used when they are absent.  `periodic` marks coordinate
    directions in which the fields are globally defined (the domain rectangle
    is then only a sampling window, and in-domain checks pass everywhere).
    """

    name: str
    domain: tuple  # (u_min, u_max, v_min, v_max)
    metric: Callable  # (..., 2) -> (..., 2, 2)
    v_field: Callable  # (..., 2) -> (..., 2)
    metric_d1: Optional[Callable] = None  # (..., 2) -> (..., 2, 2, 2), [k, i, j] = d_k g_ij
    metric_d2: Optional[Callable] = None  # (..., 2) -> (..., 2, 2, 2, 2), [l, k, i, j]
    v_d1: Optional[Callable] = None  # (..., 2) -> (..., 2, 2), [k, i] = d_k V^i
    periodic: tuple = (False, False)
    fd_step: Optional[float] = None
    inj_lower: float = 1.0
    exact_distance: Optional[Callable] = None  # (p, q) -> Levi-Civita distance
    development: Optional[Callable] = None  # isometric planar coordinates, flat fixtures only
    boundary_distance: Optional[Callable] = None  # (..., 2) -> distance to the domain boundary
    parallel_frame: Optional[Callable] = None  # (..., 2) -> (..., 2, 2), rows e1, e2
    lattice: str = "equilateral"  # segment-net strategy hint
    n0: int = 8  # smallest refinement index with a clean triangulation audit
    extra: dict = field(default_factory=dict)

    @property
    def diameter(self) -> float:
        u0, u1, v0, v1 = self.domain
        return float(np.hypot(u1 - u0, v1 - v0))

    @property
    def h(self) -> float:
        return self.fd_step if self.fd_step is not None else 1e-5 * self.diameter

    def in_domain(self, pts: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        u0, u1, v0, v1 = self.domain
        ok_u = (pts[..., 0] >= u0 - tol) & (pts[..., 0] <= u1 + tol)
        ok_v = (pts[..., 1] >= v0 - tol) & (pts[..., 1] <= v1 + tol)
        if self.periodic[0]:
            ok_u = np.ones_like(ok_u, dtype=bool)
        if self.periodic[1]:
            ok_v = np.ones_like(ok_v, dtype=bool)
        return ok_u & ok_v

    def require_in_domain(self, pts: np.ndarray) -> None:
        if not np.all(self.in_domain(pts)):
            raise DomainError(f"point outside the {self.name} chart domain")

    def distance(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Levi-Civita distance; exact closure when available, else solver-based."""
        if self.exact_distance is not None:
            return self.exact_distance(np.asarray(p, float), np.asarray(q, float))
        from . import geodesy  # deferred: geodesy depends on this module

        return geodesy.lc_distance(self, p, q)


@dataclass(frozen=True)
class Bounds:
    """Global bounds used to size geodesic length thresholds.

    lambda_ bounds |V|, k_upper / k_lower bound the Gaussian curvature of g,
    inj_lower under-estimates the injectivity radius.
    """

    lambda_: float
    k_upper: float
    k_lower: float
    inj_lower: float

    def __post_init__(self):
        if self.lambda_ < 0:
            raise ValueError("lambda_ must be nonnegative")
        if self.k_lower > self.k_upper:
            raise ValueError("k_lower exceeds k_upper")
        if self.inj_lower <= 0:
            raise ValueError("inj_lower must be positive")


# ---------------------------------------------------------------------------
# basic metric evaluators


def metric_at(surface: ChartSurface, pts: np.ndarray) -> np.ndarray:
    g = np.asarray(surface.metric(np.asarray(pts, dtype=float)), dtype=float)
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
    if np.any(det <= 0) or np.any(g[..., 0, 0] <= 0):
        raise SingularMetricError(f"metric not positive definite on {surface.name}")
    return g


def metric_inverse(surface: ChartSurface, pts: np.ndarray) -> np.ndarray:
    g = metric_at(surface, pts)
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
    inv = np.empty_like(g)
    inv[..., 0, 0] = g[..., 1, 1]
    inv[..., 1, 1] = g[..., 0, 0]
    inv[..., 0, 1] = -g[..., 0, 1]
    inv[..., 1, 0] = -g[..., 1, 0]
    return inv / det[..., None, None]


def sqrt_det_g(surface: ChartSurface, pts: np.ndarray) -> np.ndarray:
    g = metric_at(surface, pts)
    return np.sqrt(g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0])


def inner(surface: ChartSurface, pts, X, Y) -> np.ndarray:
    g = metric_at(surface, pts)
    return np.einsum("...ij,...i,...j->...", g, np.asarray(X, float), np.asarray(Y, float))


def norm_g(surface: ChartSurface, pts, X) -> np.ndarray:
    return np.sqrt(np.maximum(inner(surface, pts, X, X), 0.0))


def orthonormal_frame(surface: ChartSurface, pts: np.ndarray) -> np.ndarray:
    """Oriented g-orthonormal frame (rows E1, E2) with E1 along d/du."""
    g = metric_at(surface, pts)
    e1 = np.zeros(g.shape[:-1])
    e1[..., 0] = 1.0 / np.sqrt(g[..., 0, 0])
    # E2 = (g_00 d/dv - g_01 d/du) / (sqrt(g_00) * sqrt(det g))
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
    denom = np.sqrt(g[..., 0, 0] * det)
    e2 = np.stack([-g[..., 0, 1] / denom, g[..., 0, 0] / denom], axis=-1)
    return np.stack([e1, e2], axis=-2)


def angle_of(surface: ChartSurface, pts, X) -> np.ndarray:
    """Angle of a tangent vector against the oriented orthonormal frame."""
    fr = orthonormal_frame(surface, pts)
    c = inner(surface, pts, X, fr[..., 0, :])
    s = inner(surface, pts, X, fr[..., 1, :])
    return np.arctan2(s, c)

def vector_from_angle(surface: ChartSurface, pts, angle) -> np.ndarray:
    """Unit tangent vector at the given frame angle (inverse of `angle_of`)."""
    fr = orthonormal_frame(surface, pts)
    a = np.asarray(angle, dtype=float)
    return np.cos(a)[..., None] * fr[..., 0, :] + np.sin(a)[..., None] * fr[..., 1, :]


# ---------------------------------------------------------------------------
# derivatives (analytic closures preferred, centered finite differences else)


def _fd_metric_d1(surface: ChartSurface, pts: np.ndarray) -> np.ndarray:
    h = surface.h
    pts = np.asarray(pts, dtype=float)
    out = np.empty(pts.shape[:-1] + (2, 2, 2))
    for k in range(2):
        dp = np.zeros(2)
        dp[k] = h
        gp = metric_at(surface, pts + dp)
        gm = metric_at(surface, pts - dp)
        out[..., k, :, :] = (gp - gm) / (2 * h)
    return out


def metric_d1_at(surface: ChartSurface, pts: np.ndarray) -> np.ndarray:
    if surface.metric_d1 is not None:
        return np.asarray(surface.metric_d1(np.asarray(pts, float)), dtype=float)
    return _fd_metric_d1(surface, pts)


def metric_d2_at(surface: ChartSurface, pts: np.ndarray) -> np.ndarray:
    if surface.metric_d2 is not None:
        return np.asarray(surface.metric_d2(np.asarray(pts, float)), dtype=float)
    h = surface.h
    pts = np.asarray(pts, dtype=float)
    out = np.empty(pts.shape[:-1] + (2, 2, 2, 2))
    for l in range(2):
        dp = np.zeros(2)
        dp[l] = h
        d1p = metric_d1_at(surface, pts + dp)
        d1m = metric_d1_at(surface, pts - dp)
        out[..., l, :, :, :] = (d1p - d1m) / (2 * h)
    return out


def v_at(surface: ChartSurface, pts: np.ndarray) -> np.ndarray:
    return np.asarray(surface.v_field(np.asarray(pts, dtype=float)), dtype=float)


def v_d1_at(surface: ChartSurface, pts: np.ndarray) -> np.ndarray:
    if surface.v_d1 is not None:
        return np.asarray(surface.v_d1(np.asarray(pts, float)), dtype=float)
    h = surface.h
    pts = np.asarray(pts, dtype=float)
    out = np.empty(pts.shape[:-1] + (2, 2))
    for k in range(2):
        dp = np.zeros(2)
        dp[k] = h
        out[..., k, :] = (v_at(surface, pts + dp) - v_at(surface, pts - dp)) / (2 * h)
    return out


# ---------------------------------------------------------------------------
# connections


def levi_civita(surface: ChartSurface, pts: np.ndarray) -> np.ndarray:
    """Christoffel symbols of g, shape (..., 2, 2, 2) with [k, i, j] = Gamma^k_ij."""
    surface.require_in_domain(pts)
    ginv = metric_inverse(surface, pts)
    dg = metric_d1_at(surface, pts)  # [k,i,j] = d_k g_ij
    # Gamma^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)
    term = np.einsum("...ijl->...lij", dg) + np.einsum("...jil->...lij", dg) - dg
    return 0.5 * np.einsum("...kl,...lij->...kij", ginv, term)


def connection_coefficients(surface: ChartSurface, pts: np.ndarray) -> np.ndarray:
    """Coefficients of the V-twisted metric connection (non-symmetric in i, j)."""
    gamma = levi_civita(surface, pts)
    g = metric_at(surface, pts)
    V = v_at(surface, pts)
    vflat = np.einsum("...ij,...j->...i", g, V)
    # A^k_ij = g_ij V^k - V_flat_j delta^k_i
    A = np.einsum("...ij,...k->...kij", g, V)
    eye = np.eye(2)
    A -= np.einsum("ki,...j->...kij", eye, vflat)
    return gamma + A


def torsion(surface: ChartSurface, pts, X, Y) -> np.ndarray:
    """Torsion vector T(X, Y) = g(V, X) Y - g(V, Y) X."""
    surface.require_in_domain(pts)
    V = v_at(surface, pts)
    a = inner(surface, pts, V, X)
    b = inner(surface, pts, V, Y)
    return a[..., None] * np.asarray(Y, float) - b[..., None] * np.asarray(X, float)


# ---------------------------------------------------------------------------
# curvature


def gauss_curvature_lc(surface: ChartSurface, pts: np.ndarray) -> np.ndarray:
    """Gaussian curvature of g by the Brioschi determinant formula."""
    surface.require_in_domain(pts)
    g = metric_at(surface, pts)
    dg = metric_d1_at(surface, pts)
    d2g = metric_d2_at(surface, pts)
    E, F, G = g[..., 0, 0], g[..., 0, 1], g[..., 1, 1]
    Eu, Ev = dg[..., 0, 0, 0], dg[..., 1, 0, 0]
    Fu, Fv = dg[..., 0, 0, 1], dg[..., 1, 0, 1]
    Gu, Gv = dg[..., 0, 1, 1], dg[..., 1, 1, 1]
    Evv = d2g[..., 1, 1, 0, 0]
    Guu = d2g[..., 0, 0, 1, 1]
    Fuv = d2g[..., 0, 1, 0, 1]

    def det3(a11, a12, a13, a21, a22, a23, a31, a32, a33):
        return (
            a11 * (a22 * a33 - a23 * a32)
            - a12 * (a21 * a33 - a23 * a31)
            + a13 * (a21 * a32 - a22 * a31)
        )

    m1 = det3(
        -0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev,
        Fv - 0.5 * Gu, E, F,
        0.5 * Gv, F, G,
    )
    m2 = det3(
        0.0 * E, 0.5 * Ev, 0.5 * Gu,
        0.5 * Ev, E, F,
        0.5 * Gu, F, G,
    )
    det = E * G - F * F
    return (m1 - m2) / det**2


def curl_v(surface: ChartSurface, pts: np.ndarray) -> np.ndarray:
    """Scalar curl of V: the density of d*V^flat against the area form.

    With the star convention *e1 = -e2, *e2 = e1 this equals -div_g V, and
    the connection defined by V is flat iff curl V = K^g.
    """
    pts = np.asarray(pts, dtype=float)
    g = metric_at(surface, pts)
    dg = metric_d1_at(surface, pts)
    V = v_at(surface, pts)
    dV = v_d1_at(surface, pts)
    sq = np.sqrt(g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2)
    ginv = metric_inverse(surface, pts)
    # d_k sqrt(g) = sqrt(g)/2 * tr(g^{-1} d_k g)
    dsq = 0.5 * sq[..., None] * np.einsum("...ij,...kji->...k", ginv, dg)
    div = (np.einsum("...kk->...", dV) + np.einsum("...k,...k->...", dsq, V) / sq)
    return -div


def verify_flatness(surface: ChartSurface, resolution: int = 200, margin: float = 1e-3):
    """Grid residual |K^g - curl V|; near zero for a valid flat-connection surface.

    Returns (residual_grid, max_residual).  The grid is inset from the domain
    boundary by `margin` (relative) so finite-difference stencils stay inside.
    """
    if resolution < 8:
        raise ValueError("grid too coarse to certify flatness")
    u0, u1, v0, v1 = surface.domain
    mu = margin * (u1 - u0)
    mv = margin * (v1 - v0)
    us = np.linspace(u0 + mu, u1 - mu, resolution)
    vs = np.linspace(v0 + mv, v1 - mv, resolution)
    U, W = np.meshgrid(us, vs, indexing="ij")
    pts = np.stack([U, W], axis=-1)
    residual = np.abs(gauss_curvature_lc(surface, pts) - curl_v(surface, pts))
    return residual, float(residual.max())


def global_bounds(surface: ChartSurface, resolution: int = 200, safety: float = 1.01) -> Bounds:
    """Dense-grid bounds on |V| and the Gaussian curvature, with safety inflation."""
    u0, u1, v0, v1 = surface.domain
    us = np.linspace(u0, u1, resolution)
    vs = np.linspace(v0, v1, resolution)
    U, W = np.meshgrid(us, vs, indexing="ij")
    pts = np.stack([U, W], axis=-1)
    vnorm = norm_g(surface, pts, v_at(surface, pts))
    lam = safety * float(vnorm.max())
    m = 1e-3
    us = np.linspace(u0 + m * (u1 - u0), u1 - m * (u1 - u0), resolution)
    vs = np.linspace(v0 + m * (v1 - v0), v1 - m * (v1 - v0), resolution)
    U, W = np.meshgrid(us, vs, indexing="ij")
    K = gauss_curvature_lc(surface, np.stack([U, W], axis=-1))
    kmax, kmin = float(K.max()), float(K.min())
    tiny = 1e-12
    k_upper = kmax * safety if kmax > tiny else (kmax / safety if kmax < -tiny else 0.0)
    k_lower = kmin * safety if kmin < -tiny else (kmin / safety if kmin > tiny else 0.0)
    return Bounds(lambda_=lam if lam > tiny else 0.0, k_upper=k_upper, k_lower=k_lower,
                  inj_lower=surface.inj_lower)


# ---------------------------------------------------------------------------
# deriving V from a declared-parallel orthonormal frame


def v_from_parallel_frame(surface: ChartSurface, frame: Callable, pts: np.ndarray,
                          residual_tol: float = 1e-6):
    """Solve the frame-parallelism equations nabla e_i = 0 for V at each point.

    `frame` maps points to (..., 2, 2) with rows e1, e2 (contravariant).  The
    four vector equations are linear in V; they are solved in least squares
    and the residual is checked.  An inconsistent (non-orthonormal) frame is
    rejected.
    """
    pts = np.asarray(pts, dtype=float)
    flat_pts = pts.reshape(-1, 2)
    g = metric_at(surface, flat_pts)
    gamma = levi_civita(surface, flat_pts)
    fr = np.asarray(frame(flat_pts), dtype=float)
    h = surface.h
    # nabla^g_{d_k} e_i = d_k e_i + Gamma(d_k, e_i)
    dfr = np.empty(flat_pts.shape[:-1] + (2, 2, 2))  # [k, i, m] = d_k e_i^m
    for k in range(2):
        dp = np.zeros(2)
        dp[k] = h
        dfr[:, k] = (np.asarray(frame(flat_pts + dp), float)
                     - np.asarray(frame(flat_pts - dp), float)) / (2 * h)
    cov = dfr + np.einsum("...mkj,...ij->...kim", gamma, fr)
    # equation (k, i, m):  cov[k,i,m] + g(d_k, e_i) V^m - (g e_i)_j V^j delta^m_k = 0
    n = flat_pts.shape[0]
    ge = np.einsum("...ij,...mj->...mi", g, fr)  # [i_frame, :] = e_i lowered
    A = np.zeros((n, 8, 2))
    b = np.zeros((n, 8))
    r = 0
    for k in range(2):
        ek = np.zeros(2)
        ek[k] = 1.0
        for i in range(2):
            gke = np.einsum("...j,...j->...", g[:, k, :], fr[:, i, :])  # g(d_k, e_i)
            for m in range(2):
                coef = np.zeros((n, 2))
                coef[:, m] += gke
                coef -= (ek[m]) * ge[:, i, :]
                A[:, r, :] = coef
                b[:, r] = -cov[:, k, i, m]
                r += 1
    sol = np.empty((n, 2))
    resid = np.empty(n)
    for idx in range(n):
        x, res, *_ = np.linalg.lstsq(A[idx], b[idx], rcond=None)
        sol[idx] = x
        resid[idx] = np.linalg.norm(A[idx] @ x - b[idx])
    if np.any(resid > residual_tol):
        raise ValueError(
            f"frame-parallelism equations inconsistent (max residual {resid.max():.3e}); "
            "the supplied frame does not define a flat metric connection"
        )
    return sol.reshape(pts.shape), resid.reshape(pts.shape[:-1])
