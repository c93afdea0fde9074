"""Canonical surface fixtures and the declarative surface loader.

Three fixtures cover the test surface of the library:

* ``flat``   -- unit square, identity metric, V = 0.
* ``sector`` -- annulus sector 1 <= r <= 2, 0 <= theta <= pi/2 in polar
  coordinates (Euclidean geometry), with the orthonormal frame
  (d/dr, r^-1 d/dtheta) declared parallel; solving the frame equations
  gives V = (1/r) d/dr.
* ``torus``  -- torus of revolution R = 2, r = 1 in angle coordinates
  (u, v) -> ((R + r cos v) cos u, (R + r cos v) sin u, r sin v), with the
  normalized (d/du, d/dv) frame declared parallel; the frame equations give
  V = -(sin v / (R + r cos v)) * (1/r) d/dv.

Custom surfaces load from a dict / YAML / JSON config with metric and V
entries given as numpy expression strings in ``u`` and ``v``, or as
tabulated grids.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Optional

import numpy as np

from .surface import ChartSurface

__all__ = ["get_surface", "surface_from_config", "load_surface", "FIXTURE_NAMES"]

FIXTURE_NAMES = ("flat", "sector", "torus")


def _const_metric(mat):
    mat = np.asarray(mat, dtype=float)

    def f(pts):
        pts = np.asarray(pts, dtype=float)
        return np.broadcast_to(mat, pts.shape[:-1] + (2, 2)).copy()

    return f


def _zeros_vec(pts):
    pts = np.asarray(pts, dtype=float)
    return np.zeros(pts.shape[:-1] + (2,))


def _flat() -> ChartSurface:
    def d1(pts):
        pts = np.asarray(pts, float)
        return np.zeros(pts.shape[:-1] + (2, 2, 2))

    def d2(pts):
        pts = np.asarray(pts, float)
        return np.zeros(pts.shape[:-1] + (2, 2, 2, 2))

    def vd1(pts):
        pts = np.asarray(pts, float)
        return np.zeros(pts.shape[:-1] + (2, 2))

    def dist(p, q):
        p, q = np.asarray(p, float), np.asarray(q, float)
        return np.linalg.norm(q - p, axis=-1)

    def bdist(pts):
        pts = np.asarray(pts, float)
        u, v = pts[..., 0], pts[..., 1]
        return np.minimum.reduce([u, 1.0 - u, v, 1.0 - v])

    def frame(pts):
        pts = np.asarray(pts, float)
        out = np.zeros(pts.shape[:-1] + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = 1.0
        return out

    return ChartSurface(
        name="flat",
        domain=(0.0, 1.0, 0.0, 1.0),
        metric=_const_metric(np.eye(2)),
        v_field=_zeros_vec,
        metric_d1=d1,
        metric_d2=d2,
        v_d1=vd1,
        inj_lower=math.sqrt(2.0),
        exact_distance=dist,
        development=lambda pts: np.asarray(pts, float).copy(),
        boundary_distance=bdist,
        parallel_frame=frame,
        lattice="equilateral",
        n0=8,
    )


def _sector() -> ChartSurface:
    # chart (r, theta); metric diag(1, r^2); V = (1/r) d/dr
    def metric(pts):
        pts = np.asarray(pts, float)
        g = np.zeros(pts.shape[:-1] + (2, 2))
        g[..., 0, 0] = 1.0
        g[..., 1, 1] = pts[..., 0] ** 2
        return g

    def d1(pts):
        pts = np.asarray(pts, float)
        out = np.zeros(pts.shape[:-1] + (2, 2, 2))
        out[..., 0, 1, 1] = 2.0 * pts[..., 0]
        return out

    def d2(pts):
        pts = np.asarray(pts, float)
        out = np.zeros(pts.shape[:-1] + (2, 2, 2, 2))
        out[..., 0, 0, 1, 1] = 2.0
        return out

    def vf(pts):
        pts = np.asarray(pts, float)
        out = np.zeros(pts.shape[:-1] + (2,))
        out[..., 0] = 1.0 / pts[..., 0]
        return out

    def vd1(pts):
        pts = np.asarray(pts, float)
        out = np.zeros(pts.shape[:-1] + (2, 2))
        out[..., 0, 0] = -1.0 / pts[..., 0] ** 2
        return out

    def dev(pts):
        pts = np.asarray(pts, float)
        r, th = pts[..., 0], pts[..., 1]
        return np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)

    def dist(p, q):
        return np.linalg.norm(dev(q) - dev(p), axis=-1)

    def bdist(pts):
        pts = np.asarray(pts, float)
        r, th = pts[..., 0], pts[..., 1]
        return np.minimum.reduce([r - 1.0, 2.0 - r, r * np.sin(th), r * np.sin(np.pi / 2 - th)])

    def frame(pts):
        pts = np.asarray(pts, float)
        out = np.zeros(pts.shape[:-1] + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = 1.0 / pts[..., 0]
        return out

    return ChartSurface(
        name="sector",
        domain=(1.0, 2.0, 0.0, math.pi / 2),
        metric=metric,
        v_field=vf,
        metric_d1=d1,
        metric_d2=d2,
        v_d1=vd1,
        inj_lower=1.0,
        exact_distance=dist,
        development=dev,
        boundary_distance=bdist,
        parallel_frame=frame,
        lattice="polar",
        n0=8,
    )


def _torus(R: float = 2.0, r: float = 1.0) -> ChartSurface:
    two_pi = 2.0 * math.pi

    def phi(v):
        return R + r * np.cos(v)

    def metric(pts):
        pts = np.asarray(pts, float)
        g = np.zeros(pts.shape[:-1] + (2, 2))
        g[..., 0, 0] = phi(pts[..., 1]) ** 2
        g[..., 1, 1] = r**2
        return g

    def d1(pts):
        pts = np.asarray(pts, float)
        out = np.zeros(pts.shape[:-1] + (2, 2, 2))
        out[..., 1, 0, 0] = -2.0 * r * np.sin(pts[..., 1]) * phi(pts[..., 1])
        return out

    def d2(pts):
        pts = np.asarray(pts, float)
        v = pts[..., 1]
        out = np.zeros(pts.shape[:-1] + (2, 2, 2, 2))
        out[..., 1, 1, 0, 0] = -2.0 * r * (np.cos(v) * phi(v) - r * np.sin(v) ** 2)
        return out

    def vf(pts):
        pts = np.asarray(pts, float)
        v = pts[..., 1]
        out = np.zeros(pts.shape[:-1] + (2,))
        out[..., 1] = -np.sin(v) / (r * phi(v))
        return out

    def vd1(pts):
        pts = np.asarray(pts, float)
        v = pts[..., 1]
        out = np.zeros(pts.shape[:-1] + (2, 2))
        out[..., 1, 1] = -(np.cos(v) * phi(v) + r * np.sin(v) ** 2) / (r * phi(v) ** 2)
        return out

    def bdist(pts):
        # distance to the cut lines u in {0, 2pi}, v in {0, 2pi} of the
        # fundamental domain; first order in the offsets, adequate for the
        # O(1/n) bands the triangulation uses
        pts = np.asarray(pts, float)
        u, v = pts[..., 0], pts[..., 1]
        pv = phi(v)
        return np.minimum.reduce([u * pv, (two_pi - u) * pv, v * r, (two_pi - v) * r])

    def frame(pts):
        pts = np.asarray(pts, float)
        out = np.zeros(pts.shape[:-1] + (2, 2))
        out[..., 0, 0] = 1.0 / phi(pts[..., 1])
        out[..., 1, 1] = 1.0 / r
        return out

    return ChartSurface(
        name="torus",
        domain=(0.0, two_pi, 0.0, two_pi),
        metric=metric,
        v_field=vf,
        metric_d1=d1,
        metric_d2=d2,
        v_d1=vd1,
        periodic=(True, True),
        inj_lower=math.pi * r,
        exact_distance=None,
        development=None,
        boundary_distance=bdist,
        parallel_frame=frame,
        lattice="chart_rect",
        n0=8,
        extra={"R": R, "r": r},
    )


_BUILDERS = {"flat": _flat, "sector": _sector, "torus": _torus}
_CACHE: dict = {}


def get_surface(name: str) -> ChartSurface:
    key = name.lower()
    if key not in _BUILDERS:
        raise KeyError(f"unknown surface fixture {name!r}; expected one of {FIXTURE_NAMES}")
    if key not in _CACHE:
        _CACHE[key] = _BUILDERS[key]()
    return _CACHE[key]


# ---------------------------------------------------------------------------
# declarative configs

_EXPR_NS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "sinh": np.sinh, "cosh": np.cosh, "tanh": np.tanh,
    "pi": np.pi, "abs": np.abs, "arctan": np.arctan, "arcsin": np.arcsin,
    "arccos": np.arccos,
}


def _expr(expr: str):
    code = compile(expr, "<surface-config>", "eval")

    def f(u, v):
        return np.broadcast_to(
            np.asarray(eval(code, {"__builtins__": {}}, {**_EXPR_NS, "u": u, "v": v}), float),
            np.broadcast_shapes(np.shape(u), np.shape(v)),
        )

    return f


def _grid_interp(spec: dict):
    from scipy.interpolate import RegularGridInterpolator

    us = np.asarray(spec["u"], float)
    vs = np.asarray(spec["v"], float)
    vals = np.asarray(spec["values"], float)
    interp = RegularGridInterpolator((us, vs), vals, method="cubic")

    def f(u, v):
        pts = np.stack(np.broadcast_arrays(u, v), axis=-1)
        return interp(pts)

    return f


def _entry(spec):
    if isinstance(spec, str):
        return _expr(spec)
    if isinstance(spec, (int, float)):
        c = float(spec)
        return lambda u, v: np.broadcast_to(c, np.broadcast_shapes(np.shape(u), np.shape(v)))
    if isinstance(spec, dict):
        return _grid_interp(spec)
    raise ValueError(f"bad surface config entry: {spec!r}")


def surface_from_config(cfg: dict) -> ChartSurface:
    """Build a ChartSurface from a declarative description.

    Required keys: ``domain`` [u0, u1, v0, v1], ``metric`` {g11, g12, g22},
    ``v`` {v1, v2}.  Entries are expression strings in u, v, constants, or
    tabulated grids {u, v, values}.  Optional: ``name``, ``periodic``,
    ``inj_lower``, ``lattice``, ``n0``.  Derivatives fall back to finite
    differences.
    """
    dom = tuple(float(x) for x in cfg["domain"])
    if len(dom) != 4 or dom[0] >= dom[1] or dom[2] >= dom[3]:
        raise ValueError("domain must be [u_min, u_max, v_min, v_max] with positive extents")
    m = cfg["metric"]
    g11, g12, g22 = _entry(m["g11"]), _entry(m.get("g12", 0.0)), _entry(m["g22"])
    vcfg = cfg.get("v", {"v1": 0.0, "v2": 0.0})
    v1, v2 = _entry(vcfg.get("v1", 0.0)), _entry(vcfg.get("v2", 0.0))

    def metric(pts):
        pts = np.asarray(pts, float)
        u, v = pts[..., 0], pts[..., 1]
        g = np.zeros(pts.shape[:-1] + (2, 2))
        g[..., 0, 0] = g11(u, v)
        g[..., 0, 1] = g[..., 1, 0] = g12(u, v)
        g[..., 1, 1] = g22(u, v)
        return g

    def v_field(pts):
        pts = np.asarray(pts, float)
        u, v = pts[..., 0], pts[..., 1]
        return np.stack([np.broadcast_to(v1(u, v), u.shape),
                         np.broadcast_to(v2(u, v), u.shape)], axis=-1)

    return ChartSurface(
        name=str(cfg.get("name", "custom")),
        domain=dom,
        metric=metric,
        v_field=v_field,
        periodic=tuple(cfg.get("periodic", (False, False))),
        inj_lower=float(cfg.get("inj_lower", 0.25 * (dom[1] - dom[0]))),
        lattice=str(cfg.get("lattice", "chart_rect")),
        n0=int(cfg.get("n0", 8)),
    )


def load_surface(name_or_path: str) -> ChartSurface:
    """Fixture by name, or a custom surface from a YAML/JSON config file."""
    if name_or_path.lower() in _BUILDERS:
        return get_surface(name_or_path)
    path = Path(name_or_path)
    if not path.exists():
        raise KeyError(f"no fixture and no config file named {name_or_path!r}")
    text = path.read_text()
    if path.suffix in (".yaml", ".yml"):
        import yaml

        cfg = yaml.safe_load(text)
    else:
        cfg = json.loads(text)
    return surface_from_config(cfg)
