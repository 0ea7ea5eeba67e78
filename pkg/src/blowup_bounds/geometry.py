"""Convex domain catalog with boundary parametrization and quadrature.

The catalog is fixed (disk, ellipse, axis-aligned rectangle, 3-ball) so
convexity holds by construction and normals / arc lengths have analytic
references for testing.  Boundaries are parametrized by arc length; the
ellipse maps its angular parameter to arc length through a precomputed
cumulative table.  For the 3-ball the single parameter runs along a
meridian (geodesic distance from the north pole), so partition intervals
describe rotationally symmetric bands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import ellipe


class QuadratureFailure(RuntimeError):
    """Refinement limit hit before the target tolerance was met."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved


@dataclass(frozen=True)
class ConvexDomain:
    """One of the catalog shapes: disk | ellipse | rect | ball3d.

    ``params`` holds the shape parameters: (radius,) for disk/ball3d,
    (a, b) semi-axes for the ellipse, (w, h) side lengths for the
    rectangle.  The rectangle spans [0, w] x [0, h] shifted by ``center``
    minus its midpoint; disk/ellipse/ball are centered at ``center``.
    """

    kind: str
    params: tuple[float, ...]
    center: tuple[float, ...] = (0.0, 0.0)
    ndim: int = 2

    def __post_init__(self):
        if self.kind not in ("disk", "ellipse", "rect", "ball3d"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if any(p <= 0 for p in self.params):
            raise ValueError("shape parameters must be strictly positive")
        expected = {"disk": 1, "ellipse": 2, "rect": 2, "ball3d": 1}[self.kind]
        if len(self.params) != expected:
            raise ValueError(f"{self.kind} takes {expected} shape parameter(s)")
        ndim = 3 if self.kind == "ball3d" else 2
        if self.ndim != ndim:
            raise ValueError(f"{self.kind} has dimension {ndim}")
        if len(self.center) != self.ndim:
            raise ValueError("center dimension mismatch")

    # -- analytic measures -------------------------------------------------

    @property
    def has_corners(self) -> bool:
        return self.kind == "rect"

    @property
    def volume(self) -> float:
        """|Omega|: area in 2-D, volume for the ball."""
        if self.kind == "disk":
            return math.pi * self.params[0] ** 2
        if self.kind == "ellipse":
            return math.pi * self.params[0] * self.params[1]
        if self.kind == "rect":
            return self.params[0] * self.params[1]
        return 4.0 / 3.0 * math.pi * self.params[0] ** 3

    @property
    def surface_measure(self) -> float:
        """|dOmega|: perimeter in 2-D, sphere area for the ball."""
        if self.kind == "disk":
            return 2 * math.pi * self.params[0]
        if self.kind == "ellipse":
            a, b = self.params
            if b > a:
                a, b = b, a
            return 4 * a * float(ellipe(1 - (b / a) ** 2))
        if self.kind == "rect":
            return 2 * (self.params[0] + self.params[1])
        return 4 * math.pi * self.params[0] ** 2

    @property
    def param_length(self) -> float:
        """Length of the boundary parameter range.

        Equals the perimeter except for the ball, whose parameter is the
        meridian arc [0, pi*R].
        """
        if self.kind == "ball3d":
            return math.pi * self.params[0]
        return self.surface_measure

    # -- boundary parametrization ------------------------------------------

    def boundary_points(self, s) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized boundary_point: arrays of points and unit outward normals."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0) or np.any(s >= self.param_length):
            raise ValueError(f"arc parameter out of range [0, {self.param_length:g})")
        c = np.asarray(self.center)
        if self.kind == "disk":
            r = self.params[0]
            ang = s / r
            n = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
            return c + r * n, n
        if self.kind == "ellipse":
            a, b = self.params
            theta = _ellipse_theta_of_arc(self.params)(s)
            pts = c + np.stack([a * np.cos(theta), b * np.sin(theta)], axis=-1)
            nrm = np.stack([np.cos(theta) / a, np.sin(theta) / b], axis=-1)
            nrm /= np.linalg.norm(nrm, axis=-1, keepdims=True)
            return pts, nrm
        if self.kind == "rect":
            return self._rect_boundary(s)
        # ball3d: meridian in the x-z plane
        r = self.params[0]
        ang = s / r
        n = np.stack([np.sin(ang), np.zeros_like(ang), np.cos(ang)], axis=-1)
        return c + r * n, n

    def _rect_boundary(self, s):
        w, h = self.params
        origin = np.asarray(self.center) - np.array([w / 2, h / 2])
        s = np.atleast_1d(np.asarray(s, dtype=float))
        pts = np.empty((len(s), 2))
        nrm = np.empty((len(s), 2))
        for i, si in enumerate(s):
            if si < w:  # bottom, +x
                pts[i] = origin + [si, 0.0]
                nrm[i] = [0.0, -1.0]
            elif si < w + h:  # right, +y
                pts[i] = origin + [w, si - w]
                nrm[i] = [1.0, 0.0]
            elif si < 2 * w + h:  # top, -x
                pts[i] = origin + [w - (si - w - h), h]
                nrm[i] = [0.0, 1.0]
            else:  # left, -y
                pts[i] = origin + [0.0, h - (si - 2 * w - h)]
                nrm[i] = [-1.0, 0.0]
        return pts, nrm


def boundary_point(domain: ConvexDomain, s: float) -> tuple[np.ndarray, np.ndarray]:
    """Point on the boundary at arc parameter ``s`` and its unit outward normal."""
    pts, nrm = domain.boundary_points(np.array([float(s)]))
    return pts[0], nrm[0]


def curvature_sum(domain: ConvexDomain, x) -> float:
    """Sum of principal curvatures of the boundary at the point x.

    Plain curvature in 2-D (0 on rectangle edges; corners are excluded by
    the callers), 2/R on the sphere.
    """
    if domain.kind == "disk":
        return 1.0 / domain.params[0]
    if domain.kind == "ball3d":
        return 2.0 / domain.params[0]
    if domain.kind == "rect":
        return 0.0
    a, b = domain.params
    rel = np.asarray(x, dtype=float) - np.asarray(domain.center)
    theta = math.atan2(rel[1] / b, rel[0] / a)
    return a * b / ((a * math.sin(theta)) ** 2 + (b * math.cos(theta)) ** 2) ** 1.5


def disk(radius: float, center=(0.0, 0.0)) -> ConvexDomain:
    return ConvexDomain("disk", (float(radius),), tuple(center))


def ellipse(a: float, b: float, center=(0.0, 0.0)) -> ConvexDomain:
    return ConvexDomain("ellipse", (float(a), float(b)), tuple(center))


def rectangle(w: float, h: float) -> ConvexDomain:
    """Axis-aligned rectangle spanning [0, w] x [0, h]."""
    return ConvexDomain("rect", (float(w), float(h)), (w / 2, h / 2))


def ball3d(radius: float, center=(0.0, 0.0, 0.0)) -> ConvexDomain:
    return ConvexDomain("ball3d", (float(radius),), tuple(center), ndim=3)


@lru_cache(maxsize=16)
def _ellipse_theta_of_arc(params: tuple[float, float]):
    """Interpolators between angular parameter and arc length for an ellipse.

    Built from a composite-Simpson cumulative table on a fine theta grid;
    the table error is far below the 1e-12 tolerances used elsewhere.
    """
    a, b = params
    n = 32768  # even
    theta = np.linspace(0.0, 2 * np.pi, n + 1)
    speed = np.sqrt((a * np.sin(theta)) ** 2 + (b * np.cos(theta)) ** 2)
    hh = theta[1] - theta[0]
    # cumulative Simpson over pairs of intervals, linearly refined to every node
    cum = np.zeros(n + 1)
    pair = (hh / 3.0) * (speed[0:-2:2] + 4.0 * speed[1:-1:2] + speed[2::2])
    cum[2::2] = np.cumsum(pair)
    # odd nodes via Simpson's 3/8-free half-step (trapezoid corrected locally)
    cum[1::2] = cum[0:-1:2] + (hh / 12.0) * (5.0 * speed[0:-1:2] + 8.0 * speed[1::2] - speed[2::2])
    total = cum[-1]

    def theta_of_s(s):
        return np.interp(np.asarray(s, dtype=float), cum, theta)

    theta_of_s.total = total
    return theta_of_s


@dataclass(frozen=True)
class BoundaryPartition:
    """Half-open arc-parameter intervals [s0, s1) carving Gamma_1 out of the boundary.

    The complement is implicitly Gamma_2.  Intervals must be pairwise
    disjoint, nonempty, and of positive total measure.
    """

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.intervals:
            raise ValueError("Gamma_1 must be nonempty (at least one interval)")
        prev_end = None
        for s0, s1 in sorted(self.intervals):
            if s1 <= s0:
                raise ValueError(f"empty or inverted interval ({s0}, {s1})")
            if prev_end is not None and s0 < prev_end:
                raise ValueError("intervals overlap")
            prev_end = s1

    def validate_against(self, domain: ConvexDomain):
        length = domain.param_length
        for s0, s1 in self.intervals:
            if s0 < 0 or s1 > length * (1 + 1e-12):
                raise ValueError(f"interval ({s0}, {s1}) outside [0, {length:g}]")

    def arc_length(self) -> float:
        return sum(s1 - s0 for s0, s1 in self.intervals)

    def contains(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        mask = np.zeros(s.shape, dtype=bool)
        for s0, s1 in self.intervals:
            mask |= (s >= s0) & (s < s1)
        return mask


def full_boundary(domain: ConvexDomain) -> BoundaryPartition:
    return BoundaryPartition(((0.0, domain.param_length),))


def gamma1_measure(domain: ConvexDomain, part: BoundaryPartition) -> float:
    """Surface measure of Gamma_1.

    For the 2-D shapes this is the summed arc length of the intervals.
    For the ball the intervals select bands of polar angle and the value
    is the corresponding sphere-band area.
    """
    part.validate_against(domain)
    if domain.kind != "ball3d":
        return part.arc_length()
    r = domain.params[0]
    area = 0.0
    for s0, s1 in part.intervals:
        area += 2 * math.pi * r * r * (math.cos(s0 / r) - math.cos(s1 / r))
    return area


@dataclass(frozen=True)
class QuadratureSpec:
    """Node budgets and tolerances shared by the quadrature-backed operations."""

    boundary_nodes: int = 1024
    volume_nodes: int = 16384
    time_nodes: int = 768
    refine_limit: int = 6
    tol: float = 1e-6

    def __post_init__(self):
        if min(self.boundary_nodes, self.volume_nodes, self.time_nodes) < 4:
            raise ValueError("all node counts must be >= 4")
        if self.refine_limit < 0:
            raise ValueError("refine_limit must be >= 0")
        if not (0 < self.tol <= 1e-2):
            raise ValueError("tol must lie in (0, 1e-2]")

    def refined(self, factor: int = 2) -> "QuadratureSpec":
        return QuadratureSpec(
            self.boundary_nodes * factor,
            self.volume_nodes * factor,
            self.time_nodes * factor,
            self.refine_limit,
            self.tol,
        )


# ---------------------------------------------------------------------------
# volume quadrature


def _disk_volume_nodes(radius, center, n_target, angle_multiple=None):
    # midpoint polar grid; exact for the constant function by construction
    nr = max(4, int(math.ceil(math.sqrt(n_target / (2 * math.pi)))))
    ntheta = max(8, int(math.ceil(2 * math.pi * nr)))
    if angle_multiple:
        ntheta = int(math.ceil(ntheta / angle_multiple)) * angle_multiple
    dr = radius / nr
    dth = 2 * math.pi / ntheta
    r = (np.arange(nr) + 0.5) * dr
    th = (np.arange(ntheta) + 0.5) * dth
    rr, tt = np.meshgrid(r, th, indexing="ij")
    pts = np.stack([rr * np.cos(tt), rr * np.sin(tt)], axis=-1).reshape(-1, 2)
    w = (rr * dr * dth).reshape(-1)
    return pts + np.asarray(center), w


def _rect_volume_nodes(w_len, h_len, origin, n_target):
    aspect = w_len / h_len
    ny = max(4, int(math.ceil(math.sqrt(n_target / aspect))))
    nx = max(4, int(math.ceil(aspect * ny)))
    dx, dy = w_len / nx, h_len / ny
    x = origin[0] + (np.arange(nx) + 0.5) * dx
    y = origin[1] + (np.arange(ny) + 0.5) * dy
    xx, yy = np.meshgrid(x, y, indexing="ij")
    pts = np.stack([xx, yy], axis=-1).reshape(-1, 2)
    return pts, np.full(len(pts), dx * dy)


def _ball_volume_nodes(radius, center, n_target):
    # spherical grid: midpoint nodes weighted by exact cell measures, so the
    # total weight reproduces the volume to roundoff at any resolution
    nr = max(4, int(round((n_target / 8.0) ** (1.0 / 3.0))))
    nth = 2 * nr
    nph = 2 * nth
    dr = radius / nr
    dth = math.pi / nth
    dph = 2 * math.pi / nph
    r_edges = np.arange(nr + 1) * dr
    th_edges = np.arange(nth + 1) * dth
    r = (np.arange(nr) + 0.5) * dr
    th = (np.arange(nth) + 0.5) * dth
    ph = (np.arange(nph) + 0.5) * dph
    w_r = np.diff(r_edges ** 3) / 3.0
    w_th = -np.diff(np.cos(th_edges))
    rr, tt, pp = np.meshgrid(r, th, ph, indexing="ij")
    ww = w_r[:, None, None] * w_th[None, :, None] * np.full(nph, dph)[None, None, :]
    pts = np.stack(
        [rr * np.sin(tt) * np.cos(pp), rr * np.sin(tt) * np.sin(pp), rr * np.cos(tt)],
        axis=-1,
    ).reshape(-1, 3)
    return pts + np.asarray(center), ww.reshape(-1)


def volume_quadrature(domain: ConvexDomain, spec: QuadratureSpec, angle_multiple=None):
    """Positive-weight nodes whose total weight reproduces |Omega| within spec.tol.

    Refines (doubling the node budget) until the analytic volume is matched;
    raises :class:`QuadratureFailure` if the refinement limit is exhausted.
    ``angle_multiple`` forces the disk's angular count to a multiple (used to
    keep boundary samples on the grid's rotational symmetry lattice).
    """
    target = domain.volume
    n = spec.volume_nodes
    last_err = math.inf
    for _ in range(spec.refine_limit + 1):
        if domain.kind == "disk":
            pts, w = _disk_volume_nodes(domain.params[0], domain.center, n, angle_multiple)
        elif domain.kind == "ellipse":
            a, b = domain.params
            pts, w = _disk_volume_nodes(1.0, (0.0, 0.0), n, angle_multiple)
            pts = pts * np.array([a, b]) + np.asarray(domain.center)
            w = w * (a * b)
        elif domain.kind == "rect":
            w_len, h_len = domain.params
            origin = np.asarray(domain.center) - np.array([w_len / 2, h_len / 2])
            pts, w = _rect_volume_nodes(w_len, h_len, origin, n)
        else:
            pts, w = _ball_volume_nodes(domain.params[0], domain.center, n)
        last_err = abs(float(w.sum()) - target) / target
        if last_err <= spec.tol:
            return pts, w
        n *= 2
    raise QuadratureFailure("volume quadrature did not reach tolerance", last_err)


# ---------------------------------------------------------------------------
# boundary quadrature


def _split_at_rect_corners(domain, s0, s1):
    w, h = domain.params
    corners = [w, w + h, 2 * w + h]
    pieces, lo = [], s0
    for c in corners:
        if lo < c < s1:
            pieces.append((lo, c))
            lo = c
    pieces.append((lo, s1))
    return pieces


def boundary_quadrature(domain: ConvexDomain, part: BoundaryPartition | None, spec: QuadratureSpec):
    """Midpoint nodes (point, weight, normal) over Gamma_1 or the whole boundary.

    Weights sum to the surface measure of the requested region within
    spec.tol (refining as needed).  Corner-adjacent rectangle nodes sit half
    a spacing away from corners because each straight piece is sampled by
    its own midpoint rule.
    """
    if part is None:
        part = full_boundary(domain)
    part.validate_against(domain)
    target = gamma1_measure(domain, part)
    n = spec.boundary_nodes
    last_err = math.inf
    for _ in range(spec.refine_limit + 1):
        pts, w, nrm = _boundary_nodes_once(domain, part, n)
        last_err = abs(float(w.sum()) - target) / target
        if last_err <= spec.tol:
            return pts, w, nrm
        n *= 2
    raise QuadratureFailure("boundary quadrature did not reach tolerance", last_err)


def _boundary_nodes_once(domain, part, n):
    total_len = part.arc_length()
    if domain.kind == "ball3d":
        return _ball_boundary_nodes(domain, part, n)
    all_pts, all_w, all_nrm = [], [], []
    for s0, s1 in part.intervals:
        pieces = _split_at_rect_corners(domain, s0, s1) if domain.kind == "rect" else [(s0, s1)]
        for p0, p1 in pieces:
            m = max(2, int(round(n * (p1 - p0) / total_len)))
            ds = (p1 - p0) / m
            s = p0 + (np.arange(m) + 0.5) * ds
            pts, nrm = domain.boundary_points(s)
            # midpoint rule in arc length: weight is the exact arc spacing
            all_pts.append(pts)
            all_w.append(np.full(m, ds))
            all_nrm.append(nrm)
    return np.concatenate(all_pts), np.concatenate(all_w), np.concatenate(all_nrm)


def _ball_boundary_nodes(domain, part, n):
    # sphere bands: midpoint nodes with exact band-cell areas
    r = domain.params[0]
    c = np.asarray(domain.center)
    nth = max(4, int(round(math.sqrt(n / 2))))
    nph = 2 * nth
    dph = 2 * math.pi / nph
    ph = (np.arange(nph) + 0.5) * dph
    all_pts, all_w = [], []
    for s0, s1 in part.intervals:
        th0, th1 = s0 / r, s1 / r
        m = max(2, int(round(nth * (th1 - th0) / math.pi)))
        edges = np.linspace(th0, th1, m + 1)
        th = 0.5 * (edges[:-1] + edges[1:])
        w_th = -np.diff(np.cos(edges)) * r * r
        tt, pp = np.meshgrid(th, ph, indexing="ij")
        nvec = np.stack(
            [np.sin(tt) * np.cos(pp), np.sin(tt) * np.sin(pp), np.cos(tt)], axis=-1
        ).reshape(-1, 3)
        w = (w_th[:, None] * np.full(nph, dph)[None, :]).reshape(-1)
        all_pts.append(c + r * nvec)
        all_w.append(w)
    pts = np.concatenate(all_pts)
    w = np.concatenate(all_w)
    nrm = (pts - c) / r
    return pts, w, nrm


# ---------------------------------------------------------------------------
# CLI grammar helpers


def parse_domain(text: str) -> ConvexDomain:
    """Parse ``disk:R``, ``ellipse:a,b``, ``rect:w,h``, ``ball:R``."""
    try:
        kind, _, arg = text.partition(":")
        vals = [float(v) for v in arg.split(",")] if arg else []
        if kind == "disk":
            (r,) = vals
            return disk(r)
        if kind == "ellipse":
            a, b = vals
            return ellipse(a, b)
        if kind == "rect":
            w, h = vals
            return rectangle(w, h)
        if kind == "ball":
            (r,) = vals
            return ball3d(r)
    except (ValueError, TypeError) as exc:
        raise ValueError(f"bad domain spec {text!r}: {exc}") from None
    raise ValueError(f"bad domain spec {text!r}: unknown kind {kind!r}")


def parse_partition(text: str, domain: ConvexDomain) -> BoundaryPartition:
    """Parse ``full`` or ``arcs:s0-s1[,s2-s3...]`` (arc-length units)."""
    if text == "full":
        return full_boundary(domain)
    if not text.startswith("arcs:"):
        raise ValueError(f"bad partition spec {text!r}: expected 'full' or 'arcs:...'")
    try:
        intervals = []
        for piece in text[len("arcs:"):].split(","):
            lo, _, hi = piece.partition("-")
            intervals.append((float(lo), float(hi)))
        part = BoundaryPartition(tuple(intervals))
    except ValueError as exc:
        raise ValueError(f"bad partition spec {text!r}: {exc}") from None
    part.validate_against(domain)
    return part
