"""Finite-difference blow-up simulator for heat flow with a radiating boundary patch.

The spatial discretization is a cell-centered finite-volume scheme (polar
grid on the disk with no node at the origin, uniform Cartesian grid on the
rectangle).  Fluxes through interior faces give a conservative diffusion
operator with zero row sums, so pure-Neumann runs conserve discrete mass
to solver accuracy.  The nonlinear condition du/dn = u^q acts through
boundary faces in Gamma_1: the face value solves the one-sided
second-order extrapolation u_b = u_cell + (h/2) u_b^q, which is the
cell-centered form of the ghost-node rule.

The explicit stepper uses the coupled step control
dt = safety * CFL / max(1, q M^(q-1))^2.  The semi-implicit stepper
(backward Euler diffusion, explicit boundary flux) replaces the squared
growth clamp with the explicit-flux stability bound h/(q M^(q-1)) plus an
observed-rate clamp holding the per-step growth of M to a bounded
fraction: on a fixed mesh the late discrete dynamics collapse onto the
boundary-cell ODE whose remaining time scales like M^-(q-1), so the
squared clamp would over-resolve it by an unbounded factor.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import BoundaryPartition, ConvexDomain, curvature_sum

DT_UNDERFLOW = 1e-15


# ---------------------------------------------------------------------------
# grids


class _Grid:
    """Shared face-based FV machinery; subclasses fill the geometry arrays."""

    # filled by subclasses:
    # centers (n,2), areas (n,), interior faces (i, j, coeff=len/dist),
    # boundary faces: cell index, length, arc position, half spacing to wall
    centers: np.ndarray
    areas: np.ndarray
    b_cells: np.ndarray
    b_lengths: np.ndarray
    b_arcs: np.ndarray
    b_half: np.ndarray
    b_points: np.ndarray  # face midpoints on the wall
    b_normals: np.ndarray

    def build_operator(self, fi, fj, fc):
        n = len(self.areas)
        inv_a = 1.0 / self.areas
        rows = np.concatenate([fi, fj, fi, fj])
        cols = np.concatenate([fj, fi, fi, fj])
        vals = np.concatenate([fc * inv_a[fi], fc * inv_a[fj], -fc * inv_a[fi], -fc * inv_a[fj]])
        self.L = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        self.dt_cfl_full = 1.0 / float(np.max(-self.L.diagonal()))
        # CFL restricted to wall-adjacent cells: the relevant scale for the
        # semi-implicit stepper, which is not limited by the (stiff) interior
        diag = np.asarray(-self.L.diagonal()).ravel()
        self.dt_cfl_boundary = 1.0 / float(np.max(diag[self.b_cells]))

    def gamma1_mask(self, partition: BoundaryPartition | None) -> np.ndarray:
        if partition is None:
            return np.zeros(len(self.b_arcs), dtype=bool)
        return partition.contains(self.b_arcs)


class DiskGrid(_Grid):
    """Polar FV grid; angular cell centers sit at j * dtheta so the point
    (R, 0) is a boundary face midpoint."""

    def __init__(self, domain: ConvexDomain, nr: int, ntheta: int):
        R = domain.params[0]
        cx = np.asarray(domain.center)
        self.domain = domain
        self.shape = (nr, ntheta)
        dr = R / nr
        dth = 2 * math.pi / ntheta
        r = (np.arange(nr) + 0.5) * dr
        th = np.arange(ntheta) * dth  # cell centers; cells span +-dth/2
        rr, tt = np.meshgrid(r, th, indexing="ij")
        self.centers = cx + np.stack([rr * np.cos(tt), rr * np.sin(tt)], axis=-1).reshape(-1, 2)
        self.areas = (rr * dr * dth).reshape(-1)

        def idx(i, j):
            return i * ntheta + (j % ntheta)

        fi, fj, fc = [], [], []
        for i in range(nr):
            for j in range(ntheta):
                # radial face to the outer neighbor
                if i + 1 < nr:
                    fi.append(idx(i, j))
                    fj.append(idx(i + 1, j))
                    fc.append((i + 1) * dr * dth / dr)
                # angular face to the next cell
                fi.append(idx(i, j))
                fj.append(idx(i, j + 1))
                fc.append(dr / (r[i] * dth))
        self.b_cells = np.array([idx(nr - 1, j) for j in range(ntheta)])
        self.b_lengths = np.full(ntheta, R * dth)
        self.b_arcs = np.mod(R * th, 2 * math.pi * R)
        self.b_half = np.full(ntheta, dr / 2)
        self.b_points = cx + np.stack([R * np.cos(th), R * np.sin(th)], axis=-1)
        self.b_normals = np.stack([np.cos(th), np.sin(th)], axis=-1)
        self.build_operator(np.array(fi), np.array(fj), np.array(fc))


class RectGrid(_Grid):
    """Uniform Cartesian FV grid on [0,w] x [0,h]."""

    def __init__(self, domain: ConvexDomain, nx: int, ny: int):
        w, h = domain.params
        origin = np.asarray(domain.center) - np.array([w / 2, h / 2])
        self.domain = domain
        self.shape = (nx, ny)
        dx, dy = w / nx, h / ny
        x = origin[0] + (np.arange(nx) + 0.5) * dx
        y = origin[1] + (np.arange(ny) + 0.5) * dy
        xx, yy = np.meshgrid(x, y, indexing="ij")
        self.centers = np.stack([xx, yy], axis=-1).reshape(-1, 2)
        self.areas = np.full(nx * ny, dx * dy)

        def idx(i, j):
            return i * ny + j

        fi, fj, fc = [], [], []
        for i in range(nx):
            for j in range(ny):
                if i + 1 < nx:
                    fi.append(idx(i, j))
                    fj.append(idx(i + 1, j))
                    fc.append(dy / dx)
                if j + 1 < ny:
                    fi.append(idx(i, j))
                    fj.append(idx(i, j + 1))
                    fc.append(dx / dy)
        bc, bl, ba, bh, bp, bn = [], [], [], [], [], []
        for i in range(nx):  # bottom s = x, top s = 2w + h - x
            xi = (i + 0.5) * dx
            bc.append(idx(i, 0)); bl.append(dx); ba.append(xi); bh.append(dy / 2)
            bp.append(origin + [xi, 0.0]); bn.append([0.0, -1.0])
            bc.append(idx(i, ny - 1)); bl.append(dx); ba.append(2 * w + h - xi); bh.append(dy / 2)
            bp.append(origin + [xi, h]); bn.append([0.0, 1.0])
        for j in range(ny):  # right s = w + y, left s = 2(w + h) - y
            yj = (j + 0.5) * dy
            bc.append(idx(nx - 1, j)); bl.append(dy); ba.append(w + yj); bh.append(dx / 2)
            bp.append(origin + [w, yj]); bn.append([1.0, 0.0])
            bc.append(idx(0, j)); bl.append(dy); ba.append(2 * (w + h) - yj); bh.append(dx / 2)
            bp.append(origin + [0.0, yj]); bn.append([-1.0, 0.0])
        self.b_cells = np.array(bc)
        self.b_lengths = np.array(bl)
        self.b_arcs = np.array(ba)
        self.b_half = np.array(bh)
        self.b_points = np.array(bp)
        self.b_normals = np.array(bn)
        self.build_operator(np.array(fi), np.array(fj), np.array(fc))


def make_grid(domain: ConvexDomain, resolution: tuple[int, int]) -> _Grid:
    if domain.kind == "disk":
        return DiskGrid(domain, *resolution)
    if domain.kind == "rect":
        return RectGrid(domain, *resolution)
    raise ValueError(f"simulation supports disk and rect domains, not {domain.kind!r}")


# ---------------------------------------------------------------------------
# configuration / state


@dataclass
class SimConfig:
    """One simulation setup.

    ``initial`` accepts a constant, a callable of the point coordinates,
    or an array of nodal values matching the grid.  ``thresholds`` default
    to (1e2, 1e3, 1e4) * M0, set at init time.
    """

    domain: ConvexDomain
    partition: BoundaryPartition | None
    q: float
    initial: object
    resolution: tuple[int, int] = (48, 192)
    stepper: str = "semi-implicit"
    safety: float = 0.5
    thresholds: tuple[float, ...] | None = None
    horizon: float = 10.0
    growth_target: float = 0.02

    def __post_init__(self):
        if self.q <= 1:
            raise ValueError("q must exceed 1")
        if min(self.resolution) < 16:
            raise ValueError("resolution must be at least 16 cells per axis")
        if self.stepper not in ("explicit", "semi-implicit"):
            raise ValueError("stepper must be 'explicit' or 'semi-implicit'")
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")

    def with_resolution(self, resolution) -> "SimConfig":
        from dataclasses import replace

        return replace(self, resolution=tuple(resolution))


@dataclass
class SimState:
    grid: _Grid
    u: np.ndarray
    t: float = 0.0
    steps: int = 0
    m_history: list = field(default_factory=list)
    m_current: float = 0.0
    m_prev: float = 0.0
    dt_last: float = 0.0
    blown_up: bool = False
    gamma1_faces: np.ndarray | None = None
    _lu_cache: dict = field(default_factory=dict)

    @property
    def m0(self) -> float:
        return self.m_history[0][1]

    def _solver_for(self, dt: float):
        # small LRU: the dt ladder revisits neighbouring rungs near blow-up
        lu = self._lu_cache.pop(dt, None)
        if lu is None:
            n = len(self.u)
            lu = spla.splu((sp.identity(n, format="csc") - dt * self.grid.L).tocsc())
            while len(self._lu_cache) >= 8:
                self._lu_cache.pop(next(iter(self._lu_cache)))
        self._lu_cache[dt] = lu
        return lu


def _sample_initial(initial, grid):
    if callable(initial):
        vals = np.array([float(initial(*p)) for p in grid.centers])
        bvals = np.array([float(initial(*p)) for p in grid.b_points])
        return vals, bvals
    arr = np.asarray(initial, dtype=float)
    if arr.ndim == 0:
        return np.full(len(grid.areas), float(arr)), np.full(len(grid.b_cells), float(arr))
    if arr.size != len(grid.areas):
        raise ValueError(f"nodal initial data needs {len(grid.areas)} values, got {arr.size}")
    return arr.reshape(-1).copy(), arr.reshape(-1)[grid.b_cells]


def init(config: SimConfig) -> SimState:
    """Sample the initial data onto the grid and seed the max history with (0, M0)."""
    grid = make_grid(config.domain, config.resolution)
    u, ub = _sample_initial(config.initial, grid)
    if np.any(u < 0):
        raise ValueError("initial data must be nonnegative")
    m0 = float(max(u.max(), ub.max()))
    if m0 <= 0:
        raise ValueError("initial data must not vanish identically")
    if config.thresholds is not None:
        th = tuple(config.thresholds)
        if any(b <= a for a, b in zip(th, th[1:])):
            raise ValueError("thresholds must be strictly increasing")
        if th[0] < 10 * m0:
            raise ValueError("thresholds must be at least 10 * M0")
    state = SimState(grid=grid, u=u, m_current=m0, m_prev=m0)
    state.m_history.append((0.0, m0))
    return state


def _boundary_values(state: SimState, config: SimConfig, mask):
    """Face values u_b solving u_b = u_cell + h/2 u_b^q on Gamma_1 (Newton),
    u_cell elsewhere.  Falls back to u_cell where the boundary layer is too
    steep for the extrapolation to have a root."""
    grid = state.grid
    uc = state.u[grid.b_cells]
    ub = uc.copy()
    if not np.any(mask):
        return ub
    q = config.q
    c = grid.b_half[mask]
    target = uc[mask]
    v = target.copy()
    ok = np.ones(len(v), dtype=bool)
    for _ in range(30):
        h = v - c * v ** q - target
        hp = 1.0 - c * q * v ** (q - 1.0)
        ok &= hp > 1e-12
        stepv = np.where(ok, h / np.where(ok, hp, 1.0), 0.0)
        v = v - stepv
        if np.all(np.abs(stepv) <= 1e-13 * np.maximum(1.0, np.abs(v))):
            break
    v = np.where(ok & (v >= target), v, target)
    out = ub
    out[mask] = v
    return out


def _boundary_source(state: SimState, config: SimConfig, mask, ub):
    grid = state.grid
    b = np.zeros(len(state.u))
    if np.any(mask):
        flux = grid.b_lengths[mask] * ub[mask] ** config.q
        np.add.at(b, grid.b_cells[mask], flux / grid.areas[grid.b_cells[mask]])
    return b


def _choose_dt(state: SimState, config: SimConfig) -> float:
    grid = state.grid
    m = max(state.m_current, 1e-300)
    if config.stepper == "explicit":
        clamp = max(1.0, config.q * m ** (config.q - 1.0)) ** 2
        return config.safety * grid.dt_cfl_full / clamp
    # semi-implicit: wall-cell CFL for accuracy, the explicit-flux stability
    # bound h/(q M^(q-1)) for the boundary nonlinearity, and an observed-rate
    # clamp keeping the per-step growth of M to a bounded fraction
    stab = float(np.min(grid.b_half)) / max(1.0, config.q * m ** (config.q - 1.0))
    dt = min(grid.dt_cfl_boundary, stab)
    if state.dt_last > 0 and state.m_current > state.m_prev > 0:
        rate = (state.m_current - state.m_prev) / (state.dt_last * state.m_current)
        if rate > 0:
            dt = min(dt, config.growth_target / rate)
    dt *= config.safety
    # snap to a power-of-two ladder so the implicit factorization is reused
    base = config.safety * grid.dt_cfl_boundary
    k = max(0, math.ceil(math.log2(base / dt))) if dt < base else 0
    return base / (1 << min(k, 200))


def step(state: SimState, config: SimConfig) -> SimState:
    """Advance one accepted time step (mutates and returns ``state``)."""
    if state.blown_up:
        raise RuntimeError("state already blew up")
    if state.gamma1_faces is None:
        state.gamma1_faces = state.grid.gamma1_mask(config.partition)
    mask = state.gamma1_faces
    ub = _boundary_values(state, config, mask)
    m_now = float(max(state.u.max(), ub.max()))
    dt = _choose_dt(state, config)
    if dt < DT_UNDERFLOW:
        state.blown_up = True
        return state
    b = _boundary_source(state, config, mask, ub)
    grid = state.grid
    u_min_before = float(state.u.min())
    if config.stepper == "explicit":
        u_new = state.u + dt * (grid.L @ state.u + b)
    else:
        u_new = state._solver_for(dt).solve(state.u + dt * b)
    # discrete maximum/minimum principle: boundary influx only raises values
    tol = 1e-10 * max(1.0, m_now)
    if float(u_new.min()) < u_min_before - tol:
        raise RuntimeError("discrete minimum principle violated; reduce the time step")
    if np.any(u_new < 0):
        u_new = np.maximum(u_new, 0.0)
    state.u = u_new
    state.t += dt
    state.steps += 1
    state.dt_last = dt
    state.m_prev = state.m_current
    ub_after = _boundary_values(state, config, mask)
    m_after = float(max(u_new.max(), ub_after.max()))
    state.m_current = max(state.m_current, m_after)
    state.m_history.append((state.t, state.m_current))
    return state


# ---------------------------------------------------------------------------
# blow-up runs


@dataclass(frozen=True)
class BlowupEstimate:
    """Simulator verdict: threshold crossings, extrapolated T*, and metadata."""

    threshold_times: tuple[tuple[float, float], ...]  # (threshold, crossing time)
    t_star_est: float | None
    model: str
    error_estimate: float | None
    status: str  # blew-up | horizon-reached | budget-exhausted
    resolution: tuple[int, int]
    m0: float
    max_on_gamma1: bool | None
    m_history: np.ndarray | None = None

    def __post_init__(self):
        times = [t for _, t in self.threshold_times]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("threshold crossing times must be strictly increasing")
        if self.t_star_est is not None and times and self.t_star_est < times[-1]:
            raise ValueError("T* estimate below the last crossing time")

    def to_dict(self) -> dict:
        return {
            "threshold_times": [[th, t] for th, t in self.threshold_times],
            "t_star_est": self.t_star_est,
            "model": self.model,
            "error_estimate": self.error_estimate,
            "status": self.status,
            "resolution": list(self.resolution),
            "m0": self.m0,
            "max_on_gamma1": self.max_on_gamma1,
        }


def _fit_t_star(history: np.ndarray, q: float) -> tuple[float | None, str]:
    """Fit M(t) ~ c (T*-t)^(-1/(2(q-1))) on the last decade of the history.

    Linear least squares on y = M^(-2(q-1)) = c' (T* - t); the time axis
    intercept is T*.  The scaling model is an engineering choice validated
    by mesh self-consistency, not an analytic statement.
    """
    t, m = history[:, 0], history[:, 1]
    m_end = m[-1]
    sel = (m >= m_end / 10.0) & (m > 0)
    if sel.sum() < 4:
        return None, "insufficient-history"
    ts, ms = t[sel], m[sel]
    y = ms ** (-2.0 * (q - 1.0))
    a = np.vstack([np.ones_like(ts), ts]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    if coef[1] >= 0:
        return None, "fit-degenerate"
    t_star = -coef[0] / coef[1]
    # tolerate an intercept a hair inside the history (fit noise), clamp up
    if t_star < t[-1] - 0.01 * max(t[-1] - ts[0], 1e-300):
        return None, "fit-below-history"
    return max(float(t_star), float(t[-1])), "power-law-fit"


def _aitken_t_star(times: list[float]) -> float | None:
    if len(times) < 3:
        return None
    t1, t2, t3 = times[-3:]
    denom = (t2 - t1) - (t3 - t2)
    if denom <= 0:
        return None
    return t3 + (t3 - t2) ** 2 / denom


def run_to_blowup(
    config: SimConfig,
    compute_error_estimate: bool = True,
    wall_budget: float | None = None,
) -> BlowupEstimate:
    """Integrate until the largest threshold is crossed (or the horizon/budget).

    T* is extrapolated from the tail of the max history with a Richardson
    fallback over the threshold crossings; the error estimate compares
    against a half-resolution rerun.
    """
    if config.partition is None:
        raise ValueError("run_to_blowup requires a nonempty Gamma_1")
    state = init(config)
    thresholds = config.thresholds or tuple(s * state.m0 for s in (1e2, 1e3, 1e4))
    crossings: list[tuple[float, float]] = []
    next_idx = 0
    t_wall = _time.monotonic()
    status = "blew-up"
    while True:
        if state.m_current >= thresholds[-1] and next_idx >= len(thresholds):
            break
        if state.t >= config.horizon:
            status = "horizon-reached"
            break
        if wall_budget is not None and _time.monotonic() - t_wall > wall_budget:
            status = "budget-exhausted"
            break
        step(state, config)
        while next_idx < len(thresholds) and state.m_current >= thresholds[next_idx]:
            crossings.append((thresholds[next_idx], state.t))
            next_idx += 1
        if state.blown_up:
            break

    history = np.asarray(state.m_history)
    t_star_est, model = (None, "none")
    if status == "blew-up":
        t_star_est, model = _fit_t_star(history, config.q)
        if t_star_est is None:
            t_star_est = _aitken_t_star([t for _, t in crossings])
            model = "richardson-thresholds"
        if t_star_est is None:
            t_star_est, model = float(state.t), "last-time"
        t_star_est = max(t_star_est, float(state.t))

    max_on_gamma1 = None
    if config.partition is not None and status == "blew-up":
        mask = state.grid.gamma1_mask(config.partition)
        i_max = int(np.argmax(state.u))
        gamma_cells = set(state.grid.b_cells[mask].tolist())
        max_on_gamma1 = i_max in gamma_cells

    err = None
    if compute_error_estimate and status == "blew-up" and t_star_est is not None:
        half = tuple(max(16, r // 2) for r in config.resolution)
        if half != config.resolution:
            coarse = run_to_blowup(
                config.with_resolution(half), compute_error_estimate=False, wall_budget=wall_budget
            )
            if coarse.t_star_est is not None:
                err = abs(t_star_est - coarse.t_star_est)

    return BlowupEstimate(
        threshold_times=tuple(crossings),
        t_star_est=t_star_est,
        model=model,
        error_estimate=err,
        status=status,
        resolution=tuple(config.resolution),
        m0=state.m0,
        max_on_gamma1=max_on_gamma1,
        m_history=history,
    )


# ---------------------------------------------------------------------------
# recorded histories and the time-shifted representation formula


@dataclass
class SimHistory:
    """Boundary trace (every step) plus full-field snapshots at chosen times."""

    grid: _Grid
    config: SimConfig
    times: np.ndarray  # step times, starting at 0
    ub_trace: np.ndarray  # (n_times, n_boundary_faces) wall values
    snapshots: dict  # actual snapshot time -> cell field copy

    def wall_value(self, face: int, tau: float) -> float:
        """Linear interpolation of the recorded wall value at one face."""
        if tau < self.times[0] - 1e-14 or tau > self.times[-1] + 1e-14:
            raise ValueError("requested time outside the recorded history")
        return float(np.interp(tau, self.times, self.ub_trace[:, face]))

    def wall_values(self, taus: np.ndarray) -> np.ndarray:
        """(n_taus, n_faces) interpolated wall values."""
        out = np.empty((len(taus), self.ub_trace.shape[1]))
        idx = np.clip(np.searchsorted(self.times, taus) - 1, 0, len(self.times) - 2)
        t0, t1 = self.times[idx], self.times[idx + 1]
        w = np.clip((taus - t0) / np.maximum(t1 - t0, 1e-300), 0.0, 1.0)
        out = (1 - w)[:, None] * self.ub_trace[idx] + w[:, None] * self.ub_trace[idx + 1]
        return out


def run_with_history(config: SimConfig, t_end: float, snapshot_times=()) -> SimHistory:
    """Integrate to ``t_end`` recording the wall values at every step and the
    full field at the first step past each requested snapshot time."""
    state = init(config)
    mask = state.grid.gamma1_mask(config.partition)
    state.gamma1_faces = mask
    times = [0.0]
    traces = [_boundary_values(state, config, mask)]
    pending = sorted(snapshot_times)
    snapshots: dict[float, np.ndarray] = {}
    if pending and pending[0] <= 0.0:
        snapshots[0.0] = state.u.copy()
        pending = [s for s in pending if s > 0.0]
    while state.t < t_end:
        step(state, config)
        if state.blown_up:
            raise RuntimeError("field blew up before the requested history end")
        times.append(state.t)
        traces.append(_boundary_values(state, config, mask))
        while pending and state.t >= pending[0]:
            snapshots[state.t] = state.u.copy()
            pending.pop(0)
    return SimHistory(
        grid=state.grid,
        config=config,
        times=np.asarray(times),
        ub_trace=np.asarray(traces),
        snapshots=snapshots,
    )


def _interface_arcs(partition: BoundaryPartition | None, domain: ConvexDomain):
    if partition is None:
        return []
    length = domain.param_length
    pts = []
    for s0, s1 in partition.intervals:
        pts.extend([s0 % length, s1 % length])
    full = {(0.0, length)}
    if set(partition.intervals) == full:
        return []
    return pts


def representation_residual(
    history: SimHistory,
    arc: float,
    T: float,
    t: float,
    n_sigma: int = 512,
) -> float:
    """Residual of the time-shifted boundary representation formula.

    Evaluates 2 int_Omega Phi u(.,T) - 2 iint D_y Phi . n u + 2 iint_G1 Phi u^q
    at the boundary face nearest ``arc`` and compares with the recorded
    wall value at time T + t.  The near-singular part of the time integrals
    (tau -> t) is covered by analytic flat-boundary patches sized to the
    wall-face spacing.
    """
    if T < 0 or t <= 0:
        raise ValueError("requires T >= 0 and t > 0")
    grid = history.grid
    config = history.config
    if not history.snapshots:
        raise ValueError("history carries no snapshots; pass snapshot_times to run_with_history")
    snap_times = np.array(sorted(history.snapshots))
    t_snap = float(snap_times[np.argmin(np.abs(snap_times - T))])
    if abs(t_snap - T) > 0.05 * max(t, 1e-12) + 1e-9:
        raise ValueError(f"no snapshot near T={T:g} (closest {t_snap:g})")
    if t_snap + t > history.times[-1] + 1e-14:
        raise ValueError("history does not cover [T, T+t]")

    face = int(np.argmin(np.abs(grid.b_arcs - (arc % history.grid.domain.param_length))))
    spacing = float(np.max(grid.b_lengths))
    for s_int in _interface_arcs(config.partition, grid.domain):
        length = grid.domain.param_length
        d_arc = abs(grid.b_arcs[face] - s_int)
        d_arc = min(d_arc, length - d_arc)
        if d_arc < 2 * spacing:
            raise ValueError("evaluation point too close to the Gamma_1/Gamma_2 interface")
    x = grid.b_points[face]
    mask = grid.gamma1_mask(config.partition)

    # volume term from the snapshot
    u_t = history.snapshots[t_snap]
    d2 = ((grid.centers - x) ** 2).sum(axis=-1)
    term1 = 2.0 * float((np.exp(-d2 / (4.0 * t)) / (4.0 * math.pi * t) * u_t) @ grid.areas)

    u_ref = history.wall_value(face, t_snap + t)
    sig0 = min(3.0 * spacing, 0.25 * math.sqrt(t))
    kappa = curvature_sum(grid.domain, x)
    dsig = (math.sqrt(t) - sig0) / n_sigma
    sig = sig0 + (np.arange(n_sigma) + 0.5) * dsig
    s_vals = sig ** 2
    taus = t_snap + t - s_vals
    ub = history.wall_values(taus)  # (n_sigma, n_faces)

    diff = x - grid.b_points
    dd2 = (diff * diff).sum(axis=-1)
    dots = (diff * grid.b_normals).sum(axis=-1)
    s_col = s_vals[:, None]
    gauss = np.exp(-dd2[None, :] / (4.0 * s_col)) / (4.0 * math.pi * s_col)
    dlayer = np.abs(gauss * dots[None, :] / (2.0 * s_col))

    # double layer: quadrature plus curvature patch carrying u at (x, T+t)
    quad2 = float((2.0 * sig * ((dlayer * ub) @ grid.b_lengths)).sum() * dsig)
    term2 = 2.0 * (quad2 + u_ref * kappa * sig0 / (2.0 * math.sqrt(math.pi)))

    # single layer on Gamma_1: quadrature plus flat-line patch if x radiates
    lengths1 = np.where(mask, grid.b_lengths, 0.0)
    quad3 = float((2.0 * sig * ((gauss * ub ** config.q) @ lengths1)).sum() * dsig)
    patch3 = u_ref ** config.q * sig0 / math.sqrt(math.pi) if mask[face] else 0.0
    term3 = 2.0 * (quad3 + patch3)

    return abs(term1 + term2 + term3 - u_ref)
