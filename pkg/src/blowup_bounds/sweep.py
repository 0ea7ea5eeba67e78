"""Parameter sweeps over |Gamma_1|, q, or M0 with log-log slope verification.

Each row evaluates the full set of bounds (and optionally the simulator)
at one value of the varying axis.  Because the closed-form lower bound
switches power law where the min clause 1/(q M0^(q-1) |Gamma_1|^alpha)
crosses 1, the min argument is recorded per row and tables are split at
the crossing before any slope fit.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import (
    BoundsInput,
    lower_bound_closed,
    lower_bound_constructive,
    lower_bound_log,
    upper_bound,
)
from .kernel import KernelConstants

SWEEP_COLUMNS = [
    "value",
    "q",
    "m0",
    "gamma1_area",
    "alpha",
    "lower_new_closed",
    "lower_new_constructive",
    "lower_log",
    "upper",
    "t_star_sim",
    "min_clause_arg",
    "regime",
    "status",
]


@dataclass(frozen=True)
class SweepSpec:
    """One sweep: vary ``axis`` over ``values`` with everything else fixed.

    ``fixed`` supplies q, m0, gamma1_area, alpha (the varying one may be
    omitted).  ``volume`` enables the upper bound for constant initial
    data u0 = M0 (the integral is |Omega| M0^(1-q)).  Simulation columns
    are opt-in via ``simulate_rows`` with a per-row wall-clock budget.
    """

    axis: str
    values: tuple[float, ...]
    fixed: dict
    constants: KernelConstants
    volume: float | None = None
    c_free: float = 1.0
    simulate_rows: bool = False
    sim_factory: object = None  # callable(value, fixed) -> SimConfig
    sim_budget: float = 60.0
    constructive_budget: int = 5000

    def __post_init__(self):
        if self.axis not in ("gamma1", "q", "m0"):
            raise ValueError("axis must be one of gamma1 | q | m0")
        if len(self.values) < 4:
            raise ValueError("a sweep needs at least 4 values")
        diffs = np.diff(np.asarray(self.values, dtype=float))
        if not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ValueError("sweep values must be strictly monotone")
        if self.simulate_rows and self.sim_factory is None:
            raise ValueError("simulate_rows requires a sim_factory")


def _row_inputs(spec: SweepSpec, value: float) -> dict:
    params = dict(spec.fixed)
    key = {"gamma1": "gamma1_area", "q": "q", "m0": "m0"}[spec.axis]
    params[key] = value
    return params


def _evaluate_row(spec: SweepSpec, value: float) -> dict:
    params = _row_inputs(spec, value)
    row = {c: None for c in SWEEP_COLUMNS}
    row["value"] = value
    row.update({k: params[k] for k in ("q", "m0", "gamma1_area", "alpha")})
    try:
        inp = BoundsInput(
            q=params["q"],
            m0=params["m0"],
            gamma1_area=params["gamma1_area"],
            alpha=params["alpha"],
            constants=spec.constants,
        )
        row["lower_new_closed"] = lower_bound_closed(inp)
        row["lower_new_constructive"], _ = lower_bound_constructive(
            inp, enumeration_budget=spec.constructive_budget
        )
        row["lower_log"] = lower_bound_log(
            params["q"], params["m0"], params["gamma1_area"], spec.constants.ndim, spec.c_free
        )
        if spec.volume is not None:
            u0_integral = spec.volume * params["m0"] ** (1.0 - params["q"])
            row["upper"] = upper_bound(params["q"], params["gamma1_area"], u0_integral)
        arg = 1.0 / (params["q"] * params["m0"] ** (params["q"] - 1.0) * params["gamma1_area"] ** params["alpha"])
        row["min_clause_arg"] = arg
        row["regime"] = "inactive" if arg >= 1.0 else "active"
        row["status"] = "ok"
    except Exception as exc:  # per-row failures recorded, sweep continues
        row["status"] = f"error: {exc}"
        return row
    if spec.simulate_rows:
        from .simulate import run_to_blowup

        try:
            cfg = spec.sim_factory(value, params)
            est = run_to_blowup(cfg, compute_error_estimate=False, wall_budget=spec.sim_budget)
            if est.status == "blew-up":
                row["t_star_sim"] = est.t_star_est
            else:
                row["status"] = f"sim-{est.status}"
        except Exception as exc:
            row["status"] = f"sim-error: {exc}"
    return row


def run_sweep(spec: SweepSpec, max_workers: int = 1) -> list[dict]:
    """Evaluate all rows (in input order; rows are independent)."""
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(lambda v: _evaluate_row(spec, v), spec.values))
    return [_evaluate_row(spec, v) for v in spec.values]


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares line through (log x, log y)."""

    slope: float
    intercept: float
    residual_norm: float
    x_range: tuple[float, float]
    n_points: int

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "residual_norm": self.residual_norm,
            "x_range": list(self.x_range),
            "n_points": self.n_points,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SlopeFit":
        return cls(d["slope"], d["intercept"], d["residual_norm"], tuple(d["x_range"]), d["n_points"])


def fit_slope(rows: list[dict], x_column: str, y_column: str) -> SlopeFit:
    """Fit log y = slope log x + intercept over the rows (positive values only)."""
    xs = np.array([r[x_column] for r in rows], dtype=float)
    ys = np.array([r[y_column] for r in rows], dtype=float)
    if len(xs) < 4:
        raise ValueError("slope fit needs at least 4 points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("slope fit requires positive values in both columns")
    lx, ly = np.log(xs), np.log(ys)
    a = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(a, ly, rcond=None)
    resid = ly - a @ coef
    return SlopeFit(
        slope=float(coef[0]),
        intercept=float(coef[1]),
        residual_norm=float(np.sqrt(np.mean(resid ** 2))),
        x_range=(float(xs.min()), float(xs.max())),
        n_points=len(xs),
    )


def partition_by_regime(rows: list[dict]) -> list[list[dict]]:
    """Split a sweep at min-clause regime crossings so each part is one power law."""
    parts: list[list[dict]] = []
    current: list[dict] = []
    regime = None
    for row in rows:
        if row["regime"] != regime and current:
            parts.append(current)
            current = []
        regime = row["regime"]
        current.append(row)
    if current:
        parts.append(current)
    return parts
