"""Uniform 1-D space/time grids, quadrature, norms, and the heat kernel.

Space is the truncated line [-L, L] with Dirichlet-zero extension outside;
time is a uniform partition of [t_start, t_end].  Spatial integrals use the
trapezoid rule, time integrals use the left-endpoint rectangle rule.  The
space grid always has an odd number of nodes so that x = 0 is a node and
node i is the exact floating-point negative of node (n-1-i).
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform symmetric grid on [-L, L] with an odd number of nodes."""

    half_width: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 3 or self.n_points % 2 == 0:
            raise ValueError(f"n_points must be odd and >= 3, got {self.n_points}")
        if not self.half_width > 0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / (self.n_points - 1)

    @property
    def x(self) -> np.ndarray:
        # dx * integer keeps x[i] == -x[n-1-i] exactly and x[center] == 0.0
        m = (self.n_points - 1) // 2
        return self.dx * (np.arange(self.n_points) - m)

    @property
    def center_index(self) -> int:
        return (self.n_points - 1) // 2

    def index_of(self, x: float) -> int:
        """Nearest node index; raises if x is not within half a cell of a node."""
        i = int(round((x + self.half_width) / self.dx))
        if i < 0 or i >= self.n_points or abs(self.x[i] - x) > 0.5 * self.dx + 1e-12:
            raise ValueError(f"position {x} outside grid [-{self.half_width}, {self.half_width}]")
        return i

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.n_points, self.dx)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of [t_start, t_end] into n_steps steps (n_steps+1 nodes)."""

    t_start: float
    t_end: float
    n_steps: int

    def __post_init__(self):
        if self.t_start < 0 or not self.t_end > self.t_start:
            raise ValueError(f"need t_end > t_start >= 0, got [{self.t_start}, {self.t_end}]")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_steps + 1)

    def index_of(self, t: float) -> int:
        k = int(round((t - self.t_start) / self.dt))
        if k < 0 or k > self.n_steps or abs(self.t_start + k * self.dt - t) > 1e-9 * max(1.0, self.t_end):
            raise ValueError(f"time {t} is not a grid node of {self}")
        return k


def _check_values(values: np.ndarray, shape: tuple, what: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != shape:
        raise ValueError(f"{what} has shape {values.shape}, expected {shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{what} contains non-finite entries")
    return values


@dataclass(frozen=True)
class Potential:
    """A time-independent real function sampled on a SpaceGrid."""

    grid: SpaceGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _check_values(self.values, (self.grid.n_points,), "Potential.values"))

    @classmethod
    def from_callable(cls, grid: SpaceGrid, fn) -> "Potential":
        return cls(grid, fn(grid.x))


@dataclass(frozen=True)
class SpaceTimeDeviation:
    """A real field rho(t, x) on TimeGrid x SpaceGrid (one row per time node)."""

    tgrid: TimeGrid
    sgrid: SpaceGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        shape = (self.tgrid.n_steps + 1, self.sgrid.n_points)
        object.__setattr__(self, "values", _check_values(self.values, shape, "SpaceTimeDeviation.values"))

    @classmethod
    def from_callable(cls, tgrid: TimeGrid, sgrid: SpaceGrid, fn) -> "SpaceTimeDeviation":
        tt, xx = np.meshgrid(tgrid.times, sgrid.x, indexing="ij")
        return cls(tgrid, sgrid, fn(tt, xx))

    @classmethod
    def time_constant(cls, tgrid: TimeGrid, phi: Potential) -> "SpaceTimeDeviation":
        vals = np.tile(phi.values, (tgrid.n_steps + 1, 1))
        return cls(tgrid, phi.grid, vals)

    def slice_potential(self, k: int) -> Potential:
        return Potential(self.sgrid, self.values[k])


@dataclass(frozen=True)
class Field:
    """A solution surface Z(t, x) with a strict-positivity flag."""

    tgrid: TimeGrid
    sgrid: SpaceGrid
    values: np.ndarray = field(repr=False)
    strictly_positive: bool = False

    def __post_init__(self):
        shape = (self.tgrid.n_steps + 1, self.sgrid.n_points)
        object.__setattr__(self, "values", _check_values(self.values, shape, "Field.values"))
        if self.strictly_positive and not np.all(self.values > 0):
            raise ValueError("Field flagged strictly_positive but holds non-positive values")

    def at(self, t: float, x: float) -> float:
        return float(self.values[self.tgrid.index_of(t), self.sgrid.index_of(x)])


def heat_kernel(t, x):
    """Gaussian kernel (2*pi*t)^(-1/2) exp(-x^2/(2t)); t must be positive."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("heat_kernel requires t > 0")
    x = np.asarray(x, dtype=float)
    out = np.exp(-(x * x) / (2.0 * t)) / np.sqrt(2.0 * np.pi * t)
    return float(out) if out.ndim == 0 else out


def l2_norm_space(f: Potential) -> float:
    """Trapezoid approximation of the spatial L2 norm of f."""
    return float(np.sqrt(np.dot(f.grid.trapezoid_weights(), f.values**2)))


def l2_norm_spacetime(rho: SpaceTimeDeviation) -> float:
    """Space-time L2 norm: trapezoid in space, left-rectangle in time.

    The rectangle rule sums slices 0..n_steps-1, so the final time slice
    carries no weight.
    """
    w = rho.sgrid.trapezoid_weights()
    slice_sq = rho.values[:-1] ** 2 @ w
    return float(np.sqrt(rho.tgrid.dt * slice_sq.sum()))


def spacetime_inner(a: SpaceTimeDeviation, b: SpaceTimeDeviation) -> float:
    """Space-time L2 inner product under the same quadrature as the norm."""
    w = a.sgrid.trapezoid_weights()
    return float(a.tgrid.dt * ((a.values[:-1] * b.values[:-1]) @ w).sum())


# --- serialization -----------------------------------------------------------

def format_value(v: float) -> str:
    """Locale-independent decimal with 12 significant digits."""
    return f"{v:.12g}"


def samples_to_csv(tgrid: TimeGrid, sgrid: SpaceGrid, values: np.ndarray,
                   t_stride: int = 1, x_stride: int = 1) -> str:
    """CSV body with header 't,x,value', one row per kept (time, space) node."""
    buf = io.StringIO()
    buf.write("t,x,value\n")
    times = tgrid.times
    xs = sgrid.x
    for k in range(0, len(times), t_stride):
        row = values[k]
        ts = format_value(times[k])
        for i in range(0, len(xs), x_stride):
            buf.write(f"{ts},{format_value(xs[i])},{format_value(row[i])}\n")
    return buf.getvalue()


def field_to_csv(fld: Field) -> str:
    return samples_to_csv(fld.tgrid, fld.sgrid, fld.values)


def field_descriptor(fld: Field) -> dict:
    return {
        "half_width": fld.sgrid.half_width,
        "n_points": fld.sgrid.n_points,
        "t_start": fld.tgrid.t_start,
        "t_end": fld.tgrid.t_end,
        "n_steps": fld.tgrid.n_steps,
    }


def field_descriptor_json(fld: Field) -> str:
    return json.dumps(field_descriptor(fld), indent=2, sort_keys=True)
