"""Seeded generators of smooth random fields for randomized checks.

Everything draws from counter-based Philox streams so suites are exactly
reproducible.  Generated functions are sums of a few smooth bumps that decay
well inside the walls, which keeps trapezoid quadrature and rearrangement
wall effects far below the tolerances they are checked against.
"""

from __future__ import annotations

import numpy as np

from .grids import Potential, SpaceGrid, SpaceTimeDeviation, TimeGrid


def rng_from_seed(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


def wall_envelope(grid: SpaceGrid) -> np.ndarray:
    """Smooth window equal to 1 in the bulk and ~1e-16 at the walls."""
    return np.exp(-5.0 * (grid.x / (0.82 * grid.half_width)) ** 10)


def random_smooth_potential(rng: np.random.Generator, grid: SpaceGrid,
                            max_bumps: int = 3,
                            amp_range: tuple = (0.2, 2.0),
                            width_range: tuple = (0.7, 3.0),
                            center_span: float = 5.0,
                            nonneg: bool = True) -> Potential:
    """Sum of 1..max_bumps sech^2/Gaussian bumps, optionally signed.

    The wall envelope keeps values below round-off at the half-weight
    trapezoid endpoints, so rearrangements preserve the discrete L2 norm
    to full precision.
    """
    x = grid.x
    vals = np.zeros_like(x)
    for _ in range(int(rng.integers(1, max_bumps + 1))):
        amp = rng.uniform(*amp_range)
        if not nonneg and rng.random() < 0.5:
            amp = -amp
        width = rng.uniform(*width_range)
        center = rng.uniform(-center_span, center_span)
        if rng.random() < 0.5:
            vals += amp / np.cosh((x - center) / width) ** 2
        else:
            vals += amp * np.exp(-((x - center) / width) ** 2)
    return Potential(grid, vals * wall_envelope(grid))


def random_smooth_deviation(rng: np.random.Generator, tgrid: TimeGrid, sgrid: SpaceGrid,
                            max_bumps: int = 3,
                            amp_range: tuple = (0.1, 1.0),
                            width_range: tuple = (0.7, 3.0),
                            center_span: float = 4.0,
                            time_modulation: bool = True) -> SpaceTimeDeviation:
    """Nonnegative space-time field: separable smooth bumps, slow in time."""
    x = sgrid.x
    t = tgrid.times
    span = tgrid.t_end - tgrid.t_start
    env = wall_envelope(sgrid)
    vals = np.zeros((t.size, x.size))
    for _ in range(int(rng.integers(1, max_bumps + 1))):
        amp = rng.uniform(*amp_range)
        width = rng.uniform(*width_range)
        center = rng.uniform(-center_span, center_span)
        space = env * amp / np.cosh((x - center) / width) ** 2
        if time_modulation:
            phase = rng.uniform(0.0, 2.0 * np.pi)
            freq = rng.uniform(0.0, 2.0 * np.pi)
            mod = 0.5 * (1.0 + np.sin(phase + freq * (t - tgrid.t_start) / span))
        else:
            mod = np.ones_like(t)
        vals += mod[:, None] * space[None, :]
    return SpaceTimeDeviation(tgrid, sgrid, vals)
