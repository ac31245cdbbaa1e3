"""Crank-Nicolson solvers for the tilted heat equation dZ/dt = (1/2) Z_xx + rho Z.

The delta initial condition is realized by starting the march at a small
warm-up time t0 from the exact heat kernel, tilted by the local potential.
Each step s->s+h uses the midpoint potential (rho(s)+rho(s+h))/2 at both the
implicit and explicit level, so one step is M^{-1} N with

    M = I - (h/2) (D/2 + rho_mid),   N = I + (h/2) (D/2 + rho_mid),

D the central second difference and Dirichlet-zero walls.  M and N are
symmetric on the wall-pinned subspace, which makes adjoint application an
exact transpose and keeps the discrete duality <A(s), Z(s)> constant in s to
round-off.

Within the first grid interval the march takes geometrically growing
sub-steps (step length <= elapsed time) so the barely-resolved warm-up
profile never meets a step size outside the accurate CN regime.

Far tails of the true solution sit below round-off relative to the peak;
there CN leaves sign wiggles of order 1e-16 * max.  Steps abort on
non-finite values or negatives beyond a noise threshold, and the surviving
sub-noise negatives are floored to a tiny positive constant so delta-data
solutions are strictly positive by contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .grids import (
    Field,
    Potential,
    SpaceGrid,
    SpaceTimeDeviation,
    TimeGrid,
    heat_kernel,
)

POSITIVITY_FLOOR = 1e-280
NEGATIVE_NOISE_TOL = 1e-6
RENORM_THRESHOLD = 1e120


class SolverInstabilityError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    scheme: str = "crank_nicolson"  # or "chaos_series"
    delta_warmup: float = 1e-3
    chaos_order: int = 6
    tolerance: float = 1e-8

    def __post_init__(self):
        if self.scheme not in ("crank_nicolson", "chaos_series"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not 0 < self.delta_warmup:
            raise ValueError("delta_warmup must be positive")
        if self.chaos_order < 1:
            raise ValueError("chaos_order must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


class _Stepper:
    """One CN step on a fixed SpaceGrid; matrices rebuilt per (h, rho_mid)."""

    def __init__(self, sgrid: SpaceGrid):
        self.n = sgrid.n_points
        self.dx = sgrid.dx
        self.kin_off = 0.5 / self.dx**2          # off-diagonal of D/2
        self.kin_diag = -1.0 / self.dx**2        # diagonal of D/2
        self._ab = np.zeros((3, self.n))

    def _operator_diag(self, rho_mid: np.ndarray) -> np.ndarray:
        return self.kin_diag + rho_mid

    def apply_n(self, v: np.ndarray, h: float, rho_mid: np.ndarray) -> np.ndarray:
        diag = self._operator_diag(rho_mid)
        out = v * (1.0 + 0.5 * h * diag)
        out[1:-1] += 0.5 * h * self.kin_off * (v[2:] + v[:-2])
        out[0] = 0.0
        out[-1] = 0.0
        return out

    def solve_m(self, rhs: np.ndarray, h: float, rho_mid: np.ndarray) -> np.ndarray:
        ab = self._ab
        ab[0, :] = -0.5 * h * self.kin_off
        ab[2, :] = -0.5 * h * self.kin_off
        ab[1, :] = 1.0 - 0.5 * h * self._operator_diag(rho_mid)
        # Dirichlet walls: identity rows, decoupled
        ab[1, 0] = 1.0
        ab[1, -1] = 1.0
        ab[0, 1] = 0.0
        ab[2, -2] = 0.0
        rhs = rhs.copy()
        rhs[0] = 0.0
        rhs[-1] = 0.0
        return solve_banded((1, 1), ab, rhs, overwrite_ab=False, overwrite_b=True)

    def step(self, v, h, rho_mid):
        return self.solve_m(self.apply_n(v, h, rho_mid), h, rho_mid)

    def step_transpose(self, v, h, rho_mid):
        # (M^{-1} N)^T = N M^{-1} for symmetric M, N on the pinned subspace
        return self.apply_n(self.solve_m(v, h, rho_mid), h, rho_mid)


def _warmup_substeps(t0: float, t1: float):
    """Sub-step lengths covering [t0, t1] with step <= elapsed time."""
    steps = []
    t = t0
    while t < t1 - 1e-15 * t1:
        h = min(t, t1 - t)
        steps.append(h)
        t += h
    return steps


def _check_slice(v: np.ndarray, step_label: str) -> np.ndarray:
    if not np.all(np.isfinite(v)):
        raise SolverInstabilityError(f"non-finite values after step {step_label}")
    m = v.max()
    if not m > 0:
        raise SolverInstabilityError(f"field collapsed to non-positive values at step {step_label}")
    if v.min() < -NEGATIVE_NOISE_TOL * m:
        raise SolverInstabilityError(f"negative values beyond noise level at step {step_label}")
    return np.maximum(v, POSITIVITY_FLOOR)


@dataclass(frozen=True)
class ScaledSolution:
    """Delta-data solution stored as rows * exp(log_scale) to dodge overflow."""

    tgrid: TimeGrid
    sgrid: SpaceGrid
    rows: np.ndarray
    log_scale: np.ndarray

    def log_at(self, t: float, x: float) -> float:
        k = self.tgrid.index_of(t)
        i = self.sgrid.index_of(x)
        return float(np.log(self.rows[k, i]) + self.log_scale[k])

    def field(self) -> Field:
        with np.errstate(over="raise"):
            vals = self.rows * np.exp(self.log_scale)[:, None]
        return Field(self.tgrid, self.sgrid, vals, strictly_positive=True)


def _march_delta(rho: SpaceTimeDeviation, cfg: SolverConfig, keep_warmup: bool = False):
    tg, sg = rho.tgrid, rho.sgrid
    if tg.t_start != 0.0:
        raise ValueError("delta-data solves start at t = 0")
    t0 = cfg.delta_warmup
    dt = tg.dt
    if not t0 < dt:
        raise ValueError(f"delta_warmup {t0} must be smaller than dt {dt}")
    stepper = _Stepper(sg)
    x = sg.x
    nt = tg.n_steps

    rows = np.empty((nt + 1, sg.n_points))
    log_scale = np.zeros(nt + 1)

    rho0 = rho.values[0]
    base = heat_kernel(t0, x)
    # unit discrete mass even when sqrt(t0) is marginal against dx
    base = base / np.dot(sg.trapezoid_weights(), base)
    v = base * np.exp(0.5 * t0 * (rho0 + rho0[sg.center_index]))
    rows[0] = _check_slice(v, "warmup")

    v = rows[0]
    scale = 0.0
    warm_steps = _warmup_substeps(t0, dt)
    warm_vals = [v]
    rho_mid = 0.5 * (rho.values[0] + rho.values[1])
    for j, h in enumerate(warm_steps):
        v = _check_slice(stepper.step(v, h, rho_mid), f"warmup substep {j}")
        warm_vals.append(v)
    m = v.max()
    if m > RENORM_THRESHOLD:
        scale += np.log(m)
        v = v / m
    rows[1] = v
    log_scale[1] = scale

    for k in range(1, nt):
        rho_mid = 0.5 * (rho.values[k] + rho.values[k + 1])
        v = _check_slice(stepper.step(v, dt, rho_mid), str(k + 1))
        m = v.max()
        if m > RENORM_THRESHOLD:
            scale += np.log(m)
            v = v / m
        rows[k + 1] = v
        log_scale[k + 1] = scale
    sol = ScaledSolution(tg, sg, rows, log_scale)
    if keep_warmup:
        return sol, warm_vals, warm_steps
    return sol


def solve_delta_scaled(rho: SpaceTimeDeviation, cfg: SolverConfig | None = None) -> ScaledSolution:
    cfg = cfg or SolverConfig()
    return _march_delta(rho, cfg)


def solve_delta(rho: SpaceTimeDeviation, cfg: SolverConfig | None = None) -> Field:
    """Solve dZ/dt = Z_xx/2 + rho Z from a Dirac delta at (0, 0)."""
    cfg = cfg or SolverConfig()
    if cfg.scheme == "chaos_series":
        return _chaos_field(rho, cfg)
    return _march_delta(rho, cfg).field()


def propagate(rho: SpaceTimeDeviation, s: float, t: float, f: Potential) -> Potential:
    """Evolve f from time s to time t under D/2 + rho; linear in f."""
    if not s < t:
        raise ValueError(f"propagate needs s < t, got s={s}, t={t}")
    tg = rho.tgrid
    ks, kt = tg.index_of(s), tg.index_of(t)
    if f.grid != rho.sgrid:
        raise ValueError("potential grid does not match deviation grid")
    stepper = _Stepper(rho.sgrid)
    v = f.values.copy()
    v[0] = 0.0
    v[-1] = 0.0
    for k in range(ks, kt):
        rho_mid = 0.5 * (rho.values[k] + rho.values[k + 1])
        v = stepper.step(v, tg.dt, rho_mid)
    return Potential(rho.sgrid, v)


def _propagate_transpose(rho: SpaceTimeDeviation, ks: int, kt: int, v: np.ndarray) -> np.ndarray:
    stepper = _Stepper(rho.sgrid)
    tg = rho.tgrid
    u = v.copy()
    u[0] = 0.0
    u[-1] = 0.0
    for k in range(kt - 1, ks - 1, -1):
        rho_mid = 0.5 * (rho.values[k] + rho.values[k + 1])
        u = stepper.step_transpose(u, tg.dt, rho_mid)
    return u


@dataclass(frozen=True)
class OperatorNormResult:
    value: float
    iterations: int
    converged: bool


def operator_norm(rho: SpaceTimeDeviation, s: float, t: float, iters: int = 60,
                  tolerance: float = 1e-8, seed: int = 7,
                  start: np.ndarray | None = None) -> OperatorNormResult:
    """Power-iteration estimate of the L2->L2 norm of the propagator s->t.

    Iterates v <- P*P v from a positive random start; the Rayleigh estimate
    sqrt(<Pv, Pv>/<v, v>) is nondecreasing up to convergence.  A custom
    start vector helps when the top of the singular spectrum is nearly flat
    (notably the plain heat semigroup on a wide box).
    """
    if iters < 10:
        raise ValueError("iters must be >= 10")
    tg = rho.tgrid
    ks, kt = tg.index_of(s), tg.index_of(t)
    if not ks < kt:
        raise ValueError("need s < t on the time grid")
    sg = rho.sgrid
    if start is not None:
        v = np.asarray(start, dtype=float).copy()
    else:
        rng = np.random.Generator(np.random.Philox(seed))
        v = 1.0 + rng.random(sg.n_points)
    v[0] = 0.0
    v[-1] = 0.0
    stepper = _Stepper(sg)
    dt = tg.dt

    def apply_forward(u):
        w = u
        for k in range(ks, kt):
            w = stepper.step(w, dt, 0.5 * (rho.values[k] + rho.values[k + 1]))
        return w

    def apply_transpose(u):
        w = u
        for k in range(kt - 1, ks - 1, -1):
            w = stepper.step_transpose(w, dt, 0.5 * (rho.values[k] + rho.values[k + 1]))
        return w

    est = 0.0
    converged = False
    it = 0
    for it in range(1, iters + 1):
        w = apply_forward(v)
        new_est = np.sqrt(np.dot(w, w) / np.dot(v, v))
        v = apply_transpose(w)
        v /= np.sqrt(np.dot(v, v))
        if it > 1 and abs(new_est - est) <= tolerance * max(new_est, 1e-300):
            est = new_est
            converged = True
            break
        est = new_est
    return OperatorNormResult(float(est), it, converged)


def adjoint_solve(rho: SpaceTimeDeviation, terminal: Potential, cfg: SolverConfig | None = None) -> Field:
    """Backward sweep A(s) = P(rho; s->T)* terminal for every time node.

    Mirrors the forward delta march step by step (warm-up sub-steps
    included), so <A(s), Z(s)> is constant in s to round-off.
    """
    cfg = cfg or SolverConfig()
    tg, sg = rho.tgrid, rho.sgrid
    if terminal.grid != sg:
        raise ValueError("terminal grid does not match deviation grid")
    stepper = _Stepper(sg)
    nt = tg.n_steps
    dt = tg.dt
    out = np.empty((nt + 1, sg.n_points))
    v = terminal.values.copy()
    v[0] = 0.0
    v[-1] = 0.0
    out[nt] = v
    for k in range(nt - 1, 0, -1):
        rho_mid = 0.5 * (rho.values[k] + rho.values[k + 1])
        v = stepper.step_transpose(v, dt, rho_mid)
        out[k] = v
    rho_mid = 0.5 * (rho.values[0] + rho.values[1])
    for h in reversed(_warmup_substeps(cfg.delta_warmup, dt)):
        v = stepper.step_transpose(v, h, rho_mid)
    out[0] = v
    if not np.all(np.isfinite(out)):
        raise SolverInstabilityError("non-finite values in adjoint sweep")
    return Field(tg, sg, out, strictly_positive=False)


def log_terminal_and_gradient(rho: SpaceTimeDeviation, cfg: SolverConfig | None = None):
    """(log Z(T, 0), exact partials of log Z(T, 0) wrt every rho node value).

    Differentiates the stepped scheme itself.  One step is M^{-1} N with M, N
    rational in the same symmetric operator, so they commute and

        d Z_T(x0) / d rho_mid_k(i) = (dt/2) (Z_k + Z_{k+1})(i) (M_k^{-1} a_{k+1})(i),

    with a the backward-propagated sensitivity; node partials follow from
    rho_mid_k = (rho_k + rho_{k+1})/2 plus the warm-up initial-data factor.
    Returned partials drive the rate optimizer's line search, which needs
    gradient/objective consistency to round-off.
    """
    cfg = cfg or SolverConfig()
    tg, sg = rho.tgrid, rho.sgrid
    sol, warm_vals, warm_steps = _march_delta(rho, cfg, keep_warmup=True)
    nt, dt = tg.n_steps, tg.dt
    i0 = sg.center_index
    rows, ls = sol.rows, sol.log_scale
    log_zt = float(np.log(rows[nt, i0]) + ls[nt])
    stepper = _Stepper(sg)

    # adjoint in scaled units: true adjoint times exp(ls_K); the exp(ls_k - ls_K)
    # factors are folded into the forward rows below
    u = np.zeros(sg.n_points)
    u[i0] = 1.0 / rows[nt, i0]
    g_interval = np.empty((nt, sg.n_points))
    for k in range(nt - 1, 0, -1):
        rho_mid = 0.5 * (rho.values[k] + rho.values[k + 1])
        half = stepper.solve_m(u, dt, rho_mid)
        zsum = rows[k] * np.exp(ls[k] - ls[nt]) + rows[k + 1] * np.exp(ls[k + 1] - ls[nt])
        g_interval[k] = 0.5 * dt * zsum * half
        u = stepper.apply_n(half, dt, rho_mid)

    # first interval: replay the warm-up sub-steps (rows 0..1 are unscaled)
    rho_mid = 0.5 * (rho.values[0] + rho.values[1])
    scale0 = np.exp(-ls[nt])
    g0 = np.zeros(sg.n_points)
    for q in range(len(warm_steps) - 1, -1, -1):
        h = warm_steps[q]
        half = stepper.solve_m(u, h, rho_mid)
        g0 += 0.5 * h * (warm_vals[q] + warm_vals[q + 1]) * scale0 * half
        u = stepper.apply_n(half, h, rho_mid)
    g_interval[0] = g0

    partials = np.empty((nt + 1, sg.n_points))
    partials[0] = 0.5 * g_interval[0]
    partials[nt] = 0.5 * g_interval[nt - 1]
    for j in range(1, nt):
        partials[j] = 0.5 * (g_interval[j - 1] + g_interval[j])
    # warm-up tilt Z_0 = p(t0, .) exp((t0/2)(rho_0 + rho_0(center)))
    t0 = cfg.delta_warmup
    w0 = warm_vals[0] * u * scale0
    partials[0] += 0.5 * t0 * w0
    partials[0, i0] += 0.5 * t0 * float(w0.sum())
    return log_zt, partials


# --- kernel series -----------------------------------------------------------

def _chaos_orders(rho: SpaceTimeDeviation, order: int, cfg: SolverConfig):
    """Space-time rows of each series term 0..order.

    Term n is accumulated by propagating the running time integral of the
    source rho * (term n-1) with single CN heat steps; the time integral is
    the trapezoid rule.  The n = 1 source at time 0 is rho(0,0) times the
    initial delta, whose heat flow is added analytically.
    """
    tg, sg = rho.tgrid, rho.sgrid
    nt = tg.n_steps
    dt = tg.dt
    x = sg.x
    stepper = _Stepper(sg)
    zero_pot = np.zeros(sg.n_points)

    z0 = np.zeros((nt + 1, sg.n_points))
    for k in range(1, nt + 1):
        z0[k] = heat_kernel(tg.times[k], x)
    terms = [z0]
    for n in range(1, order + 1):
        prev = terms[-1]
        src = rho.values * prev
        if n == 1:
            src = src.copy()
            src[0] = 0.0  # delta-time source handled analytically below
        acc = np.zeros(sg.n_points)
        zn = np.zeros((nt + 1, sg.n_points))
        for k in range(nt):
            # running trapezoid: heat-propagate the lower half weight of the
            # source at t_k, then add the upper half weight at t_{k+1}
            acc = stepper.step(acc + 0.5 * dt * src[k], dt, zero_pot) + 0.5 * dt * src[k + 1]
            zn[k + 1] = acc
        if n == 1:
            w = rho.values[0, sg.center_index]
            for k in range(1, nt + 1):
                zn[k] = zn[k] + 0.5 * dt * w * heat_kernel(tg.times[k], x)
        terms.append(zn)
    return terms


def chaos_series_point(rho: SpaceTimeDeviation, t: float, x: float, order: int,
                       cfg: SolverConfig | None = None) -> float:
    """Partial sum of the kernel series for Z(rho; t, x), truncated at `order`."""
    cfg = cfg or SolverConfig()
    tg, sg = rho.tgrid, rho.sgrid
    if order == 0:
        return heat_kernel(t, x)
    k = tg.index_of(t)
    i = sg.index_of(x)
    terms = _chaos_orders(rho, order, cfg)
    total = heat_kernel(t, x)  # analytic zeroth term
    for zn in terms[1:]:
        total += zn[k, i]
    return float(total)


def _chaos_field(rho: SpaceTimeDeviation, cfg: SolverConfig) -> Field:
    tg, sg = rho.tgrid, rho.sgrid
    terms = _chaos_orders(rho, cfg.chaos_order, cfg)
    vals = np.zeros_like(terms[0])
    for zn in terms:
        vals += zn
    for k in range(1, tg.n_steps + 1):
        vals[k] = _check_slice(vals[k], f"chaos sum row {k}")
    vals[0] = np.maximum(heat_kernel(cfg.delta_warmup, sg.x), POSITIVITY_FLOOR)
    return Field(tg, sg, vals, strictly_positive=True)
