"""Pseudo orthogonal ODE ``x' = R(x) - R(truncate(x))``.

The recorded RHS of this ODE is the noise series ``F(x0, s)``. Runs are
marched in stacks: many initial conditions with individual horizons share
one loop, and each step hands the current RHS values to a callback, so
callers decide what to keep.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .integrators import DivergenceError, StepCounter, StepperConfig, etdrk4_step, rk4_step

__all__ = ["PseudoOrthogonalRun", "pseudo_rhs", "march_pseudo", "solve_pseudo"]


def pseudo_rhs(system, state):
    """``R(state) - R(truncate(state))`` using the system's fused form."""
    state = np.asarray(state, dtype=system.dtype)
    if state.shape[-1] != system.N:
        raise ValueError(f"state length {state.shape[-1]} does not match N={system.N}")
    return system.pseudo_rhs(state)


@dataclass
class PseudoOrthogonalRun:
    x0: np.ndarray
    horizon: float
    dt: float
    F_series: np.ndarray
    counter: StepCounter = field(default_factory=StepCounter)

    @property
    def lags(self):
        return self.dt * np.arange(len(self.F_series))


def march_pseudo(system, x0s, n_steps, cfg: StepperConfig, on_step):
    """March a stack of pseudo-ODE runs.

    Parameters
    ----------
    x0s : (B, N) array
        Initial conditions, ordered so that ``n_steps`` is non-increasing.
    n_steps : (B,) int array
        Steps per run; run ``b`` records ``n_steps[b] + 1`` RHS values.
    on_step : callable
        ``on_step(s, n_active, F)`` receives the RHS of the first
        ``n_active`` runs at lag index ``s``.

    Returns
    -------
    counter : StepCounter
    failures : dict
        Run index -> step at which the state stopped being finite. A failed
        run is reset to zero, a fixed point, so it contributes nothing after.
    """
    n_steps = np.asarray(n_steps, dtype=np.int64)
    if np.any(np.diff(n_steps) > 0):
        raise ValueError("n_steps must be non-increasing")
    if np.any(n_steps < 0):
        raise ValueError("horizons must be non-negative")
    x = np.array(x0s, dtype=system.dtype)
    counter = StepCounter()
    failures = {}
    if x.shape[0] == 0:
        return counter, failures
    etd = cfg.scheme == "etdrk4"
    lam = None
    if etd:
        lam = system.pseudo_linear
        if lam is None:
            raise ValueError(f"{system.name} has no diagonal linear part for etdrk4")
    # active rows form a prefix because n_steps is sorted
    desc = -n_steps
    for s in range(int(n_steps[0]) + 1):
        n_active = int(np.searchsorted(desc, -s, side="right"))
        xa = x[:n_active]
        if etd:
            n0 = system.pseudo_nonlinear(xa)
            F = lam * xa + n0
        else:
            F = system.pseudo_rhs(xa)
        on_step(s, n_active, F)
        n_move = int(np.searchsorted(desc, -(s + 1), side="right"))
        counter.aux_evals += n_active - n_move
        if n_move == 0:
            continue
        xm = x[:n_move]
        if etd:
            new = etdrk4_step(lam, system.pseudo_nonlinear, xm, cfg.dt, counter,
                              cfg.etd_contour_points, n0=n0[:n_move])
        else:
            new = rk4_step(system.pseudo_rhs, xm, cfg.dt, counter, k1=F[:n_move])
        counter.rhs_evals += n_move
        counter.steps += n_move
        bad = ~np.all(np.isfinite(new), axis=-1)
        if np.any(bad):
            for b in np.flatnonzero(bad):
                failures.setdefault(int(b), s + 1)
            new[bad] = 0
        x[:n_move] = new
    return counter, failures


def solve_pseudo(system, x0, horizon, cfg: StepperConfig):
    """Integrate the pseudo ODE from ``x0`` over ``[0, horizon]``.

    Records the full RHS vector at every step. Raises
    :class:`DivergenceError` if the state stops being finite.
    """
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    n = int(round(horizon / cfg.dt))
    if abs(n * cfg.dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError(f"horizon={horizon} is not an integer multiple of dt={cfg.dt}")
    x0 = np.asarray(x0, dtype=system.dtype)
    series = np.empty((n + 1, system.N), dtype=system.dtype)

    def keep(s, n_active, F):
        series[s] = F[0]

    counter, failures = march_pseudo(system, x0[None, :], [n], cfg, keep)
    if failures:
        step = failures[0]
        raise DivergenceError(
            f"pseudo ODE diverged at step {step} (lag {step * cfg.dt:.6g})", step=step, time=step * cfg.dt
        )
    return PseudoOrthogonalRun(x0, horizon, cfg.dt, series, counter)
