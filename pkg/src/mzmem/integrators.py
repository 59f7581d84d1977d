"""Time steppers and spectral primitives.

All steppers act on arrays whose last axis is the state dimension, so a
stack of independent states (one per leading index) advances in a single
call. Spectral states are half-spectra: entry ``k - 1`` holds the
coefficient of ``exp(i k x)`` for ``k = 1..N``; mode 0 is zero and
negative wavenumbers follow from conjugate symmetry.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

__all__ = [
    "DivergenceError",
    "StepperConfig",
    "StepCounter",
    "Trajectory",
    "rk4_step",
    "etdrk4_step",
    "etdrk4_coefficients",
    "padded_length",
    "to_physical",
    "to_spectral",
    "dealiased_convolution",
    "integrate",
]

SCHEMES = ("rk4", "etdrk4")


class DivergenceError(RuntimeError):
    """Raised when a time march produces non-finite values."""

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    scheme: str = "rk4"
    etd_contour_points: int = 32

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.scheme == "etdrk4" and self.etd_contour_points < 16:
            raise ValueError("etd_contour_points must be >= 16 for etdrk4")


@dataclass
class StepCounter:
    """Work tally for one integration (or a merged set of them).

    ``steps`` counts accepted steps of a single state; a batched march of
    ``B`` states over ``H`` steps adds ``B * H``. ``rhs_evals`` counts the
    stage evaluations made by the stepper and ``aux_evals`` the extra
    evaluations spent recording the RHS at the final instant.
    """

    steps: int = 0
    rhs_evals: int = 0
    aux_evals: int = 0

    def merge(self, other: "StepCounter") -> "StepCounter":
        return StepCounter(
            self.steps + other.steps,
            self.rhs_evals + other.rhs_evals,
            self.aux_evals + other.aux_evals,
        )


def _check_finite(state, step, dt):
    if not np.all(np.isfinite(state)):
        raise DivergenceError(
            f"non-finite state after step {step} (t={step * dt:.6g})", step=step, time=step * dt
        )


def rk4_step(rhs, state, dt, counter=None, k1=None):
    """Classical four-stage Runge-Kutta step.

    ``k1`` may be passed when ``rhs(state)`` is already known.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if k1 is None:
        k1 = rhs(state)
        n_evals = 4
    else:
        n_evals = 3
    k2 = rhs(state + 0.5 * dt * k1)
    k3 = rhs(state + 0.5 * dt * k2)
    k4 = rhs(state + dt * k3)
    if counter is not None:
        counter.rhs_evals += n_evals * (state.size // state.shape[-1])
    return state + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


@lru_cache(maxsize=64)
def _etd_cached(lam_bytes, dtype_str, dt, n_points):
    lam = np.frombuffer(lam_bytes, dtype=np.dtype(dtype_str))
    z = dt * lam.astype(complex)
    roots = np.exp(2j * np.pi * (np.arange(n_points) + 0.5) / n_points)
    r = z[:, None] + roots[None, :]
    er = np.exp(r)
    r3 = r**3
    q = dt * np.mean((np.exp(r / 2) - 1.0) / r, axis=1)
    f1 = dt * np.mean((-4.0 - r + er * (4.0 - 3.0 * r + r * r)) / r3, axis=1)
    f2 = dt * np.mean((2.0 + r + er * (r - 2.0)) / r3, axis=1)
    f3 = dt * np.mean((-4.0 - 3.0 * r - r * r + er * (4.0 - r)) / r3, axis=1)
    e = np.exp(z)
    e2 = np.exp(z / 2)
    coeffs = [e, e2, q, f1, f2, f3]
    if not np.iscomplexobj(lam):
        coeffs = [c.real.copy() for c in coeffs]
    for c in coeffs:
        c.setflags(write=False)
    return tuple(coeffs)


def etdrk4_coefficients(linear_diag, dt, n_points=32):
    """Return ``(E, E2, Q, f1, f2, f3)`` for the ETDRK4 update.

    The phi-function combinations are averaged over ``n_points`` points on
    the unit circle centred at each ``lambda * dt``, which avoids the
    cancellation of the direct formulas near zero. Real ``linear_diag``
    yields real coefficients.
    """
    lam = np.ascontiguousarray(linear_diag)
    return _etd_cached(lam.tobytes(), lam.dtype.str, float(dt), int(n_points))


def etdrk4_step(linear_diag, nonlinear, state, dt, counter=None, n_points=32, n0=None):
    """Fourth-order exponential time differencing step (Cox-Matthews stages).

    Solves ``u' = L u + N(u)`` with diagonal ``L = linear_diag``. ``n0``
    may carry ``nonlinear(state)`` when already known.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if np.shape(linear_diag)[-1] != state.shape[-1]:
        raise ValueError("linear_diag length does not match the state")
    e, e2, q, f1, f2, f3 = etdrk4_coefficients(linear_diag, dt, n_points)
    n_evals = 3
    if n0 is None:
        n0 = nonlinear(state)
        n_evals = 4
    a = e2 * state + q * n0
    na = nonlinear(a)
    b = e2 * state + q * na
    nb = nonlinear(b)
    c = e2 * a + q * (2.0 * nb - n0)
    nc = nonlinear(c)
    if counter is not None:
        counter.rhs_evals += n_evals * (state.size // state.shape[-1])
    return e * state + f1 * n0 + 2.0 * f2 * (na + nb) + f3 * nc


@lru_cache(maxsize=None)
def padded_length(n_modes):
    """Grid size for alias-free quadratic products of ``n_modes`` modes.

    Products of modes ``|k| <= N`` reach ``|k| = 2N``; a grid of ``M``
    points folds ``2N`` onto ``2N - M``, which misses ``[-N, N]`` only if
    ``M >= 3N + 1`` (the 3/2 rule). Rounded up to a fast FFT length.
    """
    return scipy.fft.next_fast_len(3 * n_modes + 1, real=True)


def to_physical(u, grid=None):
    """Real grid values of a half-spectrum on ``grid`` points."""
    n_modes = u.shape[-1]
    grid = padded_length(n_modes) if grid is None else grid
    c = np.zeros(u.shape[:-1] + (grid // 2 + 1,), dtype=complex)
    c[..., 1 : n_modes + 1] = u
    return scipy.fft.irfft(c, n=grid, axis=-1, norm="forward")


def to_spectral(f, n_modes):
    """Half-spectrum (modes 1..n_modes) of real grid values."""
    return scipy.fft.rfft(f, axis=-1, norm="forward")[..., 1 : n_modes + 1]


def dealiased_convolution(u, v):
    """Signed-wavenumber convolution ``sum_{p+q=k} u_p v_q`` for ``k = 1..N``.

    ``u`` and ``v`` are half-spectra of real fields; negative wavenumbers
    enter through conjugate symmetry.
    """
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape[-1] != v.shape[-1]:
        raise ValueError(f"length mismatch: {u.shape[-1]} vs {v.shape[-1]}")
    n_modes = u.shape[-1]
    return to_spectral(to_physical(u) * to_physical(v), n_modes)


@dataclass
class Trajectory:
    """Uniform-step snapshots ``states[n]`` at ``times[n] = n * dt``."""

    times: np.ndarray
    states: np.ndarray
    dt: float
    rhs: np.ndarray | None = None
    counter: StepCounter | None = None

    @property
    def n_steps(self):
        return len(self.times) - 1


def n_steps_for(t_f, dt):
    """Integer step count for ``t_f = N_t * dt``; raises if not integral."""
    n = int(round(t_f / dt))
    if n < 0 or abs(n * dt - t_f) > 1e-9 * max(1.0, abs(t_f)):
        raise ValueError(f"t_f={t_f} is not an integer multiple of dt={dt}")
    return n


def integrate(system, x0, t_f, cfg, record_rhs=False):
    """March ``system`` from ``x0`` over ``[0, t_f]`` with uniform steps.

    ``system`` must provide ``rhs``, and for ETDRK4 also ``linear`` and
    ``nonlinear`` (see :mod:`mzmem.models`).
    """
    n_steps = n_steps_for(t_f, cfg.dt)
    x = np.array(x0, dtype=system.dtype)
    states = np.empty((n_steps + 1,) + x.shape, dtype=system.dtype)
    rhs_rec = np.empty_like(states) if record_rhs else None
    counter = StepCounter()
    states[0] = x
    if cfg.scheme == "etdrk4":
        lam = system.linear
        if lam is None:
            raise ValueError(f"{system.name} has no diagonal linear part for etdrk4")
        for step in range(n_steps):
            n0 = system.nonlinear(x)
            if record_rhs:
                rhs_rec[step] = lam * x + n0
            x = etdrk4_step(lam, system.nonlinear, x, cfg.dt, counter, cfg.etd_contour_points, n0=n0)
            counter.rhs_evals += 1
            counter.steps += 1
            _check_finite(x, step + 1, cfg.dt)
            states[step + 1] = x
    else:
        for step in range(n_steps):
            k1 = system.rhs(x)
            if record_rhs:
                rhs_rec[step] = k1
            x = rk4_step(system.rhs, x, cfg.dt, counter, k1=k1)
            counter.rhs_evals += 1
            counter.steps += 1
            _check_finite(x, step + 1, cfg.dt)
            states[step + 1] = x
    if record_rhs:
        rhs_rec[n_steps] = system.rhs(x)
        counter.aux_evals += 1
    times = cfg.dt * np.arange(n_steps + 1)
    return Trajectory(times, states, cfg.dt, rhs_rec, counter)
