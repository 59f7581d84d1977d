"""Partitioned dynamical systems and their exact oracles.

A system of dimension ``N`` is split into resolved components ``0..m-1``
and unresolved components ``m..N-1``. The only projector is truncation,
which zeroes the unresolved part. Every RHS accepts stacked states: the
last axis is the state, leading axes are independent copies.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft
import scipy.linalg

from .integrators import padded_length, to_physical, to_spectral

__all__ = [
    "UnsupportedModelError",
    "PartitionedSystem",
    "LinearSystem",
    "Brusselator",
    "Burgers",
    "KuramotoSivashinsky",
    "make_system",
    "rhs",
    "truncate",
    "exact_subgrid",
    "exact_linear_kernel",
    "initial_condition",
    "burgers_spectrum",
]


class UnsupportedModelError(ValueError):
    pass


def _check_dim(state, n):
    if np.shape(state)[-1] != n:
        raise ValueError(f"state length {np.shape(state)[-1]} does not match N={n}")


def truncate(state, m):
    """Keep the first ``m`` components and zero the rest."""
    state = np.asarray(state)
    if m > state.shape[-1]:
        raise ValueError(f"m={m} exceeds state length {state.shape[-1]}")
    out = np.zeros_like(state)
    out[..., :m] = state[..., :m]
    return out


@dataclass(frozen=True, eq=False)
class PartitionedSystem:
    """Base class; subclasses define ``rhs`` and optionally a diagonal linear part.

    ``linear`` (the stiff diagonal) is ``None`` unless the RHS splits as
    ``linear * x + nonlinear(x)``.
    """

    name: str = field(init=False, default="")
    N: int = field(init=False, default=0)
    m: int = field(init=False, default=0)
    dtype = np.float64

    def _validate(self):
        if not 1 <= self.m < self.N:
            raise ValueError(f"need 1 <= m < N, got m={self.m}, N={self.N}")

    @property
    def params(self):
        raise NotImplementedError

    @property
    def linear(self):
        return None

    @property
    def spectral(self):
        return False

    def rhs(self, x):
        raise NotImplementedError

    def nonlinear(self, x):
        lam = self.linear
        return self.rhs(x) if lam is None else self.rhs(x) - lam * x

    def truncate(self, x):
        return truncate(x, self.m)

    def pseudo_rhs(self, x):
        """``R(x) - R(truncate(x))``; subclasses override with a fused form."""
        return self.rhs(x) - self.rhs(self.truncate(x))

    def pseudo_nonlinear(self, x):
        """Pseudo RHS minus the masked diagonal ``linear * (x - truncate(x))``."""
        lam = self.pseudo_linear
        out = self.pseudo_rhs(x)
        return out if lam is None else out - lam * x

    @cached_property
    def pseudo_linear(self):
        """Diagonal linear part of the pseudo RHS: ``linear`` on unresolved components only."""
        lam = self.linear
        if lam is None:
            return None
        masked = np.array(lam, copy=True)
        masked[: self.m] = 0
        masked.setflags(write=False)
        return masked

    def default_initial_condition(self, seed=0):
        x = np.zeros(self.N, dtype=self.dtype)
        x[: self.m] = 1.0
        return x


@dataclass(frozen=True, eq=False)
class LinearSystem(PartitionedSystem):
    """``x' = A x`` with ``A`` given by its four blocks."""

    a11: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    a22: np.ndarray

    def __post_init__(self):
        blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in (self.a11, self.a12, self.a21, self.a22)]
        a11, a12, a21, a22 = blocks
        m = a11.shape[0]
        n = m + a22.shape[0]
        if a11.shape != (m, m) or a12.shape != (m, n - m) or a21.shape != (n - m, m) or a22.shape != (n - m, n - m):
            raise ValueError("inconsistent block shapes")
        for name, b in zip(("a11", "a12", "a21", "a22"), blocks):
            object.__setattr__(self, name, b)
        object.__setattr__(self, "name", "linear")
        object.__setattr__(self, "N", n)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "_A", np.block([[a11, a12], [a21, a22]]))
        self._validate()

    @property
    def A(self):
        return self._A

    @property
    def params(self):
        if self.N == 2:
            return {"A11": float(self.a11[0, 0]), "A12": float(self.a12[0, 0]),
                    "A21": float(self.a21[0, 0]), "A22": float(self.a22[0, 0])}
        return {"A11": self.a11.tolist(), "A12": self.a12.tolist(),
                "A21": self.a21.tolist(), "A22": self.a22.tolist()}

    def rhs(self, x):
        _check_dim(x, self.N)
        return x @ self._A.T

    def pseudo_rhs(self, x):
        _check_dim(x, self.N)
        return x[..., self.m :] @ self._A[:, self.m :].T


@dataclass(frozen=True, eq=False)
class Brusselator(PartitionedSystem):
    A: float = 1.0
    B: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, "name", "brusselator")
        object.__setattr__(self, "N", 2)
        object.__setattr__(self, "m", 1)

    @property
    def params(self):
        return {"A": self.A, "B": self.B}

    def rhs(self, x):
        _check_dim(x, 2)
        x1 = x[..., 0]
        x2 = x[..., 1]
        cubic = x1 * x1 * x2
        return np.stack([self.A - (self.B + 1.0) * x1 + cubic, self.B * x1 - cubic], axis=-1)

    def pseudo_rhs(self, x):
        _check_dim(x, 2)
        cubic = x[..., 0] ** 2 * x[..., 1]
        return np.stack([cubic, -cubic], axis=-1)

    def default_initial_condition(self, seed=0):
        return np.array([1.0, 0.0])


def burgers_spectrum(k):
    """Initial energy spectrum: flat ``5**(-5/3)`` up to k=5, then ``k**(-5/3)``."""
    k = np.asarray(k, dtype=float)
    return np.where(k <= 5, 5.0 ** (-5.0 / 3.0), k ** (-5.0 / 3.0))


@dataclass(frozen=True, eq=False)
class _Spectral(PartitionedSystem):
    n_modes: int = 0
    n_resolved: int = 0
    nu: float = 1e-3

    dtype = np.complex128

    def __post_init__(self):
        object.__setattr__(self, "N", int(self.n_modes))
        object.__setattr__(self, "m", int(self.n_resolved))
        k = np.arange(1, self.N + 1, dtype=float)
        k.setflags(write=False)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "_half_ik", -0.5j * k)
        self._validate()

    @property
    def spectral(self):
        return True

    @property
    def params(self):
        return {"nu": self.nu}

    def nonlinear(self, u):
        _check_dim(u, self.N)
        phys = to_physical(u)
        return self._half_ik * to_spectral(phys * phys, self.N)

    def rhs(self, u):
        return self.linear * u + self.nonlinear(u)

    def pseudo_nonlinear(self, u):
        # u^2 - uhat^2 = utilde * (2 uhat + utilde), no cancellation for small utilde
        _check_dim(u, self.N)
        m, n = self.m, self.N
        grid = padded_length(n)
        spec = np.zeros((2,) + u.shape[:-1] + (grid // 2 + 1,), dtype=complex)
        spec[0, ..., 1 : m + 1] = u[..., :m]
        spec[1, ..., m + 1 : n + 1] = u[..., m:]
        res, unres = scipy.fft.irfft(spec, n=grid, axis=-1, norm="forward", overwrite_x=True)
        res *= 2.0
        res += unres
        res *= unres
        return self._half_ik * to_spectral(res, n)

    def pseudo_rhs(self, u):
        return self.pseudo_linear * u + self.pseudo_nonlinear(u)

    def default_initial_condition(self, seed=0):
        """Random-phase sine series over the resolved band, zero beyond ``m``."""
        rng = np.random.default_rng(seed)
        beta = rng.uniform(0.0, 2.0 * np.pi, size=self.m)
        k = np.arange(1, self.m + 1)
        # sqrt(2E) sin(kx + b) = coefficient -i/2 sqrt(2E) e^{ib} on e^{ikx}
        u = np.zeros(self.N, dtype=complex)
        u[: self.m] = -0.5j * np.sqrt(2.0 * burgers_spectrum(k)) * np.exp(1j * beta)
        return u


@dataclass(frozen=True, eq=False)
class Burgers(_Spectral):
    """Viscous Burgers ``u_t + u u_x = nu u_xx`` on [0, 2 pi] in Fourier space."""

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "name", "burgers")
        lam = -self.nu * self.k**2
        lam.setflags(write=False)
        object.__setattr__(self, "_lin", lam)

    @property
    def linear(self):
        return self._lin


@dataclass(frozen=True, eq=False)
class KuramotoSivashinsky(_Spectral):
    """``u_t + u u_x + u_xx + nu u_xxxx = 0``; linear symbol ``k^2 - nu k^4``."""

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "name", "ks")
        lam = self.k**2 - self.nu * self.k**4
        lam.setflags(write=False)
        object.__setattr__(self, "_lin", lam)

    @property
    def linear(self):
        return self._lin


def make_system(model, N=None, m=None, params=None):
    """Build a system from a model name and parameter record."""
    params = dict(params or {})
    if model == "linear":
        p = {"A11": -0.8, "A12": 1.0, "A21": 1.0, "A22": -1.0, **params}
        return LinearSystem(p["A11"], p["A12"], p["A21"], p["A22"])
    if model == "brusselator":
        return Brusselator(A=float(params.get("A", 1.0)), B=float(params.get("B", 3.0)))
    if model == "burgers":
        return Burgers(n_modes=N, n_resolved=m, nu=float(params.get("nu", 1e-3)))
    if model == "ks":
        return KuramotoSivashinsky(n_modes=N, n_resolved=m, nu=float(params.get("nu", 1e-3)))
    raise UnsupportedModelError(f"unknown model {model!r}")


def rhs(system, state):
    _check_dim(state, system.N)
    return system.rhs(np.asarray(state))


def exact_subgrid(system, full_state):
    """Subgrid term ``R_j(phi) - R_j(truncate(phi))`` for the resolved ``j``."""
    full_state = np.asarray(full_state)
    _check_dim(full_state, system.N)
    return (system.rhs(full_state) - system.rhs(system.truncate(full_state)))[..., : system.m]


def exact_linear_kernel(system, xhat, lag):
    """Closed-form kernel ``A12 exp(A22 lag) A21 xhat`` of the linear model."""
    if not isinstance(system, LinearSystem):
        raise UnsupportedModelError(f"exact kernel is only known for the linear model, not {system.name}")
    xhat = np.asarray(xhat, dtype=float).reshape(system.m)
    return system.a12 @ scipy.linalg.expm(system.a22 * lag) @ system.a21 @ xhat


def initial_condition(system, seed=0):
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return system.default_initial_condition(seed)
