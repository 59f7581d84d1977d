"""Memory reconstruction and diagnostics.

The memory at ``t_n`` is rebuilt with the right-endpoint rectangle rule
``M_n = dt * sum_{k=1..n} K(xhat(t_k), (n - k) dt)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PartialTableError",
    "MemorySeries",
    "DecayProfile",
    "ScalingStudy",
    "reconstruct_memory",
    "metric_mean",
    "metric_energy",
    "relative_l2",
    "compare",
    "memory_length",
    "decay_profiles",
    "scaling_study",
]

THRESHOLD = 0.01


class PartialTableError(RuntimeError):
    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__(f"kernel table is missing rows {self.missing}")


@dataclass
class MemorySeries:
    """Reconstructed memory ``M`` and exact subgrid ``w_exact``, both ``(N_t, m)`` at ``t_1..t_{N_t}``."""

    M: np.ndarray
    w_exact: np.ndarray
    dt: float

    def __post_init__(self):
        if self.M.shape != self.w_exact.shape:
            raise ValueError(f"shape mismatch: {self.M.shape} vs {self.w_exact.shape}")

    @property
    def times(self):
        return self.dt * np.arange(1, len(self.M) + 1)


def reconstruct_memory(table, allow_partial=False):
    """Rectangle-rule memory ``(N_t, m)`` from a kernel table."""
    if table.partial and not allow_partial:
        raise PartialTableError(table.failures)
    return table.dt * table.memory_sum


def metric_mean(series):
    """Mean over resolved components of the real part, per time instant."""
    return np.real(np.asarray(series)).mean(axis=-1)


def metric_energy(w, u_hat):
    """Subgrid contribution to the resolved energy decay, ``-sum Re(conj(u) w)``."""
    w = np.asarray(w)
    u_hat = np.asarray(u_hat)
    if w.shape != u_hat.shape:
        raise ValueError(f"shape mismatch: {w.shape} vs {u_hat.shape}")
    return -np.real(np.conj(u_hat) * w).sum(axis=-1)


def relative_l2(approx, exact, axis=None):
    """``|approx - exact| / |exact|``; 0 when both vanish, inf when only ``exact`` does."""
    num = np.sqrt(np.sum(np.abs(np.asarray(approx) - np.asarray(exact)) ** 2, axis=axis))
    den = np.sqrt(np.sum(np.abs(np.asarray(exact)) ** 2, axis=axis))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))
    return out if np.ndim(out) else float(out)


def _real_embed(x):
    x = np.asarray(x)
    return np.concatenate([x.real, x.imag], axis=0) if np.iscomplexobj(x) else x


def _pearson(a, b):
    a = _real_embed(a) - _real_embed(a).mean()
    b = _real_embed(b) - _real_embed(b).mean()
    den = np.sqrt(np.sum(a * a) * np.sum(b * b))
    if den == 0:
        return 1.0 if np.array_equal(a, b) else 0.0
    return float(np.sum(a * b) / den)


def _nrms(approx, exact):
    # RMS error normalised by the peak magnitude of the exact series
    peak = np.max(np.abs(exact))
    rms = np.sqrt(np.mean(np.abs(approx - exact) ** 2))
    if peak == 0:
        return 0.0 if rms == 0 else np.inf
    return float(rms / peak)


def compare(series: MemorySeries, u_hat=None):
    """Error report between reconstructed memory and exact subgrid terms.

    ``u_hat`` (resolved states at ``t_1..t_{N_t}``) adds the energy-transfer
    curves. Per-component entries are lists indexed by resolved component.
    """
    M, w = series.M, series.w_exact
    m = M.shape[1]
    report = {
        "rel_l2": [float(relative_l2(M[:, j], w[:, j])) for j in range(m)],
        "nrms": [_nrms(M[:, j], w[:, j]) for j in range(m)],
        "corr": [_pearson(M[:, j], w[:, j]) for j in range(m)],
        "rel_l2_total": float(relative_l2(M, w)),
        "nrms_total": _nrms(M, w),
        "corr_total": _pearson(M.ravel(), w.ravel()),
        "mean_M": metric_mean(M),
        "mean_w": metric_mean(w),
    }
    if u_hat is not None:
        report["xi_M"] = metric_energy(M, u_hat)
        report["xi_w"] = metric_energy(w, u_hat)
    return report


@dataclass
class DecayProfile:
    """Averaged, peak-scaled ``|K_j|`` versus lag, with 1% memory lengths."""

    dt: float
    profiles: np.ndarray
    tau: np.ndarray
    zero: np.ndarray
    non_decaying: np.ndarray
    scaling: str = "peak"
    threshold: float = THRESHOLD

    @property
    def lags(self):
        return self.dt * np.arange(self.profiles.shape[0])


def memory_length(profile, dt, threshold=THRESHOLD):
    """Largest lag at which ``profile`` is still at or above ``threshold``.

    Returns ``(tau, zero, non_decaying)``; the last-crossing rule keeps
    oscillating kernels from being cut at their first dip.
    """
    profile = np.asarray(profile)
    above = np.flatnonzero(profile >= threshold)
    if not np.any(profile > 0) or above.size == 0:
        return 0.0, True, False
    last = int(above[-1])
    return last * dt, False, last == len(profile) - 1


def decay_profiles(table, scaling="peak", threshold=THRESHOLD):
    """Per-component decay profiles from a kernel table.

    ``scaling="peak"`` averages ``|K_j|`` over every row holding a lag and
    scales the average to peak 1. ``scaling="row"`` first scales each row
    by its own peak (needs stored rows).
    """
    if scaling == "peak":
        avg = table.abs_sum / np.maximum(table.abs_count, 1)[:, None]
    elif scaling == "row":
        if table.rows is None:
            raise ValueError("row scaling needs a table with stored rows")
        avg = np.zeros_like(table.abs_sum)
        for row in table.rows:
            a = np.abs(row)
            peak = a.max(axis=0)
            avg[: len(row)] += a / np.where(peak > 0, peak, 1.0)
        avg /= np.maximum(table.abs_count, 1)[:, None]
    else:
        raise ValueError(f"unknown scaling {scaling!r}")
    peak = avg.max(axis=0)
    profiles = avg / np.where(peak > 0, peak, 1.0)
    m = profiles.shape[1]
    tau = np.zeros(m)
    zero = np.zeros(m, dtype=bool)
    flat = np.zeros(m, dtype=bool)
    for j in range(m):
        tau[j], zero[j], flat[j] = memory_length(profiles[:, j], table.dt, threshold)
    return DecayProfile(table.dt, profiles, tau, zero, flat, scaling, threshold)


@dataclass
class ScalingStudy:
    """Log-log least-squares fit ``log tau = slope * log m + intercept``."""

    m_values: list
    tau_values: list
    slope: float
    intercept: float
    residual: float
    profiles: dict = field(default_factory=dict)

    @property
    def degenerate(self):
        return not np.isfinite(self.slope)


def scaling_study(m_values, tau_values, profiles=None):
    """Fit the memory length of the cut-off component against ROM size.

    ``residual`` is the RMS of the log-space residuals. With a single point
    the slope is undefined and reported as NaN.
    """
    m_values = [int(v) for v in m_values]
    tau_values = [float(v) for v in tau_values]
    if len(m_values) != len(tau_values):
        raise ValueError("m_values and tau_values differ in length")
    if any(b <= a for a, b in zip(m_values, m_values[1:])):
        raise ValueError("m_values must be strictly increasing")
    if len(m_values) < 2 or any(t <= 0 for t in tau_values):
        return ScalingStudy(m_values, tau_values, float("nan"), float("nan"), float("nan"), profiles or {})
    x = np.log(m_values)
    y = np.log(tau_values)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return ScalingStudy(m_values, tau_values, float(slope), float(intercept),
                        float(np.sqrt(np.mean(resid**2))), profiles or {})
